pub mod analyze;
pub mod moderator_eval;
pub mod replay;
pub mod run;

use std::path::{Path, PathBuf};

use haggle_core::metrics::RoundSummary;
use haggle_core::{Price, SessionReport};

use crate::config::{FileConfig, Overrides};
use crate::{CliError, SharedArgs};

/// The config file named by `--config` (or the defaults) with the shared
/// overrides applied.
pub fn load_config(shared: &SharedArgs, overrides: Overrides) -> Result<FileConfig, CliError> {
    let mut cfg = match &shared.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: shared.seed,
        parallelism: shared.parallelism,
        ..overrides
    });
    Ok(cfg)
}

pub fn create_out_dir(shared: &SharedArgs) -> Result<PathBuf, CliError> {
    let dir = shared.out_dir();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// `+0.77`, `-1.20`, or empty.
pub fn signed(delta: Option<Price>) -> String {
    match delta {
        Some(d) if d >= Price::ZERO => format!("+{d}"),
        Some(d) => d.to_string(),
        None => String::new(),
    }
}

fn opt_price(p: Option<Price>) -> String {
    p.map(|p| p.to_string()).unwrap_or_default()
}

fn row(report: &SessionReport, i: usize, r: &RoundSummary) -> [String; 6] {
    [
        (r.round_index + 1).to_string(),
        r.games.to_string(),
        r.deals.to_string(),
        format!("{:.3}", r.success_rate),
        opt_price(r.mean_deal_price),
        signed(report.delta_vs_first(i)),
    ]
}

pub const SUMMARY_HEADER: [&str; 6] = ["round", "games", "deals", "success_rate", "mean_deal_price", "delta_vs_round1"];

pub fn summary_csv(report: &SessionReport) -> String {
    let mut out = SUMMARY_HEADER.join(",");
    out.push('\n');
    for (i, r) in report.rounds.iter().enumerate() {
        out.push_str(&row(report, i, r).join(","));
        out.push('\n');
    }
    out
}

pub fn summary_table(report: &SessionReport) -> String {
    let mut out = format!(
        "{:>5}  {:>6}  {:>6}  {:>8}  {:>10}  {:>8}\n",
        "round", "games", "deals", "success", "mean price", "delta"
    );
    for (i, r) in report.rounds.iter().enumerate() {
        let c = row(report, i, r);
        out.push_str(&format!(
            "{:>5}  {:>6}  {:>6}  {:>8}  {:>10}  {:>8}\n",
            c[0], c[1], c[2], c[3], c[4], c[5]
        ));
    }
    out.push_str(&format!(
        "runs: {}, aborted: {}\n",
        report.run_count, report.aborted_run_count
    ));
    out
}
