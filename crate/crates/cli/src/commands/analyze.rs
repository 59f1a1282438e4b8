//! `haggle analyze`: tables for plotting from a transcript log.
//!
//! Writes three files to the output directory:
//!
//! * `summary.csv`: `round,games,deals,success_rate,mean_deal_price,delta_vs_round1`
//! * `histogram.csv`: `round,bin,lower,upper,count`, ten corridor bins per
//!   round followed by `underflow`, `overflow` and `unpriced` rows
//! * `response_length.csv`: `round,role,mean_chars`
//!
//! Rounds are numbered from 1. Prices have two decimals. Mean prices count
//! deals only unless `--no-deal-price` assigns failed games a price.

use std::path::PathBuf;

use haggle_core::metrics::{aggregate_with, NoDealPricing, BIN_COUNT};
use haggle_core::{response_length_curve, Histogram, PriceCorridor, Role, RunOutcome, SessionReport};

use super::{create_out_dir, summary_csv, summary_table, write_file};
use crate::transcript::read_log_file;
use crate::{AnalyzeArgs, CliError, SharedArgs};

pub struct Analysis {
    pub report: SessionReport,
    pub lengths: Vec<Option<f64>>,
    pub role: Role,
    pub corridor: PriceCorridor,
    pub files: Vec<PathBuf>,
}

pub fn histogram_csv(report: &SessionReport, corridor: &PriceCorridor) -> String {
    let mut out = String::from("round,bin,lower,upper,count\n");
    for r in &report.rounds {
        let n = r.round_index + 1;
        for (i, count) in r.histogram.bins.iter().enumerate() {
            let lower = Histogram::lower_edge(corridor, i);
            let upper = if i + 1 == BIN_COUNT {
                corridor.ceiling
            } else {
                Histogram::lower_edge(corridor, i + 1)
            };
            out.push_str(&format!("{n},{i},{lower},{upper},{count}\n"));
        }
        let h = &r.histogram;
        out.push_str(&format!("{n},underflow,,{},{}\n", corridor.floor, h.underflow));
        out.push_str(&format!("{n},overflow,{},,{}\n", corridor.ceiling, h.overflow));
        out.push_str(&format!("{n},unpriced,,,{}\n", h.unpriced));
    }
    out
}

pub fn response_length_csv(lengths: &[Option<f64>], role: Role) -> String {
    let mut out = String::from("round,role,mean_chars\n");
    for (i, l) in lengths.iter().enumerate() {
        let v = l.map(|v| format!("{v:.2}")).unwrap_or_default();
        out.push_str(&format!("{},{},{v}\n", i + 1, role.label().to_ascii_lowercase()));
    }
    out
}

pub fn execute(shared: &SharedArgs, args: &AnalyzeArgs) -> Result<Analysis, CliError> {
    let sessions = read_log_file(&args.log)?;
    let first = sessions
        .first()
        .ok_or_else(|| CliError::Analysis(format!("{} has no session header", args.log.display())))?;
    let corridor = first.header.config.game.corridor.clone();
    if let Some(other) = sessions.iter().find(|s| s.header.config.game.corridor != corridor) {
        return Err(CliError::Analysis(format!(
            "log mixes price corridors: session {} uses {}..{}, session {} uses {}..{}",
            first.header.session_id,
            corridor.floor,
            corridor.ceiling,
            other.header.session_id,
            other.header.config.game.corridor.floor,
            other.header.config.game.corridor.ceiling
        )));
    }
    let role = args.role.unwrap_or(first.header.config.improved_role);
    if !role.is_player() {
        return Err(CliError::Analysis(format!("{role} does not speak in games")));
    }
    let runs: Vec<RunOutcome> = sessions.into_iter().flat_map(|s| s.runs).collect();
    let pricing = args.no_deal_price.map_or(NoDealPricing::Exclude, NoDealPricing::Impute);
    let report = aggregate_with(&runs, &corridor, role, pricing).map_err(|e| CliError::Analysis(e.to_string()))?;
    let lengths = response_length_curve(&runs, role);

    let dir = create_out_dir(shared)?;
    let files = vec![dir.join("summary.csv"), dir.join("histogram.csv"), dir.join("response_length.csv")];
    write_file(&files[0], &summary_csv(&report))?;
    write_file(&files[1], &histogram_csv(&report, &corridor))?;
    write_file(&files[2], &response_length_csv(&lengths, role))?;
    print!("{}", summary_table(&report));
    Ok(Analysis {
        report,
        lengths,
        role,
        corridor,
        files,
    })
}
