//! `haggle moderator-eval`: accuracy of a classifier backend over a labeled
//! corpus. Misclassified items are printed as `[[demo]]` TOML, ready to be
//! appended to the demo bank.

use std::sync::Arc;

use haggle_core::moderator::bank::{default_bank, default_corpus, demos_to_toml};
use haggle_core::moderator::{evaluate, EvalReport, NearestDemoBackend, OracleBackend, DEFAULT_MODERATOR_INSTRUCTIONS};
use haggle_core::{ChatBackend, DemoBank, LabeledCorpus};

use super::{load_config, write_file};
use crate::config::Overrides;
use crate::{CliError, EvalBackend, ModeratorEvalArgs, SharedArgs};

pub struct EvalOutcome {
    pub report: EvalReport,
    pub hardened: Option<DemoBank>,
}

pub fn execute(shared: &SharedArgs, args: &ModeratorEvalArgs) -> Result<EvalOutcome, CliError> {
    let cfg = load_config(shared, Overrides::default())?;
    let bank = match &args.bank {
        Some(p) => DemoBank::load(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        None if shared.config.is_some() => cfg.demo_bank()?,
        None => default_bank(),
    };
    let corpus = match &args.corpus {
        Some(p) => LabeledCorpus::load(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        None => default_corpus(),
    };
    if corpus.items.is_empty() {
        return Err(CliError::Config("the corpus has no items".into()));
    }
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(CliError::Config(format!("threshold {} is outside [0, 1]", args.threshold)));
    }
    let instructions = if shared.config.is_some() {
        cfg.prompts.moderator.clone()
    } else {
        DEFAULT_MODERATOR_INSTRUCTIONS.to_string()
    };
    let backend: Arc<dyn ChatBackend> = match args.backend {
        EvalBackend::Oracle => Arc::new(OracleBackend),
        EvalBackend::Stub => Arc::new(NearestDemoBackend),
        EvalBackend::Remote => {
            let remote = cfg
                .remote_settings(shared.offline)?
                .ok_or_else(|| CliError::Config("the remote backend needs network access, which --offline forbids".into()))?;
            Arc::new(remote.backend(&args.engine, 0).map_err(|e| CliError::Config(e.to_string()))?)
        }
    };
    let report = evaluate(&corpus, &bank, backend.as_ref(), &instructions).map_err(|e| CliError::Io(e.to_string()))?;

    println!(
        "accuracy: {:.3} ({}/{}) with {} demos (bank version {})",
        report.accuracy(),
        report.correct,
        report.total,
        bank.len(),
        bank.version
    );
    if !report.misclassified.is_empty() {
        println!("# misclassified items, appendable to the demo bank:");
        print!("{}", demos_to_toml(&report.misclassified));
    }
    let hardened = match &args.harden_out {
        Some(path) => {
            let h = bank.harden(&report.misclassified).map_err(|e| CliError::Config(e.to_string()))?;
            write_file(path, &h.to_toml())?;
            println!("hardened bank ({} demos, version {}) written to {}", h.len(), h.version, path.display());
            Some(h)
        }
        None => None,
    };
    if report.accuracy() < args.threshold {
        return Err(CliError::BelowThreshold {
            accuracy: report.accuracy(),
            threshold: args.threshold,
        });
    }
    Ok(EvalOutcome { report, hardened })
}
