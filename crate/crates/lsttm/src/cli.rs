//! Command-line surface: generate data, train, evaluate, run ablations, and
//! merge reports. The `lsttm` binary is a thin wrapper over [`run`].

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{RunConfig, Variant};
use crate::error::{Error, Result};
use crate::events::{EventLog, Source};
use crate::eval::{
    comparison_table, read_report, rows_of, rows_to_text, run_ablation, temporal_eval, write_report,
    ReportRow,
};
use crate::train::{daily_full_train, load_checkpoint, save_checkpoint, MetaMode, TrainerState};

#[derive(Parser, Debug)]
#[command(name = "lsttm", version, about = "dual-graph temporal meta-learning recommender")]
struct Cli {
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Meta-gradient mode override: first-order | exact.
    #[arg(long, global = true)]
    meta_mode: Option<String>,
    /// Negative samples per walk pair override.
    #[arg(long, global = true)]
    negatives_per_pair: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate a synthetic event log from a key=value config file.
    GenerateData { config: PathBuf, out: PathBuf },
    /// Train on all but the final day of an event log; write a checkpoint.
    Train { events: PathBuf, config: PathBuf, ckpt_out: PathBuf },
    /// Evaluate a checkpoint hour by hour on the final day of an event log.
    EvalTemporal { ckpt: PathBuf, test_log: PathBuf, report_out: PathBuf },
    /// Train and evaluate one variant across seeds; write per-seed rows.
    Ablate { variant: String, events: PathBuf, config: PathBuf, report_out: PathBuf },
    /// Merge report files into a comparison table plus machine rows.
    Report { reports: Vec<PathBuf> },
}

fn apply_overrides(cfg: &mut RunConfig, cli: &Cli) -> Result<()> {
    if let Some(seed) = cli.seed {
        cfg.sim.seed = seed;
        cfg.trainer.seed = seed;
    }
    if let Some(mode) = &cli.meta_mode {
        cfg.trainer.meta_mode = match mode.as_str() {
            "first-order" => MetaMode::FirstOrder,
            "exact" => MetaMode::Exact,
            other => return Err(Error::InvalidConfig(format!("unknown meta mode `{other}`"))),
        };
    }
    if let Some(n) = cli.negatives_per_pair {
        cfg.trainer.negatives_per_pair = n;
    }
    Ok(())
}

fn load_config(path: &Path, cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_file(path)?;
    apply_overrides(&mut cfg, cli)?;
    Ok(cfg)
}

/// Run the CLI against parsed arguments, writing human output to `out`.
pub fn run<I, S>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)
        .map_err(|e| Error::InvalidConfig(e.render().to_string()))?;

    match &cli.cmd {
        Cmd::GenerateData { config, out: out_path } => {
            let cfg = load_config(config, &cli)?;
            let log = crate::datasim::generate(&cfg.sim)?;
            log.store(out_path)?;
            writeln!(out, "wrote {} rows to {}", log.rows.len(), out_path.display())?;
        }
        Cmd::Train { events, config, ckpt_out } => {
            let cfg = load_config(config, &cli)?;
            let log = EventLog::load(events)?;
            let (train, _test) = log.split(log.max_day())?;
            let state = daily_full_train(&train, &cfg)?;
            save_checkpoint(&state, ckpt_out)?;
            writeln!(
                out,
                "trained through day {} ({} tasks loss trace points); checkpoint at {}",
                state.clock.last_full_train_day,
                state.task_losses.len(),
                ckpt_out.display()
            )?;
        }
        Cmd::EvalTemporal { ckpt, test_log, report_out } => {
            let loaded = load_checkpoint(ckpt)?;
            let log = EventLog::load(test_log)?;
            let test_day = loaded.clock.last_full_train_day + 1;
            let test_rows: Vec<_> = log
                .rows
                .iter()
                .filter(|r| r.day() == test_day && r.source == Source::Internal)
                .cloned()
                .collect();
            if test_rows.is_empty() {
                return Err(Error::InvalidSplit(format!(
                    "no internal rows for test day {test_day}; pass the full event log"
                )));
            }
            let test = EventLog { header: log.header.clone(), rows: test_rows };
            let state = TrainerState::restore(loaded, &log)?;
            let report = temporal_eval(&state, &test)?;
            write_report(report_out, &rows_of(&report))?;
            writeln!(out, "{}", comparison_table(&rows_of(&report)))?;
            writeln!(out, "report rows at {}", report_out.display())?;
        }
        Cmd::Ablate { variant, events, config, report_out } => {
            let variant = Variant::parse(variant)?;
            let cfg = load_config(config, &cli)?;
            let log = EventLog::load(events)?;
            let result = run_ablation(variant, &log, &cfg)?;
            let mut rows: Vec<ReportRow> = Vec::new();
            for rep in &result.per_seed {
                rows.extend(rows_of(rep));
            }
            write_report(report_out, &rows)?;
            writeln!(out, "{}", comparison_table(&rows))?;
            writeln!(out, "report rows at {}", report_out.display())?;
        }
        Cmd::Report { reports } => {
            if reports.is_empty() {
                return Err(Error::InvalidConfig("report needs at least one input file".into()));
            }
            let mut rows: Vec<ReportRow> = Vec::new();
            for path in reports {
                rows.extend(read_report(path)?);
            }
            writeln!(out, "{}", comparison_table(&rows))?;
            write!(out, "{}", rows_to_text(&rows))?;
        }
    }
    Ok(())
}
