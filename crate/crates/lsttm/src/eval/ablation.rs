//! Ablation runner: train and evaluate one model variant across seeded
//! repetitions and combine the per-seed reports into a median report.

use crate::config::{RunConfig, Variant};
use crate::error::Result;
use crate::events::EventLog;
use crate::eval::{temporal_eval, HourlyReport};
use crate::train::daily_full_train;

#[derive(Clone, Debug)]
pub struct AblationReport {
    pub variant: Variant,
    pub per_seed: Vec<HourlyReport>,
    pub median: HourlyReport,
}

/// Split the log at its final day, then run train -> temporal-eval once per
/// seed (`base.trainer.seed + r` for r in 0..runs).
pub fn run_ablation(variant: Variant, log: &EventLog, base: &RunConfig) -> Result<AblationReport> {
    let cfg_v = base.with_variant(variant);
    let (train, test) = log.split(log.max_day())?;

    let mut per_seed = Vec::with_capacity(cfg_v.runs as usize);
    for r in 0..cfg_v.runs as u64 {
        let cfg_s = cfg_v.with_seed(base.trainer.seed + r);
        let state = daily_full_train(&train, &cfg_s)?;
        per_seed.push(temporal_eval(&state, &test)?);
    }

    let seeds: Vec<u64> = per_seed.iter().map(|r| r.seeds[0]).collect();
    let mut hours: Vec<Option<f64>> = Vec::with_capacity(24);
    for h in 0..24 {
        let mut vals: Vec<f64> = per_seed.iter().filter_map(|r| r.hours[h]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).expect("finite auc"));
        hours.push(if vals.is_empty() { None } else { Some(vals[vals.len() / 2]) });
    }
    let median = HourlyReport::new(variant.name().to_string(), seeds, cfg_v.hash(), hours);
    Ok(AblationReport { variant, per_seed, median })
}
