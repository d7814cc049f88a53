//! Offline evaluation: ranking AUC, the hour-by-hour temporal CTR protocol
//! with one-step adaptation, stream-level online metrics, the ablation
//! runner, and report files.

mod ablation;
mod report;

pub use ablation::{run_ablation, AblationReport};
pub use report::{
    comparison_table, read_report, rows_from_text, rows_of, rows_to_text, write_report, ReportRow,
};

use crate::error::{Error, Result};
use crate::events::{EventLog, EventRecord, Instance, Label, Source, HOURS_PER_DAY, SECS_PER_HOUR};
use crate::model::Parts;
use crate::rng::mix3;
use crate::train::{batch_loss_grad, batch_scores, subsample, TrainerState};

/// Probability that a uniformly random positive outranks a random negative,
/// ties counted half. Computed by the rank-sum formulation with average
/// ranks, which matches the pairwise definition exactly.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    assert_eq!(scores.len(), labels.len());
    let p = labels.iter().filter(|&&l| l).count();
    let n = labels.len() - p;
    if p == 0 || n == 0 {
        return Err(Error::SingleClassAuc);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // 1-based average rank of the tie group [i..=j]
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            if labels[k] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let p_f = p as f64;
    Ok((rank_sum_pos - p_f * (p_f + 1.0) / 2.0) / (p_f * n as f64))
}

/// Per-hour AUCs for one evaluated day, grouped into three 8-hour periods.
#[derive(Clone, Debug, PartialEq)]
pub struct HourlyReport {
    pub model: String,
    pub seeds: Vec<u64>,
    pub config_hash: u64,
    /// One entry per hour of day; `None` marks hours skipped for having a
    /// single label class (or no instances).
    pub hours: Vec<Option<f64>>,
    /// Arithmetic means of the present hours in [0,8), [8,16), [16,24).
    pub periods: [Option<f64>; 3],
}

impl HourlyReport {
    pub fn new(model: String, seeds: Vec<u64>, config_hash: u64, hours: Vec<Option<f64>>) -> Self {
        assert_eq!(hours.len(), 24);
        let mut periods = [None; 3];
        for (p, slot) in periods.iter_mut().enumerate() {
            let vals: Vec<f64> = hours[p * 8..(p + 1) * 8].iter().flatten().copied().collect();
            if !vals.is_empty() {
                *slot = Some(vals.iter().sum::<f64>() / vals.len() as f64);
            }
        }
        HourlyReport { model, seeds, config_hash, hours, periods }
    }

    /// Mean AUC over a half-open hour range, ignoring skipped hours.
    pub fn mean_over_hours(&self, range: std::ops::Range<usize>) -> Option<f64> {
        let vals: Vec<f64> = self.hours[range].iter().flatten().copied().collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }
}

/// The temporal CTR protocol: each hour of the test day is a task, adapted
/// for with one gradient step on all former test hours, scored, and rolled
/// into the dynamic graph afterwards. The passed state is never mutated.
pub fn temporal_eval(state: &TrainerState, test: &EventLog) -> Result<HourlyReport> {
    let test_day = state.clock.last_full_train_day + 1;
    for r in &test.rows {
        if r.source != Source::Internal {
            return Err(Error::InvalidSplit("test log must contain internal rows only".into()));
        }
        if r.day() != test_day {
            return Err(Error::InvalidSplit(format!(
                "test row at day {} but checkpoint expects day {test_day}",
                r.day()
            )));
        }
    }

    let mut by_hour: Vec<Vec<Instance>> = vec![Vec::new(); 24];
    for inst in test.internal_instances() {
        by_hour[inst.hour as usize].push(inst);
    }

    let t = &state.cfg.trainer;
    let mut eval_graph = state.short_graph.clone();
    let mut past: Vec<Instance> = Vec::new();
    let mut hours: Vec<Option<f64>> = Vec::with_capacity(24);

    for hour in 0..24usize {
        let cutoff = (test_day * HOURS_PER_DAY + hour as i64) * SECS_PER_HOUR - 1;
        let ctx = crate::train::LossCtx {
            short_graph: &eval_graph,
            cache: &state.cache,
            variant: state.cfg.variant,
            k: t.k_neighbors,
            long_seed: t.long_sample_seed(),
            loss_scale: t.lambda_task,
        };

        let insts = &by_hour[hour];
        if insts.is_empty() {
            log::warn!("hour {hour}: no instances, AUC omitted");
            hours.push(None);
        } else {
            let mut adapted = state.params.clone();
            if !past.is_empty() {
                let support = if t.eval_support_cap > 0 && past.len() > t.eval_support_cap {
                    subsample(&past, 0..past.len(), t.eval_support_cap, mix3(t.seed, 0xe7a1, hour as u64))
                } else {
                    past.clone()
                };
                let (loss, grads) = batch_loss_grad(&adapted, &support, cutoff, &ctx, Parts::META)?;
                if !loss.is_finite() {
                    return Err(Error::NonFinite {
                        what: format!("evaluation support loss ({loss})"),
                        coord: None,
                    });
                }
                adapted.sgd_step(Parts::META, &grads, t.inner_lr);
            }
            let scores = batch_scores(&adapted, insts, cutoff, &ctx)?;
            let labels: Vec<bool> = insts.iter().map(|i| i.clicked).collect();
            match auc(&scores, &labels) {
                Ok(v) => hours.push(Some(v)),
                Err(Error::SingleClassAuc) => {
                    log::warn!("hour {hour}: single-class labels, AUC omitted");
                    hours.push(None);
                }
                Err(e) => return Err(e),
            }
        }

        // The hour is now history: feed its clicks to the dynamic graph and
        // its instances to future support sets.
        for inst in insts {
            if inst.clicked {
                eval_graph.append_event(&EventRecord {
                    user: inst.user,
                    item: inst.item,
                    ts: inst.ts,
                    source: Source::Internal,
                    label: Label::Clicked,
                    context: crate::events::ContextFeatures { hour: inst.hour, position: inst.position },
                    dwell_secs: 0,
                });
            }
        }
        past.extend(insts.iter().copied());
    }

    Ok(HourlyReport::new(
        state.cfg.variant.name().to_string(),
        vec![t.seed],
        state.cfg.hash(),
        hours,
    ))
}

/// Stream-level counters over the internal rows of a log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OnlineMetrics {
    /// Clicks per impression.
    pub ctr: f64,
    /// Clicks per user.
    pub acn: f64,
    /// Fraction of users with at least one click.
    pub hcr: f64,
    /// Dwell seconds per user.
    pub dt: f64,
}

pub fn online_metrics(log: &EventLog) -> Result<OnlineMetrics> {
    let mut impressions = 0u64;
    let mut clicks = 0u64;
    let mut duration = 0u64;
    let mut users = std::collections::HashSet::new();
    let mut users_with_click = std::collections::HashSet::new();
    for r in &log.rows {
        if r.source != Source::Internal {
            continue;
        }
        impressions += 1;
        users.insert(r.user);
        if r.label == Label::Clicked {
            clicks += 1;
            duration += r.dwell_secs as u64;
            users_with_click.insert(r.user);
        }
    }
    if impressions == 0 || users.is_empty() {
        return Err(Error::InvalidConfig("online metrics need impressions and users".into()));
    }
    let n_users = users.len() as f64;
    Ok(OnlineMetrics {
        ctr: clicks as f64 / impressions as f64,
        acn: clicks as f64 / n_users,
        hcr: users_with_click.len() as f64 / n_users,
        dt: duration as f64 / n_users,
    })
}
