//! Inner/outer meta-learning updates over the short-term and fusion
//! partitions, with the long-term partition held behind a gradient block.
//!
//! The meta-gradient algebra lives in flat-vector form so the scalar toy
//! cases exercise exactly the code the model trainer runs.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::events::{Instance, SECS_PER_HOUR};
use crate::graph::InteractionGraph;
use crate::model::{Forward, GradSet, LongSource, LongTermCache, ModelParams, Parts};
use crate::train::{AdagradState, MetaMode};

/// Instances per differentiation graph; bounds peak tape memory while the
/// accumulated gradient stays exactly the full-batch mean.
const CHUNK: usize = 8192;

/// Everything needed to compute the task loss on a batch.
pub struct LossCtx<'a> {
    pub short_graph: &'a InteractionGraph,
    pub cache: &'a LongTermCache,
    pub variant: crate::config::Variant,
    pub k: usize,
    pub long_seed: u64,
    /// Loss multiplier (the task-loss weight).
    pub loss_scale: f64,
}

/// Mean task loss and its gradient over `parts`, computed in chunks.
pub fn batch_loss_grad(
    params: &ModelParams,
    instances: &[Instance],
    cutoff: i64,
    ctx: &LossCtx<'_>,
    parts: Parts,
) -> Result<(f64, GradSet)> {
    assert!(!instances.is_empty(), "loss over an empty batch");
    let total = instances.len() as f64;
    let mut loss = 0.0;
    let mut grads = GradSet::new();
    for chunk in instances.chunks(CHUNK) {
        let snap = ctx.short_graph.snapshot(cutoff);
        let mut fw = Forward::new(params, Some(snap), None, ctx.k, ctx.variant, ctx.long_seed);
        let mut scored = Vec::with_capacity(chunk.len());
        for inst in chunk {
            let p = fw.score_instance(inst, &LongSource::Cached(ctx.cache))?;
            scored.push((p, inst.clicked));
        }
        let l = crate::model::ce_loss(&mut fw.tape, &scored)?;
        fw.tape.backward(l)?;
        let w = chunk.len() as f64 / total;
        loss += ctx.loss_scale * w * fw.tape.value(l).item();
        grads.accumulate(&fw.grads(parts), ctx.loss_scale * w, params, parts);
    }
    Ok((loss, grads))
}

/// Forward-only scores for a batch (evaluation path).
pub fn batch_scores(
    params: &ModelParams,
    instances: &[Instance],
    cutoff: i64,
    ctx: &LossCtx<'_>,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(instances.len());
    for chunk in instances.chunks(CHUNK) {
        let snap = ctx.short_graph.snapshot(cutoff);
        let mut fw = Forward::scoring(params, Some(snap), None, ctx.k, ctx.variant, ctx.long_seed);
        for inst in chunk {
            let p = fw.score_instance(inst, &LongSource::Cached(ctx.cache))?;
            out.push(fw.tape.value(p).item());
        }
    }
    Ok(out)
}

/// One plain gradient-descent adaptation step on a support set:
/// `theta' = theta - alpha * grad L(support)`.
pub fn inner_update(
    params: &ModelParams,
    support: &[Instance],
    cutoff: i64,
    ctx: &LossCtx<'_>,
    alpha: f64,
) -> Result<(ModelParams, f64)> {
    let (loss, grads) = batch_loss_grad(params, support, cutoff, ctx, Parts::META)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite { what: format!("support loss ({loss})"), coord: None });
    }
    let mut adapted = params.clone();
    adapted.sgd_step(Parts::META, &grads, alpha);
    Ok((adapted, loss))
}

/// Central-difference Hessian-vector product of a gradient function.
///
/// Probes along the normalized direction with a power-of-two step so the
/// product is exact (up to last-bit rounding) for quadratics.
pub fn hessian_vec_product(
    grad_fn: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    theta: &[f64],
    v: &[f64],
) -> Result<Vec<f64>> {
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if vmax == 0.0 {
        return Ok(vec![0.0; v.len()]);
    }
    let tmax = theta.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let eps = (1.0 + tmax) * 2f64.powi(-20);
    let mut plus = theta.to_vec();
    let mut minus = theta.to_vec();
    for i in 0..theta.len() {
        let u = v[i] / vmax;
        plus[i] += eps * u;
        minus[i] -= eps * u;
    }
    let gp = grad_fn(&plus)?;
    let gm = grad_fn(&minus)?;
    let mut hv = Vec::with_capacity(v.len());
    for i in 0..v.len() {
        let h = (gp[i] - gm[i]) / (2.0 * eps) * vmax;
        if !h.is_finite() {
            return Err(Error::NonFinite { what: "Hessian-vector product".into(), coord: Some(i) });
        }
        hv.push(h);
    }
    Ok(hv)
}

/// Meta-gradient of one task given the query gradient at the adapted
/// parameters. First-order passes it through; exact mode applies the inner
/// Jacobian `I - alpha * H(support at theta)`.
pub fn meta_gradient(
    theta: &[f64],
    query_grad_at_adapted: &[f64],
    support_grad_fn: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    alpha: f64,
    mode: MetaMode,
) -> Result<Vec<f64>> {
    match mode {
        MetaMode::FirstOrder => Ok(query_grad_at_adapted.to_vec()),
        MetaMode::Exact => {
            let hv = hessian_vec_product(support_grad_fn, theta, query_grad_at_adapted)?;
            Ok(query_grad_at_adapted
                .iter()
                .zip(hv.iter())
                .map(|(g, h)| g - alpha * h)
                .collect())
        }
    }
}

/// One task inside a meta batch: materialized support/query sets and the
/// graph cutoffs that keep each side blind to its own hour.
pub struct TaskBatchItem {
    pub support: Vec<Instance>,
    pub query: Vec<Instance>,
    pub support_cutoff: i64,
    pub query_cutoff: i64,
}

impl TaskBatchItem {
    /// Cutoff just before an hour starts.
    pub fn cutoff_before(global_hour: i64) -> i64 {
        global_hour * SECS_PER_HOUR - 1
    }
}

/// Outer-step optimizer: Adagrad in training, plain SGD for the algebraic
/// equivalence checks.
pub enum OuterOpt<'a> {
    Sgd,
    Adagrad(&'a mut AdagradState),
}

#[derive(Clone, Copy, Debug, Default)]
pub struct MetaStats {
    pub support_loss: f64,
    pub query_loss: f64,
}

/// One meta-iteration over a batch of tasks: per-task inner adaptation,
/// query gradients at the adapted parameters (transformed in exact mode),
/// deterministic mean reduction in task order, one outer step on the
/// short-term and fusion partitions. The long-term partition never receives
/// a gradient.
pub fn meta_step(
    params: &mut ModelParams,
    tasks: &[TaskBatchItem],
    ctx: &LossCtx<'_>,
    mode: MetaMode,
    inner_lr: f64,
    outer_lr: f64,
    opt: &mut OuterOpt<'_>,
) -> Result<MetaStats> {
    assert!(!tasks.is_empty(), "meta step over an empty task batch");
    let mut mean = GradSet::new();
    let mut stats = MetaStats::default();
    let weight = 1.0 / tasks.len() as f64;
    for task in tasks {
        let (adapted, s_loss) = inner_update(params, &task.support, task.support_cutoff, ctx, inner_lr)?;
        let (q_loss, q_grads) =
            batch_loss_grad(&adapted, &task.query, task.query_cutoff, ctx, Parts::META)?;
        if !q_loss.is_finite() {
            return Err(Error::NonFinite { what: format!("query loss ({q_loss})"), coord: None });
        }
        stats.support_loss += weight * s_loss;
        stats.query_loss += weight * q_loss;

        let task_grad = match mode {
            MetaMode::FirstOrder => q_grads,
            MetaMode::Exact => {
                let theta = params.flatten(Parts::META);
                let q_flat = q_grads.flatten(params, Parts::META);
                let mut grad_fn = |t: &[f64]| -> Result<Vec<f64>> {
                    let mut probe = params.clone();
                    probe.assign_from_flat(Parts::META, t);
                    let (_, g) =
                        batch_loss_grad(&probe, &task.support, task.support_cutoff, ctx, Parts::META)?;
                    Ok(g.flatten(params, Parts::META))
                };
                let mg = meta_gradient(&theta, &q_flat, &mut grad_fn, inner_lr, mode)?;
                GradSet::from_flat(params, Parts::META, &mg)
            }
        };
        mean.accumulate(&task_grad, weight, params, Parts::META);
    }
    match opt {
        OuterOpt::Sgd => params.sgd_step(Parts::META, &mean, outer_lr),
        OuterOpt::Adagrad(state) => state.step(params, Parts::META, &mean, outer_lr),
    }
    Ok(stats)
}

/// Plain mini-batch baseline: one Adagrad step on a mixed-hour batch,
/// chunked by hour so every instance is scored against the graph as of its
/// own hour.
pub fn plain_step(
    params: &mut ModelParams,
    batch: &[Instance],
    ctx: &LossCtx<'_>,
    acc: &mut AdagradState,
    lr: f64,
) -> Result<f64> {
    assert!(!batch.is_empty(), "plain step over an empty batch");
    let mut by_hour: BTreeMap<i64, Vec<Instance>> = BTreeMap::new();
    for inst in batch {
        by_hour.entry(inst.global_hour()).or_default().push(*inst);
    }
    let total = batch.len() as f64;
    let mut loss = 0.0;
    let mut grads = GradSet::new();
    for (hour, insts) in &by_hour {
        let cutoff = TaskBatchItem::cutoff_before(*hour);
        let (l, g) = batch_loss_grad(params, insts, cutoff, ctx, Parts::META)?;
        let w = insts.len() as f64 / total;
        loss += w * l;
        grads.accumulate(&g, w, params, Parts::META);
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite { what: format!("batch loss ({loss})"), coord: None });
    }
    acc.step(params, Parts::META, &grads, lr);
    Ok(loss)
}
