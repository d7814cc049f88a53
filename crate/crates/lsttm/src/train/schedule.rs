//! The simulated serving schedule: one daily complete training over all
//! behaviors so far, then one-step gradient updates per arriving hour with
//! the long-term partition frozen for the day.

use crate::config::{RunConfig, Variant};
use crate::error::{Error, Result};
use crate::events::{EventLog, EventRecord, Instance, Source, HOURS_PER_DAY, SECS_PER_HOUR};
use crate::graph::{GraphKind, InteractionGraph};
use crate::model::{LongTermCache, ModelDims, ModelParams, Parts};
use crate::rng::{mix3, rng_from};
use crate::train::maml::{plain_step, LossCtx, OuterOpt, TaskBatchItem};
use crate::train::{
    batch_loss_grad, build_tasks, meta_step, sample_task_batch, subsample, AdagradState,
};

/// Logical training clock: last completed daily train and last applied
/// hourly update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Clock {
    pub last_full_train_day: i64,
    pub last_online_hour: i64,
}

/// Serving-time state: parameters, optimizer accumulators, the day-fixed
/// long-term cache, and the dynamic graphs.
pub struct TrainerState {
    pub cfg: RunConfig,
    pub params: ModelParams,
    /// Parameters as of the end of daily training; the base the evaluation
    /// protocol adapts from and the reset point for prefix re-adaptation.
    pub daily_params: ModelParams,
    pub acc_meta: AdagradState,
    pub acc_long: AdagradState,
    pub cache: LongTermCache,
    pub short_graph: InteractionGraph,
    pub long_graph: InteractionGraph,
    pub clock: Clock,
    /// Internal instances seen since the daily train (prefix re-adaptation).
    pub day_buffer: Vec<Instance>,
    /// Diagnostics, not serialized.
    pub long_losses: Vec<f64>,
    pub task_losses: Vec<f64>,
}

impl TrainerState {
    pub fn loss_ctx(&self) -> LossCtx<'_> {
        LossCtx {
            short_graph: &self.short_graph,
            cache: &self.cache,
            variant: self.cfg.variant,
            k: self.cfg.trainer.k_neighbors,
            long_seed: self.cfg.trainer.long_sample_seed(),
            loss_scale: self.cfg.trainer.lambda_task,
        }
    }
}

fn long_graph_rows(rows: &[EventRecord], variant: Variant) -> Vec<EventRecord> {
    rows.iter()
        .filter(|r| variant != Variant::NoExternal || r.source == Source::Internal)
        .cloned()
        .collect()
}

/// One complete training over an event log: asynchronous long-term phase,
/// long-term cache build, then the meta phase (or the plain mini-batch
/// baseline for the no-meta variant). Deterministic for fixed seeds.
pub fn daily_full_train(events: &EventLog, cfg: &RunConfig) -> Result<TrainerState> {
    cfg.validate()?;
    let variant = cfg.variant;
    let t = &cfg.trainer;

    let instances = events.internal_instances();
    if instances.is_empty() {
        return Err(Error::InvalidConfig("training log has no internal instances".into()));
    }
    let hours: std::collections::BTreeSet<i64> =
        instances.iter().map(|i| i.global_hour()).collect();
    if hours.len() < 2 {
        return Err(Error::InvalidConfig("training events span fewer than 2 hours".into()));
    }

    let dims = ModelDims::from_header(&events.header);
    let mut params = ModelParams::init(dims, t.seed);
    let short_graph = InteractionGraph::from_events(GraphKind::ShortTerm, &events.rows);
    let long_graph =
        InteractionGraph::from_events(GraphKind::LongTerm, &long_graph_rows(&events.rows, variant));

    let mut acc_meta = AdagradState::new();
    let mut acc_long = AdagradState::new();
    let long_losses =
        crate::train::train_long_term(&long_graph, &mut params, &mut acc_long, t, variant)?;
    let cache = LongTermCache::build(
        &params,
        long_graph.snapshot(i64::MAX),
        t.k_neighbors,
        variant,
        t.long_sample_seed(),
    )?;

    let pool = build_tasks(instances, &events.header, t.user_groups);
    if pool.tasks.is_empty() {
        return Err(Error::InvalidConfig("no adjacent-hour task can be formed".into()));
    }
    let ctx = LossCtx {
        short_graph: &short_graph,
        cache: &cache,
        variant,
        k: t.k_neighbors,
        long_seed: t.long_sample_seed(),
        loss_scale: t.lambda_task,
    };

    let n_tasks = t.tasks_per_batch.min(pool.tasks.len());
    let batches_per_epoch = pool.tasks.len().div_ceil(n_tasks);
    let mut task_losses = Vec::new();

    for epoch in 0..t.meta_epochs {
        for b in 0..batches_per_epoch {
            let step_id = (epoch * batches_per_epoch + b) as u64;
            let seed_b = mix3(t.seed, 0xba7c, step_id);
            if variant == Variant::NoMeta {
                // Same budget: per meta-iteration the baseline takes
                // `n_tasks` Adagrad steps on (support+query)-sized batches,
                // matching the instances a meta batch consumes.
                for s in 0..n_tasks {
                    let batch = sample_plain_batch(
                        &pool.instances,
                        t.support_size + t.query_size,
                        mix3(seed_b, 0x5a11, s as u64),
                    );
                    let loss = plain_step(&mut params, &batch, &ctx, &mut acc_meta, t.outer_lr)?;
                    task_losses.push(loss);
                }
            } else {
                let picked = sample_task_batch(&pool, n_tasks, seed_b)?;
                let mut items = Vec::with_capacity(picked.len());
                for (j, &ti) in picked.iter().enumerate() {
                    let task = &pool.tasks[ti];
                    let sub_seed = mix3(seed_b, 0x5ab5, j as u64);
                    items.push(TaskBatchItem {
                        support: subsample(&pool.instances, task.support.clone(), t.support_size, sub_seed),
                        query: subsample(&pool.instances, task.query.clone(), t.query_size, mix3(sub_seed, 1, 1)),
                        support_cutoff: TaskBatchItem::cutoff_before(task.hour_id),
                        query_cutoff: TaskBatchItem::cutoff_before(task.hour_id + 1),
                    });
                }
                let stats = meta_step(
                    &mut params,
                    &items,
                    &ctx,
                    t.meta_mode,
                    t.inner_lr,
                    t.outer_lr,
                    &mut OuterOpt::Adagrad(&mut acc_meta),
                )?;
                task_losses.push(stats.query_loss);
            }
        }
    }
    params.check_finite("parameters after daily training")?;

    let last_full_train_day = events.max_day();
    let clock = Clock {
        last_full_train_day,
        last_online_hour: (last_full_train_day + 1) * HOURS_PER_DAY - 1,
    };
    Ok(TrainerState {
        cfg: cfg.clone(),
        daily_params: params.clone(),
        params,
        acc_meta,
        acc_long,
        cache,
        short_graph,
        long_graph,
        clock,
        day_buffer: Vec::new(),
        long_losses,
        task_losses,
    })
}

fn sample_plain_batch(instances: &[Instance], size: usize, seed: u64) -> Vec<Instance> {
    if instances.len() <= size {
        return instances.to_vec();
    }
    let mut rng = rng_from(seed);
    let mut picks = rand::seq::index::sample(&mut rng, instances.len(), size).into_vec();
    picks.sort_unstable();
    picks.into_iter().map(|i| instances[i]).collect()
}

/// One hourly online update: append the hour's internal events to the
/// short-term graph, then a single gradient step on the short-term and
/// fusion partitions. The long-term partition and its cache stay fixed
/// within the day.
pub fn online_step(state: &mut TrainerState, hour: i64, events: &[EventRecord]) -> Result<()> {
    if hour <= state.clock.last_online_hour {
        return Err(Error::OutOfOrderHour { got: hour, last: state.clock.last_online_hour });
    }
    for r in events {
        if r.global_hour() != hour {
            return Err(Error::InvalidConfig(format!(
                "event at ts {} does not belong to hour {hour}",
                r.ts
            )));
        }
    }

    let mut fresh: Vec<Instance> = Vec::new();
    for r in events {
        if r.source == Source::Internal {
            state.short_graph.append_event(r);
            fresh.push(Instance {
                user: r.user,
                item: r.item,
                clicked: r.label == crate::events::Label::Clicked,
                hour: r.context.hour,
                position: r.context.position,
                ts: r.ts,
            });
        }
    }
    state.day_buffer.extend(fresh.iter().copied());

    if !fresh.is_empty() {
        let t = &state.cfg.trainer;
        let cutoff = (hour + 1) * SECS_PER_HOUR - 1;
        let (inner_lr, lambda, variant, k, long_seed, readapt) = (
            t.inner_lr,
            t.lambda_task,
            state.cfg.variant,
            t.k_neighbors,
            t.long_sample_seed(),
            t.online_readapt_full_prefix,
        );
        if readapt {
            // Reset the adapted partitions to the daily checkpoint and take
            // one step on the whole day prefix.
            let daily = state.daily_params.flatten(Parts::META);
            state.params.assign_from_flat(Parts::META, &daily);
        }
        let support: &[Instance] = if readapt { &state.day_buffer } else { &fresh };
        let ctx = LossCtx {
            short_graph: &state.short_graph,
            cache: &state.cache,
            variant,
            k,
            long_seed,
            loss_scale: lambda,
        };
        let (loss, grads) = batch_loss_grad(&state.params, support, cutoff, &ctx, Parts::META)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite { what: format!("online loss ({loss})"), coord: None });
        }
        state.params.sgd_step(Parts::META, &grads, inner_lr);
        state.task_losses.push(loss);
    }
    state.clock.last_online_hour = hour;
    Ok(())
}
