//! Training: temporal task construction, the meta-learning loops with their
//! gradient block, asynchronous long-term training, Adagrad, the simulated
//! daily/hourly serving schedule, and the checkpoint format.

mod adagrad;
mod checkpoint;
mod longterm;
mod maml;
mod schedule;

pub use adagrad::{adagrad_step, AdagradState, ADAGRAD_EPS};
pub use checkpoint::{load_checkpoint, save_checkpoint, LoadedCheckpoint};
pub use longterm::train_long_term;
pub use maml::{
    batch_loss_grad, batch_scores, hessian_vec_product, inner_update, meta_gradient, meta_step,
    plain_step, LossCtx, MetaStats, OuterOpt, TaskBatchItem,
};
pub use schedule::{daily_full_train, online_step, Clock, TrainerState};

use std::ops::Range;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::events::{user_fields, Instance, LogHeader};
use crate::rng::{mix, rng_from};

/// Meta-gradient flavor for the outer update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetaMode {
    /// Outer gradient evaluated at the adapted parameters, inner Jacobian
    /// ignored.
    FirstOrder,
    /// Inner Jacobian applied via a Hessian-vector product.
    Exact,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainerConfig {
    /// Inner (adaptation) step size.
    pub inner_lr: f64,
    /// Outer (meta) step size.
    pub outer_lr: f64,
    pub tasks_per_batch: usize,
    pub support_size: usize,
    pub query_size: usize,
    /// Neighbors sampled per node in both graphs.
    pub k_neighbors: usize,
    pub lambda_task: f64,
    pub lambda_neighbor: f64,
    pub meta_mode: MetaMode,
    pub meta_epochs: usize,
    pub long_epochs: usize,
    pub paths_per_node: usize,
    pub walk_length: usize,
    pub negatives_per_pair: usize,
    /// 0 disables profile-based task grouping.
    pub user_groups: usize,
    /// Re-adapt from the daily checkpoint on the whole day prefix each hour
    /// instead of one cumulative step per arriving hour.
    pub online_readapt_full_prefix: bool,
    /// Cap on the evaluation support set; 0 uses all former hours.
    pub eval_support_cap: usize,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            inner_lr: 0.01,
            outer_lr: 0.01,
            tasks_per_batch: 8,
            support_size: 128,
            query_size: 128,
            k_neighbors: 30,
            lambda_task: 1.0,
            lambda_neighbor: 1.0,
            meta_mode: MetaMode::FirstOrder,
            meta_epochs: 4,
            long_epochs: 4,
            paths_per_node: 1,
            walk_length: 10,
            negatives_per_pair: 2,
            user_groups: 0,
            online_readapt_full_prefix: false,
            eval_support_cap: 0,
            seed: 17,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.inner_lr <= 0.0 || self.outer_lr <= 0.0 {
            return bad("step sizes must be > 0");
        }
        if self.tasks_per_batch == 0 || self.support_size == 0 || self.query_size == 0 {
            return bad("batch sizes must be >= 1");
        }
        if self.k_neighbors == 0 {
            return bad("k_neighbors must be >= 1");
        }
        if self.walk_length < 2 {
            return bad("walk_length must be >= 2");
        }
        Ok(())
    }

    /// Fixed per-run seed for long-graph neighbor sampling, shared by
    /// training, the cache build, and evaluation.
    pub fn long_sample_seed(&self) -> u64 {
        mix(self.seed, 0x10e6)
    }
}

/// A (support, query) pair of instance ranges from adjacent hours.
#[derive(Clone, Debug)]
pub struct TemporalTask {
    pub support: Range<usize>,
    pub query: Range<usize>,
    /// Global hour of the support set.
    pub hour_id: i64,
    pub day_id: i64,
    pub group: Option<u32>,
}

impl TemporalTask {
    pub fn hour_of_day(&self) -> i64 {
        self.hour_id % 24
    }
}

/// All tasks over a shared, (group, time)-sorted instance arena. Full hour
/// buckets are stored; down-sampling to the configured sizes happens per
/// use, seeded per task and epoch.
#[derive(Clone, Debug)]
pub struct TaskPool {
    pub instances: Vec<Instance>,
    pub tasks: Vec<TemporalTask>,
}

/// One task per adjacent-hour pair with instances on both sides, optionally
/// per user group (groups come from the first hashed profile field).
pub fn build_tasks(mut instances: Vec<Instance>, header: &LogHeader, user_groups: usize) -> TaskPool {
    let group_of = |i: &Instance| -> u32 {
        if user_groups == 0 {
            0
        } else {
            (user_fields(i.user, &header.user_field_vocabs)[0] % user_groups) as u32
        }
    };
    instances.sort_by_key(|i| (group_of(i), i.ts));

    let mut tasks = Vec::new();
    let mut start = 0;
    while start < instances.len() {
        // contiguous run of one group
        let g = group_of(&instances[start]);
        let mut end = start;
        while end < instances.len() && group_of(&instances[end]) == g {
            end += 1;
        }
        // hour buckets within the group are contiguous because of the sort
        let mut buckets: Vec<(i64, Range<usize>)> = Vec::new();
        let mut b = start;
        while b < end {
            let h = instances[b].global_hour();
            let mut e = b;
            while e < end && instances[e].global_hour() == h {
                e += 1;
            }
            buckets.push((h, b..e));
            b = e;
        }
        for w in buckets.windows(2) {
            let (h0, ref r0) = w[0];
            let (h1, ref r1) = w[1];
            if h1 == h0 + 1 {
                tasks.push(TemporalTask {
                    support: r0.clone(),
                    query: r1.clone(),
                    hour_id: h0,
                    day_id: h0 / 24,
                    group: (user_groups > 0).then_some(g),
                });
            }
        }
        start = end;
    }
    TaskPool { instances, tasks }
}

/// Sample `n` diversified tasks: distinct hours of day, stratified across
/// days when possible; falls back with a warning when diversity runs out.
pub fn sample_task_batch(pool: &TaskPool, n: usize, seed: u64) -> Result<Vec<usize>> {
    if pool.tasks.len() < n {
        return Err(Error::PoolTooSmall { have: pool.tasks.len(), need: n });
    }
    let mut order: Vec<usize> = (0..pool.tasks.len()).collect();
    order.shuffle(&mut rng_from(seed));

    let mut selected = Vec::with_capacity(n);
    let mut used = vec![false; pool.tasks.len()];
    let mut hours_taken = std::collections::HashSet::new();
    let mut days_taken = std::collections::HashSet::new();

    for &i in &order {
        if selected.len() == n {
            break;
        }
        let t = &pool.tasks[i];
        if !hours_taken.contains(&t.hour_of_day()) && !days_taken.contains(&t.day_id) {
            selected.push(i);
            used[i] = true;
            hours_taken.insert(t.hour_of_day());
            days_taken.insert(t.day_id);
        }
    }
    for &i in &order {
        if selected.len() == n {
            break;
        }
        let t = &pool.tasks[i];
        if !used[i] && !hours_taken.contains(&t.hour_of_day()) {
            selected.push(i);
            used[i] = true;
            hours_taken.insert(t.hour_of_day());
        }
    }
    if selected.len() < n {
        log::warn!(
            "task batch of {n} needs more than the {} distinct hours available; relaxing hour distinctness",
            hours_taken.len()
        );
        for &i in &order {
            if selected.len() == n {
                break;
            }
            if !used[i] {
                selected.push(i);
                used[i] = true;
            }
        }
    }
    selected.sort_unstable();
    Ok(selected)
}

/// Uniform subsample of an instance range, whole range if it fits.
pub fn subsample(instances: &[Instance], range: Range<usize>, size: usize, seed: u64) -> Vec<Instance> {
    let slice = &instances[range];
    if slice.len() <= size {
        return slice.to_vec();
    }
    let mut rng = rng_from(seed);
    let mut picks: Vec<usize> = rand::seq::index::sample(&mut rng, slice.len(), size).into_vec();
    picks.sort_unstable();
    picks.into_iter().map(|i| slice[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{ItemId, UserId, SECS_PER_HOUR};

    fn inst(user: u32, hour: i64, n: usize) -> Vec<Instance> {
        (0..n)
            .map(|i| Instance {
                user: UserId(user),
                item: ItemId(0),
                clicked: i % 2 == 0,
                hour: (hour % 24) as u8,
                position: 0,
                ts: hour * SECS_PER_HOUR + i as i64,
            })
            .collect()
    }

    fn header() -> LogHeader {
        LogHeader {
            n_users: 16,
            n_internal_items: 4,
            n_external_items: 2,
            user_field_vocabs: [8, 4, 4, 4, 4, 4],
            item_field_vocabs: [4, 4, 4, 4, 4, 4],
            position_vocab: 4,
        }
    }

    #[test]
    fn three_hours_make_two_tasks() {
        let mut all = Vec::new();
        for h in 0..3 {
            all.extend(inst(1, h, 4));
        }
        let pool = build_tasks(all, &header(), 0);
        assert_eq!(pool.tasks.len(), 2);
        assert_eq!(pool.tasks[0].hour_id, 0);
        assert_eq!(pool.tasks[1].hour_id, 1);
    }

    #[test]
    fn hour_gap_emits_no_task() {
        let mut all = Vec::new();
        all.extend(inst(1, 0, 4));
        all.extend(inst(1, 2, 4));
        let pool = build_tasks(all, &header(), 0);
        assert!(pool.tasks.is_empty());
    }

    #[test]
    fn middle_hour_is_query_of_one_and_support_of_next() {
        let mut all = Vec::new();
        for h in 0..3 {
            all.extend(inst(1, h, 4));
        }
        let pool = build_tasks(all, &header(), 0);
        let t0 = &pool.tasks[0];
        let t1 = &pool.tasks[1];
        assert_eq!(t0.query, t1.support);
        let probe = pool.instances[t0.query.start];
        assert_eq!(probe.global_hour(), 1);
    }

    #[test]
    fn grouping_bounds_task_count() {
        let mut all = Vec::new();
        for h in 0..3 {
            for u in 0..16 {
                all.extend(inst(u, h, 2));
            }
        }
        let pool = build_tasks(all, &header(), 2);
        assert!(pool.tasks.len() <= 4, "{} tasks", pool.tasks.len());
        assert!(pool.tasks.iter().all(|t| t.group.is_some()));
        for t in &pool.tasks {
            let g = t.group.unwrap();
            for i in t.support.clone().chain(t.query.clone()) {
                let inst = &pool.instances[i];
                let expect =
                    (user_fields(inst.user, &header().user_field_vocabs)[0] % 2) as u32;
                assert_eq!(expect, g);
            }
        }
    }

    #[test]
    fn batch_has_distinct_hours_and_is_seed_stable() {
        let mut all = Vec::new();
        for h in 0..24 {
            all.extend(inst(1, h, 4));
        }
        let pool = build_tasks(all, &header(), 0);
        assert_eq!(pool.tasks.len(), 23);
        let a = sample_task_batch(&pool, 8, 3).unwrap();
        let b = sample_task_batch(&pool, 8, 3).unwrap();
        assert_eq!(a, b);
        let hours: std::collections::HashSet<i64> =
            a.iter().map(|&i| pool.tasks[i].hour_of_day()).collect();
        assert_eq!(hours.len(), 8);
        // n == pool size returns everything
        let all_of_them = sample_task_batch(&pool, 23, 5).unwrap();
        assert_eq!(all_of_them.len(), 23);
        assert!(sample_task_batch(&pool, 24, 5).is_err());
    }

    #[test]
    fn batch_stratifies_across_days() {
        let mut all = Vec::new();
        for day in 0..4 {
            for h in 0..6 {
                all.extend(inst(1, day * 24 + h, 3));
            }
        }
        let pool = build_tasks(all, &header(), 0);
        let picks = sample_task_batch(&pool, 4, 11).unwrap();
        let days: std::collections::HashSet<i64> =
            picks.iter().map(|&i| pool.tasks[i].day_id).collect();
        assert_eq!(days.len(), 4);
    }

    #[test]
    fn subsample_is_deterministic_and_clamped() {
        let all = inst(1, 0, 10);
        let whole = subsample(&all, 0..10, 20, 1);
        assert_eq!(whole.len(), 10);
        let a = subsample(&all, 2..9, 3, 7);
        let b = subsample(&all, 2..9, 3, 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
    }
}
