//! Synthetic multi-source interaction logs with stable per-user preferences
//! and an hourly drifting global hot topic.
//!
//! Click probability of (user, item, hour) is
//! `sigmoid(a * <user, item> + b * <topic_hour, item> + noise)`. Internal
//! rows are impressions with click/no-click labels; external rows are
//! accepted clicks on the external item set only.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};

use crate::autodiff::sigmoid;
use crate::error::{Error, Result};
use crate::events::{
    ContextFeatures, EventLog, EventRecord, ItemId, Label, LogHeader, Source, UserId,
    HOURS_PER_DAY, SECS_PER_HOUR,
};
use crate::rng::{mix, mix3, rng_from};

pub const USER_FIELD_VOCABS: [u32; 6] = [16, 8, 12, 6, 10, 14];
pub const ITEM_FIELD_VOCABS: [u32; 6] = [20, 12, 8, 16, 6, 10];
pub const POSITION_VOCAB: u32 = 64;

/// Generator configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub users: u32,
    pub internal_items: u32,
    pub external_items: u32,
    pub days: u32,
    /// Internal impression rate per user-hour.
    pub events_per_user_per_hour: f64,
    /// External click-attempt rate per user-hour.
    pub external_events_per_user_per_hour: f64,
    pub latent_dim: usize,
    /// Relative hot-topic step per hour; 0 freezes the topic.
    pub drift_rate: f64,
    /// Std-dev of the per-impression logit noise.
    pub noise_level: f64,
    /// Weight `a` on the user-item affinity.
    pub user_weight: f64,
    /// Weight `b` on the topic-item affinity.
    pub topic_weight: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            users: 2000,
            internal_items: 500,
            external_items: 1500,
            days: 9,
            events_per_user_per_hour: 1.7,
            external_events_per_user_per_hour: 0.7,
            latent_dim: 8,
            drift_rate: 0.35,
            noise_level: 0.3,
            user_weight: 1.4,
            topic_weight: 1.6,
            seed: 17,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.users == 0 || self.internal_items == 0 || self.external_items == 0 {
            return bad("user and item counts must be >= 1");
        }
        if self.days == 0 {
            return bad("days must be >= 1");
        }
        if self.latent_dim == 0 {
            return bad("latent_dim must be >= 1");
        }
        if self.drift_rate < 0.0 {
            return bad("drift_rate must be >= 0");
        }
        if self.events_per_user_per_hour < 0.0 || self.external_events_per_user_per_hour < 0.0 {
            return bad("event rates must be >= 0");
        }
        if self.noise_level < 0.0 {
            return bad("noise_level must be >= 0");
        }
        Ok(())
    }

    pub fn header(&self) -> LogHeader {
        LogHeader {
            n_users: self.users,
            n_internal_items: self.internal_items,
            n_external_items: self.external_items,
            user_field_vocabs: USER_FIELD_VOCABS,
            item_field_vocabs: ITEM_FIELD_VOCABS,
            position_vocab: POSITION_VOCAB,
        }
    }

    pub fn n_hours(&self) -> i64 {
        self.days as i64 * HOURS_PER_DAY
    }
}

/// The generating latent state, exposed so tests can compare empirical
/// frequencies against the formula that produced them.
#[derive(Clone, Debug)]
pub struct Latents {
    pub users: Vec<Vec<f64>>,
    /// Internal items first, then external.
    pub items: Vec<Vec<f64>>,
    /// One topic vector per global hour.
    pub topics: Vec<Vec<f64>>,
}

fn gaussian_vec(rng: &mut impl Rng, d: usize, sd: f64) -> Vec<f64> {
    let n = Normal::new(0.0, sd).expect("valid normal");
    (0..d).map(|_| n.sample(rng)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Entry scale making `<u, v>` roughly unit-variance for two fresh vectors.
fn entry_sd(d: usize) -> f64 {
    1.0 / (d as f64).powf(0.25)
}

pub fn latents(cfg: &SimConfig) -> Latents {
    let d = cfg.latent_dim;
    let sd = entry_sd(d);
    let target_norm = (d as f64).powf(0.25);

    let mut urng = rng_from(mix(cfg.seed, 0x0a5e));
    let users = (0..cfg.users).map(|_| gaussian_vec(&mut urng, d, sd)).collect();
    let mut irng = rng_from(mix(cfg.seed, 0x17e3));
    let items = (0..cfg.internal_items + cfg.external_items)
        .map(|_| gaussian_vec(&mut irng, d, sd))
        .collect();

    let mut trng = rng_from(mix(cfg.seed, 0x70b1c));
    let mut topic = gaussian_vec(&mut trng, d, 1.0);
    let scale = target_norm / norm(&topic);
    topic.iter_mut().for_each(|x| *x *= scale);
    let mut topics = Vec::with_capacity(cfg.n_hours() as usize);
    topics.push(topic.clone());
    for _ in 1..cfg.n_hours() {
        if cfg.drift_rate > 0.0 {
            let step = gaussian_vec(&mut trng, d, 1.0);
            let sn = norm(&step).max(1e-12);
            for (t, s) in topic.iter_mut().zip(step.iter()) {
                *t += cfg.drift_rate * target_norm * s / sn;
            }
            let rescale = target_norm / norm(&topic).max(1e-12);
            topic.iter_mut().for_each(|x| *x *= rescale);
        }
        topics.push(topic.clone());
    }
    Latents { users, items, topics }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Noise-free click probability under the generating model.
pub fn click_probability(cfg: &SimConfig, lat: &Latents, user: UserId, item: ItemId, hour: i64) -> f64 {
    let u = &lat.users[user.0 as usize];
    let i = &lat.items[item.0 as usize];
    let t = &lat.topics[hour as usize];
    sigmoid(cfg.user_weight * dot(u, i) + cfg.topic_weight * dot(t, i))
}

/// Generate a full log; a pure function of the configuration.
pub fn generate(cfg: &SimConfig) -> Result<EventLog> {
    cfg.validate()?;
    let lat = latents(cfg);
    let dwell_dist: LogNormal<f64> = LogNormal::new(3.5, 0.6).expect("valid lognormal");

    // (ts, user, seq) is a total order: rows are generated per user with a
    // monotone sequence counter, so sorting is deterministic.
    let mut keyed: Vec<(i64, u32, u32, EventRecord)> = Vec::new();
    for user in 0..cfg.users {
        let mut rng = rng_from(mix3(cfg.seed, 0xda7a, user as u64));
        let mut seq = 0u32;
        let uvec = &lat.users[user as usize];
        for hour in 0..cfg.n_hours() {
            let tvec = &lat.topics[hour as usize];
            let hour_of_day = (hour % HOURS_PER_DAY) as u8;

            let n_imp = sample_count(&mut rng, cfg.events_per_user_per_hour);
            for idx in 0..n_imp {
                let item = rng.random_range(0..cfg.internal_items);
                let ts = hour * SECS_PER_HOUR + rng.random_range(0..SECS_PER_HOUR);
                let ivec = &lat.items[item as usize];
                let mut logit = cfg.user_weight * dot(uvec, ivec) + cfg.topic_weight * dot(tvec, ivec);
                if cfg.noise_level > 0.0 {
                    logit += Normal::new(0.0, cfg.noise_level).unwrap().sample(&mut rng);
                }
                let clicked = rng.random_bool(sigmoid(logit));
                let dwell = if clicked { dwell_dist.sample(&mut rng).round().max(1.0) as u32 } else { 0 };
                keyed.push((
                    ts,
                    user,
                    seq,
                    EventRecord {
                        user: UserId(user),
                        item: ItemId(item),
                        ts,
                        source: Source::Internal,
                        label: if clicked { Label::Clicked } else { Label::Unclicked },
                        context: ContextFeatures {
                            hour: hour_of_day,
                            position: (idx as u32).min(POSITION_VOCAB - 1) as u16,
                        },
                        dwell_secs: dwell,
                    },
                ));
                seq += 1;
            }

            let n_ext = sample_count(&mut rng, cfg.external_events_per_user_per_hour);
            for _ in 0..n_ext {
                let item = cfg.internal_items + rng.random_range(0..cfg.external_items);
                let ts = hour * SECS_PER_HOUR + rng.random_range(0..SECS_PER_HOUR);
                let ivec = &lat.items[item as usize];
                let mut logit = cfg.user_weight * dot(uvec, ivec) + cfg.topic_weight * dot(tvec, ivec);
                if cfg.noise_level > 0.0 {
                    logit += Normal::new(0.0, cfg.noise_level).unwrap().sample(&mut rng);
                }
                // Only accepted clicks surface as external behaviors.
                if rng.random_bool(sigmoid(logit)) {
                    let dwell = dwell_dist.sample(&mut rng).round().max(1.0) as u32;
                    keyed.push((
                        ts,
                        user,
                        seq,
                        EventRecord {
                            user: UserId(user),
                            item: ItemId(item),
                            ts,
                            source: Source::External,
                            label: Label::Clicked,
                            context: ContextFeatures { hour: hour_of_day, position: 0 },
                            dwell_secs: dwell,
                        },
                    ));
                    seq += 1;
                }
            }
        }
    }
    keyed.sort_unstable_by_key(|&(ts, user, seq, _)| (ts, user, seq));
    Ok(EventLog { header: cfg.header(), rows: keyed.into_iter().map(|(_, _, _, r)| r).collect() })
}

fn sample_count(rng: &mut impl Rng, rate: f64) -> u32 {
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).expect("valid poisson").sample(rng) as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> SimConfig {
        SimConfig {
            users: 6,
            internal_items: 5,
            external_items: 4,
            days: 2,
            events_per_user_per_hour: 1.0,
            external_events_per_user_per_hour: 0.5,
            latent_dim: 4,
            drift_rate: 0.3,
            noise_level: 0.2,
            user_weight: 1.0,
            topic_weight: 1.0,
            seed: 5,
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&small_cfg()).unwrap();
        let b = generate(&small_cfg()).unwrap();
        assert_eq!(a, b);
        let mut other = small_cfg();
        other.seed = 6;
        assert_ne!(a, generate(&other).unwrap());
    }

    #[test]
    fn zero_drift_freezes_topic() {
        let mut cfg = small_cfg();
        cfg.drift_rate = 0.0;
        let lat = latents(&cfg);
        let first = &lat.topics[0];
        for t in &lat.topics {
            assert!(t.iter().zip(first.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn rows_sorted_and_well_formed() {
        let log = generate(&small_cfg()).unwrap();
        assert!(!log.rows.is_empty());
        for w in log.rows.windows(2) {
            assert!(w[0].ts <= w[1].ts);
        }
        let text = log.to_text();
        let back = EventLog::from_text(&text, "mem").unwrap();
        assert_eq!(log, back);
    }

    #[test]
    fn empirical_ctr_matches_formula_without_topic() {
        // One user, topic weight zero, no noise: per-item CTR must approach
        // sigmoid(a * <user, item>).
        let cfg = SimConfig {
            users: 1,
            internal_items: 4,
            external_items: 1,
            days: 1,
            events_per_user_per_hour: 2500.0,
            external_events_per_user_per_hour: 0.0,
            latent_dim: 4,
            drift_rate: 0.0,
            noise_level: 0.0,
            user_weight: 1.0,
            topic_weight: 0.0,
            seed: 11,
        };
        let log = generate(&cfg).unwrap();
        let lat = latents(&cfg);
        let mut imps = vec![0u32; 4];
        let mut clicks = vec![0u32; 4];
        for r in &log.rows {
            imps[r.item.0 as usize] += 1;
            if r.label == Label::Clicked {
                clicks[r.item.0 as usize] += 1;
            }
        }
        for item in 0..4u32 {
            assert!(imps[item as usize] >= 10_000, "need >= 1e4 impressions per item");
            let emp = clicks[item as usize] as f64 / imps[item as usize] as f64;
            let want = click_probability(&cfg, &lat, UserId(0), ItemId(item), 0);
            assert!((emp - want).abs() <= 0.03, "item {item}: {emp} vs {want}");
        }
    }

    #[test]
    fn labels_fit_generating_model_chi_square() {
        // Known per-item click probabilities (no topic, no noise); the
        // chi-square statistic over item cells should not reject at 1%.
        let cfg = SimConfig {
            users: 1,
            internal_items: 5,
            external_items: 1,
            days: 1,
            events_per_user_per_hour: 600.0,
            external_events_per_user_per_hour: 0.0,
            latent_dim: 4,
            drift_rate: 0.0,
            noise_level: 0.0,
            user_weight: 1.0,
            topic_weight: 0.0,
            seed: 23,
        };
        let log = generate(&cfg).unwrap();
        assert!(log.rows.len() >= 10_000);
        let lat = latents(&cfg);
        let mut imps = vec![0f64; 5];
        let mut clicks = vec![0f64; 5];
        for r in &log.rows {
            imps[r.item.0 as usize] += 1.0;
            if r.label == Label::Clicked {
                clicks[r.item.0 as usize] += 1.0;
            }
        }
        let mut stat = 0.0;
        for item in 0..5u32 {
            let p = click_probability(&cfg, &lat, UserId(0), ItemId(item), 0);
            let n = imps[item as usize];
            let e1 = n * p;
            let e0 = n * (1.0 - p);
            let c = clicks[item as usize];
            stat += (c - e1).powi(2) / e1 + ((n - c) - e0).powi(2) / e0;
        }
        // chi-square critical value, df = 5, alpha = 0.01
        assert!(stat <= 15.086, "chi-square statistic {stat}");
    }

    #[test]
    fn drift_decorrelates_item_popularity() {
        // Rank correlation of per-item clicks between the first and last
        // hour drops monotonically as drift grows (median of 3 seeds).
        let base = SimConfig {
            users: 400,
            internal_items: 40,
            external_items: 1,
            days: 1,
            events_per_user_per_hour: 3.0,
            external_events_per_user_per_hour: 0.0,
            latent_dim: 4,
            drift_rate: 0.0,
            noise_level: 0.1,
            user_weight: 0.3,
            topic_weight: 3.0,
            seed: 0,
        };
        let median_corr = |drift: f64| -> f64 {
            let mut cs: Vec<f64> = (40..43u64)
                .map(|seed| {
                    let mut cfg = base.clone();
                    cfg.drift_rate = drift;
                    cfg.seed = seed;
                    let log = generate(&cfg).unwrap();
                    let mut first = vec![0f64; 40];
                    let mut last = vec![0f64; 40];
                    for r in &log.rows {
                        if r.label != Label::Clicked {
                            continue;
                        }
                        match r.global_hour() {
                            0 => first[r.item.0 as usize] += 1.0,
                            23 => last[r.item.0 as usize] += 1.0,
                            _ => {}
                        }
                    }
                    spearman(&first, &last)
                })
                .collect();
            cs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            cs[1]
        };
        let c0 = median_corr(0.0);
        let c1 = median_corr(0.4);
        let c2 = median_corr(1.2);
        assert!(c0 > c1 && c1 > c2, "correlations not monotone: {c0} {c1} {c2}");
    }

    fn spearman(a: &[f64], b: &[f64]) -> f64 {
        let ra = ranks(a);
        let rb = ranks(b);
        let n = ra.len() as f64;
        let ma = ra.iter().sum::<f64>() / n;
        let mb = rb.iter().sum::<f64>() / n;
        let mut cov = 0.0;
        let mut va = 0.0;
        let mut vb = 0.0;
        for (x, y) in ra.iter().zip(rb.iter()) {
            cov += (x - ma) * (y - mb);
            va += (x - ma) * (x - ma);
            vb += (y - mb) * (y - mb);
        }
        cov / (va.sqrt() * vb.sqrt()).max(1e-12)
    }

    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].partial_cmp(&v[j]).unwrap());
        let mut out = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                out[k] = avg;
            }
            i = j + 1;
        }
        out
    }
}
