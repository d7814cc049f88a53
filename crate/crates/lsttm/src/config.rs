//! Run configuration: a flat `key=value` file shared by the data generator,
//! trainer, and evaluator, plus canonical serialization and hashing so
//! checkpoints can assert which configuration produced them.

use std::path::Path;

use crate::datasim::SimConfig;
use crate::error::{Error, Result};
use crate::train::{MetaMode, TrainerConfig};

/// Ablation variants of the full model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// The complete model.
    Full,
    /// Plain mini-batch training instead of meta-learning, same budget.
    NoMeta,
    /// Long-term graph built from internal events only.
    NoExternal,
    /// Linear projection of the concatenated user vectors instead of gating.
    NoGating,
    /// Raw input embeddings: no graph aggregation, no neighbor-similarity loss.
    NoGatLn,
}

impl Variant {
    pub const ALL: [Variant; 5] =
        [Variant::Full, Variant::NoMeta, Variant::NoExternal, Variant::NoGating, Variant::NoGatLn];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoMeta => "no-meta",
            Variant::NoExternal => "no-external",
            Variant::NoGating => "no-gating",
            Variant::NoGatLn => "no-gat-ln",
        }
    }

    pub fn parse(s: &str) -> Result<Variant> {
        match s {
            "full" => Ok(Variant::Full),
            "no-meta" => Ok(Variant::NoMeta),
            "no-external" => Ok(Variant::NoExternal),
            "no-gating" => Ok(Variant::NoGating),
            "no-gat-ln" => Ok(Variant::NoGatLn),
            other => Err(Error::UnknownVariant(other.to_string())),
        }
    }
}

/// Everything a full generate -> train -> eval run needs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub trainer: TrainerConfig,
    pub variant: Variant,
    /// Number of seeded repetitions for ablation runs.
    pub runs: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sim: SimConfig::default(),
            trainer: TrainerConfig::default(),
            variant: Variant::Full,
            runs: 3,
        }
    }
}

impl RunConfig {
    /// Parse a `key=value` config file; unknown keys are rejected, missing
    /// keys keep their defaults.
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text, &path.display().to_string())
    }

    pub fn from_text(text: &str, origin: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_string(),
                line: idx + 1,
                msg: format!("expected key=value, got `{line}`"),
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                path: origin.to_string(),
                line: idx + 1,
                msg: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::InvalidConfig(format!("bad value `{value}` for {what}"));
        match key {
            "users" => self.sim.users = value.parse().map_err(|_| bad(key))?,
            "internal_items" => self.sim.internal_items = value.parse().map_err(|_| bad(key))?,
            "external_items" => self.sim.external_items = value.parse().map_err(|_| bad(key))?,
            "days" => self.sim.days = value.parse().map_err(|_| bad(key))?,
            "events_per_user_per_hour" => {
                self.sim.events_per_user_per_hour = value.parse().map_err(|_| bad(key))?
            }
            "external_events_per_user_per_hour" => {
                self.sim.external_events_per_user_per_hour = value.parse().map_err(|_| bad(key))?
            }
            "latent_dim" => self.sim.latent_dim = value.parse().map_err(|_| bad(key))?,
            "drift_rate" => self.sim.drift_rate = value.parse().map_err(|_| bad(key))?,
            "noise_level" => self.sim.noise_level = value.parse().map_err(|_| bad(key))?,
            "user_weight" => self.sim.user_weight = value.parse().map_err(|_| bad(key))?,
            "topic_weight" => self.sim.topic_weight = value.parse().map_err(|_| bad(key))?,
            "seed" => {
                let s: u64 = value.parse().map_err(|_| bad(key))?;
                self.sim.seed = s;
                self.trainer.seed = s;
            }
            "inner_lr" => self.trainer.inner_lr = value.parse().map_err(|_| bad(key))?,
            "outer_lr" => self.trainer.outer_lr = value.parse().map_err(|_| bad(key))?,
            "tasks_per_batch" => self.trainer.tasks_per_batch = value.parse().map_err(|_| bad(key))?,
            "support_size" => self.trainer.support_size = value.parse().map_err(|_| bad(key))?,
            "query_size" => self.trainer.query_size = value.parse().map_err(|_| bad(key))?,
            "k_neighbors" => self.trainer.k_neighbors = value.parse().map_err(|_| bad(key))?,
            "lambda_task" => self.trainer.lambda_task = value.parse().map_err(|_| bad(key))?,
            "lambda_neighbor" => self.trainer.lambda_neighbor = value.parse().map_err(|_| bad(key))?,
            "meta_mode" => {
                self.trainer.meta_mode = match value {
                    "first-order" => MetaMode::FirstOrder,
                    "exact" => MetaMode::Exact,
                    _ => return Err(bad(key)),
                }
            }
            "meta_epochs" => self.trainer.meta_epochs = value.parse().map_err(|_| bad(key))?,
            "long_epochs" => self.trainer.long_epochs = value.parse().map_err(|_| bad(key))?,
            "paths_per_node" => self.trainer.paths_per_node = value.parse().map_err(|_| bad(key))?,
            "walk_length" => self.trainer.walk_length = value.parse().map_err(|_| bad(key))?,
            "negatives_per_pair" => {
                self.trainer.negatives_per_pair = value.parse().map_err(|_| bad(key))?
            }
            "user_groups" => self.trainer.user_groups = value.parse().map_err(|_| bad(key))?,
            "online_readapt_full_prefix" => {
                self.trainer.online_readapt_full_prefix = value.parse().map_err(|_| bad(key))?
            }
            "eval_support_cap" => self.trainer.eval_support_cap = value.parse().map_err(|_| bad(key))?,
            "variant" => self.variant = Variant::parse(value)?,
            "runs" => self.runs = value.parse().map_err(|_| bad(key))?,
            other => return Err(Error::InvalidConfig(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.trainer.validate()?;
        if self.runs == 0 {
            return Err(Error::InvalidConfig("runs must be >= 1".into()));
        }
        Ok(())
    }

    /// Canonical text: every key in fixed order. Equal configs serialize to
    /// equal bytes, so the hash below identifies the effective configuration.
    pub fn to_canonical_text(&self) -> String {
        let s = &self.sim;
        let t = &self.trainer;
        let meta_mode = match t.meta_mode {
            MetaMode::FirstOrder => "first-order",
            MetaMode::Exact => "exact",
        };
        format!(
            "users={}\ninternal_items={}\nexternal_items={}\ndays={}\n\
             events_per_user_per_hour={}\nexternal_events_per_user_per_hour={}\n\
             latent_dim={}\ndrift_rate={}\nnoise_level={}\nuser_weight={}\ntopic_weight={}\n\
             seed={}\ninner_lr={}\nouter_lr={}\ntasks_per_batch={}\nsupport_size={}\n\
             query_size={}\nk_neighbors={}\nlambda_task={}\nlambda_neighbor={}\n\
             meta_mode={}\nmeta_epochs={}\nlong_epochs={}\npaths_per_node={}\n\
             walk_length={}\nnegatives_per_pair={}\nuser_groups={}\n\
             online_readapt_full_prefix={}\neval_support_cap={}\nvariant={}\nruns={}\n",
            s.users,
            s.internal_items,
            s.external_items,
            s.days,
            s.events_per_user_per_hour,
            s.external_events_per_user_per_hour,
            s.latent_dim,
            s.drift_rate,
            s.noise_level,
            s.user_weight,
            s.topic_weight,
            t.seed,
            t.inner_lr,
            t.outer_lr,
            t.tasks_per_batch,
            t.support_size,
            t.query_size,
            t.k_neighbors,
            t.lambda_task,
            t.lambda_neighbor,
            meta_mode,
            t.meta_epochs,
            t.long_epochs,
            t.paths_per_node,
            t.walk_length,
            t.negatives_per_pair,
            t.user_groups,
            t.online_readapt_full_prefix,
            t.eval_support_cap,
            self.variant.name(),
            self.runs,
        )
    }

    pub fn hash(&self) -> u64 {
        fnv1a(self.to_canonical_text().as_bytes())
    }

    /// Same run with a different master seed.
    pub fn with_seed(&self, seed: u64) -> RunConfig {
        let mut c = self.clone();
        c.sim.seed = seed;
        c.trainer.seed = seed;
        c
    }

    pub fn with_variant(&self, variant: Variant) -> RunConfig {
        let mut c = self.clone();
        c.variant = variant;
        c
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Write a file via a temp sibling + rename so failed runs never leave a
/// partial output behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    let res = std::fs::write(&tmp, bytes).and_then(|_| std::fs::rename(&tmp, path));
    if res.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    res.map_err(Error::Io)
}
