//! Checkpoint file format: a text manifest (clock, config, array names,
//! shapes, element offsets) followed by the flat little-endian f64 arrays.
//! Canonical emission makes store -> load -> store byte-exact.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::autodiff::{Array, Shape};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::events::EventLog;
use crate::graph::{GraphKind, InteractionGraph};
use crate::model::{LongTermCache, ModelDims, ModelParams, Parts};
use crate::train::schedule::{Clock, TrainerState};
use crate::train::AdagradState;

const MAGIC: &str = "lsttm-checkpoint v1";

fn shape_str(s: Shape) -> String {
    match s {
        Shape::Scalar => "s".to_string(),
        Shape::Vector(n) => format!("v:{n}"),
        Shape::Matrix { rows, cols } => format!("m:{rows}:{cols}"),
    }
}

fn parse_shape(s: &str) -> Option<Shape> {
    if s == "s" {
        return Some(Shape::Scalar);
    }
    if let Some(n) = s.strip_prefix("v:") {
        return Some(Shape::Vector(n.parse().ok()?));
    }
    if let Some(rc) = s.strip_prefix("m:") {
        let (r, c) = rc.split_once(':')?;
        return Some(Shape::Matrix { rows: r.parse().ok()?, cols: c.parse().ok()? });
    }
    None
}

struct Entry {
    name: String,
    shape: Shape,
    data: Vec<f64>,
}

fn collect_entries(state: &TrainerState) -> Vec<Entry> {
    let mut entries = Vec::new();
    state.params.for_each(Parts::ALL, &mut |name, a| {
        entries.push(Entry { name: name.to_string(), shape: a.shape(), data: a.as_slice().to_vec() });
    });
    state.daily_params.for_each(Parts::META, &mut |name, a| {
        entries.push(Entry {
            name: format!("daily.{name}"),
            shape: a.shape(),
            data: a.as_slice().to_vec(),
        });
    });
    state.params.for_each(Parts::META, &mut |name, a| {
        let acc = state
            .acc_meta
            .get(name)
            .cloned()
            .unwrap_or_else(|| vec![0.0; a.numel()]);
        entries.push(Entry { name: format!("adagrad_meta.{name}"), shape: a.shape(), data: acc });
    });
    state.params.for_each(Parts::LONG, &mut |name, a| {
        let acc = state
            .acc_long
            .get(name)
            .cloned()
            .unwrap_or_else(|| vec![0.0; a.numel()]);
        entries.push(Entry { name: format!("adagrad_long.{name}"), shape: a.shape(), data: acc });
    });
    entries
}

/// Serialize a trainer state. Graphs and the long-term cache are not
/// stored; both are rebuilt deterministically from the event log and the
/// embedded config on restore.
pub fn save_checkpoint(state: &TrainerState, path: &Path) -> Result<()> {
    let entries = collect_entries(state);
    let mut manifest = String::new();
    manifest.push_str(MAGIC);
    manifest.push('\n');
    let _ = writeln!(manifest, "config_hash={:016x}", state.cfg.hash());
    let _ = writeln!(manifest, "day={}", state.clock.last_full_train_day);
    let _ = writeln!(manifest, "hour={}", state.clock.last_online_hour);
    manifest.push_str("config_begin\n");
    manifest.push_str(&state.cfg.to_canonical_text());
    manifest.push_str("config_end\n");
    let _ = writeln!(manifest, "arrays={}", entries.len());
    let mut offset = 0usize;
    for e in &entries {
        let _ = writeln!(manifest, "{}\t{}\t{}", e.name, shape_str(e.shape), offset);
        offset += e.data.len();
    }
    manifest.push_str("data\n");

    let mut bytes = manifest.into_bytes();
    bytes.reserve(offset * 8);
    for e in &entries {
        for v in &e.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    crate::config::write_atomic(path, &bytes)
}

/// A deserialized checkpoint, before graphs are attached.
pub struct LoadedCheckpoint {
    pub config: RunConfig,
    pub config_hash: u64,
    pub clock: Clock,
    pub params: ModelParams,
    pub daily_params: ModelParams,
    pub acc_meta: AdagradState,
    pub acc_long: AdagradState,
}

pub fn load_checkpoint(path: &Path) -> Result<LoadedCheckpoint> {
    let bytes = std::fs::read(path)?;
    let bad = |msg: &str| Error::Checkpoint(format!("{}: {msg}", path.display()));

    // manifest is everything up to and including the "data\n" line
    let data_tag = b"\ndata\n";
    let data_pos = bytes
        .windows(data_tag.len())
        .position(|w| w == data_tag)
        .ok_or_else(|| bad("missing data section"))?;
    let manifest = std::str::from_utf8(&bytes[..data_pos]).map_err(|_| bad("manifest not utf-8"))?;
    let blob = &bytes[data_pos + data_tag.len()..];

    let mut lines = manifest.lines();
    if lines.next() != Some(MAGIC) {
        return Err(bad("bad magic"));
    }
    let hash_line = lines.next().ok_or_else(|| bad("missing config_hash"))?;
    let config_hash = u64::from_str_radix(
        hash_line.strip_prefix("config_hash=").ok_or_else(|| bad("missing config_hash"))?,
        16,
    )
    .map_err(|_| bad("bad config_hash"))?;
    let day: i64 = lines
        .next()
        .and_then(|l| l.strip_prefix("day="))
        .ok_or_else(|| bad("missing day"))?
        .parse()
        .map_err(|_| bad("bad day"))?;
    let hour: i64 = lines
        .next()
        .and_then(|l| l.strip_prefix("hour="))
        .ok_or_else(|| bad("missing hour"))?
        .parse()
        .map_err(|_| bad("bad hour"))?;
    if lines.next() != Some("config_begin") {
        return Err(bad("missing config section"));
    }
    let mut config_text = String::new();
    for line in lines.by_ref() {
        if line == "config_end" {
            break;
        }
        config_text.push_str(line);
        config_text.push('\n');
    }
    let config = RunConfig::from_text(&config_text, &format!("{}#config", path.display()))?;
    if config.hash() != config_hash {
        return Err(bad("config hash does not match embedded config"));
    }

    let n_arrays: usize = lines
        .next()
        .and_then(|l| l.strip_prefix("arrays="))
        .ok_or_else(|| bad("missing arrays count"))?
        .parse()
        .map_err(|_| bad("bad arrays count"))?;
    let mut arrays: HashMap<String, Array> = HashMap::new();
    for _ in 0..n_arrays {
        let line = lines.next().ok_or_else(|| bad("truncated array table"))?;
        let mut cols = line.split('\t');
        let name = cols.next().ok_or_else(|| bad("missing array name"))?;
        let shape = cols
            .next()
            .and_then(parse_shape)
            .ok_or_else(|| bad("bad array shape"))?;
        let offset: usize = cols
            .next()
            .ok_or_else(|| bad("missing array offset"))?
            .parse()
            .map_err(|_| bad("bad array offset"))?;
        let numel = shape.numel();
        let start = offset * 8;
        let end = start + numel * 8;
        if end > blob.len() {
            return Err(bad(&format!("array {name} overruns blob")));
        }
        let data: Vec<f64> = blob[start..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        arrays.insert(name.to_string(), Array::new(shape, data));
    }

    let dims = dims_from_arrays(&arrays).ok_or_else(|| bad("cannot infer dimensions"))?;
    let mut params = ModelParams::zeros(dims.clone());
    let mut missing = None;
    params.for_each_mut(Parts::ALL, &mut |name, a| match arrays.get(name) {
        Some(stored) if stored.shape() == a.shape() => {
            a.as_mut_slice().copy_from_slice(stored.as_slice())
        }
        _ => missing = missing.take().or_else(|| Some(name.to_string())),
    });
    if let Some(name) = missing {
        return Err(bad(&format!("array {name} missing or mis-shaped")));
    }
    let mut daily_params = params.clone();
    let mut missing = None;
    daily_params.for_each_mut(Parts::META, &mut |name, a| {
        match arrays.get(&format!("daily.{name}")) {
            Some(stored) if stored.shape() == a.shape() => {
                a.as_mut_slice().copy_from_slice(stored.as_slice())
            }
            _ => missing = missing.take().or_else(|| Some(name.to_string())),
        }
    });
    if let Some(name) = missing {
        return Err(bad(&format!("array daily.{name} missing or mis-shaped")));
    }

    let mut acc_meta = AdagradState::new();
    params.for_each(Parts::META, &mut |name, a| {
        if let Some(stored) = arrays.get(&format!("adagrad_meta.{name}")) {
            if stored.shape() == a.shape() {
                acc_meta.insert(name.to_string(), stored.as_slice().to_vec());
            }
        }
    });
    let mut acc_long = AdagradState::new();
    params.for_each(Parts::LONG, &mut |name, a| {
        if let Some(stored) = arrays.get(&format!("adagrad_long.{name}")) {
            if stored.shape() == a.shape() {
                acc_long.insert(name.to_string(), stored.as_slice().to_vec());
            }
        }
    });

    Ok(LoadedCheckpoint {
        config,
        config_hash,
        clock: Clock { last_full_train_day: day, last_online_hour: hour },
        params,
        daily_params,
        acc_meta,
        acc_long,
    })
}

/// Every table dimension is recoverable from stored array shapes.
fn dims_from_arrays(arrays: &HashMap<String, Array>) -> Option<ModelDims> {
    let rows = |name: &str| -> Option<usize> {
        match arrays.get(name)?.shape() {
            Shape::Matrix { rows, .. } => Some(rows),
            _ => None,
        }
    };
    let mut user_field_vocabs = [0u32; 6];
    let mut item_field_vocabs = [0u32; 6];
    for f in 0..6 {
        user_field_vocabs[f] = rows(&format!("short.user_field{f}"))? as u32;
        item_field_vocabs[f] = rows(&format!("short.item_field{f}"))? as u32;
    }
    Some(ModelDims {
        n_users: rows("long.user_ids")?,
        n_items: rows("long.item_ids")?,
        n_internal_items: rows("fusion.target_item")?,
        user_field_vocabs,
        item_field_vocabs,
        position_vocab: rows("fusion.pos_emb")?,
    })
}

impl TrainerState {
    /// Rebuild serving state from a checkpoint plus the event log it was
    /// trained from: graphs come from rows up to the checkpoint day and the
    /// long-term cache is recomputed from the stored parameters.
    pub fn restore(loaded: LoadedCheckpoint, events: &EventLog) -> Result<TrainerState> {
        let day = loaded.clock.last_full_train_day;
        let train_rows: Vec<_> =
            events.rows.iter().filter(|r| r.day() <= day).cloned().collect();
        let short_graph = InteractionGraph::from_events(GraphKind::ShortTerm, &train_rows);
        let long_rows: Vec<_> = train_rows
            .iter()
            .filter(|r| {
                loaded.config.variant != crate::config::Variant::NoExternal
                    || r.source == crate::events::Source::Internal
            })
            .cloned()
            .collect();
        let long_graph = InteractionGraph::from_events(GraphKind::LongTerm, &long_rows);
        let cache = LongTermCache::build(
            &loaded.params,
            long_graph.snapshot(i64::MAX),
            loaded.config.trainer.k_neighbors,
            loaded.config.variant,
            loaded.config.trainer.long_sample_seed(),
        )?;
        Ok(TrainerState {
            cfg: loaded.config,
            params: loaded.params,
            daily_params: loaded.daily_params,
            acc_meta: loaded.acc_meta,
            acc_long: loaded.acc_long,
            cache,
            short_graph,
            long_graph,
            clock: loaded.clock,
            day_buffer: Vec::new(),
            long_losses: Vec::new(),
            task_losses: Vec::new(),
        })
    }
}
