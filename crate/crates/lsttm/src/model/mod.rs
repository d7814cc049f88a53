//! The differentiable ranking network: dual two-layer GAT encoders, gated
//! fusion, and a DeepFM scorer, with parameters partitioned into the
//! short-term graph block, the fusion/ranking block, and the long-term
//! graph block so the trainer can update them on different schedules.

mod forward;
mod loss;

pub use forward::{
    deepfm_score, gat_attention, gat_layer, gate_fuse, node_input, DeepFmNodes, Forward,
    LongSource, LongTermCache,
};
pub use loss::{ce_loss, neighbor_similarity_loss, path_pair_count, PathEmbed};

use std::collections::HashMap;

use rand::Rng;

use crate::autodiff::Array;
use crate::error::{Error, Result};
use crate::events::LogHeader;
use crate::rng::{mix, rng_from};

pub const EMBED_DIM: usize = 16;
pub const N_FIELDS: usize = 6;
pub const INPUT_CONCAT_DIM: usize = EMBED_DIM * N_FIELDS;
pub const GATE_DIM: usize = 2 * EMBED_DIM;
pub const TOWER_INPUT: usize = 4 * EMBED_DIM;
pub const TOWER_H1: usize = 64;
pub const TOWER_H2: usize = 32;
pub const LEAKY_SLOPE: f64 = 0.2;

/// Sizes every embedding table is built from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelDims {
    pub n_users: usize,
    pub n_items: usize,
    pub n_internal_items: usize,
    pub user_field_vocabs: [u32; 6],
    pub item_field_vocabs: [u32; 6],
    pub position_vocab: usize,
}

impl ModelDims {
    pub fn from_header(h: &LogHeader) -> Self {
        ModelDims {
            n_users: h.n_users as usize,
            n_items: h.n_items() as usize,
            n_internal_items: h.n_internal_items as usize,
            user_field_vocabs: h.user_field_vocabs,
            item_field_vocabs: h.item_field_vocabs,
            position_vocab: h.position_vocab as usize,
        }
    }
}

/// One GAT layer: center/neighbor transforms and the attention vector.
#[derive(Clone, Debug, PartialEq)]
pub struct GatLayerParams {
    pub w_center: Array,
    pub w_neigh: Array,
    pub attn: Array,
}

/// Two stacked layers for one aggregation direction.
#[derive(Clone, Debug, PartialEq)]
pub struct GatSideParams {
    pub layers: [GatLayerParams; 2],
}

/// Short-term block: field embeddings, input projections, and the
/// user-side / item-side temporal GAT stacks.
#[derive(Clone, Debug, PartialEq)]
pub struct ShortTermParams {
    pub user_fields: Vec<Array>,
    pub item_fields: Vec<Array>,
    pub user_proj: Array,
    pub item_proj: Array,
    pub user_agg: GatSideParams,
    pub item_agg: GatSideParams,
}

/// Long-term block: ID embeddings over users and the union item set plus
/// its own GAT stacks.
#[derive(Clone, Debug, PartialEq)]
pub struct LongTermParams {
    pub user_ids: Array,
    pub item_ids: Array,
    pub user_agg: GatSideParams,
    pub item_agg: GatSideParams,
}

/// Fusion + ranking block: gate vectors, the target-item ID table shared by
/// the gate and the scorer, context embeddings, and the DeepFM weights.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionRankParams {
    pub gate_short: Array,
    pub gate_long: Array,
    /// Used instead of the gate by the no-gating ablation.
    pub concat_proj: Array,
    pub target_item: Array,
    pub hour_emb: Array,
    pub pos_emb: Array,
    pub lin_w: Array,
    pub lin_b: Array,
    pub tower_w1: Array,
    pub tower_b1: Array,
    pub tower_w2: Array,
    pub tower_b2: Array,
    pub tower_w3: Array,
    pub tower_b3: Array,
}

/// Parameter partitions; the trainer updates them on different schedules.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Parts {
    pub short: bool,
    pub fusion: bool,
    pub long: bool,
}

impl Parts {
    pub const ALL: Parts = Parts { short: true, fusion: true, long: true };
    /// The meta-learned partitions.
    pub const META: Parts = Parts { short: true, fusion: true, long: false };
    pub const LONG: Parts = Parts { short: false, fusion: false, long: true };
}

/// The full parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub short: ShortTermParams,
    pub fusion: FusionRankParams,
    pub long: LongTermParams,
}

fn embedding(rng: &mut impl Rng, rows: usize, cols: usize) -> Array {
    Array::matrix(rows, cols, (0..rows * cols).map(|_| rng.random_range(-0.05..0.05)).collect())
}

fn fan_in_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Array {
    let b = 1.0 / (cols as f64).sqrt();
    Array::matrix(rows, cols, (0..rows * cols).map(|_| rng.random_range(-b..b)).collect())
}

fn fan_in_vector(rng: &mut impl Rng, n: usize) -> Array {
    let b = 1.0 / (n as f64).sqrt();
    Array::vector((0..n).map(|_| rng.random_range(-b..b)).collect())
}

fn gat_layer_params(rng: &mut impl Rng) -> GatLayerParams {
    GatLayerParams {
        w_center: fan_in_matrix(rng, EMBED_DIM, EMBED_DIM),
        w_neigh: fan_in_matrix(rng, EMBED_DIM, EMBED_DIM),
        attn: fan_in_vector(rng, GATE_DIM),
    }
}

fn gat_side(rng: &mut impl Rng) -> GatSideParams {
    GatSideParams { layers: [gat_layer_params(rng), gat_layer_params(rng)] }
}

impl ModelParams {
    /// Fresh parameters: embeddings uniform in [-0.05, 0.05], weight
    /// matrices fan-in scaled uniform, biases zero.
    pub fn init(dims: ModelDims, seed: u64) -> ModelParams {
        let mut rng = rng_from(mix(seed, 0x9a7a));
        let short = ShortTermParams {
            user_fields: dims
                .user_field_vocabs
                .iter()
                .map(|&v| embedding(&mut rng, v as usize, EMBED_DIM))
                .collect(),
            item_fields: dims
                .item_field_vocabs
                .iter()
                .map(|&v| embedding(&mut rng, v as usize, EMBED_DIM))
                .collect(),
            user_proj: fan_in_matrix(&mut rng, EMBED_DIM, INPUT_CONCAT_DIM),
            item_proj: fan_in_matrix(&mut rng, EMBED_DIM, INPUT_CONCAT_DIM),
            user_agg: gat_side(&mut rng),
            item_agg: gat_side(&mut rng),
        };
        let fusion = FusionRankParams {
            gate_short: fan_in_vector(&mut rng, GATE_DIM),
            gate_long: fan_in_vector(&mut rng, GATE_DIM),
            concat_proj: fan_in_matrix(&mut rng, EMBED_DIM, GATE_DIM),
            target_item: embedding(&mut rng, dims.n_internal_items, EMBED_DIM),
            hour_emb: embedding(&mut rng, 24, EMBED_DIM),
            pos_emb: embedding(&mut rng, dims.position_vocab, EMBED_DIM),
            lin_w: fan_in_vector(&mut rng, TOWER_INPUT),
            lin_b: Array::scalar(0.0),
            tower_w1: fan_in_matrix(&mut rng, TOWER_H1, TOWER_INPUT),
            tower_b1: Array::vector(vec![0.0; TOWER_H1]),
            tower_w2: fan_in_matrix(&mut rng, TOWER_H2, TOWER_H1),
            tower_b2: Array::vector(vec![0.0; TOWER_H2]),
            tower_w3: fan_in_vector(&mut rng, TOWER_H2),
            tower_b3: Array::scalar(0.0),
        };
        let long = LongTermParams {
            user_ids: embedding(&mut rng, dims.n_users, EMBED_DIM),
            item_ids: embedding(&mut rng, dims.n_items, EMBED_DIM),
            user_agg: gat_side(&mut rng),
            item_agg: gat_side(&mut rng),
        };
        ModelParams { dims, short, fusion, long }
    }

    /// Zero parameters of the same shape; scores become exactly 0.5.
    pub fn zeros(dims: ModelDims) -> ModelParams {
        let mut p = ModelParams::init(dims, 0);
        p.for_each_mut(Parts::ALL, &mut |_, a| a.as_mut_slice().iter_mut().for_each(|v| *v = 0.0));
        p
    }

    /// Visit parameters in canonical order (short, fusion, long).
    pub fn for_each(&self, parts: Parts, f: &mut impl FnMut(&str, &Array)) {
        if parts.short {
            let s = &self.short;
            for (i, t) in s.user_fields.iter().enumerate() {
                f(&format!("short.user_field{i}"), t);
            }
            for (i, t) in s.item_fields.iter().enumerate() {
                f(&format!("short.item_field{i}"), t);
            }
            f("short.user_proj", &s.user_proj);
            f("short.item_proj", &s.item_proj);
            for (side, name) in [(&s.user_agg, "user_agg"), (&s.item_agg, "item_agg")] {
                for (l, layer) in side.layers.iter().enumerate() {
                    f(&format!("short.{name}{l}.w_center"), &layer.w_center);
                    f(&format!("short.{name}{l}.w_neigh"), &layer.w_neigh);
                    f(&format!("short.{name}{l}.attn"), &layer.attn);
                }
            }
        }
        if parts.fusion {
            let fu = &self.fusion;
            f("fusion.gate_short", &fu.gate_short);
            f("fusion.gate_long", &fu.gate_long);
            f("fusion.concat_proj", &fu.concat_proj);
            f("fusion.target_item", &fu.target_item);
            f("fusion.hour_emb", &fu.hour_emb);
            f("fusion.pos_emb", &fu.pos_emb);
            f("fusion.lin_w", &fu.lin_w);
            f("fusion.lin_b", &fu.lin_b);
            f("fusion.tower_w1", &fu.tower_w1);
            f("fusion.tower_b1", &fu.tower_b1);
            f("fusion.tower_w2", &fu.tower_w2);
            f("fusion.tower_b2", &fu.tower_b2);
            f("fusion.tower_w3", &fu.tower_w3);
            f("fusion.tower_b3", &fu.tower_b3);
        }
        if parts.long {
            let l = &self.long;
            f("long.user_ids", &l.user_ids);
            f("long.item_ids", &l.item_ids);
            for (side, name) in [(&l.user_agg, "user_agg"), (&l.item_agg, "item_agg")] {
                for (k, layer) in side.layers.iter().enumerate() {
                    f(&format!("long.{name}{k}.w_center"), &layer.w_center);
                    f(&format!("long.{name}{k}.w_neigh"), &layer.w_neigh);
                    f(&format!("long.{name}{k}.attn"), &layer.attn);
                }
            }
        }
    }

    /// Mutable visit; same order as [`Self::for_each`].
    pub fn for_each_mut(&mut self, parts: Parts, f: &mut impl FnMut(&str, &mut Array)) {
        if parts.short {
            let s = &mut self.short;
            for (i, t) in s.user_fields.iter_mut().enumerate() {
                f(&format!("short.user_field{i}"), t);
            }
            for (i, t) in s.item_fields.iter_mut().enumerate() {
                f(&format!("short.item_field{i}"), t);
            }
            f("short.user_proj", &mut s.user_proj);
            f("short.item_proj", &mut s.item_proj);
            for (side, name) in [(&mut s.user_agg, "user_agg"), (&mut s.item_agg, "item_agg")] {
                for (l, layer) in side.layers.iter_mut().enumerate() {
                    f(&format!("short.{name}{l}.w_center"), &mut layer.w_center);
                    f(&format!("short.{name}{l}.w_neigh"), &mut layer.w_neigh);
                    f(&format!("short.{name}{l}.attn"), &mut layer.attn);
                }
            }
        }
        if parts.fusion {
            let fu = &mut self.fusion;
            f("fusion.gate_short", &mut fu.gate_short);
            f("fusion.gate_long", &mut fu.gate_long);
            f("fusion.concat_proj", &mut fu.concat_proj);
            f("fusion.target_item", &mut fu.target_item);
            f("fusion.hour_emb", &mut fu.hour_emb);
            f("fusion.pos_emb", &mut fu.pos_emb);
            f("fusion.lin_w", &mut fu.lin_w);
            f("fusion.lin_b", &mut fu.lin_b);
            f("fusion.tower_w1", &mut fu.tower_w1);
            f("fusion.tower_b1", &mut fu.tower_b1);
            f("fusion.tower_w2", &mut fu.tower_w2);
            f("fusion.tower_b2", &mut fu.tower_b2);
            f("fusion.tower_w3", &mut fu.tower_w3);
            f("fusion.tower_b3", &mut fu.tower_b3);
        }
        if parts.long {
            let l = &mut self.long;
            f("long.user_ids", &mut l.user_ids);
            f("long.item_ids", &mut l.item_ids);
            for (side, name) in [(&mut l.user_agg, "user_agg"), (&mut l.item_agg, "item_agg")] {
                for (k, layer) in side.layers.iter_mut().enumerate() {
                    f(&format!("long.{name}{k}.w_center"), &mut layer.w_center);
                    f(&format!("long.{name}{k}.w_neigh"), &mut layer.w_neigh);
                    f(&format!("long.{name}{k}.attn"), &mut layer.attn);
                }
            }
        }
    }

    pub fn n_params(&self, parts: Parts) -> usize {
        let mut n = 0;
        self.for_each(parts, &mut |_, a| n += a.numel());
        n
    }

    pub fn flatten(&self, parts: Parts) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params(parts));
        self.for_each(parts, &mut |_, a| out.extend_from_slice(a.as_slice()));
        out
    }

    pub fn assign_from_flat(&mut self, parts: Parts, flat: &[f64]) {
        let mut off = 0;
        self.for_each_mut(parts, &mut |_, a| {
            let n = a.numel();
            a.as_mut_slice().copy_from_slice(&flat[off..off + n]);
            off += n;
        });
        assert_eq!(off, flat.len(), "flat parameter length mismatch");
    }

    /// `p -= lr * g` over the given partitions.
    pub fn sgd_step(&mut self, parts: Parts, grads: &GradSet, lr: f64) {
        self.for_each_mut(parts, &mut |name, a| {
            if let Some(g) = grads.get(name) {
                for (p, gv) in a.as_mut_slice().iter_mut().zip(g.iter()) {
                    *p -= lr * gv;
                }
            }
        });
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        let mut bad = None;
        self.for_each(Parts::ALL, &mut |name, a| {
            if bad.is_none() && !a.all_finite() {
                bad = Some(name.to_string());
            }
        });
        match bad {
            None => Ok(()),
            Some(name) => Err(Error::NonFinite { what: format!("{what} ({name})"), coord: None }),
        }
    }
}

/// Named gradients keyed by canonical parameter name. Iteration always goes
/// through the canonical parameter order, never the map.
#[derive(Clone, Debug, Default)]
pub struct GradSet {
    map: HashMap<String, Vec<f64>>,
}

impl GradSet {
    pub fn new() -> Self {
        GradSet::default()
    }

    pub fn get(&self, name: &str) -> Option<&Vec<f64>> {
        self.map.get(name)
    }

    pub fn insert(&mut self, name: String, grad: Vec<f64>) {
        self.map.insert(name, grad);
    }

    /// `self += scale * other` entry-wise.
    pub fn accumulate(&mut self, other: &GradSet, scale: f64, params: &ModelParams, parts: Parts) {
        params.for_each(parts, &mut |name, a| {
            if let Some(g) = other.map.get(name) {
                let slot = self
                    .map
                    .entry(name.to_string())
                    .or_insert_with(|| vec![0.0; a.numel()]);
                for (s, gv) in slot.iter_mut().zip(g.iter()) {
                    *s += scale * gv;
                }
            }
        });
    }

    pub fn flatten(&self, params: &ModelParams, parts: Parts) -> Vec<f64> {
        let mut out = Vec::with_capacity(params.n_params(parts));
        params.for_each(parts, &mut |name, a| match self.map.get(name) {
            Some(g) => out.extend_from_slice(g),
            None => out.extend(std::iter::repeat(0.0).take(a.numel())),
        });
        out
    }

    /// Rebuild a named gradient set from a flat vector in canonical order.
    pub fn from_flat(params: &ModelParams, parts: Parts, flat: &[f64]) -> GradSet {
        let mut out = GradSet::new();
        let mut off = 0;
        params.for_each(parts, &mut |name, a| {
            let n = a.numel();
            out.insert(name.to_string(), flat[off..off + n].to_vec());
            off += n;
        });
        assert_eq!(off, flat.len(), "flat gradient length mismatch");
        out
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}
