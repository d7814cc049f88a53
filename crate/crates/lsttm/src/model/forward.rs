//! Differentiation-graph construction for the ranking network.
//!
//! A [`Forward`] owns one tape plus per-batch memo tables, so node inputs,
//! layer-one aggregates, and full encoder outputs are computed once per
//! batch no matter how many instances share them; gradients flow through
//! the shared subgraphs by plain accumulation.

use std::collections::HashMap;

use crate::autodiff::{Array, NodeId, Tape};
use crate::config::Variant;
use crate::error::{Error, Result};
use crate::events::{item_fields, user_fields, Instance, ItemId, UserId};
use crate::graph::{GraphSnapshot, NodeRef};
use crate::model::{GradSet, ModelParams, Parts, LEAKY_SLOPE};

/// Day-fixed long-term user vectors, precomputed after asynchronous
/// training. Serving injects them as constants, which is what blocks the
/// meta-gradient from the long-term partition.
#[derive(Clone, Debug, PartialEq)]
pub struct LongTermCache {
    pub user_vecs: Vec<Vec<f64>>,
}

impl LongTermCache {
    /// Encode every user through the long-term GAT (or take raw ID rows for
    /// the no-gat-ln variant) at the given snapshot.
    pub fn build(
        params: &ModelParams,
        long_snap: GraphSnapshot<'_>,
        k: usize,
        variant: Variant,
        long_seed: u64,
    ) -> Result<LongTermCache> {
        if variant == Variant::NoGatLn {
            return Ok(LongTermCache::raw(params));
        }
        let mut fw = Forward::scoring(params, None, Some(long_snap), k, variant, long_seed);
        let mut user_vecs = Vec::with_capacity(params.dims.n_users);
        for u in 0..params.dims.n_users as u32 {
            let id = fw.node_long(NodeRef::User(UserId(u)))?;
            user_vecs.push(fw.tape.value(id).as_slice().to_vec());
        }
        Ok(LongTermCache { user_vecs })
    }

    /// Raw ID-embedding rows, no aggregation.
    pub fn raw(params: &ModelParams) -> LongTermCache {
        let user_vecs =
            (0..params.dims.n_users).map(|u| params.long.user_ids.row(u).to_vec()).collect();
        LongTermCache { user_vecs }
    }
}

/// Where the gate's long-term user vector comes from.
#[derive(Clone, Copy)]
pub enum LongSource<'c> {
    /// Through the long-term encoder on the tape (differentiable into the
    /// long partition; used by its training loss and by gradient checks).
    OnTape,
    /// From the day-fixed cache as a constant leaf.
    Cached(&'c LongTermCache),
}

/// Attention weights over neighbors: softmax over
/// leaky-rectified `attn . [W_c center || W_n neighbor_j]` logits.
///
/// `transformed` must hold `W_n . neighbor_j` for each neighbor, in order.
pub fn gat_attention(
    tape: &mut Tape,
    center: NodeId,
    transformed: &[NodeId],
    w_center: NodeId,
    attn: NodeId,
) -> Result<NodeId> {
    assert!(!transformed.is_empty(), "attention needs at least one neighbor");
    let wc = tape.matmul(w_center, center)?;
    let mut logits = Vec::with_capacity(transformed.len());
    for &wn in transformed {
        let cat = tape.concat(&[wc, wn])?;
        let raw = tape.dot(attn, cat)?;
        logits.push(tape.leaky_relu(raw, LEAKY_SLOPE)?);
    }
    let stacked = tape.concat(&logits)?;
    tape.softmax(stacked)
}

/// One GAT layer: attention-weighted sum of transformed neighbors under a
/// leaky-rectifier. An empty neighbor set falls back to the center vector.
pub fn gat_layer(
    tape: &mut Tape,
    center: NodeId,
    neighbors: &[NodeId],
    w_center: NodeId,
    w_neigh: NodeId,
    attn: NodeId,
) -> Result<NodeId> {
    if neighbors.is_empty() {
        return Ok(center);
    }
    let transformed: Vec<NodeId> =
        neighbors.iter().map(|&x| tape.matmul(w_neigh, x)).collect::<Result<_>>()?;
    let weights = gat_attention(tape, center, &transformed, w_center, attn)?;
    let cols = tape.stack_cols(&transformed)?;
    let agg = tape.matmul(cols, weights)?;
    tape.leaky_relu(agg, LEAKY_SLOPE)
}

/// Concatenate the six field embeddings and project to the working width.
pub fn node_input(
    tape: &mut Tape,
    fields: &[usize; 6],
    tables: &[NodeId],
    proj: NodeId,
    vocabs: &[u32; 6],
) -> Result<NodeId> {
    for (f, (&id, &vocab)) in fields.iter().zip(vocabs.iter()).enumerate() {
        if id >= vocab as usize {
            return Err(Error::OutOfVocab { field: f, id, vocab: vocab as usize });
        }
    }
    let rows: Vec<NodeId> = fields
        .iter()
        .zip(tables.iter())
        .map(|(&id, &t)| tape.gather_row(t, id))
        .collect::<Result<_>>()?;
    let cat = tape.concat(&rows)?;
    tape.matmul(proj, cat)
}

/// Item-conditioned softmax gate over the two user vectors.
/// Returns `(fused, weights)`.
pub fn gate_fuse(
    tape: &mut Tape,
    u_short: NodeId,
    u_long: NodeId,
    d_target: NodeId,
    gate_short: NodeId,
    gate_long: NodeId,
) -> Result<(NodeId, NodeId)> {
    let cat_s = tape.concat(&[u_short, d_target])?;
    let cat_l = tape.concat(&[u_long, d_target])?;
    let logit_s = tape.dot(gate_short, cat_s)?;
    let logit_l = tape.dot(gate_long, cat_l)?;
    let logits = tape.concat(&[logit_s, logit_l])?;
    let weights = tape.softmax(logits)?;
    let cols = tape.stack_cols(&[u_short, u_long])?;
    let fused = tape.matmul(cols, weights)?;
    Ok((fused, weights))
}

/// Bound DeepFM parameter nodes.
pub struct DeepFmNodes {
    pub lin_w: NodeId,
    pub lin_b: NodeId,
    pub tower_w1: NodeId,
    pub tower_b1: NodeId,
    pub tower_w2: NodeId,
    pub tower_b2: NodeId,
    pub tower_w3: NodeId,
    pub tower_b3: NodeId,
}

/// First-order term + pairwise-dot second-order term + deep tower, squashed
/// to a click probability.
pub fn deepfm_score(
    tape: &mut Tape,
    fields: &[NodeId],
    fm: &DeepFmNodes,
) -> Result<NodeId> {
    let cat = tape.concat(fields)?;
    let lin = tape.dot(fm.lin_w, cat)?;
    let first = tape.add(lin, fm.lin_b)?;

    let mut pair_terms = Vec::new();
    for i in 0..fields.len() {
        for j in i + 1..fields.len() {
            pair_terms.push(tape.dot(fields[i], fields[j])?);
        }
    }
    let pairs = tape.concat(&pair_terms)?;
    let second = tape.sum(pairs)?;

    let z1 = tape.matmul(fm.tower_w1, cat)?;
    let z1b = tape.add(z1, fm.tower_b1)?;
    let h1 = tape.leaky_relu(z1b, LEAKY_SLOPE)?;
    let z2 = tape.matmul(fm.tower_w2, h1)?;
    let z2b = tape.add(z2, fm.tower_b2)?;
    let h2 = tape.leaky_relu(z2b, LEAKY_SLOPE)?;
    let z3 = tape.dot(fm.tower_w3, h2)?;
    let tower = tape.add(z3, fm.tower_b3)?;

    let fo = tape.add(first, second)?;
    let logit = tape.add(fo, tower)?;
    tape.sigmoid(logit)
}

struct BoundGatLayer {
    w_center: NodeId,
    w_neigh: NodeId,
    attn: NodeId,
}

struct BoundSide {
    layers: [BoundGatLayer; 2],
}

struct Bound {
    named: Vec<(String, NodeId)>,
    user_fields: Vec<NodeId>,
    item_fields: Vec<NodeId>,
    user_proj: NodeId,
    item_proj: NodeId,
    short_user: BoundSide,
    short_item: BoundSide,
    long_user_ids: NodeId,
    long_item_ids: NodeId,
    long_user: BoundSide,
    long_item: BoundSide,
    gate_short: NodeId,
    gate_long: NodeId,
    concat_proj: NodeId,
    target_item: NodeId,
    hour_emb: NodeId,
    pos_emb: NodeId,
    deepfm: DeepFmNodes,
}

impl Bound {
    fn new(tape: &mut Tape, params: &ModelParams) -> Bound {
        let mut named = Vec::new();
        params.for_each(Parts::ALL, &mut |name, a| {
            let id = tape.leaf(a.clone());
            named.push((name.to_string(), id));
        });
        let by_name: HashMap<&str, NodeId> =
            named.iter().map(|(n, id)| (n.as_str(), *id)).collect();
        let get = |n: &str| *by_name.get(n).unwrap_or_else(|| panic!("unbound param {n}"));
        let side = |prefix: &str| BoundSide {
            layers: [0, 1].map(|l| BoundGatLayer {
                w_center: get(&format!("{prefix}{l}.w_center")),
                w_neigh: get(&format!("{prefix}{l}.w_neigh")),
                attn: get(&format!("{prefix}{l}.attn")),
            }),
        };
        Bound {
            user_fields: (0..6).map(|i| get(&format!("short.user_field{i}"))).collect(),
            item_fields: (0..6).map(|i| get(&format!("short.item_field{i}"))).collect(),
            user_proj: get("short.user_proj"),
            item_proj: get("short.item_proj"),
            short_user: side("short.user_agg"),
            short_item: side("short.item_agg"),
            long_user_ids: get("long.user_ids"),
            long_item_ids: get("long.item_ids"),
            long_user: side("long.user_agg"),
            long_item: side("long.item_agg"),
            gate_short: get("fusion.gate_short"),
            gate_long: get("fusion.gate_long"),
            concat_proj: get("fusion.concat_proj"),
            target_item: get("fusion.target_item"),
            hour_emb: get("fusion.hour_emb"),
            pos_emb: get("fusion.pos_emb"),
            deepfm: DeepFmNodes {
                lin_w: get("fusion.lin_w"),
                lin_b: get("fusion.lin_b"),
                tower_w1: get("fusion.tower_w1"),
                tower_b1: get("fusion.tower_b1"),
                tower_w2: get("fusion.tower_w2"),
                tower_b2: get("fusion.tower_b2"),
                tower_w3: get("fusion.tower_w3"),
                tower_b3: get("fusion.tower_b3"),
            },
            named,
        }
    }
}

fn node_tag(n: NodeRef) -> u64 {
    match n {
        NodeRef::User(u) => (1u64 << 32) | u.0 as u64,
        NodeRef::Item(d) => (2u64 << 32) | d.0 as u64,
    }
}

/// One forward-pass context over a parameter set and graph snapshots.
pub struct Forward<'p, 'g> {
    pub tape: Tape,
    params: &'p ModelParams,
    short_snap: Option<GraphSnapshot<'g>>,
    long_snap: Option<GraphSnapshot<'g>>,
    k: usize,
    variant: Variant,
    long_seed: u64,
    bound: Bound,
    ni_user: HashMap<u32, NodeId>,
    ni_item: HashMap<u32, NodeId>,
    short_item_l1: HashMap<u32, NodeId>,
    short_user_out: HashMap<u32, NodeId>,
    long_nbrs: HashMap<NodeRef, Vec<NodeRef>>,
    long_l1: HashMap<NodeRef, NodeId>,
    long_out: HashMap<NodeRef, NodeId>,
    long_const: HashMap<u32, NodeId>,
}

impl<'p, 'g> Forward<'p, 'g> {
    pub fn new(
        params: &'p ModelParams,
        short_snap: Option<GraphSnapshot<'g>>,
        long_snap: Option<GraphSnapshot<'g>>,
        k: usize,
        variant: Variant,
        long_seed: u64,
    ) -> Self {
        Self::with_tape(Tape::new(), params, short_snap, long_snap, k, variant, long_seed)
    }

    /// Evaluation-only context on a tape without gradient storage.
    pub fn scoring(
        params: &'p ModelParams,
        short_snap: Option<GraphSnapshot<'g>>,
        long_snap: Option<GraphSnapshot<'g>>,
        k: usize,
        variant: Variant,
        long_seed: u64,
    ) -> Self {
        Self::with_tape(Tape::forward_only(), params, short_snap, long_snap, k, variant, long_seed)
    }

    fn with_tape(
        mut tape: Tape,
        params: &'p ModelParams,
        short_snap: Option<GraphSnapshot<'g>>,
        long_snap: Option<GraphSnapshot<'g>>,
        k: usize,
        variant: Variant,
        long_seed: u64,
    ) -> Self {
        let bound = Bound::new(&mut tape, params);
        Forward {
            tape,
            params,
            short_snap,
            long_snap,
            k,
            variant,
            long_seed,
            bound,
            ni_user: HashMap::new(),
            ni_item: HashMap::new(),
            short_item_l1: HashMap::new(),
            short_user_out: HashMap::new(),
            long_nbrs: HashMap::new(),
            long_l1: HashMap::new(),
            long_out: HashMap::new(),
            long_const: HashMap::new(),
        }
    }

    pub fn params(&self) -> &ModelParams {
        self.params
    }

    /// Field-embedding input vector for a user.
    pub fn node_input_user(&mut self, u: UserId) -> Result<NodeId> {
        if let Some(&id) = self.ni_user.get(&u.0) {
            return Ok(id);
        }
        let fields = user_fields(u, &self.params.dims.user_field_vocabs);
        let id = node_input(
            &mut self.tape,
            &fields,
            &self.bound.user_fields,
            self.bound.user_proj,
            &self.params.dims.user_field_vocabs,
        )?;
        self.ni_user.insert(u.0, id);
        Ok(id)
    }

    /// Field-embedding input vector for an (internal) item.
    pub fn node_input_item(&mut self, d: ItemId) -> Result<NodeId> {
        if let Some(&id) = self.ni_item.get(&d.0) {
            return Ok(id);
        }
        let fields = item_fields(d, &self.params.dims.item_field_vocabs);
        let id = node_input(
            &mut self.tape,
            &fields,
            &self.bound.item_fields,
            self.bound.item_proj,
            &self.params.dims.item_field_vocabs,
        )?;
        self.ni_item.insert(d.0, id);
        Ok(id)
    }

    fn short_snap(&self) -> GraphSnapshot<'g> {
        self.short_snap.expect("short-term snapshot not provided")
    }

    fn long_snap(&self) -> GraphSnapshot<'g> {
        self.long_snap.expect("long-term snapshot not provided")
    }

    /// Layer-one aggregate of an item over its most recent users.
    fn short_item_l1(&mut self, d: ItemId) -> Result<NodeId> {
        if let Some(&id) = self.short_item_l1.get(&d.0) {
            return Ok(id);
        }
        let users = self.short_snap().temporal_neighbors(NodeRef::Item(d), self.k);
        let center = self.node_input_item(d)?;
        let mut nbrs = Vec::with_capacity(users.len());
        for n in users {
            if let NodeRef::User(u) = n {
                nbrs.push(self.node_input_user(u)?);
            }
        }
        let layer = &self.bound.short_item.layers[0];
        let (wc, wn, at) = (layer.w_center, layer.w_neigh, layer.attn);
        let id = gat_layer(&mut self.tape, center, &nbrs, wc, wn, at)?;
        self.short_item_l1.insert(d.0, id);
        Ok(id)
    }

    /// Two-layer temporal GAT user encoding; cold users fall back to their
    /// input embedding, and the no-gat-ln variant returns raw inputs.
    pub fn user_short(&mut self, u: UserId) -> Result<NodeId> {
        if let Some(&id) = self.short_user_out.get(&u.0) {
            return Ok(id);
        }
        let u0 = self.node_input_user(u)?;
        let out = if self.variant == Variant::NoGatLn {
            u0
        } else {
            let items = self.short_snap().temporal_neighbors(NodeRef::User(u), self.k);
            if items.is_empty() {
                u0
            } else {
                let mut nbrs0 = Vec::with_capacity(items.len());
                let mut nbrs1 = Vec::with_capacity(items.len());
                for n in &items {
                    if let NodeRef::Item(d) = n {
                        nbrs0.push(self.node_input_item(*d)?);
                        nbrs1.push(self.short_item_l1(*d)?);
                    }
                }
                let l1 = &self.bound.short_user.layers[0];
                let (wc, wn, at) = (l1.w_center, l1.w_neigh, l1.attn);
                let u1 = gat_layer(&mut self.tape, u0, &nbrs0, wc, wn, at)?;
                let l2 = &self.bound.short_user.layers[1];
                let (wc, wn, at) = (l2.w_center, l2.w_neigh, l2.attn);
                gat_layer(&mut self.tape, u1, &nbrs1, wc, wn, at)?
            }
        };
        self.short_user_out.insert(u.0, out);
        Ok(out)
    }

    fn long_id_emb(&mut self, n: NodeRef) -> Result<NodeId> {
        match n {
            NodeRef::User(u) => self.tape.gather_row(self.bound.long_user_ids, u.0 as usize),
            NodeRef::Item(d) => self.tape.gather_row(self.bound.long_item_ids, d.0 as usize),
        }
    }

    /// The node's sampled neighbor set; one fixed sample per node per run.
    fn long_neighbors(&mut self, n: NodeRef) -> Vec<NodeRef> {
        if let Some(v) = self.long_nbrs.get(&n) {
            return v.clone();
        }
        let seed = crate::rng::mix(self.long_seed, node_tag(n));
        let v = self.long_snap().uniform_neighbors(n, self.k, seed);
        self.long_nbrs.insert(n, v.clone());
        v
    }

    fn long_l1(&mut self, n: NodeRef) -> Result<NodeId> {
        if let Some(&id) = self.long_l1.get(&n) {
            return Ok(id);
        }
        let nbrs = self.long_neighbors(n);
        let center = self.long_id_emb(n)?;
        let mut xs = Vec::with_capacity(nbrs.len());
        for m in &nbrs {
            xs.push(self.long_id_emb(*m)?);
        }
        let side = match n {
            NodeRef::User(_) => &self.bound.long_user,
            NodeRef::Item(_) => &self.bound.long_item,
        };
        let l = &side.layers[0];
        let (wc, wn, at) = (l.w_center, l.w_neigh, l.attn);
        let id = gat_layer(&mut self.tape, center, &xs, wc, wn, at)?;
        self.long_l1.insert(n, id);
        Ok(id)
    }

    /// Two-layer long-term encoding of any node, on the tape. Isolated
    /// nodes fall back to their ID embedding.
    pub fn node_long(&mut self, n: NodeRef) -> Result<NodeId> {
        if let Some(&id) = self.long_out.get(&n) {
            return Ok(id);
        }
        let x0 = self.long_id_emb(n)?;
        let out = if self.variant == Variant::NoGatLn {
            x0
        } else {
            let nbrs = self.long_neighbors(n);
            if nbrs.is_empty() {
                x0
            } else {
                let mut nbrs1 = Vec::with_capacity(nbrs.len());
                for m in &nbrs {
                    nbrs1.push(self.long_l1(*m)?);
                }
                let x1 = self.long_l1(n)?;
                let side = match n {
                    NodeRef::User(_) => &self.bound.long_user,
                    NodeRef::Item(_) => &self.bound.long_item,
                };
                let l2 = &side.layers[1];
                let (wc, wn, at) = (l2.w_center, l2.w_neigh, l2.attn);
                gat_layer(&mut self.tape, x1, &nbrs1, wc, wn, at)?
            }
        };
        self.long_out.insert(n, out);
        Ok(out)
    }

    fn user_long(&mut self, u: UserId, source: &LongSource<'_>) -> Result<NodeId> {
        match source {
            LongSource::OnTape => self.node_long(NodeRef::User(u)),
            LongSource::Cached(cache) => {
                if let Some(&id) = self.long_const.get(&u.0) {
                    return Ok(id);
                }
                let vec = cache
                    .user_vecs
                    .get(u.0 as usize)
                    .unwrap_or_else(|| panic!("user {} missing from long-term cache", u.0));
                let id = self.tape.leaf(Array::vector(vec.clone()));
                self.long_const.insert(u.0, id);
                Ok(id)
            }
        }
    }

    /// Click probability for one instance.
    pub fn score_instance(&mut self, inst: &Instance, long: &LongSource<'_>) -> Result<NodeId> {
        let u_s = self.user_short(inst.user)?;
        let u_l = self.user_long(inst.user, long)?;
        let d_s = self.tape.gather_row(self.bound.target_item, inst.item.0 as usize)?;
        let fused = if self.variant == Variant::NoGating {
            let cat = self.tape.concat(&[u_s, u_l])?;
            self.tape.matmul(self.bound.concat_proj, cat)?
        } else {
            let (fused, _) = gate_fuse(
                &mut self.tape,
                u_s,
                u_l,
                d_s,
                self.bound.gate_short,
                self.bound.gate_long,
            )?;
            fused
        };
        let hour = self.tape.gather_row(self.bound.hour_emb, inst.hour as usize)?;
        let pos = self.tape.gather_row(self.bound.pos_emb, inst.position as usize)?;
        deepfm_score(&mut self.tape, &[fused, d_s, hour, pos], &self.bound.deepfm)
    }

    /// Gate weights and fused vector for one user/item pair (inspection and
    /// tests).
    pub fn fuse_user(
        &mut self,
        u: UserId,
        d: ItemId,
        long: &LongSource<'_>,
    ) -> Result<(NodeId, NodeId)> {
        let u_s = self.user_short(u)?;
        let u_l = self.user_long(u, long)?;
        let d_s = self.tape.gather_row(self.bound.target_item, d.0 as usize)?;
        gate_fuse(&mut self.tape, u_s, u_l, d_s, self.bound.gate_short, self.bound.gate_long)
    }

    /// Extract parameter gradients after `backward`, keyed by canonical
    /// parameter names and filtered to the requested partitions.
    pub fn grads(&self, parts: Parts) -> GradSet {
        let mut out = GradSet::new();
        for (name, id) in &self.bound.named {
            let keep = (parts.short && name.starts_with("short."))
                || (parts.fusion && name.starts_with("fusion."))
                || (parts.long && name.starts_with("long."));
            if keep {
                out.insert(name.clone(), self.tape.grad(*id).to_vec());
            }
        }
        out
    }

    /// Embedding node for a path endpoint in the neighbor-similarity loss.
    pub fn path_embed(&mut self, n: NodeRef) -> Result<NodeId> {
        self.node_long(n)
    }
}
