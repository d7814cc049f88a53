//! Training losses: cross entropy over click labels and the random-walk
//! neighbor-similarity loss for the long-term graph.

use rand::Rng;

use crate::autodiff::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::graph::{NodeRef, PathSet};
use crate::rng::rng_from;

/// Mean negative log likelihood over clicked and unclicked instances:
/// `-(1/N) (sum_clicked ln p + sum_unclicked ln (1-p))`.
///
/// Every probability must lie strictly inside (0,1); anything else is a
/// modeling bug and is rejected rather than silently clamped.
pub fn ce_loss(tape: &mut Tape, scored: &[(NodeId, bool)]) -> Result<NodeId> {
    assert!(!scored.is_empty(), "cross entropy over an empty batch");
    let one = tape.scalar(1.0);
    let mut terms = Vec::with_capacity(scored.len());
    for &(p, clicked) in scored {
        let v = tape.value(p).item();
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::InvalidProbability(v));
        }
        let term = if clicked {
            tape.ln(p)?
        } else {
            let neg = tape.scale(p, -1.0)?;
            let q = tape.add(one, neg)?;
            tape.ln(q)?
        };
        terms.push(term);
    }
    let stacked = tape.concat(&terms)?;
    let total = tape.sum(stacked)?;
    tape.scale(total, -1.0 / scored.len() as f64)
}

/// Supplies tape nodes for path endpoints; implemented by the model's
/// forward context (long-term encoder) and by fixtures in tests.
pub trait PathEmbed {
    fn tape_mut(&mut self) -> &mut Tape;
    fn embed(&mut self, n: NodeRef) -> Result<NodeId>;
}

impl PathEmbed for super::Forward<'_, '_> {
    fn tape_mut(&mut self) -> &mut Tape {
        &mut self.tape
    }

    fn embed(&mut self, n: NodeRef) -> Result<NodeId> {
        self.path_embed(n)
    }
}

/// Positive pairs in a path set: position pairs i < j whose nodes differ
/// (walks may revisit a node).
pub fn path_pair_count(paths: &PathSet) -> usize {
    let mut count = 0;
    for path in &paths.paths {
        for i in 0..path.len() {
            for j in i + 1..path.len() {
                if path[i] != path[j] {
                    count += 1;
                }
            }
        }
    }
    count
}

/// Log-sigmoid agreement between embeddings of nodes co-occurring on random
/// walks, averaged over positive pairs:
///
/// `-(1/|pairs|) sum_paths sum_{i<j} [ln s(q_i . q_j) + sum_neg ln s(-q_i . n)]`
///
/// With `negatives_per_pair = 0` the bracket reduces to the attractive term
/// alone.
pub fn neighbor_similarity_loss(
    ctx: &mut impl PathEmbed,
    paths: &PathSet,
    negatives_per_pair: usize,
    seed: u64,
    candidates: &[NodeRef],
) -> Result<NodeId> {
    let mut rng = rng_from(seed);
    let mut terms = Vec::new();
    let mut pair_count = 0usize;
    for path in &paths.paths {
        for i in 0..path.len() {
            for j in i + 1..path.len() {
                if path[i] == path[j] {
                    continue;
                }
                let qi = ctx.embed(path[i])?;
                let qj = ctx.embed(path[j])?;
                let tape = ctx.tape_mut();
                let d = tape.dot(qi, qj)?;
                let s = tape.sigmoid(d)?;
                let pos = tape.ln(s)?;
                terms.push(pos);
                pair_count += 1;
                for _ in 0..negatives_per_pair {
                    let cand = candidates[rng.random_range(0..candidates.len())];
                    let nv = ctx.embed(cand)?;
                    let tape = ctx.tape_mut();
                    let dn = tape.dot(qi, nv)?;
                    let neg = tape.scale(dn, -1.0)?;
                    let sn = tape.sigmoid(neg)?;
                    terms.push(tape.ln(sn)?);
                }
            }
        }
    }
    if pair_count == 0 {
        return Err(Error::InvalidConfig("neighbor-similarity loss over zero pairs".into()));
    }
    let tape = ctx.tape_mut();
    let stacked = tape.concat(&terms)?;
    let total = tape.sum(stacked)?;
    tape.scale(total, -1.0 / pair_count as f64)
}
