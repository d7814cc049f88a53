//! Asynchronous training of the long-term graph partition with the
//! random-walk neighbor-similarity loss. Short-term and fusion parameters
//! are never touched here.

use crate::config::Variant;
use crate::error::{Error, Result};
use crate::graph::{InteractionGraph, PathSet};
use crate::model::{neighbor_similarity_loss, path_pair_count, Forward, GradSet, ModelParams, Parts};
use crate::rng::mix3;
use crate::train::{AdagradState, TrainerConfig};

/// Paths per differentiation graph.
const PATH_CHUNK: usize = 1024;

/// Adagrad descent on the neighbor-similarity loss over fresh walk sets per
/// epoch; returns the per-epoch losses. A no-op for the variant that drops
/// graph aggregation.
pub fn train_long_term(
    long_graph: &InteractionGraph,
    params: &mut ModelParams,
    acc: &mut AdagradState,
    cfg: &TrainerConfig,
    variant: Variant,
) -> Result<Vec<f64>> {
    if variant == Variant::NoGatLn || cfg.long_epochs == 0 {
        return Ok(Vec::new());
    }
    if long_graph.n_edges() == 0 {
        return Err(Error::InvalidConfig("long-term graph has no edges".into()));
    }
    let snap = long_graph.snapshot(i64::MAX);
    let candidates = long_graph.nodes();
    let long_seed = cfg.long_sample_seed();

    let mut epoch_losses = Vec::with_capacity(cfg.long_epochs);
    for epoch in 0..cfg.long_epochs {
        let walks = snap.deepwalk_paths(
            cfg.paths_per_node,
            cfg.walk_length,
            mix3(cfg.seed, 0x3a1c, epoch as u64),
        );
        let total_pairs = path_pair_count(&walks);
        if total_pairs == 0 {
            return Err(Error::InvalidConfig("walk set yields no training pairs".into()));
        }

        let mut grads = GradSet::new();
        let mut loss = 0.0;
        for (c, chunk) in walks.paths.chunks(PATH_CHUNK).enumerate() {
            let part = PathSet {
                paths: chunk.to_vec(),
                seed: walks.seed,
                walk_length: walks.walk_length,
            };
            let pairs = path_pair_count(&part);
            if pairs == 0 {
                continue;
            }
            let mut fw = Forward::new(params, None, Some(snap), cfg.k_neighbors, variant, long_seed);
            let l = neighbor_similarity_loss(
                &mut fw,
                &part,
                cfg.negatives_per_pair,
                mix3(cfg.seed, 0x4e60 + epoch as u64, c as u64),
                &candidates,
            )?;
            fw.tape.backward(l)?;
            let w = cfg.lambda_neighbor * pairs as f64 / total_pairs as f64;
            loss += w * fw.tape.value(l).item();
            grads.accumulate(&fw.grads(Parts::LONG), w, params, Parts::LONG);
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite { what: format!("neighbor-similarity loss ({loss})"), coord: None });
        }
        acc.step(params, Parts::LONG, &grads, cfg.outer_lr);
        epoch_losses.push(loss);
    }
    Ok(epoch_losses)
}
