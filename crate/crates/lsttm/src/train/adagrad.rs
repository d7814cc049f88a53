//! Adagrad with per-parameter accumulators.

use std::collections::HashMap;

use crate::model::{GradSet, ModelParams, Parts};

pub const ADAGRAD_EPS: f64 = 1e-8;

/// One coordinate-wise update: `acc += g^2; p -= lr * g / (sqrt(acc) + eps)`.
pub fn adagrad_step(param: &mut [f64], grad: &[f64], acc: &mut [f64], lr: f64) {
    debug_assert_eq!(param.len(), grad.len());
    debug_assert_eq!(param.len(), acc.len());
    for i in 0..param.len() {
        let g = grad[i];
        acc[i] += g * g;
        param[i] -= lr * g / (acc[i].sqrt() + ADAGRAD_EPS);
    }
}

/// Accumulators keyed by canonical parameter name. Never iterated directly;
/// updates walk the canonical parameter order.
#[derive(Clone, Debug, Default)]
pub struct AdagradState {
    acc: HashMap<String, Vec<f64>>,
}

impl AdagradState {
    pub fn new() -> Self {
        AdagradState::default()
    }

    pub fn get(&self, name: &str) -> Option<&Vec<f64>> {
        self.acc.get(name)
    }

    pub fn insert(&mut self, name: String, acc: Vec<f64>) {
        self.acc.insert(name, acc);
    }

    /// Apply one Adagrad step over the selected partitions. Parameters
    /// without a gradient entry are untouched and their accumulators keep
    /// their value.
    pub fn step(&mut self, params: &mut ModelParams, parts: Parts, grads: &GradSet, lr: f64) {
        let acc = &mut self.acc;
        params.for_each_mut(parts, &mut |name, a| {
            if let Some(g) = grads.get(name) {
                let slot = acc.entry(name.to_string()).or_insert_with(|| vec![0.0; a.numel()]);
                adagrad_step(a.as_mut_slice(), g, slot, lr);
            }
        });
    }
}
