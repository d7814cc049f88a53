//! Behavioral checks of the network building blocks: attention, layer
//! aggregation, input embedding, the fusion gate, and the DeepFM scorer.

mod common;

use common::*;
use lsttm::autodiff::{sigmoid, Array, Tape};
use lsttm::config::Variant;
use lsttm::events::{item_fields, user_fields, ItemId, UserId};
use lsttm::graph::NodeRef;
use lsttm::model::{
    deepfm_score, gat_attention, gat_layer, gate_fuse, node_input, DeepFmNodes, Forward,
    LongSource, LongTermCache, ModelParams, Parts, EMBED_DIM, LEAKY_SLOPE,
};
use lsttm::rng::rng_from;
use rand::Rng;

fn identity16() -> Array {
    let mut m = vec![0.0; EMBED_DIM * EMBED_DIM];
    for i in 0..EMBED_DIM {
        m[i * EMBED_DIM + i] = 1.0;
    }
    Array::matrix(EMBED_DIM, EMBED_DIM, m)
}

fn rand_vec(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

#[test]
fn attention_singleton_is_one() {
    let mut t = Tape::new();
    let mut rng = rng_from(3);
    let center = t.leaf(Array::vector(rand_vec(&mut rng, 16, -1.0, 1.0)));
    let wc = t.leaf(identity16());
    let attn = t.leaf(Array::vector(rand_vec(&mut rng, 32, -1.0, 1.0)));
    let transformed = vec![t.leaf(Array::vector(rand_vec(&mut rng, 16, -1.0, 1.0)))];
    let w = gat_attention(&mut t, center, &transformed, wc, attn).unwrap();
    assert_eq!(t.value(w).as_slice(), &[1.0]);
}

#[test]
fn attention_identical_neighbors_split_evenly() {
    let mut t = Tape::new();
    let mut rng = rng_from(4);
    let center = t.leaf(Array::vector(rand_vec(&mut rng, 16, -1.0, 1.0)));
    let wc = t.leaf(identity16());
    let attn = t.leaf(Array::vector(rand_vec(&mut rng, 32, -1.0, 1.0)));
    let shared = Array::vector(rand_vec(&mut rng, 16, -1.0, 1.0));
    let transformed: Vec<_> = (0..4).map(|_| t.leaf(shared.clone())).collect();
    let w = gat_attention(&mut t, center, &transformed, wc, attn).unwrap();
    for &v in t.value(w).iter() {
        assert!((v - 0.25).abs() < 1e-15);
    }
}

#[test]
fn attention_matches_softmax_of_logits_oracle() {
    for seed in 0..20u64 {
        let mut rng = rng_from(100 + seed);
        let center_v = rand_vec(&mut rng, 16, -1.0, 1.0);
        let wc_v = rand_vec(&mut rng, 256, -0.5, 0.5);
        let attn_v = rand_vec(&mut rng, 32, -1.0, 1.0);
        let neighbors: Vec<Vec<f64>> = (0..5).map(|_| rand_vec(&mut rng, 16, -1.0, 1.0)).collect();

        let mut t = Tape::new();
        let center = t.leaf(Array::vector(center_v.clone()));
        let wc = t.leaf(Array::matrix(16, 16, wc_v.clone()));
        let attn = t.leaf(Array::vector(attn_v.clone()));
        let transformed: Vec<_> =
            neighbors.iter().map(|n| t.leaf(Array::vector(n.clone()))).collect();
        let w = gat_attention(&mut t, center, &transformed, wc, attn).unwrap();

        // independent recomputation with plain loops
        let mut wc_center = vec![0.0; 16];
        for i in 0..16 {
            for j in 0..16 {
                wc_center[i] += wc_v[i * 16 + j] * center_v[j];
            }
        }
        let logits: Vec<f64> = neighbors
            .iter()
            .map(|n| {
                let mut dot = 0.0;
                for i in 0..16 {
                    dot += attn_v[i] * wc_center[i];
                    dot += attn_v[16 + i] * n[i];
                }
                if dot >= 0.0 {
                    dot
                } else {
                    LEAKY_SLOPE * dot
                }
            })
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let sum: f64 = t.value(w).iter().sum();
        assert!((sum - 1.0).abs() < 1e-10);
        for (got, e) in t.value(w).iter().zip(exps.iter()) {
            assert!((got - e / z).abs() < 1e-10);
        }
    }
}

#[test]
fn layer_empty_neighbors_returns_center() {
    let mut t = Tape::new();
    let mut rng = rng_from(5);
    let center = t.leaf(Array::vector(rand_vec(&mut rng, 16, -1.0, 1.0)));
    let wc = t.leaf(identity16());
    let wn = t.leaf(identity16());
    let attn = t.leaf(Array::vector(vec![0.0; 32]));
    let out = gat_layer(&mut t, center, &[], wc, wn, attn).unwrap();
    assert_eq!(out, center);
}

#[test]
fn layer_single_positive_neighbor_passes_through_identity() {
    let mut t = Tape::new();
    let neighbor = Array::vector((0..16).map(|i| 0.1 + i as f64 / 16.0).collect());
    let center = t.leaf(Array::vector(vec![0.5; 16]));
    let wc = t.leaf(identity16());
    let wn = t.leaf(identity16());
    let attn = t.leaf(Array::vector(vec![0.3; 32]));
    let n = t.leaf(neighbor.clone());
    let out = gat_layer(&mut t, center, &[n], wc, wn, attn).unwrap();
    assert_eq!(t.value(out), &neighbor);
}

#[test]
fn layer_matches_dense_algebra_oracle() {
    for seed in 0..20u64 {
        let mut rng = rng_from(300 + seed);
        let center_v = rand_vec(&mut rng, 16, -1.0, 1.0);
        let wc_v = rand_vec(&mut rng, 256, -0.4, 0.4);
        let wn_v = rand_vec(&mut rng, 256, -0.4, 0.4);
        let attn_v = rand_vec(&mut rng, 32, -0.8, 0.8);
        let neighbors: Vec<Vec<f64>> = (0..4).map(|_| rand_vec(&mut rng, 16, -1.0, 1.0)).collect();

        let mut t = Tape::new();
        let center = t.leaf(Array::vector(center_v.clone()));
        let wc = t.leaf(Array::matrix(16, 16, wc_v.clone()));
        let wn = t.leaf(Array::matrix(16, 16, wn_v.clone()));
        let attn = t.leaf(Array::vector(attn_v.clone()));
        let ns: Vec<_> = neighbors.iter().map(|n| t.leaf(Array::vector(n.clone()))).collect();
        let out = gat_layer(&mut t, center, &ns, wc, wn, attn).unwrap();

        let matvec = |m: &[f64], v: &[f64]| -> Vec<f64> {
            (0..16).map(|i| (0..16).map(|j| m[i * 16 + j] * v[j]).sum()).collect()
        };
        let leaky = |x: f64| if x >= 0.0 { x } else { LEAKY_SLOPE * x };
        let wcc = matvec(&wc_v, &center_v);
        let transformed: Vec<Vec<f64>> = neighbors.iter().map(|n| matvec(&wn_v, n)).collect();
        let logits: Vec<f64> = transformed
            .iter()
            .map(|tr| {
                let mut d = 0.0;
                for i in 0..16 {
                    d += attn_v[i] * wcc[i] + attn_v[16 + i] * tr[i];
                }
                leaky(d)
            })
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let want: Vec<f64> = (0..16)
            .map(|i| {
                let s: f64 =
                    transformed.iter().zip(exps.iter()).map(|(tr, e)| e / z * tr[i]).sum();
                leaky(s)
            })
            .collect();
        for (g, w) in t.value(out).iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-10, "seed {seed}");
        }
    }
}

#[test]
fn layer_is_permutation_invariant() {
    let mut rng = rng_from(7);
    let center_v = rand_vec(&mut rng, 16, -1.0, 1.0);
    let wc_v = rand_vec(&mut rng, 256, -0.4, 0.4);
    let wn_v = rand_vec(&mut rng, 256, -0.4, 0.4);
    let attn_v = rand_vec(&mut rng, 32, -0.8, 0.8);
    let neighbors: Vec<Vec<f64>> = (0..5).map(|_| rand_vec(&mut rng, 16, -1.0, 1.0)).collect();

    let run = |order: &[usize]| -> Vec<f64> {
        let mut t = Tape::new();
        let center = t.leaf(Array::vector(center_v.clone()));
        let wc = t.leaf(Array::matrix(16, 16, wc_v.clone()));
        let wn = t.leaf(Array::matrix(16, 16, wn_v.clone()));
        let attn = t.leaf(Array::vector(attn_v.clone()));
        let ns: Vec<_> =
            order.iter().map(|&i| t.leaf(Array::vector(neighbors[i].clone()))).collect();
        let out = gat_layer(&mut t, center, &ns, wc, wn, attn).unwrap();
        t.value(out).as_slice().to_vec()
    };
    let a = run(&[0, 1, 2, 3, 4]);
    let b = run(&[3, 0, 4, 2, 1]);
    for (x, y) in a.iter().zip(b.iter()) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn node_input_zero_tables_and_oracle() {
    let dims = toy_dims();
    let zero = ModelParams::zeros(dims.clone());
    let snap_src = toy_world(1);
    let snap = snap_src.short.snapshot(i64::MAX);
    let mut fw = Forward::new(&zero, Some(snap), None, 3, Variant::Full, 1);
    let id = fw.node_input_user(UserId(0)).unwrap();
    assert!(fw.tape.value(id).iter().all(|&v| v == 0.0));

    // random parameters: independent dense recomputation
    let params = ModelParams::init(dims.clone(), 9);
    let mut fw = Forward::new(&params, Some(snap), None, 3, Variant::Full, 1);
    let id = fw.node_input_item(ItemId(2)).unwrap();
    let fields = item_fields(ItemId(2), &dims.item_field_vocabs);
    let mut cat = Vec::with_capacity(96);
    for (f, &v) in fields.iter().enumerate() {
        cat.extend_from_slice(params.short.item_fields[f].row(v));
    }
    let proj = params.short.item_proj.as_slice();
    let want: Vec<f64> = (0..16).map(|i| (0..96).map(|j| proj[i * 96 + j] * cat[j]).sum()).collect();
    for (g, w) in fw.tape.value(id).iter().zip(want.iter()) {
        assert!((g - w).abs() < 1e-12);
    }

    // out-of-vocabulary rejection
    let mut t = Tape::new();
    let tables: Vec<_> = (0..6).map(|_| t.leaf(Array::matrix(2, 16, vec![0.0; 32]))).collect();
    let proj = t.leaf(Array::matrix(16, 96, vec![0.0; 1536]));
    let err = node_input(&mut t, &[0, 0, 5, 0, 0, 0], &tables, proj, &[2; 6]).unwrap_err();
    assert!(err.to_string().contains("field 2"), "{err}");
}

#[test]
fn cold_user_short_encoding_falls_back_to_input() {
    let w = toy_world(2);
    // cutoff before any event: every node is cold
    let snap = w.short.snapshot(-1);
    let mut fw = Forward::new(&w.params, Some(snap), None, w.k, Variant::Full, w.long_seed);
    let enc = fw.user_short(UserId(0)).unwrap();
    let raw = fw.node_input_user(UserId(0)).unwrap();
    assert_eq!(fw.tape.value(enc), fw.tape.value(raw));
}

#[test]
fn single_edge_two_hop_closed_form() {
    // one user, one item, identity weights: u_s = leaky(leaky(input(u)))
    let header = toy_header();
    let log = lsttm::events::EventLog {
        header: header.clone(),
        rows: vec![ev(0, 0, 0, 10, lsttm::events::Source::Internal, true)],
    };
    let short =
        lsttm::graph::InteractionGraph::from_events(lsttm::graph::GraphKind::ShortTerm, &log.rows);
    let mut params = ModelParams::init(toy_dims(), 5);
    for side in [&mut params.short.user_agg, &mut params.short.item_agg] {
        for layer in side.layers.iter_mut() {
            layer.w_center = identity16();
            layer.w_neigh = identity16();
        }
    }
    let snap = short.snapshot(i64::MAX);
    let mut fw = Forward::new(&params, Some(snap), None, 3, Variant::Full, 1);
    let enc = fw.user_short(UserId(0)).unwrap();
    let raw = fw.node_input_user(UserId(0)).unwrap();
    let leaky = |x: f64| if x >= 0.0 { x } else { LEAKY_SLOPE * x };
    let want: Vec<f64> = fw.tape.value(raw).iter().map(|&v| leaky(leaky(v))).collect();
    for (g, w) in fw.tape.value(enc).iter().zip(want.iter()) {
        assert!((g - w).abs() < 1e-12);
    }
}

#[test]
fn long_encoding_is_seed_stable_and_isolated_nodes_fall_back() {
    let w = toy_world(3);
    let run = |seed: u64| -> Vec<f64> {
        let snap = w.long.snapshot(i64::MAX);
        let mut fw = Forward::new(&w.params, None, Some(snap), w.k, Variant::Full, seed);
        let id = fw.node_long(NodeRef::User(UserId(1))).unwrap();
        fw.tape.value(id).as_slice().to_vec()
    };
    assert_eq!(run(42), run(42));

    // isolated under an early cutoff: encoding equals the raw ID row
    let snap = w.long.snapshot(-1);
    let mut fw = Forward::new(&w.params, None, Some(snap), w.k, Variant::Full, 42);
    let id = fw.node_long(NodeRef::User(UserId(1))).unwrap();
    assert_eq!(fw.tape.value(id).as_slice(), w.params.long.user_ids.row(1));
}

#[test]
fn gate_equal_logits_average_the_branches() {
    let mut t = Tape::new();
    let u_s = t.leaf(Array::vector((0..16).map(|i| i as f64).collect()));
    let u_l = t.leaf(Array::vector((0..16).map(|i| -(i as f64)).collect()));
    let d = t.leaf(Array::vector(vec![0.2; 16]));
    let gs = t.leaf(Array::vector(vec![0.0; 32]));
    let gl = t.leaf(Array::vector(vec![0.0; 32]));
    let (fused, weights) = gate_fuse(&mut t, u_s, u_l, d, gs, gl).unwrap();
    assert_eq!(t.value(weights).as_slice(), &[0.5, 0.5]);
    for v in t.value(fused).iter() {
        assert!(v.abs() < 1e-15);
    }
}

#[test]
fn gate_saturates_toward_dominant_branch() {
    let mut t = Tape::new();
    let u_s = t.leaf(Array::vector(vec![1.0; 16]));
    let u_l = t.leaf(Array::vector(vec![-1.0; 16]));
    let mut d_v = vec![0.0; 16];
    d_v[0] = 1.0;
    let d = t.leaf(Array::vector(d_v));
    // short logit = 50 via the item half of the concat; long gate zero
    let mut gs_v = vec![0.0; 32];
    gs_v[16] = 50.0;
    let gs = t.leaf(Array::vector(gs_v));
    let gl = t.leaf(Array::vector(vec![0.0; 32]));
    let (fused, weights) = gate_fuse(&mut t, u_s, u_l, d, gs, gl).unwrap();
    let w = t.value(weights).as_slice();
    // exp(-50) ~ 2e-22
    assert!(w[0] >= 1.0 - 1e-15 && w[1] <= 1e-21, "{w:?}");
    assert!((t.value(fused).as_slice()[3] - 1.0).abs() < 1e-12);
}

#[test]
fn gate_weights_are_a_distribution_on_random_input() {
    let mut rng = rng_from(11);
    for _ in 0..50 {
        let mut t = Tape::new();
        let u_s = t.leaf(Array::vector(rand_vec(&mut rng, 16, -2.0, 2.0)));
        let u_l = t.leaf(Array::vector(rand_vec(&mut rng, 16, -2.0, 2.0)));
        let d = t.leaf(Array::vector(rand_vec(&mut rng, 16, -2.0, 2.0)));
        let gs = t.leaf(Array::vector(rand_vec(&mut rng, 32, -1.0, 1.0)));
        let gl = t.leaf(Array::vector(rand_vec(&mut rng, 32, -1.0, 1.0)));
        let (_, weights) = gate_fuse(&mut t, u_s, u_l, d, gs, gl).unwrap();
        let w = t.value(weights).as_slice();
        assert!((w[0] + w[1] - 1.0).abs() < 1e-10);
        assert!(w[0] > 0.0 && w[1] > 0.0);
    }
}

#[test]
fn forced_gate_blocks_the_suppressed_branch_exactly() {
    let mut t = Tape::new();
    let u_s = t.leaf(Array::vector(vec![0.3; 16]));
    let u_l = t.leaf(Array::vector(vec![0.9; 16]));
    let mut d_v = vec![0.0; 16];
    d_v[0] = 1.0;
    let d = t.leaf(Array::vector(d_v));
    let mut gs_v = vec![0.0; 32];
    gs_v[16] = 800.0; // softmax of [800, 0] underflows to exactly [1, 0]
    let gs = t.leaf(Array::vector(gs_v));
    let gl = t.leaf(Array::vector(vec![0.0; 32]));
    let (fused, weights) = gate_fuse(&mut t, u_s, u_l, d, gs, gl).unwrap();
    assert_eq!(t.value(weights).as_slice(), &[1.0, 0.0]);
    let root = t.sum(fused).unwrap();
    t.backward(root).unwrap();
    assert!(t.grad(u_l).iter().all(|&g| g == 0.0), "suppressed branch leaked gradient");
    assert!(t.grad(u_s).iter().any(|&g| g != 0.0));
}

fn zero_deepfm_nodes(t: &mut Tape) -> DeepFmNodes {
    DeepFmNodes {
        lin_w: t.leaf(Array::vector(vec![0.0; 64])),
        lin_b: t.leaf(Array::scalar(0.0)),
        tower_w1: t.leaf(Array::matrix(64, 64, vec![0.0; 64 * 64])),
        tower_b1: t.leaf(Array::vector(vec![0.0; 64])),
        tower_w2: t.leaf(Array::matrix(32, 64, vec![0.0; 32 * 64])),
        tower_b2: t.leaf(Array::vector(vec![0.0; 32])),
        tower_w3: t.leaf(Array::vector(vec![0.0; 32])),
        tower_b3: t.leaf(Array::scalar(0.0)),
    }
}

#[test]
fn deepfm_zero_parameters_score_half() {
    let mut t = Tape::new();
    let fm = zero_deepfm_nodes(&mut t);
    let fields: Vec<_> = (0..4).map(|_| t.leaf(Array::vector(vec![0.0; 16]))).collect();
    let p = deepfm_score(&mut t, &fields, &fm).unwrap();
    assert_eq!(t.value(p).item(), 0.5);
}

#[test]
fn deepfm_pairwise_dot_contributes() {
    let mut t = Tape::new();
    let fm = zero_deepfm_nodes(&mut t);
    let mut e = vec![0.0; 16];
    e[0] = 1.0;
    let f1 = t.leaf(Array::vector(e.clone()));
    let f2 = t.leaf(Array::vector(e));
    let zero1 = t.leaf(Array::vector(vec![0.0; 16]));
    let zero2 = t.leaf(Array::vector(vec![0.0; 16]));
    let p = deepfm_score(&mut t, &[f1, f2, zero1, zero2], &fm).unwrap();
    // only the (f1, f2) pair is nonzero: logit = 1
    let want = 1.0 / (1.0 + (-1.0f64).exp());
    assert!((t.value(p).item() - want).abs() < 1e-12);
}

#[test]
fn deepfm_matches_independent_oracle() {
    for seed in 0..10u64 {
        let mut rng = rng_from(700 + seed);
        let fields_v: Vec<Vec<f64>> = (0..4).map(|_| rand_vec(&mut rng, 16, -0.8, 0.8)).collect();
        let lin_w = rand_vec(&mut rng, 64, -0.5, 0.5);
        let lin_b = rng.random_range(-0.5..0.5);
        let w1 = rand_vec(&mut rng, 64 * 64, -0.1, 0.1);
        let b1 = rand_vec(&mut rng, 64, -0.1, 0.1);
        let w2 = rand_vec(&mut rng, 32 * 64, -0.1, 0.1);
        let b2 = rand_vec(&mut rng, 32, -0.1, 0.1);
        let w3 = rand_vec(&mut rng, 32, -0.3, 0.3);
        let b3 = rng.random_range(-0.5..0.5);

        let mut t = Tape::new();
        let fm = DeepFmNodes {
            lin_w: t.leaf(Array::vector(lin_w.clone())),
            lin_b: t.leaf(Array::scalar(lin_b)),
            tower_w1: t.leaf(Array::matrix(64, 64, w1.clone())),
            tower_b1: t.leaf(Array::vector(b1.clone())),
            tower_w2: t.leaf(Array::matrix(32, 64, w2.clone())),
            tower_b2: t.leaf(Array::vector(b2.clone())),
            tower_w3: t.leaf(Array::vector(w3.clone())),
            tower_b3: t.leaf(Array::scalar(b3)),
        };
        let fields: Vec<_> =
            fields_v.iter().map(|f| t.leaf(Array::vector(f.clone()))).collect();
        let p = deepfm_score(&mut t, &fields, &fm).unwrap();

        // independent recomputation
        let leaky = |x: f64| if x >= 0.0 { x } else { LEAKY_SLOPE * x };
        let cat: Vec<f64> = fields_v.iter().flatten().copied().collect();
        let first: f64 = lin_w.iter().zip(cat.iter()).map(|(a, b)| a * b).sum::<f64>() + lin_b;
        let mut second = 0.0;
        for i in 0..4 {
            for j in i + 1..4 {
                second +=
                    fields_v[i].iter().zip(fields_v[j].iter()).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        let h1: Vec<f64> = (0..64)
            .map(|i| leaky((0..64).map(|j| w1[i * 64 + j] * cat[j]).sum::<f64>() + b1[i]))
            .collect();
        let h2: Vec<f64> = (0..32)
            .map(|i| leaky((0..64).map(|j| w2[i * 64 + j] * h1[j]).sum::<f64>() + b2[i]))
            .collect();
        let tower: f64 = w3.iter().zip(h2.iter()).map(|(a, b)| a * b).sum::<f64>() + b3;
        let want = sigmoid(first + second + tower);
        assert!((t.value(p).item() - want).abs() < 1e-10, "seed {seed}");
    }
}

#[test]
fn score_is_monotone_in_first_order_bias() {
    let w = toy_world(4);
    let snap = w.short.snapshot(i64::MAX);
    let inst = w.log.internal_instances()[0];
    let score_with_bias = |bias: f64| -> f64 {
        let mut params = w.params.clone();
        *params.fusion.lin_b.as_mut_slice().first_mut().unwrap() = bias;
        let mut fw = Forward::new(&params, Some(snap), None, w.k, Variant::Full, w.long_seed);
        let p = fw.score_instance(&inst, &LongSource::Cached(&w.cache)).unwrap();
        fw.tape.value(p).item()
    };
    let mut prev = score_with_bias(-2.0);
    for b in [-1.0, 0.0, 1.0, 2.0] {
        let cur = score_with_bias(b);
        assert!(cur > prev, "bias {b}: {cur} <= {prev}");
        prev = cur;
    }
}

#[test]
fn zero_parameters_score_exactly_half_end_to_end() {
    let w = toy_world(6);
    let zero = ModelParams::zeros(toy_dims());
    let cache = LongTermCache::raw(&zero);
    let snap = w.short.snapshot(i64::MAX);
    let mut fw = Forward::new(&zero, Some(snap), None, w.k, Variant::Full, w.long_seed);
    for inst in w.log.internal_instances() {
        let p = fw.score_instance(&inst, &LongSource::Cached(&cache)).unwrap();
        assert_eq!(fw.tape.value(p).item(), 0.5);
    }
}

#[test]
fn no_gat_ln_variant_uses_raw_inputs() {
    let w = toy_world(8);
    let snap = w.short.snapshot(i64::MAX);
    let mut fw = Forward::new(&w.params, Some(snap), None, w.k, Variant::NoGatLn, w.long_seed);
    let enc = fw.user_short(UserId(0)).unwrap();
    let raw = fw.node_input_user(UserId(0)).unwrap();
    assert_eq!(enc, raw);
    // long side: raw cache equals the ID rows
    let cache = LongTermCache::build(
        &w.params,
        w.long.snapshot(i64::MAX),
        w.k,
        Variant::NoGatLn,
        w.long_seed,
    )
    .unwrap();
    assert_eq!(cache.user_vecs[2], w.params.long.user_ids.row(2).to_vec());
}

#[test]
fn field_hashes_are_disjoint_between_kinds() {
    let vocabs = [4u32, 3, 5, 2, 3, 4];
    assert_ne!(user_fields(UserId(7), &vocabs), item_fields(ItemId(7), &vocabs));
}
