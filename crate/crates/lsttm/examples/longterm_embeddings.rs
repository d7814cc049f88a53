//! Asynchronous long-term training: walk-based neighbor-similarity descent
//! pulls connected node embeddings together while negatives push strangers
//! apart.
//!
//! ```bash
//! cargo run -p lsttm --example longterm_embeddings
//! ```

use lsttm::config::Variant;
use lsttm::datasim::{generate, SimConfig};
use lsttm::events::{ItemId, Label, Source, UserId};
use lsttm::graph::{GraphKind, InteractionGraph, NodeRef};
use lsttm::model::{Forward, ModelDims, ModelParams};
use lsttm::train::{train_long_term, AdagradState, TrainerConfig};

fn main() -> lsttm::Result<()> {
    let sim = SimConfig {
        users: 60,
        internal_items: 30,
        external_items: 20,
        days: 1,
        events_per_user_per_hour: 1.5,
        seed: 3,
        ..SimConfig::default()
    };
    let log = generate(&sim)?;
    let graph = InteractionGraph::from_events(GraphKind::LongTerm, &log.rows);
    println!("long-term graph: {} edges", graph.n_edges());

    let mut params = ModelParams::init(ModelDims::from_header(&log.header), 3);
    let cfg = TrainerConfig {
        long_epochs: 40,
        paths_per_node: 2,
        walk_length: 10,
        negatives_per_pair: 2,
        k_neighbors: 10,
        seed: 3,
        ..TrainerConfig::default()
    };
    let mut acc = AdagradState::new();
    let losses = train_long_term(&graph, &mut params, &mut acc, &cfg, Variant::Full)?;
    println!("neighbor-similarity loss: first {:.4}, last {:.4}", losses[0], losses[losses.len() - 1]);

    // compare a user's affinity to a clicked item vs an average item
    let snap = graph.snapshot(i64::MAX);
    let clicked = log
        .rows
        .iter()
        .find(|r| r.source == Source::Internal && r.label == Label::Clicked)
        .expect("some click");
    let mut fw = Forward::new(&params, None, Some(snap), cfg.k_neighbors, Variant::Full, cfg.long_sample_seed());
    let u = fw.node_long(NodeRef::User(clicked.user))?;
    let d = fw.node_long(NodeRef::Item(clicked.item))?;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let uv = fw.tape.value(u).as_slice().to_vec();
    let dv = fw.tape.value(d).as_slice().to_vec();
    let mut rand_dots = 0.0;
    let mut n = 0.0;
    for item in 0..sim.internal_items + sim.external_items {
        let v = fw.node_long(NodeRef::Item(ItemId(item)))?;
        rand_dots += dot(&uv, fw.tape.value(v).as_slice());
        n += 1.0;
    }
    println!(
        "user {} . clicked item {} = {:.4}; mean over all items = {:.4}",
        clicked.user.0,
        clicked.item.0,
        dot(&uv, &dv),
        rand_dots / n
    );
    let _ = UserId(0);
    Ok(())
}
