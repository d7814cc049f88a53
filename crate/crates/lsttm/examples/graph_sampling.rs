//! Interaction graphs: dynamic appends, time-cutoff snapshots, temporal
//! top-K vs uniform neighbor sampling, and random-walk paths.
//!
//! ```bash
//! cargo run -p lsttm --example graph_sampling
//! ```

use lsttm::datasim::{generate, SimConfig};
use lsttm::events::UserId;
use lsttm::graph::{GraphKind, InteractionGraph, NodeRef};

fn main() -> lsttm::Result<()> {
    let cfg = SimConfig {
        users: 50,
        internal_items: 25,
        external_items: 15,
        days: 1,
        seed: 5,
        ..SimConfig::default()
    };
    let log = generate(&cfg)?;
    println!("generated {} rows", log.rows.len());

    let short = InteractionGraph::from_events(GraphKind::ShortTerm, &log.rows);
    let long = InteractionGraph::from_events(GraphKind::LongTerm, &log.rows);
    println!(
        "short-term graph: {} users, {} items, {} edges (internal clicks only)",
        short.n_users(),
        short.n_items(),
        short.n_edges()
    );
    println!(
        "long-term graph:  {} users, {} items, {} edges (clicks from both sources)",
        long.n_users(),
        long.n_items(),
        long.n_edges()
    );

    let user = NodeRef::User(UserId(0));

    // the most recent clicks win; an earlier cutoff hides later edges
    let full = short.snapshot(i64::MAX);
    let noon = short.snapshot(12 * 3600 - 1);
    println!("user 0 temporal top-5 (full day):     {:?}", full.temporal_neighbors(user, 5));
    println!("user 0 temporal top-5 (before noon):  {:?}", noon.temporal_neighbors(user, 5));

    // uniform sampling is a pure function of (snapshot, seed)
    let g = long.snapshot(i64::MAX);
    let a = g.uniform_neighbors(user, 5, 42);
    let b = g.uniform_neighbors(user, 5, 42);
    assert_eq!(a, b);
    println!("user 0 uniform sample (seed 42):      {a:?}");
    println!("user 0 uniform sample (seed 43):      {:?}", g.uniform_neighbors(user, 5, 43));

    // fixed-length alternating walks over the bipartite graph
    let paths = g.deepwalk_paths(1, 10, 7);
    println!("walks: {} paths of {} nodes", paths.paths.len(), paths.walk_length);
    println!("first walk: {:?}", paths.paths[0]);
    Ok(())
}
