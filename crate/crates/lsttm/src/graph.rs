//! Bipartite user-item interaction graphs with dynamic appends, time-cutoff
//! snapshots, temporal and uniform neighbor sampling, and random-walk path
//! generation.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::Rng;

use crate::events::{EventRecord, ItemId, Label, Source, UserId};
use crate::rng::rng_from;

/// A graph node: one side of the bipartite graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeRef {
    User(UserId),
    Item(ItemId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphKind {
    /// In-domain clicks only; recency is enforced by top-K sampling.
    ShortTerm,
    /// Clicks from every source over the union item set.
    LongTerm,
}

#[derive(Clone, Copy, Debug)]
struct Edge {
    peer: u32,
    ts: i64,
}

/// Outcome of an append: either the edge went in, or the event failed the
/// graph's kind filter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Append {
    Added,
    Skipped(SkipReason),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SkipReason {
    Unclicked,
    ExternalSource,
}

/// Adjacency lists sorted by ascending timestamp (ties keep arrival order),
/// with every edge mirrored on both endpoints.
#[derive(Clone, Debug)]
pub struct InteractionGraph {
    kind: GraphKind,
    user_index: HashMap<u32, usize>,
    users: Vec<u32>,
    user_adj: Vec<Vec<Edge>>,
    item_index: HashMap<u32, usize>,
    items: Vec<u32>,
    item_adj: Vec<Vec<Edge>>,
    n_edges: usize,
}

impl InteractionGraph {
    pub fn new(kind: GraphKind) -> Self {
        InteractionGraph {
            kind,
            user_index: HashMap::new(),
            users: Vec::new(),
            user_adj: Vec::new(),
            item_index: HashMap::new(),
            items: Vec::new(),
            item_adj: Vec::new(),
            n_edges: 0,
        }
    }

    /// Build a graph from a slice of events, applying the kind filter.
    pub fn from_events(kind: GraphKind, rows: &[EventRecord]) -> Self {
        let mut g = InteractionGraph::new(kind);
        for r in rows {
            g.append_event(r);
        }
        g
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// Registered nodes, users first, in registration order.
    pub fn nodes(&self) -> Vec<NodeRef> {
        let mut out = Vec::with_capacity(self.users.len() + self.items.len());
        out.extend(self.users.iter().map(|&u| NodeRef::User(UserId(u))));
        out.extend(self.items.iter().map(|&i| NodeRef::Item(ItemId(i))));
        out
    }

    /// Append one event. Events failing the kind filter are skipped with a
    /// reason; unknown node ids are registered on first sight.
    pub fn append_event(&mut self, event: &EventRecord) -> Append {
        if event.label == Label::Unclicked {
            return Append::Skipped(SkipReason::Unclicked);
        }
        if self.kind == GraphKind::ShortTerm && event.source == Source::External {
            return Append::Skipped(SkipReason::ExternalSource);
        }
        let ui = register(&mut self.user_index, &mut self.users, &mut self.user_adj, event.user.0);
        let ii = register(&mut self.item_index, &mut self.items, &mut self.item_adj, event.item.0);
        insert_sorted(&mut self.user_adj[ui], Edge { peer: event.item.0, ts: event.ts });
        insert_sorted(&mut self.item_adj[ii], Edge { peer: event.user.0, ts: event.ts });
        self.n_edges += 1;
        Append::Added
    }

    /// Immutable time-cutoff view: edges with `ts > cutoff` are invisible.
    pub fn snapshot(&self, cutoff: i64) -> GraphSnapshot<'_> {
        GraphSnapshot { graph: self, cutoff }
    }

    fn adjacency(&self, node: NodeRef) -> Option<&[Edge]> {
        match node {
            NodeRef::User(u) => self.user_index.get(&u.0).map(|&i| self.user_adj[i].as_slice()),
            NodeRef::Item(d) => self.item_index.get(&d.0).map(|&i| self.item_adj[i].as_slice()),
        }
    }
}

fn register(
    index: &mut HashMap<u32, usize>,
    order: &mut Vec<u32>,
    adj: &mut Vec<Vec<Edge>>,
    id: u32,
) -> usize {
    *index.entry(id).or_insert_with(|| {
        order.push(id);
        adj.push(Vec::new());
        order.len() - 1
    })
}

fn insert_sorted(adj: &mut Vec<Edge>, edge: Edge) {
    // After the last edge with ts <= new ts: keeps ascending order and
    // arrival order among equal timestamps.
    let pos = adj.partition_point(|e| e.ts <= edge.ts);
    adj.insert(pos, edge);
}

/// Fixed-length random walks with their generating seed.
#[derive(Clone, Debug)]
pub struct PathSet {
    pub paths: Vec<Vec<NodeRef>>,
    pub seed: u64,
    pub walk_length: usize,
}

/// Immutable time-cutoff view of an [`InteractionGraph`].
#[derive(Clone, Copy)]
pub struct GraphSnapshot<'g> {
    graph: &'g InteractionGraph,
    cutoff: i64,
}

impl<'g> GraphSnapshot<'g> {
    pub fn cutoff(&self) -> i64 {
        self.cutoff
    }

    pub fn graph(&self) -> &'g InteractionGraph {
        self.graph
    }

    fn visible(&self, node: NodeRef) -> &[Edge] {
        match self.graph.adjacency(node) {
            None => &[],
            Some(adj) => {
                let cut = adj.partition_point(|e| e.ts <= self.cutoff);
                &adj[..cut]
            }
        }
    }

    fn peer(&self, node: NodeRef, edge: &Edge) -> NodeRef {
        match node {
            NodeRef::User(_) => NodeRef::Item(ItemId(edge.peer)),
            NodeRef::Item(_) => NodeRef::User(UserId(edge.peer)),
        }
    }

    /// Visible degree, counting repeated interactions.
    pub fn degree(&self, node: NodeRef) -> usize {
        self.visible(node).len()
    }

    /// The K most recent visible neighbors in ascending time order; fewer if
    /// the node has fewer, empty for cold nodes. Equal timestamps keep
    /// arrival order.
    pub fn temporal_neighbors(&self, node: NodeRef, k: usize) -> Vec<NodeRef> {
        let adj = self.visible(node);
        let start = adj.len().saturating_sub(k);
        adj[start..].iter().map(|e| self.peer(node, e)).collect()
    }

    /// Uniform sample without replacement of min(K, distinct-degree)
    /// distinct neighbors; a pure function of the snapshot and seed.
    pub fn uniform_neighbors(&self, node: NodeRef, k: usize, seed: u64) -> Vec<NodeRef> {
        let adj = self.visible(node);
        let mut distinct: Vec<u32> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for e in adj {
            if seen.insert(e.peer) {
                distinct.push(e.peer);
            }
        }
        let take = k.min(distinct.len());
        if take == 0 {
            return Vec::new();
        }
        let mut rng = rng_from(seed);
        let picks = sample(&mut rng, distinct.len(), take);
        picks
            .into_iter()
            .map(|i| match node {
                NodeRef::User(_) => NodeRef::Item(ItemId(distinct[i])),
                NodeRef::Item(_) => NodeRef::User(UserId(distinct[i])),
            })
            .collect()
    }

    /// `paths_per_node` uniform random walks of `walk_length` nodes from
    /// every node with visible degree >= 1. Steps sample visible edges, so
    /// repeated interactions weight their endpoint.
    pub fn deepwalk_paths(&self, paths_per_node: usize, walk_length: usize, seed: u64) -> PathSet {
        assert!(walk_length >= 2, "walks need at least 2 nodes");
        let mut rng = rng_from(seed);
        let mut paths = Vec::new();
        for start in self.graph.nodes() {
            if self.degree(start) == 0 {
                continue;
            }
            for _ in 0..paths_per_node {
                let mut path = Vec::with_capacity(walk_length);
                let mut cur = start;
                path.push(cur);
                for _ in 1..walk_length {
                    let adj = self.visible(cur);
                    if adj.is_empty() {
                        break;
                    }
                    let e = &adj[rng.random_range(0..adj.len())];
                    cur = self.peer(cur, e);
                    path.push(cur);
                }
                if path.len() == walk_length {
                    paths.push(path);
                }
            }
        }
        PathSet { paths, seed, walk_length }
    }

    /// True when (a, b) is a visible edge.
    pub fn has_edge(&self, a: NodeRef, b: NodeRef) -> bool {
        let want = match b {
            NodeRef::User(u) => u.0,
            NodeRef::Item(d) => d.0,
        };
        self.visible(a).iter().any(|e| e.peer == want)
    }
}
