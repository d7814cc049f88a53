//! Shared toy fixtures for integration tests.

use lsttm::config::Variant;
use lsttm::events::{
    ContextFeatures, EventLog, EventRecord, ItemId, Label, LogHeader, Source, UserId,
    SECS_PER_HOUR,
};
use lsttm::graph::{GraphKind, InteractionGraph};
use lsttm::model::{LongTermCache, ModelDims, ModelParams};

pub fn toy_header() -> LogHeader {
    LogHeader {
        n_users: 3,
        n_internal_items: 4,
        n_external_items: 2,
        user_field_vocabs: [4, 3, 5, 2, 3, 4],
        item_field_vocabs: [3, 4, 2, 5, 3, 2],
        position_vocab: 4,
    }
}

pub fn toy_dims() -> ModelDims {
    ModelDims::from_header(&toy_header())
}

pub fn ev(user: u32, item: u32, hour: i64, off: i64, source: Source, clicked: bool) -> EventRecord {
    let ts = hour * SECS_PER_HOUR + off;
    EventRecord {
        user: UserId(user),
        item: ItemId(item),
        ts,
        source,
        label: if clicked { Label::Clicked } else { Label::Unclicked },
        context: ContextFeatures { hour: (hour % 24) as u8, position: (off % 3) as u16 },
        dwell_secs: if clicked { 20 } else { 0 },
    }
}

/// Three users, four internal and two external items, three busy hours.
pub fn toy_log() -> EventLog {
    let rows = vec![
        ev(0, 0, 0, 10, Source::Internal, true),
        ev(0, 1, 0, 20, Source::Internal, false),
        ev(1, 1, 0, 30, Source::Internal, true),
        ev(2, 2, 0, 40, Source::Internal, true),
        ev(0, 4, 0, 50, Source::External, true),
        ev(0, 2, 1, 10, Source::Internal, true),
        ev(1, 0, 1, 20, Source::Internal, false),
        ev(1, 3, 1, 30, Source::Internal, true),
        ev(2, 1, 1, 40, Source::Internal, true),
        ev(1, 5, 1, 50, Source::External, true),
        ev(2, 3, 2, 10, Source::Internal, true),
        ev(0, 3, 2, 20, Source::Internal, false),
        ev(1, 2, 2, 30, Source::Internal, true),
        ev(2, 0, 2, 40, Source::Internal, true),
        ev(2, 4, 2, 50, Source::External, true),
    ];
    EventLog { header: toy_header(), rows }
}

pub struct ToyWorld {
    pub log: EventLog,
    pub short: InteractionGraph,
    pub long: InteractionGraph,
    pub params: ModelParams,
    pub cache: LongTermCache,
    pub k: usize,
    pub long_seed: u64,
}

pub fn toy_world(seed: u64) -> ToyWorld {
    let log = toy_log();
    let short = InteractionGraph::from_events(GraphKind::ShortTerm, &log.rows);
    let long = InteractionGraph::from_events(GraphKind::LongTerm, &log.rows);
    let params = ModelParams::init(toy_dims(), seed);
    let k = 3;
    let long_seed = 0xfeed ^ seed;
    let cache =
        LongTermCache::build(&params, long.snapshot(i64::MAX), k, Variant::Full, long_seed).unwrap();
    ToyWorld { log, short, long, params, cache, k, long_seed }
}

/// Smaller world for finite-difference sweeps, with parameters scaled away
/// from the rectifier kink so probing never crosses it.
pub fn grad_world(seed: u64, scale: f64) -> ToyWorld {
    let rows = vec![
        ev(0, 0, 0, 10, Source::Internal, true),
        ev(1, 1, 0, 20, Source::Internal, true),
        ev(2, 2, 0, 30, Source::Internal, false),
        ev(0, 3, 0, 40, Source::External, true),
        ev(0, 1, 1, 10, Source::Internal, true),
        ev(1, 0, 1, 20, Source::Internal, false),
        ev(2, 0, 1, 30, Source::Internal, true),
        ev(1, 3, 1, 40, Source::External, true),
    ];
    let header = LogHeader { n_internal_items: 3, n_external_items: 1, ..toy_header() };
    let log = EventLog { header: header.clone(), rows };
    let short = InteractionGraph::from_events(GraphKind::ShortTerm, &log.rows);
    let long = InteractionGraph::from_events(GraphKind::LongTerm, &log.rows);
    let mut params = lsttm::model::ModelParams::init(ModelDims::from_header(&header), seed);
    params.for_each_mut(lsttm::model::Parts::ALL, &mut |_, a| {
        a.as_mut_slice().iter_mut().for_each(|v| *v *= scale);
    });
    let k = 2;
    let long_seed = 0xfeed ^ seed;
    let cache =
        LongTermCache::build(&params, long.snapshot(i64::MAX), k, Variant::Full, long_seed).unwrap();
    ToyWorld { log, short, long, params, cache, k, long_seed }
}
