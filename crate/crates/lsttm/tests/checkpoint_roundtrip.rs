//! Checkpoint format contracts: byte-exact round-trips and bit-identical
//! forward scores after restore.

mod common;

use lsttm::config::RunConfig;
use lsttm::datasim::{generate, SimConfig};
use lsttm::events::EventRecord;
use lsttm::train::{
    daily_full_train, load_checkpoint, online_step, save_checkpoint, TrainerConfig, TrainerState,
};

fn small_cfg() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.sim = SimConfig {
        users: 25,
        internal_items: 12,
        external_items: 8,
        days: 2,
        events_per_user_per_hour: 1.0,
        external_events_per_user_per_hour: 0.5,
        seed: 71,
        ..SimConfig::default()
    };
    cfg.trainer = TrainerConfig {
        meta_epochs: 1,
        long_epochs: 1,
        k_neighbors: 5,
        support_size: 16,
        query_size: 16,
        seed: 71,
        ..TrainerConfig::default()
    };
    cfg.runs = 1;
    cfg
}

#[test]
fn store_load_store_is_byte_exact() {
    let cfg = small_cfg();
    let log = generate(&cfg.sim).unwrap();
    let (train, _) = log.split(log.max_day()).unwrap();
    let state = daily_full_train(&train, &cfg).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("a.ckpt");
    let p2 = dir.path().join("b.ckpt");
    save_checkpoint(&state, &p1).unwrap();

    let loaded = load_checkpoint(&p1).unwrap();
    assert_eq!(loaded.clock, state.clock);
    assert_eq!(loaded.config, cfg);

    let restored = TrainerState::restore(loaded, &log).unwrap();
    save_checkpoint(&restored, &p2).unwrap();

    let b1 = std::fs::read(&p1).unwrap();
    let b2 = std::fs::read(&p2).unwrap();
    assert_eq!(b1, b2, "checkpoint bytes changed across store->load->store");
}

#[test]
fn restored_state_scores_bit_identically() {
    let cfg = small_cfg();
    let log = generate(&cfg.sim).unwrap();
    let (train, test) = log.split(log.max_day()).unwrap();
    let state = daily_full_train(&train, &cfg).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.ckpt");
    save_checkpoint(&state, &path).unwrap();
    let restored = TrainerState::restore(load_checkpoint(&path).unwrap(), &log).unwrap();

    let instances = test.internal_instances();
    let ctx_a = state.loss_ctx();
    let ctx_b = restored.loss_ctx();
    let sa = lsttm::train::batch_scores(&state.params, &instances, i64::MAX, &ctx_a).unwrap();
    let sb = lsttm::train::batch_scores(&restored.params, &instances, i64::MAX, &ctx_b).unwrap();
    assert_eq!(sa.len(), sb.len());
    for (a, b) in sa.iter().zip(sb.iter()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn online_steps_survive_checkpointing() {
    let cfg = small_cfg();
    let log = generate(&cfg.sim).unwrap();
    let (train, test) = log.split(log.max_day()).unwrap();
    let mut state = daily_full_train(&train, &cfg).unwrap();
    let test_day = state.clock.last_full_train_day + 1;
    let events: Vec<EventRecord> =
        test.rows.iter().filter(|r| r.global_hour() == test_day * 24).cloned().collect();
    online_step(&mut state, test_day * 24, &events).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("after-online.ckpt");
    save_checkpoint(&state, &path).unwrap();
    let loaded = load_checkpoint(&path).unwrap();
    assert_eq!(loaded.clock.last_online_hour, test_day * 24);
    // params moved away from the daily copy, and both round-tripped
    assert_eq!(
        loaded.params.flatten(lsttm::model::Parts::ALL),
        state.params.flatten(lsttm::model::Parts::ALL)
    );
    assert_eq!(
        loaded.daily_params.flatten(lsttm::model::Parts::META),
        state.daily_params.flatten(lsttm::model::Parts::META)
    );
    assert_ne!(
        loaded.params.flatten(lsttm::model::Parts::META),
        loaded.daily_params.flatten(lsttm::model::Parts::META)
    );
}

#[test]
fn corrupted_checkpoint_is_rejected() {
    let cfg = small_cfg();
    let log = generate(&cfg.sim).unwrap();
    let (train, _) = log.split(log.max_day()).unwrap();
    let state = daily_full_train(&train, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.ckpt");
    save_checkpoint(&state, &path).unwrap();

    let mut bytes = std::fs::read(&path).unwrap();
    // flip a config character: embedded config no longer matches its hash
    let pos = bytes.windows(6).position(|w| w == b"users=").unwrap() + 6;
    bytes[pos] = b'9';
    std::fs::write(&path, &bytes).unwrap();
    assert!(load_checkpoint(&path).is_err());
}
