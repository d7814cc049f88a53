//! The serving schedule: one daily complete training, then one-step
//! gradient updates per arriving hour. The long-term partition stays
//! bit-identical within the day.
//!
//! ```bash
//! cargo run -p lsttm --example online_serving
//! ```

use lsttm::config::RunConfig;
use lsttm::datasim::{generate, SimConfig};
use lsttm::events::EventRecord;
use lsttm::model::Parts;
use lsttm::train::{daily_full_train, online_step, TrainerConfig};

fn main() -> lsttm::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.sim = SimConfig {
        users: 80,
        internal_items: 40,
        external_items: 30,
        days: 2,
        seed: 23,
        ..SimConfig::default()
    };
    cfg.trainer = TrainerConfig {
        meta_epochs: 2,
        long_epochs: 2,
        k_neighbors: 10,
        support_size: 64,
        query_size: 64,
        seed: 23,
        ..TrainerConfig::default()
    };

    let log = generate(&cfg.sim)?;
    let (train, live) = log.split(log.max_day())?;
    let mut state = daily_full_train(&train, &cfg)?;
    println!(
        "daily training done: day {}, {} short-graph edges",
        state.clock.last_full_train_day,
        state.short_graph.n_edges()
    );

    let frozen_long = state.params.flatten(Parts::LONG);
    let serving_day = state.clock.last_full_train_day + 1;
    for hour_of_day in 0..24i64 {
        let hour = serving_day * 24 + hour_of_day;
        let events: Vec<EventRecord> =
            live.rows.iter().filter(|r| r.global_hour() == hour).cloned().collect();
        let n = events.len();
        online_step(&mut state, hour, &events)?;
        if hour_of_day % 6 == 0 {
            println!(
                "hour {hour_of_day:02}: {n:4} events, loss {:.4}, {} edges",
                state.task_losses.last().copied().unwrap_or(f64::NAN),
                state.short_graph.n_edges()
            );
        }
    }
    assert_eq!(state.params.flatten(Parts::LONG), frozen_long);
    println!("long-term partition unchanged across {} hourly updates", 24);
    Ok(())
}
