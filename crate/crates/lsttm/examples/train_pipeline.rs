//! End to end at toy scale: synthesize a drifting log, run the daily
//! training (asynchronous long-term phase + temporal meta phase), then the
//! hour-by-hour evaluation protocol on the held-out final day.
//!
//! ```bash
//! cargo run -p lsttm --example train_pipeline
//! ```

use lsttm::config::RunConfig;
use lsttm::datasim::{generate, SimConfig};
use lsttm::eval::temporal_eval;
use lsttm::train::{daily_full_train, TrainerConfig};

fn main() -> lsttm::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.sim = SimConfig {
        users: 120,
        internal_items: 60,
        external_items: 60,
        days: 3,
        events_per_user_per_hour: 1.5,
        seed: 11,
        ..SimConfig::default()
    };
    cfg.trainer = TrainerConfig {
        meta_epochs: 3,
        long_epochs: 3,
        k_neighbors: 10,
        support_size: 64,
        query_size: 64,
        seed: 11,
        ..TrainerConfig::default()
    };

    let log = generate(&cfg.sim)?;
    let (train, test) = log.split(log.max_day())?;
    println!("train rows: {}, test rows: {}", train.rows.len(), test.rows.len());

    let state = daily_full_train(&train, &cfg)?;
    println!(
        "long-term losses: {:?}",
        state.long_losses.iter().map(|l| (l * 1e4).round() / 1e4).collect::<Vec<_>>()
    );
    println!(
        "task loss: first {:.4}, last {:.4}",
        state.task_losses.first().unwrap(),
        state.task_losses.last().unwrap()
    );

    let report = temporal_eval(&state, &test)?;
    print!("hourly AUC:");
    for (h, auc) in report.hours.iter().enumerate() {
        if h % 6 == 0 {
            print!("\n  h{h:02}:");
        }
        match auc {
            Some(v) => print!(" {v:.3}"),
            None => print!("   -  "),
        }
    }
    println!();
    for (i, p) in report.periods.iter().enumerate() {
        match p {
            Some(v) => println!("period {} mean AUC: {v:.4}", i + 1),
            None => println!("period {}: no evaluable hours", i + 1),
        }
    }
    Ok(())
}
