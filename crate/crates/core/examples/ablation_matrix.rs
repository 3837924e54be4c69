//! A reduced ablation matrix: every planner and controller variant on the
//! same environment seeds, written as a report directory.
//!
//! cargo run --release --example ablation_matrix -- [report_dir]

use slackline::encoder::{train, TrainConfig};
use slackline::explore::{collect, CollectParams};
use slackline::harness::{evaluate, full_matrix, metrics_csv, write_evaluation, Models};
use slackline::planner::train_autoencoder;
use slackline::TaskConfig;

fn main() -> slackline::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "report".into());
    let cfg = TaskConfig::default();
    let params = CollectParams {
        episodes: 200,
        goals: 60,
        ..CollectParams::default()
    };
    let ds = collect(&cfg, &params, 0)?.dataset;
    let tc = TrainConfig {
        hidden: 64,
        epochs: 5,
        ..TrainConfig::default()
    };
    let enc = train(&ds, &tc)?.encoder;
    let ae = train_autoencoder(&ds, &tc)?.autoencoder;
    let models = Models::new(ds, Some(enc), Some(ae))?;
    let eval = evaluate(&models, &full_matrix(), 60, &cfg, 1, 0)?;
    print!("{}", metrics_csv(&eval.metrics));
    write_evaluation(&dir, &eval, &cfg, &models)?;
    println!("report written to {dir}/");
    Ok(())
}
