//! Trains a small contrastive encoder on a freshly collected dataset and
//! shows that states of one episode embed close together.

use slackline::encoder::{separation, train, TrainConfig};
use slackline::explore::{collect, CollectParams};
use slackline::TaskConfig;

fn main() -> slackline::Result<()> {
    let params = CollectParams {
        episodes: 150,
        goals: 50,
        ..CollectParams::default()
    };
    let ds = collect(&TaskConfig::default(), &params, 1)?.dataset;
    let cfg = TrainConfig {
        hidden: 64,
        epochs: 10,
        ..TrainConfig::default()
    };
    let report = train(&ds, &cfg)?;
    println!("initial loss {:.4}", report.initial_loss);
    for (e, l) in report.epoch_loss.iter().enumerate() {
        println!("epoch {:>2}: {l:.4}", e + 1);
    }
    let (within, across) = separation(&report.encoder, &ds)?;
    println!("mean inner product within episodes {within:.3}, across episodes {across:.3}");
    Ok(())
}
