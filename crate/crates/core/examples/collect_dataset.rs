//! Explores random environments and writes the successful episodes to a
//! JSONL dataset.
//!
//! cargo run --release --example collect_dataset -- [out.jsonl] [episodes]

use slackline::explore::{collect, save_dataset, CollectParams};
use slackline::TaskConfig;

fn main() -> slackline::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "dataset.jsonl".into());
    let episodes = args.next().and_then(|n| n.parse().ok()).unwrap_or(100);
    let params = CollectParams {
        episodes,
        goals: 50,
        ..CollectParams::default()
    };
    let c = collect(&TaskConfig::default(), &params, 0)?;
    let horizons: Vec<usize> = c.dataset.episodes.iter().map(|e| e.horizon()).collect();
    println!(
        "{} episodes from {} environments ({:.1}% solved), mean horizon {:.2}",
        horizons.len(),
        c.log.len(),
        100.0 * c.success_ratio(),
        horizons.iter().sum::<usize>() as f64 / horizons.len() as f64
    );
    save_dataset(&c.dataset, &out)?;
    println!("wrote {out}");
    Ok(())
}
