//! Success rate as the arms' outer reach grows, with a rank correlation and
//! an SVG plot.
//!
//! cargo run --release --example constraint_sweep -- [out_dir]

use slackline::controller::ControllerKind;
use slackline::explore::{collect, CollectParams};
use slackline::harness::{spearman, sweep, write_sweep, Cell, Models, SweepParam};
use slackline::planner::PlannerKind;
use slackline::TaskConfig;

fn main() -> slackline::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "sweep".into());
    let cfg = TaskConfig::default();
    let params = CollectParams {
        episodes: 100,
        goals: 40,
        ..CollectParams::default()
    };
    let models = Models::new(collect(&cfg, &params, 0)?.dataset, None, None)?;
    let cells = [Cell::new(
        PlannerKind::Template,
        ControllerKind::LeaderFollower,
    )];
    let values = [0.35, 0.40, 0.45, 0.50, 0.55];
    let s = sweep(
        &models,
        &cells,
        SweepParam::ReachMax,
        &values,
        100,
        &cfg,
        1,
        0,
    )?;
    let curve = s.success_curve(0);
    for (v, r) in values.iter().zip(&curve) {
        println!("reach_max {v:.2}: {r:.1}%");
    }
    println!("spearman {:?}", spearman(&values, &curve));
    write_sweep(&dir, &s, &cfg, &models)?;
    println!("sweep.csv and sweep.svg written to {dir}/");
    Ok(())
}
