//! Closed-loop episode with the template planner and leader-follower
//! control, rendered as one SVG per step.
//!
//! cargo run --release --example run_episode -- [frames_dir]

use slackline::controller::ControllerKind;
use slackline::explore::{collect, CollectParams};
use slackline::harness::render_episode;
use slackline::planner::{build_template_index, Planner};
use slackline::policy::run_episode;
use slackline::sim::generate_env;
use slackline::TaskConfig;

fn main() -> slackline::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "frames".into());
    let cfg = TaskConfig::default();
    let params = CollectParams {
        episodes: 60,
        goals: 30,
        ..CollectParams::default()
    };
    let ds = collect(&cfg, &params, 5)?.dataset;
    let index = build_template_index(&ds);
    let env = generate_env(&cfg, 2024)?;
    let res = run_episode(
        &env,
        &Planner::Template(&index),
        ControllerKind::LeaderFollower,
        &cfg,
        0,
    )?;
    println!("{:?} after {} actions", res.outcome, res.steps);
    for (t, (a, role)) in res.actions.iter().zip(&res.roles).enumerate() {
        println!(
            "step {t}: leader arm {} keypoint {}{}{}",
            u8::from(role.leader),
            a.leader.k,
            a.follower
                .map_or(String::new(), |f| format!(", follower keypoint {}", f.k)),
            if role.fallback { " (fallback)" } else { "" }
        );
    }
    let frames = render_episode(&res, &cfg, &dir)?;
    println!("{} frames in {dir}/", frames.len());
    Ok(())
}
