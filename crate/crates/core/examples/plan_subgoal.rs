//! Retrieves a subgoal for an unseen environment with every planner.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slackline::encoder::{train, TrainConfig};
use slackline::explore::{collect, CollectParams};
use slackline::harness::Models;
use slackline::planner::{train_autoencoder, PlannerKind};
use slackline::sim::generate_env;
use slackline::TaskConfig;

fn main() -> slackline::Result<()> {
    let task = TaskConfig::default();
    let params = CollectParams {
        episodes: 100,
        goals: 40,
        ..CollectParams::default()
    };
    let ds = collect(&task, &params, 2)?.dataset;
    let tc = TrainConfig {
        hidden: 64,
        epochs: 5,
        ..TrainConfig::default()
    };
    let enc = train(&ds, &tc)?.encoder;
    let ae = train_autoencoder(&ds, &tc)?.autoencoder;
    let models = Models::new(ds, Some(enc), Some(ae))?;

    let state = generate_env(&task, 99)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for kind in PlannerKind::ALL {
        let planner = models.planner(kind, 0)?;
        let draw = planner.begin_episode(&mut rng);
        let plan = planner.plan(&state, draw)?;
        let g = plan.subgoal;
        println!(
            "{:>12}: episode {:>3} step {:?}, goal ends ({:.2},{:.2}) ({:.2},{:.2})",
            kind.name(),
            plan.episode,
            plan.step,
            g.first().x,
            g.first().y,
            g.last().x,
            g.last().y
        );
    }
    Ok(())
}
