//! One leader-follower decision toward a subgoal, next to the only-leader
//! and random-control ablations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slackline::controller::{leader_select, ControllerKind};
use slackline::sim::generate_env;
use slackline::TaskConfig;

fn main() -> slackline::Result<()> {
    let cfg = TaskConfig::default();
    let state = generate_env(&cfg, 3)?;
    let subgoal = generate_env(&cfg, 4)?;
    if let Some(choice) = leader_select(&state, &subgoal, &cfg) {
        println!(
            "largest discrepancy at keypoint {}, leader drags keypoint {}",
            choice.target, choice.action.k
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for c in ControllerKind::ALL {
        match c.decide(&state, &subgoal, &cfg, &mut rng) {
            Some(a) => {
                let parts: Vec<String> = a
                    .parts()
                    .map(|p| {
                        format!(
                            "arm {} keypoint {} by {:.3} m",
                            u8::from(p.arm),
                            p.k,
                            p.displacement().norm()
                        )
                    })
                    .collect();
                println!("{:>16}: {}", c.name(), parts.join(" then "));
            }
            None => println!("{:>16}: no feasible action", c.name()),
        }
    }
    Ok(())
}
