//! Closed-loop execution: plan a subgoal, choose an action, execute, repeat
//! until the goal space is reached or the horizon runs out.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Arm, TaskConfig};
use crate::controller::{fallback_action, ControllerKind};
use crate::error::{Error, Result};
use crate::planner::Planner;
use crate::sim::{execute, goal_reached, ActionPair, EnvState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Success,
    /// Horizon exhausted.
    Timeout,
    /// Neither the controller nor the fallback found a feasible action.
    NoFeasibleAction,
}

/// The subgoal used at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgoalStep {
    pub episode: usize,
    /// Matched stored step, for retrieval planners.
    pub step: Option<usize>,
    pub state: EnvState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleStep {
    pub leader: Arm,
    pub follower: bool,
    /// The controller returned nothing and the fallback drag was used.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub seed: u64,
    pub planner: String,
    pub controller: String,
    pub success: bool,
    pub outcome: Outcome,
    pub steps: usize,
    /// `steps + 1` states.
    pub states: Vec<EnvState>,
    pub actions: Vec<ActionPair>,
    /// One subgoal per planning call; one longer than `actions` when the
    /// episode ended without a feasible action.
    pub subgoals: Vec<SubgoalStep>,
    pub roles: Vec<RoleStep>,
}

impl EpisodeResult {
    pub fn final_state(&self) -> &EnvState {
        self.states.last().expect("at least the initial state")
    }

    /// Actions counted with failures charged the full horizon.
    pub fn charged_actions(&self, horizon_max: usize) -> usize {
        if self.success {
            self.steps
        } else {
            horizon_max
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("results serialize")
    }
}

/// Runs one episode from `env`. The seed drives the random planner's draw,
/// the random controller and the fallback.
pub fn run_episode(
    env: &EnvState,
    planner: &Planner,
    controller: ControllerKind,
    cfg: &TaskConfig,
    seed: u64,
) -> Result<EpisodeResult> {
    env.check_dims(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = planner.begin_episode(&mut rng);
    let mut state = env.clone();
    let mut res = EpisodeResult {
        seed,
        planner: planner.kind().name().to_string(),
        controller: controller.name().to_string(),
        success: goal_reached(env, cfg),
        outcome: Outcome::Success,
        steps: 0,
        states: vec![env.clone()],
        actions: Vec::new(),
        subgoals: Vec::new(),
        roles: Vec::new(),
    };
    while !res.success && res.steps < cfg.horizon_max {
        let plan = planner.plan(&state, draw)?;
        res.subgoals.push(SubgoalStep {
            episode: plan.episode,
            step: plan.step,
            state: plan.subgoal.clone(),
        });
        let (action, fallback) = match controller.decide(&state, plan.subgoal, cfg, &mut rng) {
            Some(a) => (a, false),
            None => match fallback_action(&state, cfg, &mut rng) {
                Some(a) => (a, true),
                None => {
                    res.outcome = Outcome::NoFeasibleAction;
                    return Ok(res);
                }
            },
        };
        state = execute(&state, &action, cfg)?;
        res.roles.push(RoleStep {
            leader: action.leader.arm,
            follower: action.follower.is_some(),
            fallback,
        });
        res.actions.push(action);
        res.states.push(state.clone());
        res.steps += 1;
        res.success = goal_reached(&state, cfg);
    }
    if !res.success {
        res.outcome = Outcome::Timeout;
    }
    Ok(res)
}

/// Re-executes the recorded actions and returns the largest coordinate
/// deviation from the recorded states.
pub fn replay_error(res: &EpisodeResult, cfg: &TaskConfig) -> Result<f64> {
    let mut state = res.states[0].clone();
    let mut worst = 0.0f64;
    for (a, recorded) in res.actions.iter().zip(&res.states[1..]) {
        state = execute(&state, a, cfg)?;
        for (p, q) in state.keypoints.iter().zip(&recorded.keypoints) {
            worst = worst.max((p.x - q.x).abs()).max((p.y - q.y).abs());
        }
    }
    Ok(worst)
}

pub fn save_results(results: &[EpisodeResult], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in results {
        writeln!(w, "{}", r.to_json()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_results(path: impl AsRef<Path>) -> Result<Vec<EpisodeResult>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::malformed(path, i + 1, e))?);
    }
    Ok(out)
}
