//! Automatic data collection by random exploration.
//!
//! A pool of goal-space states is gathered first by random dragging. Each
//! fresh environment is then explored `eps_p * eps_c` times with random
//! correspondence actions toward pool goals, and the shortest successful
//! rollout is kept as an episode.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Arm, TaskConfig};
use crate::controller::correspondence_place;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::sim::{execute, generate_env, goal_reached, ActionPair, EnvState, PickPlace};

pub const SCHEMA: &str = "slackline-ds/1";
/// Goal-pool rollouts give up after this many horizons' worth of actions.
pub const GOAL_POOL_HORIZONS: usize = 50;
/// Fresh environments tried for a goal slot whose rollout gets stuck.
pub const GOAL_SLOT_RETRIES: usize = 4;
/// Random draws per step when looking for a feasible arbitrary drag.
const RANDOM_DRAG_TRIES: usize = 200;
/// Share of arbitrary drags that are headed rather than uniform.
const DRIFT: f64 = 0.75;
/// Environments explored concurrently per collection round.
const COLLECT_CHUNK: usize = 64;

/// Mixes a base seed with a stream index (splitmix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A successful trajectory `S1, A1, S2, ..., AH, S(H+1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub seed: u64,
    #[serde(rename = "lambda")]
    pub dlo_length: f64,
    pub states: Vec<EnvState>,
    pub actions: Vec<ActionPair>,
}

impl Episode {
    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    /// The achieved goal, `S(H+1)`.
    pub fn goal(&self) -> &EnvState {
        self.states.last().expect("episode has states")
    }

    pub fn validate(&self, cfg: &TaskConfig) -> std::result::Result<(), String> {
        if self.states.len() != self.actions.len() + 1 {
            return Err(format!(
                "{} states for {} actions",
                self.states.len(),
                self.actions.len()
            ));
        }
        if self.actions.len() > cfg.horizon_max {
            return Err(format!(
                "horizon {} exceeds horizon_max",
                self.actions.len()
            ));
        }
        for s in &self.states {
            s.check_dims(cfg).map_err(|e| e.to_string())?;
        }
        if !goal_reached(self.goal(), cfg) {
            return Err("final state is not in the goal space".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: TaskConfig,
    pub goal_pool: Vec<EnvState>,
    pub episodes: Vec<Episode>,
}

impl Dataset {
    pub fn num_states(&self) -> usize {
        self.episodes.iter().map(|e| e.states.len()).sum()
    }

    /// `(episode, step, state)` over every stored state in order.
    pub fn states(&self) -> impl Iterator<Item = (usize, usize, &EnvState)> {
        self.episodes
            .iter()
            .enumerate()
            .flat_map(|(j, e)| e.states.iter().enumerate().map(move |(t, s)| (j, t, s)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectParams {
    pub episodes: usize,
    pub goals: usize,
    pub eps_p: usize,
    pub eps_c: usize,
}

impl Default for CollectParams {
    fn default() -> Self {
        Self {
            episodes: 1000,
            goals: 200,
            eps_p: 3,
            eps_c: 3,
        }
    }
}

/// Outcome of exploring one environment: the horizon of each of the
/// `eps_p * eps_c` rollouts (`None` on failure) and which one was kept.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLog {
    pub env_seed: u64,
    pub horizons: Vec<Option<usize>>,
    pub kept: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Collection {
    pub dataset: Dataset,
    pub log: Vec<BatchLog>,
}

impl Collection {
    pub fn success_ratio(&self) -> f64 {
        let ok = self.log.iter().filter(|b| b.kept.is_some()).count();
        ok as f64 / self.log.len().max(1) as f64
    }
}

/// A uniformly drawn feasible single-arm drag of random direction and length.
pub fn random_drag<R: Rng>(state: &EnvState, cfg: &TaskConfig, rng: &mut R) -> Option<ActionPair> {
    let obstacles = cfg.obstacles(&state.obstacles);
    for _ in 0..RANDOM_DRAG_TRIES {
        let arm = if rng.gen_bool(0.5) {
            Arm::One
        } else {
            Arm::Two
        };
        // Half the picks go to an endpoint. Half of all drags are headed
        // (within +-90 degrees) toward the endpoint's own arm or, for
        // interior picks, the workspace center: a plain random walk mixes
        // too slowly to leave corners within the rollout budget.
        let m = state.keypoints.len();
        let (k, heading) = if rng.gen_bool(0.5) {
            let owner = if rng.gen_bool(0.5) {
                Arm::One
            } else {
                Arm::Two
            };
            let k = if owner == Arm::One { 0 } else { m - 1 };
            let to_base = cfg.arm_bases[owner.index()] - state.keypoints[k];
            (k, rng.gen_bool(DRIFT).then(|| to_base.y.atan2(to_base.x)))
        } else {
            let k = rng.gen_range(0..m);
            let center = Point::new(0.5 * cfg.workspace_width, 0.5 * cfg.workspace_height);
            let to_center = center - state.keypoints[k];
            (
                k,
                rng.gen_bool(DRIFT).then(|| to_center.y.atan2(to_center.x)),
            )
        };
        let angle: f64 = match heading {
            Some(h) => h + rng.gen_range(-FRAC_PI_2..FRAC_PI_2),
            None => rng.gen_range(-PI..PI),
        };
        let len = cfg.max_step * (1.0 - rng.gen::<f64>());
        let pick = state.keypoints[k];
        let pp = PickPlace {
            arm,
            k,
            pick,
            place: pick + Point::new(angle.cos(), angle.sin()) * len,
        };
        if crate::geometry::sequence_feasible(pp.segment(), &cfg.arm_spec(arm), &obstacles) {
            return Some(ActionPair::single(pp));
        }
    }
    None
}

/// Every feasible single-arm correspondence drag toward `goal`, in
/// `(keypoint, arm)` order.
pub fn correspondence_candidates(
    state: &EnvState,
    goal: &EnvState,
    cfg: &TaskConfig,
) -> Vec<PickPlace> {
    let obstacles = cfg.obstacles(&state.obstacles);
    let mut out = Vec::new();
    for (k, (&q, &target)) in state.keypoints.iter().zip(&goal.keypoints).enumerate() {
        let Some(place) = correspondence_place(q, target, cfg.max_step) else {
            continue;
        };
        for arm in Arm::BOTH {
            let pp = PickPlace {
                arm,
                k,
                pick: q,
                place,
            };
            if crate::geometry::sequence_feasible(pp.segment(), &cfg.arm_spec(arm), &obstacles) {
                out.push(pp);
            }
        }
    }
    out
}

/// Drives a fresh environment into the goal space with random drags.
fn goal_rollout(cfg: &TaskConfig, seed: u64) -> Result<EnvState> {
    let mut state = generate_env(cfg, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let budget = GOAL_POOL_HORIZONS * cfg.horizon_max;
    for _ in 0..budget {
        if let Some(a) = random_drag(&state, cfg, &mut rng) {
            state = execute(&state, &a, cfg)?;
            if goal_reached(&state, cfg) {
                return Ok(state);
            }
        }
    }
    Err(Error::GoalPoolFailure { actions: budget })
}

/// A rope can hook around an obstacle so that every keypoint of the hook sits
/// inside the gripper clearance; no feasible drag frees it. Such rollouts are
/// abandoned and the slot retried from a fresh environment.
fn goal_slot(cfg: &TaskConfig, seed: u64) -> Result<EnvState> {
    let mut last = None;
    for attempt in 0..=GOAL_SLOT_RETRIES {
        let s = if attempt == 0 {
            seed
        } else {
            derive_seed(seed, 100 + attempt as u64)
        };
        match goal_rollout(cfg, s) {
            Err(e @ Error::GoalPoolFailure { .. }) => last = Some(e),
            other => return other,
        }
    }
    Err(last.expect("at least one attempt"))
}

pub fn build_goal_pool(cfg: &TaskConfig, count: usize, seed: u64) -> Result<Vec<EnvState>> {
    if count == 0 {
        return Err(Error::InvalidConfig(
            "goal pool size must be at least 1".into(),
        ));
    }
    cfg.validate()?;
    (0..count as u64)
        .into_par_iter()
        .map(|g| goal_slot(cfg, derive_seed(seed, g)))
        .collect()
}

/// One random correspondence rollout toward `goal`. Returns the trajectory
/// when it reaches the goal space within `horizon_max` actions.
fn explore_rollout<R: Rng>(
    start: &EnvState,
    goal: &EnvState,
    cfg: &TaskConfig,
    rng: &mut R,
) -> Result<Option<(Vec<EnvState>, Vec<ActionPair>)>> {
    let mut states = vec![start.clone()];
    let mut actions = Vec::new();
    for _ in 0..cfg.horizon_max {
        let cur = states.last().expect("non-empty");
        let candidates = correspondence_candidates(cur, goal, cfg);
        let Some(pp) = candidates.choose(rng) else {
            return Ok(None);
        };
        let action = ActionPair::single(*pp);
        let next = execute(cur, &action, cfg)?;
        let done = goal_reached(&next, cfg);
        states.push(next);
        actions.push(action);
        if done {
            return Ok(Some((states, actions)));
        }
    }
    Ok(None)
}

fn explore_env(
    cfg: &TaskConfig,
    pool: &[EnvState],
    params: &CollectParams,
    env_seed: u64,
) -> Result<(BatchLog, Option<Episode>)> {
    let start = generate_env(cfg, env_seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(env_seed, 2));
    let mut horizons = Vec::with_capacity(params.eps_p * params.eps_c);
    let mut best: Option<(usize, Vec<EnvState>, Vec<ActionPair>)> = None;
    for _ in 0..params.eps_p {
        let goal = &pool[rng.gen_range(0..pool.len())];
        for _ in 0..params.eps_c {
            let outcome = explore_rollout(&start, goal, cfg, &mut rng)?;
            horizons.push(outcome.as_ref().map(|(_, a)| a.len()));
            if let Some((states, actions)) = outcome {
                if best
                    .as_ref()
                    .is_none_or(|(_, _, a)| actions.len() < a.len())
                {
                    best = Some((horizons.len() - 1, states, actions));
                }
            }
        }
    }
    let kept = best.as_ref().map(|(i, _, _)| *i);
    let episode = best.map(|(_, states, actions)| Episode {
        seed: env_seed,
        dlo_length: start.dlo_length(),
        states,
        actions,
    });
    Ok((
        BatchLog {
            env_seed,
            horizons,
            kept,
        },
        episode,
    ))
}

/// Collects `params.episodes` min-horizon successful episodes. Environments
/// are explored in parallel chunks and merged in seed order, so the result
/// does not depend on the thread count.
pub fn collect(cfg: &TaskConfig, params: &CollectParams, seed: u64) -> Result<Collection> {
    if params.episodes == 0 || params.eps_p * params.eps_c == 0 {
        return Err(Error::InvalidConfig(
            "episodes and eps_p * eps_c must be at least 1".into(),
        ));
    }
    let goal_pool = build_goal_pool(cfg, params.goals, derive_seed(seed, 0))?;
    let env_base = derive_seed(seed, 1);
    let mut episodes = Vec::with_capacity(params.episodes);
    let mut log = Vec::new();
    let mut next_env = 0u64;
    while episodes.len() < params.episodes {
        let chunk: Vec<_> = (next_env..next_env + COLLECT_CHUNK as u64)
            .into_par_iter()
            .map(|i| explore_env(cfg, &goal_pool, params, derive_seed(env_base, i)))
            .collect::<Result<_>>()?;
        next_env += COLLECT_CHUNK as u64;
        for (batch, episode) in chunk {
            if episodes.len() == params.episodes {
                break;
            }
            log.push(batch);
            episodes.extend(episode);
        }
    }
    Ok(Collection {
        dataset: Dataset {
            config: cfg.clone(),
            goal_pool,
            episodes,
        },
        log,
    })
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema: String,
    config: TaskConfig,
    episodes: usize,
    goals: Vec<EnvState>,
}

/// Writes the dataset as JSON Lines: a header line with schema, config and
/// goal pool, then one line per episode. Floats use the shortest exact form.
pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header = Header {
        schema: SCHEMA.to_string(),
        config: ds.config.clone(),
        episodes: ds.episodes.len(),
        goals: ds.goal_pool.clone(),
    };
    write_json_line(&mut w, &header).map_err(|e| Error::io(path, e))?;
    for ep in &ds.episodes {
        write_json_line(&mut w, ep).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> std::io::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();

    let first = match lines.next() {
        Some(l) => l.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::malformed(path, 1, "empty file")),
    };
    let raw: serde_json::Value =
        serde_json::from_str(&first).map_err(|e| Error::malformed(path, 1, e))?;
    let schema = raw.get("schema").and_then(|s| s.as_str()).unwrap_or("");
    if schema != SCHEMA {
        return Err(Error::SchemaVersion {
            path: path.to_path_buf(),
            found: schema.to_string(),
            expected: SCHEMA.to_string(),
        });
    }
    let header: Header = serde_json::from_value(raw).map_err(|e| Error::malformed(path, 1, e))?;
    let cfg = header.config;
    cfg.validate().map_err(|e| Error::malformed(path, 1, e))?;
    for (g, s) in header.goals.iter().enumerate() {
        s.check_dims(&cfg)
            .map_err(|e| Error::malformed(path, 1, format!("goal {g}: {e}")))?;
        if !goal_reached(s, &cfg) {
            return Err(Error::malformed(
                path,
                1,
                format!("goal {g} is not in the goal space"),
            ));
        }
    }

    let mut episodes = Vec::with_capacity(header.episodes);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let ep: Episode =
            serde_json::from_str(&line).map_err(|e| Error::malformed(path, lineno, e))?;
        ep.validate(&cfg)
            .map_err(|m| Error::malformed(path, lineno, m))?;
        episodes.push(ep);
    }
    if episodes.len() != header.episodes {
        return Err(Error::malformed(
            path,
            episodes.len() + 2,
            format!(
                "expected {} episodes, found {} (truncated file?)",
                header.episodes,
                episodes.len()
            ),
        ));
    }
    Ok(Dataset {
        config: cfg,
        goal_pool: header.goals,
        episodes,
    })
}
