//! Global subgoal planning by retrieval.
//!
//! Every planner answers with the achieved goal of some stored episode. The
//! contrastive planner picks the episode holding the state most similar to
//! the query in embedding space; the ablations pick it at random, by raw
//! coordinate distance, or by distance in an autoencoder's latent space.

use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{self, Encoder, ModelKind, ModelMeta, TrainConfig};
use crate::error::{Error, Result};
use crate::explore::{derive_seed, Dataset};
use crate::nn::{Adam, Mlp};
use crate::sim::EnvState;

/// Which stored state a retrieval landed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Retrieval {
    pub episode: usize,
    pub step: usize,
}

/// Flat table of one vector per dataset state, keyed by `(episode, step)` in
/// lexicographic order, plus every episode's achieved goal.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingIndex {
    keys: Vec<Retrieval>,
    data: Array2<f64>,
    goals: Vec<EnvState>,
    /// Digest of the model that produced the vectors (empty for raw states).
    pub digest: String,
}

impl EmbeddingIndex {
    fn new(ds: &Dataset, data: Array2<f64>, digest: String) -> Self {
        let keys = ds
            .states()
            .map(|(episode, step, _)| Retrieval { episode, step })
            .collect::<Vec<_>>();
        debug_assert_eq!(keys.len(), data.nrows());
        Self {
            keys,
            data,
            goals: ds.episodes.iter().map(|e| e.goal().clone()).collect(),
            digest,
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn num_episodes(&self) -> usize {
        self.goals.len()
    }

    pub fn keys(&self) -> &[Retrieval] {
        &self.keys
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        self.data.row(i).to_slice().expect("standard layout")
    }

    pub fn goal(&self, episode: usize) -> &EnvState {
        &self.goals[episode]
    }

    fn check_query(&self, q: &[f64]) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyIndex);
        }
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: q.len(),
            });
        }
        Ok(())
    }

    /// Entry maximizing `score`; the first (smallest key) wins ties.
    pub fn argmax_by(&self, q: &[f64], score: impl Fn(&[f64], &[f64]) -> f64) -> Result<Retrieval> {
        self.check_query(q)?;
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, row) in self.data.rows().into_iter().enumerate() {
            let s = score(q, row.to_slice().expect("standard layout"));
            if s > best.0 {
                best = (s, i);
            }
        }
        Ok(self.keys[best.1])
    }

    /// Highest `exp(q . z)` similarity.
    pub fn most_similar(&self, q: &[f64]) -> Result<Retrieval> {
        self.argmax_by(q, |a, b| dot(a, b).exp())
    }

    /// Highest raw inner product; same ranking as [`Self::most_similar`].
    pub fn max_inner_product(&self, q: &[f64]) -> Result<Retrieval> {
        self.argmax_by(q, dot)
    }

    pub fn nearest_l2(&self, q: &[f64]) -> Result<Retrieval> {
        self.argmax_by(q, |a, b| {
            -a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn build_index(ds: &Dataset, enc: &Encoder) -> Result<EmbeddingIndex> {
    let x = enc.inputs(ds.episodes.iter().flat_map(|e| &e.states))?;
    let z = enc.embed_inputs(x.view());
    let d = enc.dim();
    let data = Array2::from_shape_vec((z.len(), d), z.into_iter().flat_map(|e| e.0).collect())
        .expect("embeddings share a dimension");
    Ok(EmbeddingIndex::new(ds, data, enc.mlp.digest()))
}

/// Raw flattened states, for the geometric-template planner.
pub fn build_template_index(ds: &Dataset) -> EmbeddingIndex {
    let rows: Vec<Vec<f64>> = ds.states().map(|(_, _, s)| s.flat()).collect();
    let dim = ds.config.state_dim();
    let data =
        Array2::from_shape_vec((rows.len(), dim), rows.concat()).expect("uniform state size");
    EmbeddingIndex::new(ds, data, String::new())
}

pub fn build_latent_index(ds: &Dataset, ae: &AutoEncoder) -> Result<EmbeddingIndex> {
    let x = ae.inputs(ds.episodes.iter().flat_map(|e| &e.states))?;
    let data = ae.mlp.forward_to(x.view(), ae.latent_layer);
    Ok(EmbeddingIndex::new(ds, data, ae.mlp.digest()))
}

/// Retrieves the achieved goal of the episode holding the stored state most
/// similar to `query`.
pub fn plan_subgoal<'i>(
    index: &'i EmbeddingIndex,
    enc: &Encoder,
    query: &EnvState,
) -> Result<(Retrieval, &'i EnvState)> {
    if index.is_empty() {
        return Err(Error::EmptyIndex);
    }
    let z = enc.encode(query)?;
    let r = index.most_similar(&z.0)?;
    Ok((r, index.goal(r.episode)))
}

/// Encoder-decoder with a linear bottleneck, trained on reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoEncoder {
    pub mlp: Mlp,
    /// Number of layers forming the encoder half.
    pub latent_layer: usize,
    pub workspace: [f64; 2],
}

impl AutoEncoder {
    pub fn init(task: &crate::TaskConfig, train: &TrainConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(train.seed);
        let n = task.state_dim();
        let h = train.hidden;
        let mlp = Mlp::glorot(&[n, h, h, train.d, h, h, n], &mut rng);
        Self::with_activations(mlp, 3, [task.workspace_width, task.workspace_height])
    }

    fn with_activations(mut mlp: Mlp, latent_layer: usize, workspace: [f64; 2]) -> Self {
        let last = mlp.layers.len() - 1;
        for (i, l) in mlp.layers.iter_mut().enumerate() {
            l.relu = i + 1 != latent_layer && i != last;
        }
        Self {
            mlp,
            latent_layer,
            workspace,
        }
    }

    pub fn inputs<'a>(
        &self,
        states: impl IntoIterator<Item = &'a EnvState>,
    ) -> Result<Array2<f64>> {
        let shim = Encoder {
            mlp: self.mlp.clone(),
            workspace: self.workspace,
        };
        shim.inputs(states)
    }

    pub fn latent(&self, state: &EnvState) -> Result<Vec<f64>> {
        let x = self.inputs([state])?;
        Ok(self
            .mlp
            .forward_to(x.view(), self.latent_layer)
            .row(0)
            .to_vec())
    }

    /// Mean squared reconstruction error over all coordinates.
    pub fn loss(&self, x: &Array2<f64>) -> f64 {
        let out = self.mlp.forward(x.view());
        (&out - x).mapv(|v| v * v).mean().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct AeReport {
    pub autoencoder: AutoEncoder,
    pub initial_loss: f64,
    /// Reconstruction loss over the whole dataset after every epoch.
    pub epoch_loss: Vec<f64>,
}

pub fn train_autoencoder(ds: &Dataset, cfg: &TrainConfig) -> Result<AeReport> {
    cfg.validate()?;
    if ds.num_states() == 0 {
        return Err(Error::InsufficientData("dataset has no states".into()));
    }
    let mut ae = AutoEncoder::init(&ds.config, cfg);
    let x = ae.inputs(ds.episodes.iter().flat_map(|e| &e.states))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1));
    let mut opt = Adam::new(&ae.mlp, cfg.lr);
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let initial_loss = ae.loss(&x);
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch) {
            let xb = x.select(Axis(0), chunk);
            let trace = ae.mlp.forward_trace(xb.view());
            let scale = 2.0 / xb.len() as f64;
            let d_out = (trace.output() - &xb) * scale;
            let grads = ae.mlp.backward(&trace, d_out);
            opt.step(&mut ae.mlp, &grads);
        }
        if !ae.mlp.is_finite() {
            return Err(Error::Invariant("autoencoder parameters diverged".into()));
        }
        epoch_loss.push(ae.loss(&x));
    }
    // Keeps the rng stream position meaningful if epochs are extended later.
    let _ = rng.gen::<u8>();
    Ok(AeReport {
        autoencoder: ae,
        initial_loss,
        epoch_loss,
    })
}

pub fn save_autoencoder(
    ae: &AutoEncoder,
    train: &TrainConfig,
    path: impl AsRef<Path>,
) -> Result<()> {
    let meta = ModelMeta {
        kind: ModelKind::Autoencoder,
        train: train.clone(),
        workspace: ae.workspace,
        latent_layer: Some(ae.latent_layer),
    };
    encoder::save_model(&ae.mlp, &meta, path.as_ref())
}

pub fn load_autoencoder(path: impl AsRef<Path>) -> Result<(AutoEncoder, TrainConfig)> {
    let path = path.as_ref();
    let (mlp, meta) = encoder::load_model(path)?;
    let side = encoder::sidecar_path(path);
    if meta.kind != ModelKind::Autoencoder {
        return Err(Error::malformed(side, 0, "kind: expected autoencoder"));
    }
    let latent = meta
        .latent_layer
        .filter(|&l| l >= 1 && l < mlp.layers.len())
        .ok_or_else(|| Error::malformed(&side, 0, "latent_layer: missing or out of range"))?;
    Ok((
        AutoEncoder::with_activations(mlp, latent, meta.workspace),
        meta.train,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlannerKind {
    Contrastive,
    Fixed,
    Random,
    Template,
    Autoencoder,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 5] = [
        PlannerKind::Contrastive,
        PlannerKind::Fixed,
        PlannerKind::Random,
        PlannerKind::Template,
        PlannerKind::Autoencoder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Contrastive => "contrastive",
            PlannerKind::Fixed => "fixed",
            PlannerKind::Random => "random",
            PlannerKind::Template => "template",
            PlannerKind::Autoencoder => "autoencoder",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// A ready-to-query planner borrowing its models and index.
#[derive(Debug, Clone, Copy)]
pub enum Planner<'a> {
    Contrastive(&'a Encoder, &'a EmbeddingIndex),
    /// One goal for the whole evaluation run.
    Fixed(&'a EmbeddingIndex, usize),
    /// A fresh goal drawn at the start of every episode.
    Random(&'a EmbeddingIndex),
    Template(&'a EmbeddingIndex),
    Autoencoder(&'a AutoEncoder, &'a EmbeddingIndex),
}

/// A planner's answer: the subgoal and, for retrieval planners, the stored
/// state that was matched.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan<'a> {
    pub episode: usize,
    pub step: Option<usize>,
    pub subgoal: &'a EnvState,
}

impl<'a> Planner<'a> {
    /// Fixed planner whose goal is drawn once from `seed`.
    pub fn fixed(index: &'a EmbeddingIndex, seed: u64) -> Result<Self> {
        if index.num_episodes() == 0 {
            return Err(Error::EmptyIndex);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Planner::Fixed(
            index,
            rng.gen_range(0..index.num_episodes()),
        ))
    }

    pub fn kind(&self) -> PlannerKind {
        match self {
            Planner::Contrastive(..) => PlannerKind::Contrastive,
            Planner::Fixed(..) => PlannerKind::Fixed,
            Planner::Random(..) => PlannerKind::Random,
            Planner::Template(..) => PlannerKind::Template,
            Planner::Autoencoder(..) => PlannerKind::Autoencoder,
        }
    }

    fn index(&self) -> &'a EmbeddingIndex {
        match *self {
            Planner::Contrastive(_, i)
            | Planner::Fixed(i, _)
            | Planner::Random(i)
            | Planner::Template(i)
            | Planner::Autoencoder(_, i) => i,
        }
    }

    /// Per-episode draw; only the random planner uses one.
    pub fn begin_episode<R: Rng>(&self, rng: &mut R) -> Option<usize> {
        match self {
            Planner::Random(i) if i.num_episodes() > 0 => Some(rng.gen_range(0..i.num_episodes())),
            _ => None,
        }
    }

    pub fn plan(&self, state: &EnvState, episode_draw: Option<usize>) -> Result<Plan<'a>> {
        let index = self.index();
        if index.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let hit = match *self {
            Planner::Contrastive(enc, _) => Some(index.most_similar(&enc.encode(state)?.0)?),
            Planner::Template(_) => Some(index.nearest_l2(&state.flat())?),
            Planner::Autoencoder(ae, _) => Some(index.nearest_l2(&ae.latent(state)?)?),
            Planner::Fixed(..) | Planner::Random(_) => None,
        };
        let episode = match (*self, hit) {
            (_, Some(r)) => r.episode,
            (Planner::Fixed(_, j), None) => j,
            (_, None) => episode_draw.ok_or_else(|| {
                Error::Invariant("random planner used without an episode draw".into())
            })?,
        };
        Ok(Plan {
            episode,
            step: hit.map(|r| r.step),
            subgoal: index.goal(episode),
        })
    }
}
