//! Contrastive state encoder.
//!
//! An MLP maps a workspace-normalized state to a unit vector. Training pulls
//! states of the same episode together and pushes states of other episodes
//! apart with an InfoNCE objective over `exp(z . z')` similarities.

use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::TaskConfig;
use crate::error::{Error, Result};
use crate::explore::Dataset;
use crate::nn::{Adam, Mlp};
use crate::sim::EnvState;

/// Pre-normalization norms below this fall back to `e_1`.
pub const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Embedding dimension.
    pub d: usize,
    /// Width of both hidden layers.
    pub hidden: usize,
    pub negatives: usize,
    /// Anchors per minibatch.
    pub batch: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            d: 32,
            hidden: 256,
            negatives: 31,
            batch: 64,
            epochs: 30,
            lr: 1e-3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0
            || self.hidden == 0
            || self.negatives == 0
            || self.batch == 0
            || self.epochs == 0
        {
            return Err(Error::InvalidConfig(
                "d, hidden, negatives, batch and epochs must be positive".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig("lr must be positive".into()));
        }
        Ok(())
    }
}

/// A unit-norm embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(pub Vec<f64>);

impl Embedding {
    pub fn dot(&self, other: &Embedding) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Unit vector along `v`, or `e_1` when `v` is (numerically) zero.
    pub fn normalize(v: &[f64]) -> Embedding {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n < ZERO_NORM {
            let mut e = vec![0.0; v.len()];
            e[0] = 1.0;
            Embedding(e)
        } else {
            Embedding(v.iter().map(|x| x / n).collect())
        }
    }
}

pub fn similarity(a: &Embedding, b: &Embedding) -> f64 {
    a.dot(b).exp()
}

/// `-log(sim(a,p) / (sim(a,p) + sum_n sim(a,n)))`, evaluated in log space.
pub fn info_nce_loss(anchor: &Embedding, positive: &Embedding, negatives: &[Embedding]) -> f64 {
    let pos = anchor.dot(positive);
    let logits: Vec<f64> = std::iter::once(pos)
        .chain(negatives.iter().map(|n| anchor.dot(n)))
        .collect();
    log_sum_exp(&logits) - pos
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Trained encoder together with the workspace extents used to scale its
/// inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub mlp: Mlp,
    pub workspace: [f64; 2],
}

impl Encoder {
    pub fn init(task: &TaskConfig, train: &TrainConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(train.seed);
        let sizes = [task.state_dim(), train.hidden, train.hidden, train.d];
        Self {
            mlp: Mlp::glorot(&sizes, &mut rng),
            workspace: [task.workspace_width, task.workspace_height],
        }
    }

    pub fn dim(&self) -> usize {
        self.mlp.output_dim()
    }

    pub fn input(&self, state: &EnvState) -> Result<Vec<f64>> {
        let flat = state.flat();
        if flat.len() != self.mlp.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.mlp.input_dim(),
                got: flat.len(),
            });
        }
        Ok(flat
            .iter()
            .enumerate()
            .map(|(i, v)| v / self.workspace[i % 2])
            .collect())
    }

    pub fn inputs<'a>(
        &self,
        states: impl IntoIterator<Item = &'a EnvState>,
    ) -> Result<Array2<f64>> {
        let rows = states
            .into_iter()
            .map(|s| self.input(s))
            .collect::<Result<Vec<_>>>()?;
        let n = rows.len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Ok(Array2::from_shape_vec((n, self.mlp.input_dim()), flat).expect("rows share a length"))
    }

    pub fn encode(&self, state: &EnvState) -> Result<Embedding> {
        Ok(self.encode_batch(std::slice::from_ref(state))?.remove(0))
    }

    pub fn encode_batch(&self, states: &[EnvState]) -> Result<Vec<Embedding>> {
        let x = self.inputs(states)?;
        Ok(self.embed_inputs(x.view()))
    }

    pub fn embed_inputs(&self, x: ArrayView2<f64>) -> Vec<Embedding> {
        self.mlp
            .forward(x)
            .rows()
            .into_iter()
            .map(|r| Embedding::normalize(r.as_slice().expect("standard layout")))
            .collect()
    }
}

/// Mean InfoNCE over a batch laid out as consecutive groups of
/// `[anchor, positive, negative_1..negative_N]` rows, with its exact
/// gradient with respect to every parameter.
pub fn contrastive_loss_grad(mlp: &Mlp, x: ArrayView2<f64>, negatives: usize) -> (f64, Mlp) {
    let group = negatives + 2;
    assert_eq!(x.nrows() % group, 0, "batch rows must be whole groups");
    let groups = x.nrows() / group;
    let trace = mlp.forward_trace(x);
    let y = trace.output();
    let (z, norms) = normalize_rows(y.view());
    let mut dz = Array2::<f64>::zeros(z.raw_dim());
    let mut total = 0.0;
    let scale = 1.0 / groups as f64;
    let mut logits = vec![0.0; negatives + 1];
    for g in 0..groups {
        let base = g * group;
        let a = z.row(base);
        for (i, l) in logits.iter_mut().enumerate() {
            *l = a.dot(&z.row(base + 1 + i));
        }
        let lse = log_sum_exp(&logits);
        total += lse - logits[0];
        for (i, &logit) in logits.iter().enumerate() {
            let mut dl = (logit - lse).exp();
            if i == 0 {
                dl -= 1.0;
            }
            dl *= scale;
            let other = z.row(base + 1 + i).to_owned();
            dz.row_mut(base).scaled_add(dl, &other);
            dz.row_mut(base + 1 + i).scaled_add(dl, &a);
        }
    }
    // Back through the L2 normalization: dy = (dz - z (z . dz)) / |y|.
    let mut dy = dz;
    for ((mut d, zr), &n) in dy.rows_mut().into_iter().zip(z.rows()).zip(&norms) {
        if n < ZERO_NORM {
            d.fill(0.0);
        } else {
            let proj = zr.dot(&d);
            d.scaled_add(-proj, &zr);
            d /= n;
        }
    }
    (total * scale, mlp.backward(&trace, dy))
}

pub fn contrastive_loss(mlp: &Mlp, x: ArrayView2<f64>, negatives: usize) -> f64 {
    let group = negatives + 2;
    let (z, _) = normalize_rows(mlp.forward(x).view());
    let emb: Vec<Embedding> = z
        .rows()
        .into_iter()
        .map(|r| Embedding(r.to_vec()))
        .collect();
    let total: f64 = emb
        .chunks(group)
        .map(|g| info_nce_loss(&g[0], &g[1], &g[2..]))
        .sum();
    total / (x.nrows() / group) as f64
}

fn normalize_rows(y: ArrayView2<f64>) -> (Array2<f64>, Vec<f64>) {
    let mut z = y.to_owned();
    let mut norms = Vec::with_capacity(z.nrows());
    for mut r in z.rows_mut() {
        let n = r.dot(&r).sqrt();
        norms.push(n);
        if n < ZERO_NORM {
            r.fill(0.0);
            r[0] = 1.0;
        } else {
            r /= n;
        }
    }
    (z, norms)
}

/// Global state indexing over a dataset: row `i` of the input matrix belongs
/// to the episode whose span contains `i`.
pub(crate) struct StateTable {
    pub x: Array2<f64>,
    /// `[start, end)` row range of every episode.
    pub spans: Vec<(usize, usize)>,
    pub owner: Vec<usize>,
}

impl StateTable {
    pub fn build(ds: &Dataset, enc: &Encoder) -> Result<Self> {
        let mut spans = Vec::with_capacity(ds.episodes.len());
        let mut owner = Vec::new();
        let mut start = 0;
        for (j, ep) in ds.episodes.iter().enumerate() {
            let n = ep.states.len();
            spans.push((start, start + n));
            owner.extend(std::iter::repeat_n(j, n));
            start += n;
        }
        let x = enc.inputs(ds.episodes.iter().flat_map(|e| &e.states))?;
        Ok(Self { x, spans, owner })
    }

    /// Row indices `[anchor, positive, negatives..]` for every anchor: the
    /// positive is uniform over the anchor's episode without the anchor,
    /// negatives uniform over states of other episodes.
    pub fn sample_groups<R: Rng>(
        &self,
        anchors: &[usize],
        negatives: usize,
        rng: &mut R,
    ) -> Vec<usize> {
        let total = self.x.nrows();
        let mut rows = Vec::with_capacity(anchors.len() * (negatives + 2));
        for &a in anchors {
            let (lo, hi) = self.spans[self.owner[a]];
            rows.push(a);
            let mut p = rng.gen_range(lo..hi - 1);
            if p >= a {
                p += 1;
            }
            rows.push(p);
            for _ in 0..negatives {
                rows.push(loop {
                    let n = rng.gen_range(0..total);
                    if !(lo..hi).contains(&n) {
                        break n;
                    }
                });
            }
        }
        rows
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub encoder: Encoder,
    /// Mean loss of the untrained network over one tuple draw per anchor.
    pub initial_loss: f64,
    /// Mean minibatch loss of every epoch.
    pub epoch_loss: Vec<f64>,
}

pub fn check_trainable(ds: &Dataset) -> Result<()> {
    if ds.episodes.len() < 2 {
        return Err(Error::InsufficientData(
            "contrastive training needs at least two episodes".into(),
        ));
    }
    if let Some(j) = ds.episodes.iter().position(|e| e.states.len() < 2) {
        return Err(Error::InsufficientData(format!(
            "episode {j} has fewer than two states"
        )));
    }
    Ok(())
}

pub fn train(ds: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    check_trainable(ds)?;
    let mut enc = Encoder::init(&ds.config, cfg);
    let table = StateTable::build(ds, &enc)?;
    let total = table.x.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(crate::explore::derive_seed(cfg.seed, 1));
    let mut opt = Adam::new(&enc.mlp, cfg.lr);
    let mut anchors: Vec<usize> = (0..total).collect();
    let initial_loss = {
        let mut probe_rng = ChaCha8Rng::seed_from_u64(crate::explore::derive_seed(cfg.seed, 2));
        let rows = table.sample_groups(&anchors, cfg.negatives, &mut probe_rng);
        contrastive_loss(
            &enc.mlp,
            table.x.select(Axis(0), &rows).view(),
            cfg.negatives,
        )
    };
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        anchors.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in anchors.chunks(cfg.batch) {
            let rows = table.sample_groups(chunk, cfg.negatives, &mut rng);
            let x = table.x.select(Axis(0), &rows);
            let (loss, grads) = contrastive_loss_grad(&enc.mlp, x.view(), cfg.negatives);
            opt.step(&mut enc.mlp, &grads);
            sum += loss * chunk.len() as f64;
        }
        epoch_loss.push(sum / total as f64);
        check_normalized(&enc, &table, epoch)?;
    }
    Ok(TrainReport {
        encoder: enc,
        initial_loss,
        epoch_loss,
    })
}

fn check_normalized(enc: &Encoder, table: &StateTable, epoch: usize) -> Result<()> {
    if !enc.mlp.is_finite() {
        return Err(Error::Invariant(format!(
            "non-finite parameters after epoch {epoch}"
        )));
    }
    let probe = table.x.slice(ndarray::s![..table.x.nrows().min(256), ..]);
    for z in enc.embed_inputs(probe) {
        if (z.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Invariant(format!(
                "embedding norm {} after epoch {epoch}",
                z.norm()
            )));
        }
    }
    Ok(())
}

/// Mean inner product between states of the same episode and between states
/// of different episodes, over all pairs.
pub fn separation(enc: &Encoder, ds: &Dataset) -> Result<(f64, f64)> {
    let table = StateTable::build(ds, enc)?;
    let z = enc.embed_inputs(table.x.view());
    let (mut within, mut nw, mut cross, mut nc) = (0.0, 0u64, 0.0, 0u64);
    for i in 0..z.len() {
        for k in i + 1..z.len() {
            let d = z[i].dot(&z[k]);
            if table.owner[i] == table.owner[k] {
                within += d;
                nw += 1;
            } else {
                cross += d;
                nc += 1;
            }
        }
    }
    Ok((within / nw.max(1) as f64, cross / nc.max(1) as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Contrastive,
    Autoencoder,
}

/// JSON sidecar stored next to a parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMeta {
    pub kind: ModelKind,
    pub train: TrainConfig,
    pub workspace: [f64; 2],
    /// Number of layers forming the encoder half (autoencoder only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent_layer: Option<usize>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub(crate) fn save_model(mlp: &Mlp, meta: &ModelMeta, path: &Path) -> Result<()> {
    mlp.save(path)?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(meta).expect("meta serializes");
    std::fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))
}

pub(crate) fn load_model(path: &Path) -> Result<(Mlp, ModelMeta)> {
    let mlp = Mlp::load(path)?;
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: ModelMeta =
        serde_json::from_str(&text).map_err(|e| Error::malformed(&side, e.line(), e))?;
    Ok((mlp, meta))
}

pub fn save_encoder(enc: &Encoder, train: &TrainConfig, path: impl AsRef<Path>) -> Result<()> {
    let meta = ModelMeta {
        kind: ModelKind::Contrastive,
        train: train.clone(),
        workspace: enc.workspace,
        latent_layer: None,
    };
    save_model(&enc.mlp, &meta, path.as_ref())
}

pub fn load_encoder(path: impl AsRef<Path>) -> Result<(Encoder, TrainConfig)> {
    let path = path.as_ref();
    let (mlp, meta) = load_model(path)?;
    if meta.kind != ModelKind::Contrastive {
        return Err(Error::malformed(
            sidecar_path(path),
            0,
            "kind: expected contrastive",
        ));
    }
    Ok((
        Encoder {
            mlp,
            workspace: meta.workspace,
        },
        meta.train,
    ))
}
