//! Batch evaluation: ablation matrices, constraint sweeps, metrics files and
//! SVG rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Arm, TaskConfig};
use crate::controller::ControllerKind;
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::explore::{derive_seed, Dataset};
use crate::planner::{
    build_index, build_latent_index, build_template_index, AutoEncoder, EmbeddingIndex, Planner,
    PlannerKind,
};
use crate::policy::{run_episode, save_results, EpisodeResult};
use crate::sim::{generate_env, EnvState};

pub const CSV_HEADER: &str =
    "cell,planner,controller,episodes,success_rate,mean_actions,std_actions";
pub const SUCCESS_CSV_HEADER: &str = "cell,planner,controller,successes,mean_actions,std_actions";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub planner: PlannerKind,
    pub controller: ControllerKind,
}

impl Cell {
    pub const fn new(planner: PlannerKind, controller: ControllerKind) -> Self {
        Self {
            planner,
            controller,
        }
    }

    pub fn name(&self) -> String {
        format!("{}+{}", self.planner.name(), self.controller.name())
    }

    pub fn parse(s: &str) -> Option<Self> {
        let (p, c) = s.split_once('+')?;
        Some(Self::new(
            PlannerKind::from_name(p)?,
            ControllerKind::from_name(c)?,
        ))
    }
}

/// The full method and its six single-factor ablations.
pub fn full_matrix() -> Vec<Cell> {
    use ControllerKind::*;
    use PlannerKind::*;
    vec![
        Cell::new(Contrastive, LeaderFollower),
        Cell::new(Template, LeaderFollower),
        Cell::new(Autoencoder, LeaderFollower),
        Cell::new(Fixed, LeaderFollower),
        Cell::new(Random, LeaderFollower),
        Cell::new(Contrastive, OnlyLeader),
        Cell::new(Contrastive, RandomControl),
    ]
}

/// `full` or a comma-separated list of `planner+controller` cells.
pub fn parse_matrix(s: &str) -> Option<Vec<Cell>> {
    if s == "full" {
        return Some(full_matrix());
    }
    s.split(',').map(|c| Cell::parse(c.trim())).collect()
}

/// Dataset plus whichever trained models are available, with every index
/// built once.
pub struct Models {
    pub dataset: Dataset,
    pub encoder: Option<Encoder>,
    pub autoencoder: Option<AutoEncoder>,
    contrastive_index: Option<EmbeddingIndex>,
    latent_index: Option<EmbeddingIndex>,
    template_index: EmbeddingIndex,
}

impl Models {
    pub fn new(
        dataset: Dataset,
        encoder: Option<Encoder>,
        autoencoder: Option<AutoEncoder>,
    ) -> Result<Self> {
        let contrastive_index = encoder
            .as_ref()
            .map(|e| build_index(&dataset, e))
            .transpose()?;
        let latent_index = autoencoder
            .as_ref()
            .map(|a| build_latent_index(&dataset, a))
            .transpose()?;
        let template_index = build_template_index(&dataset);
        Ok(Self {
            dataset,
            encoder,
            autoencoder,
            contrastive_index,
            latent_index,
            template_index,
        })
    }

    /// Planner for `kind`; the fixed planner draws its goal from `seed`.
    pub fn planner(&self, kind: PlannerKind, seed: u64) -> Result<Planner<'_>> {
        let missing =
            |what: &str| Error::MissingModel(format!("planner {} needs {what}", kind.name()));
        Ok(match kind {
            PlannerKind::Contrastive => Planner::Contrastive(
                self.encoder
                    .as_ref()
                    .ok_or_else(|| missing("a trained encoder"))?,
                self.contrastive_index
                    .as_ref()
                    .expect("built with the encoder"),
            ),
            PlannerKind::Autoencoder => Planner::Autoencoder(
                self.autoencoder
                    .as_ref()
                    .ok_or_else(|| missing("a trained autoencoder"))?,
                self.latent_index
                    .as_ref()
                    .expect("built with the autoencoder"),
            ),
            PlannerKind::Template => Planner::Template(&self.template_index),
            PlannerKind::Random => Planner::Random(&self.template_index),
            PlannerKind::Fixed => Planner::fixed(&self.template_index, seed)?,
        })
    }

    pub fn digests(&self) -> BTreeMap<String, String> {
        let mut d = BTreeMap::new();
        if let Some(e) = &self.encoder {
            d.insert("encoder".into(), e.mlp.digest());
        }
        if let Some(a) = &self.autoencoder {
            d.insert("autoencoder".into(), a.mlp.digest());
        }
        d
    }
}

/// Environment seeds shared by every cell of a run.
pub fn env_seeds(seed: u64, n: usize) -> Vec<u64> {
    let base = derive_seed(seed, 0);
    (0..n as u64).map(|i| derive_seed(base, i)).collect()
}

fn episode_seed(seed: u64, i: usize) -> u64 {
    derive_seed(derive_seed(seed, 1), i as u64)
}

fn fixed_seed(seed: u64) -> u64 {
    derive_seed(seed, 2)
}

/// The first episode an evaluation with `seed` would run for `cell`.
pub fn run_single(
    models: &Models,
    cell: &Cell,
    cfg: &TaskConfig,
    seed: u64,
) -> Result<EpisodeResult> {
    cfg.validate()?;
    let env = generate_env(cfg, env_seeds(seed, 1)[0])?;
    let planner = models.planner(cell.planner, fixed_seed(seed))?;
    run_episode(&env, &planner, cell.controller, cfg, episode_seed(seed, 0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub cell: String,
    pub planner: String,
    pub controller: String,
    pub episodes: usize,
    pub successes: usize,
    /// Percent.
    pub success_rate: f64,
    /// Failures charged the full horizon.
    pub mean_actions: f64,
    pub std_actions: f64,
    /// Over successful episodes only; `None` when nothing succeeded.
    pub success_mean_actions: Option<f64>,
    pub success_std_actions: Option<f64>,
}

/// Mean and population standard deviation from exact integer sums.
fn moments(values: &[usize]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as u128;
    let sum: u128 = values.iter().map(|&v| v as u128).sum();
    let sq: u128 = values.iter().map(|&v| (v as u128) * (v as u128)).sum();
    let var_num = n * sq - sum * sum;
    Some((sum as f64 / n as f64, (var_num as f64).sqrt() / n as f64))
}

impl CellMetrics {
    pub fn from_results(cell: &Cell, results: &[EpisodeResult], horizon_max: usize) -> Self {
        let charged: Vec<usize> = results
            .iter()
            .map(|r| r.charged_actions(horizon_max))
            .collect();
        let succ: Vec<usize> = results
            .iter()
            .filter(|r| r.success)
            .map(|r| r.steps)
            .collect();
        let (mean, std) = moments(&charged).unwrap_or((0.0, 0.0));
        let s = moments(&succ);
        Self {
            cell: cell.name(),
            planner: cell.planner.name().into(),
            controller: cell.controller.name().into(),
            episodes: results.len(),
            successes: succ.len(),
            success_rate: if results.is_empty() {
                0.0
            } else {
                100.0 * succ.len() as f64 / results.len() as f64
            },
            mean_actions: mean,
            std_actions: std,
            success_mean_actions: s.map(|m| m.0),
            success_std_actions: s.map(|m| m.1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub seed: u64,
    pub env_seeds: Vec<u64>,
    pub metrics: Vec<CellMetrics>,
    /// Per cell, in cell order; per episode, in seed order.
    pub results: Vec<Vec<EpisodeResult>>,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {workers} workers: {e}")))
}

/// Runs every cell on the same environment seeds. Results do not depend on
/// `workers` (0 means one per core).
pub fn evaluate(
    models: &Models,
    cells: &[Cell],
    episodes: usize,
    cfg: &TaskConfig,
    seed: u64,
    workers: usize,
) -> Result<Evaluation> {
    cfg.validate()?;
    let seeds = env_seeds(seed, episodes);
    let envs = seeds
        .iter()
        .map(|&s| generate_env(cfg, s))
        .collect::<Result<Vec<_>>>()?;
    let planners = cells
        .iter()
        .map(|c| models.planner(c.planner, fixed_seed(seed)))
        .collect::<Result<Vec<_>>>()?;
    let pool = pool(workers)?;
    let mut results = Vec::with_capacity(cells.len());
    for (cell, planner) in cells.iter().zip(&planners) {
        let rs = pool.install(|| {
            envs.par_iter()
                .enumerate()
                .map(|(i, env)| {
                    run_episode(env, planner, cell.controller, cfg, episode_seed(seed, i))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        results.push(rs);
    }
    let metrics = cells
        .iter()
        .zip(&results)
        .map(|(c, r)| CellMetrics::from_results(c, r, cfg.horizon_max))
        .collect();
    Ok(Evaluation {
        seed,
        env_seeds: seeds,
        metrics,
        results,
    })
}

pub fn metrics_csv(rows: &[CellMetrics]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{:.2},{:.4},{:.4}",
            r.cell,
            r.planner,
            r.controller,
            r.episodes,
            r.success_rate,
            r.mean_actions,
            r.std_actions
        )
        .unwrap();
    }
    s
}

pub fn success_only_csv(rows: &[CellMetrics]) -> String {
    let mut s = String::from(SUCCESS_CSV_HEADER);
    s.push('\n');
    let f = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.4}"));
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            r.cell,
            r.planner,
            r.controller,
            r.successes,
            f(r.success_mean_actions),
            f(r.success_std_actions)
        )
        .unwrap();
    }
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn config_digest(cfg: &TaskConfig) -> String {
    sha256_hex(
        serde_json::to_string(cfg)
            .expect("config serializes")
            .as_bytes(),
    )
}

/// Everything needed to reproduce a report directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub config: TaskConfig,
    pub config_digest: String,
    pub seed: u64,
    pub episodes: usize,
    pub cells: Vec<String>,
    pub env_seeds: Vec<u64>,
    pub model_digests: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    /// sha256 of every other file written to the report directory.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: String,
    pub values: Vec<f64>,
}

fn write_file(
    dir: &Path,
    name: &str,
    bytes: &[u8],
    files: &mut BTreeMap<String, String>,
) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    files.insert(name.to_string(), sha256_hex(bytes));
    Ok(path)
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes") + "\n";
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `metrics.csv`, `metrics_success_only.csv`, one results JSONL per
/// cell and `manifest.json`.
pub fn write_evaluation(
    dir: impl AsRef<Path>,
    eval: &Evaluation,
    cfg: &TaskConfig,
    models: &Models,
) -> Result<Manifest> {
    let dir = dir.as_ref();
    create_dir(dir)?;
    let mut files = BTreeMap::new();
    write_file(
        dir,
        "metrics.csv",
        metrics_csv(&eval.metrics).as_bytes(),
        &mut files,
    )?;
    write_file(
        dir,
        "metrics_success_only.csv",
        success_only_csv(&eval.metrics).as_bytes(),
        &mut files,
    )?;
    for (m, rs) in eval.metrics.iter().zip(&eval.results) {
        let name = format!("results_{}.jsonl", m.cell);
        let path = dir.join(&name);
        save_results(rs, &path)?;
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        files.insert(name, sha256_hex(&bytes));
    }
    let manifest = Manifest {
        kind: "eval".into(),
        config: cfg.clone(),
        config_digest: config_digest(cfg),
        seed: eval.seed,
        episodes: eval.env_seeds.len(),
        cells: eval.metrics.iter().map(|m| m.cell.clone()).collect(),
        env_seeds: eval.env_seeds.clone(),
        model_digests: models.digests(),
        sweep: None,
        files,
    };
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    ReachMax,
    ObstacleRadius,
}

/// Gripper margin kept around an obstacle's surface when its radius is swept.
pub const GRIPPER_MARGIN: f64 = 0.06;

impl SweepParam {
    pub const ALL: [SweepParam; 2] = [SweepParam::ReachMax, SweepParam::ObstacleRadius];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::ReachMax => "reach_max",
            SweepParam::ObstacleRadius => "obstacle_radius",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }

    /// `cfg` with the parameter set to `v`. A larger obstacle keeps the same
    /// gripper margin, so the clearance grows with it.
    pub fn apply(self, cfg: &TaskConfig, v: f64) -> TaskConfig {
        let mut c = cfg.clone();
        match self {
            SweepParam::ReachMax => c.reach_max = v,
            SweepParam::ObstacleRadius => {
                c.obstacle_radius = v;
                c.clearance = v + GRIPPER_MARGIN;
            }
        }
        c
    }
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub cells: Vec<Cell>,
    /// `points[v][c]` for value `v` and cell `c`.
    pub points: Vec<Vec<CellMetrics>>,
    pub evaluations: Vec<Evaluation>,
}

impl Sweep {
    pub fn success_curve(&self, cell: usize) -> Vec<f64> {
        self.points.iter().map(|p| p[cell].success_rate).collect()
    }
}

/// Evaluates `cells` at every value with the same seeds. Models trained on
/// the base configuration are reused throughout.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    models: &Models,
    cells: &[Cell],
    param: SweepParam,
    values: &[f64],
    episodes: usize,
    cfg: &TaskConfig,
    seed: u64,
    workers: usize,
) -> Result<Sweep> {
    if values.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidConfig(
            "sweep values must be sorted ascending".into(),
        ));
    }
    let mut evaluations = Vec::with_capacity(values.len());
    for &v in values {
        evaluations.push(evaluate(
            models,
            cells,
            episodes,
            &param.apply(cfg, v),
            seed,
            workers,
        )?);
    }
    Ok(Sweep {
        param,
        values: values.to_vec(),
        cells: cells.to_vec(),
        points: evaluations.iter().map(|e| e.metrics.clone()).collect(),
        evaluations,
    })
}

pub fn sweep_csv(s: &Sweep) -> String {
    let mut out = format!("{},{}\n", s.param.name(), CSV_HEADER);
    for (v, row) in s.values.iter().zip(&s.points) {
        for m in metrics_csv(row).lines().skip(1) {
            writeln!(out, "{v},{m}").unwrap();
        }
    }
    out
}

/// Ranks with ties sharing their mean rank.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (Pearson correlation of tie-averaged ranks).
/// `None` when either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    (va > 0.0 && vb > 0.0).then(|| cov / (va * vb).sqrt())
}

const PALETTE: [&str; 7] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf",
];

/// Line chart of success rate against the swept value, one line per cell.
pub fn sweep_svg(s: &Sweep) -> String {
    let (w, h) = (640.0, 420.0);
    let (l, r, t, b) = (60.0, 190.0, 20.0, 50.0);
    let pw = w - l - r;
    let ph = h - t - b;
    let lo = s.values.first().copied().unwrap_or(0.0);
    let hi = s.values.last().copied().unwrap_or(1.0);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let x = |v: f64| {
        l + if hi > lo {
            (v - lo) / span * pw
        } else {
            pw / 2.0
        }
    };
    let y = |rate: f64| t + ph * (1.0 - rate / 100.0);
    let mut o = String::new();
    writeln!(
        o,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    )
    .unwrap();
    writeln!(
        o,
        r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#
    )
    .unwrap();
    writeln!(
        o,
        r#"<rect x="{l}" y="{t}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    for pct in [0.0, 25.0, 50.0, 75.0, 100.0] {
        let yy = y(pct);
        writeln!(
            o,
            r##"<line x1="{l}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{pct}</text>"##,
            l + pw,
            l - 6.0,
            yy + 4.0
        )
        .unwrap();
    }
    for &v in &s.values {
        writeln!(
            o,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{v}</text>"#,
            x(v),
            t + ph + 16.0
        )
        .unwrap();
    }
    writeln!(
        o,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
        l + pw / 2.0,
        h - 10.0,
        s.param.name()
    )
    .unwrap();
    writeln!(
        o,
        r#"<text x="14" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.2})">success rate (%)</text>"#,
        t + ph / 2.0,
        t + ph / 2.0
    )
    .unwrap();
    for (ci, cell) in s.cells.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        let pts: Vec<String> = s
            .values
            .iter()
            .zip(s.success_curve(ci))
            .map(|(&v, rate)| format!("{:.2},{:.2}", x(v), y(rate)))
            .collect();
        writeln!(
            o,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        )
        .unwrap();
        for p in &pts {
            let (px, py) = p.split_once(',').unwrap();
            writeln!(o, r#"<circle cx="{px}" cy="{py}" r="3" fill="{color}"/>"#).unwrap();
        }
        let ly = t + 14.0 + 18.0 * ci as f64;
        writeln!(
            o,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            l + pw + 10.0,
            l + pw + 30.0,
            l + pw + 34.0,
            ly + 4.0,
            cell.name()
        )
        .unwrap();
    }
    o.push_str("</svg>\n");
    o
}

/// Writes `sweep.csv`, `sweep.svg` and `manifest.json`.
pub fn write_sweep(
    dir: impl AsRef<Path>,
    s: &Sweep,
    cfg: &TaskConfig,
    models: &Models,
) -> Result<Manifest> {
    let dir = dir.as_ref();
    create_dir(dir)?;
    let mut files = BTreeMap::new();
    write_file(dir, "sweep.csv", sweep_csv(s).as_bytes(), &mut files)?;
    write_file(dir, "sweep.svg", sweep_svg(s).as_bytes(), &mut files)?;
    let first = s.evaluations.first();
    let manifest = Manifest {
        kind: "sweep".into(),
        config: cfg.clone(),
        config_digest: config_digest(cfg),
        seed: first.map_or(0, |e| e.seed),
        episodes: first.map_or(0, |e| e.env_seeds.len()),
        cells: s.cells.iter().map(Cell::name).collect(),
        env_seeds: first.map(|e| e.env_seeds.clone()).unwrap_or_default(),
        model_digests: models.digests(),
        sweep: Some(SweepSpec {
            param: s.param.name().into(),
            values: s.values.clone(),
        }),
        files,
    };
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}

const PX_PER_M: f64 = 800.0;
const MARGIN_PX: f64 = 20.0;

/// One frame: workspace, arm annuli, obstacles with their gripper
/// clearance, the subgoal as a ghost chain, the chain with indexed
/// keypoints and, when given, the action taken from this state.
pub fn render_state(
    state: &EnvState,
    subgoal: Option<&EnvState>,
    action: Option<&crate::sim::ActionPair>,
    cfg: &TaskConfig,
    caption: &str,
) -> String {
    let sx = |x: f64| MARGIN_PX + x * PX_PER_M;
    let sy = |y: f64| MARGIN_PX + (cfg.workspace_height - y) * PX_PER_M;
    let s = |d: f64| d * PX_PER_M;
    let w = s(cfg.workspace_width) + 2.0 * MARGIN_PX;
    let h = s(cfg.workspace_height) + 2.0 * MARGIN_PX + 24.0;
    let mut o = String::new();
    writeln!(
        o,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    )
    .unwrap();
    writeln!(
        o,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#fafafa" stroke="black"/>"##,
        sx(0.0),
        sy(cfg.workspace_height),
        s(cfg.workspace_width),
        s(cfg.workspace_height)
    )
    .unwrap();
    for arm in Arm::BOTH {
        let b = cfg.arm_bases[arm.index()];
        let color = if arm == Arm::One {
            "#1f77b4"
        } else {
            "#d62728"
        };
        for r in [cfg.reach_min, cfg.reach_max] {
            writeln!(
                o,
                r#"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" stroke="{color}" stroke-dasharray="6 4"/>"#,
                sx(b.x),
                sy(b.y),
                s(r)
            )
            .unwrap();
        }
        writeln!(
            o,
            r#"<rect x="{:.2}" y="{:.2}" width="12" height="12" fill="{color}"/>"#,
            sx(b.x) - 6.0,
            sy(b.y) - 6.0
        )
        .unwrap();
    }
    for c in &state.obstacles {
        writeln!(
            o,
            r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" stroke="#999" stroke-dasharray="2 3"/><circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#444"/>"##,
            sx(c.x),
            sy(c.y),
            s(cfg.clearance),
            sx(c.x),
            sy(c.y),
            s(cfg.obstacle_radius)
        )
        .unwrap();
    }
    let polyline = |st: &EnvState| {
        st.keypoints
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.y)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    if let Some(g) = subgoal {
        writeln!(
            o,
            r##"<polyline points="{}" fill="none" stroke="#2ca02c" stroke-opacity="0.5" stroke-width="4"/>"##,
            polyline(g)
        )
        .unwrap();
    }
    writeln!(
        o,
        r##"<polyline points="{}" fill="none" stroke="#222" stroke-width="3"/>"##,
        polyline(state)
    )
    .unwrap();
    for (k, p) in state.keypoints.iter().enumerate() {
        writeln!(
            o,
            r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#ff7f0e"/><text x="{:.2}" y="{:.2}" font-size="9">{k}</text>"##,
            sx(p.x),
            sy(p.y),
            sx(p.x) + 5.0,
            sy(p.y) - 5.0
        )
        .unwrap();
    }
    if let Some(a) = action {
        for pp in a.parts() {
            let color = if pp.arm == Arm::One {
                "#1f77b4"
            } else {
                "#d62728"
            };
            writeln!(
                o,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="3"/><circle cx="{:.2}" cy="{:.2}" r="5" fill="none" stroke="{color}" stroke-width="2"/>"#,
                sx(pp.pick.x),
                sy(pp.pick.y),
                sx(pp.place.x),
                sy(pp.place.y),
                sx(pp.place.x),
                sy(pp.place.y)
            )
            .unwrap();
        }
    }
    writeln!(
        o,
        r#"<text x="{MARGIN_PX}" y="{:.2}" font-size="13">{}</text>"#,
        h - 8.0,
        xml_escape(caption)
    )
    .unwrap();
    o.push_str("</svg>\n");
    o
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Writes `step_000.svg` .. one frame per recorded state and returns the
/// paths in order.
pub fn render_episode(
    res: &EpisodeResult,
    cfg: &TaskConfig,
    dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    create_dir(dir)?;
    let mut paths = Vec::with_capacity(res.states.len());
    for (t, state) in res.states.iter().enumerate() {
        let caption = format!(
            "{} + {} | step {t}/{} | {}",
            res.planner,
            res.controller,
            res.steps,
            if t == res.steps && res.success {
                "goal reached"
            } else {
                ""
            }
        );
        let svg = render_state(
            state,
            res.subgoals.get(t).map(|g| &g.state),
            res.actions.get(t),
            cfg,
            caption.trim_end_matches(" | "),
        );
        let path = dir.join(format!("step_{t:03}.svg"));
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_are_exact() {
        let (m, s) = moments(&[2, 4, 4, 4, 5, 5, 7, 9]).unwrap();
        assert_eq!(m, 5.0);
        assert_eq!(s, 2.0);
        assert_eq!(moments(&[20; 5]).unwrap(), (20.0, 0.0));
    }

    #[test]
    fn spearman_known_values() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((spearman(&x, &[10.0, 20.0, 30.0, 40.0, 50.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        // d = [0,0,1,-1,0] -> 1 - 6*2/(5*24) = 0.9
        assert!((spearman(&x, &[1.0, 2.0, 4.0, 3.0, 5.0]).unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(spearman(&x, &[1.0; 5]), None);
    }

    #[test]
    fn matrix_parsing() {
        assert_eq!(parse_matrix("full").unwrap().len(), 7);
        let cells = parse_matrix("contrastive+leader-follower, random+only-leader").unwrap();
        assert_eq!(
            cells[1],
            Cell::new(PlannerKind::Random, ControllerKind::OnlyLeader)
        );
        assert!(parse_matrix("contrastive").is_none());
        assert!(parse_matrix("bogus+leader-follower").is_none());
    }

    #[test]
    fn csv_header_is_stable() {
        assert_eq!(metrics_csv(&[]), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn sweep_apply_keeps_margin() {
        let c = SweepParam::ObstacleRadius.apply(&TaskConfig::default(), 0.06);
        assert!((c.clearance - 0.12).abs() < 1e-12);
        let d = SweepParam::ObstacleRadius.apply(&TaskConfig::default(), 0.04);
        assert!((d.clearance - TaskConfig::default().clearance).abs() < 1e-12);
    }
}
