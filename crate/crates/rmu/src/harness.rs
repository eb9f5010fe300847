//! Experiment harness: config parsing, ε-sweeps across trackers and
//! seeds, belief-accuracy diagnostics, and CSV/JSON emission.
//!
//! Config files are flat, line-oriented `key = value` text with
//! `[section]` headers (`#` starts a comment). Recognized sections and
//! keys:
//!
//! ```text
//! [env]       name, horizon, green_mean, red_mean, p_done
//! [labelling] kind, epsilon, epsilons
//! [train]     lr, gamma, explore_eps, frames, eval_episodes, seed
//! [sweep]     trackers, seeds
//! [diagnose]  episodes
//! [output]    path, format
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envs::{
    kitchen_env, kitchen_small, mining_env, mining_small, session_reset, traffic_env,
    traffic_small, LabelledModel,
};
use crate::labelling::{LabelError, LabellingKind};
use crate::rl::{
    evaluate_policy, mean_se, q_learning, RlError, TrackerKind, TrackerRuntime, TrackerSpec,
    TrainConfig,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Invalid config file or CLI arguments (exit code 1).
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Label(#[from] LabelError),
}

impl HarnessError {
    /// CLI exit code: 1 for config errors, 2 for runtime errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            _ => 2,
        }
    }
}

/// Environment selection: a constructor name plus its parameter keys.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub name: String,
    pub horizon: usize,
    pub green_mean: f64,
    pub red_mean: f64,
    pub p_done: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            name: "mining".to_string(),
            horizon: 100,
            green_mean: 6.0,
            red_mean: 4.0,
            p_done: 1.0 / 3.0,
        }
    }
}

/// Output serialization format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self, HarnessError> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(HarnessError::Config(format!("unknown output format `{other}`"))),
        }
    }
}

/// A fully parsed experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub labelling: LabellingKind,
    /// ε used by `run` and `diagnose`.
    pub epsilon: f64,
    /// ε grid used by `sweep`.
    pub epsilons: Vec<f64>,
    pub trackers: Vec<TrackerKind>,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    /// `None` defers to the environment's discount at run time.
    pub gamma_override: Option<f64>,
    /// Diagnostic episodes per seed.
    pub episodes: usize,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            env: EnvConfig::default(),
            labelling: LabellingKind::GroundTruth,
            epsilon: 0.0,
            epsilons: vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5],
            trackers: vec![
                TrackerKind::PerfectRm,
                TrackerKind::Thresholding,
                TrackerKind::Independent,
                TrackerKind::Persistent,
            ],
            seeds: (0..8).collect(),
            train: TrainConfig::default(),
            gamma_override: None,
            episodes: 5,
            out: None,
            format: OutputFormat::Csv,
        }
    }
}

impl ExperimentConfig {
    /// Builds the configured environment.
    pub fn build_model(&self) -> Result<LabelledModel, HarnessError> {
        let e = &self.env;
        Ok(match e.name.as_str() {
            "mining" => mining_env(e.horizon),
            "mining_small" => mining_small(e.horizon),
            "traffic" => traffic_env(e.green_mean, e.red_mean, e.horizon),
            "traffic_small" => traffic_small(e.green_mean, e.red_mean, e.horizon),
            "kitchen" => kitchen_env(e.p_done, e.horizon),
            "kitchen_small" => kitchen_small(e.p_done, e.horizon),
            other => return Err(HarnessError::Config(format!("unknown environment `{other}`"))),
        })
    }

    /// Training config for one sweep cell, with the cell's derived seed
    /// and the environment's discount unless `gamma` was set explicitly.
    fn cell_train(&self, model: &LabelledModel, seed: u64) -> TrainConfig {
        TrainConfig {
            gamma: self.gamma_override.unwrap_or(model.gamma()),
            seed,
            ..self.train
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if self.trackers.is_empty() {
            return Err(HarnessError::Config("tracker list is empty".to_string()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("seed list is empty".to_string()));
        }
        if self.epsilons.is_empty() {
            return Err(HarnessError::Config("epsilon list is empty".to_string()));
        }
        for &e in self.epsilons.iter().chain(std::iter::once(&self.epsilon)) {
            if !(e >= 0.0) {
                return Err(HarnessError::Config(format!("epsilon {e} must be >= 0")));
            }
        }
        if self.episodes == 0 {
            return Err(HarnessError::Config("diagnostic episode count is zero".to_string()));
        }
        Ok(())
    }
}

fn bad_value(section: &str, key: &str, value: &str) -> HarnessError {
    HarnessError::Config(format!("invalid value `{value}` for {section}.{key}"))
}

fn parse_num<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<T, HarnessError> {
    value.parse().map_err(|_| bad_value(section, key, value))
}

fn parse_list<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<Vec<T>, HarnessError> {
    value
        .split(',')
        .map(|item| item.trim().parse().map_err(|_| bad_value(section, key, value)))
        .collect()
}

/// Parses a flat `key = value` config with `[section]` headers into an
/// [`ExperimentConfig`]. Unknown sections or keys are errors; omitted
/// keys take the documented defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = ExperimentConfig::default();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| HarnessError::Config(format!("line {}: malformed section header", lineno + 1)))?;
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        match (section.as_str(), key) {
            ("env", "name") => cfg.env.name = value.to_string(),
            ("env", "horizon") => cfg.env.horizon = parse_num(&section, key, value)?,
            ("env", "green_mean") => cfg.env.green_mean = parse_num(&section, key, value)?,
            ("env", "red_mean") => cfg.env.red_mean = parse_num(&section, key, value)?,
            ("env", "p_done") => cfg.env.p_done = parse_num(&section, key, value)?,
            ("labelling", "kind") => {
                cfg.labelling = LabellingKind::parse(value)
                    .map_err(|e| HarnessError::Config(e.to_string()))?;
            }
            ("labelling", "epsilon") => cfg.epsilon = parse_num(&section, key, value)?,
            ("labelling", "epsilons") => cfg.epsilons = parse_list(&section, key, value)?,
            ("train", "lr") => cfg.train.lr = parse_num(&section, key, value)?,
            ("train", "gamma") => cfg.gamma_override = Some(parse_num(&section, key, value)?),
            ("train", "explore_eps") => cfg.train.explore_eps = parse_num(&section, key, value)?,
            ("train", "frames") => cfg.train.frames = parse_num(&section, key, value)?,
            ("train", "eval_episodes") => cfg.train.eval_episodes = parse_num(&section, key, value)?,
            ("train", "seed") => cfg.train.seed = parse_num(&section, key, value)?,
            ("sweep", "trackers") => {
                cfg.trackers = value
                    .split(',')
                    .map(|t| {
                        TrackerKind::parse(t.trim())
                            .map_err(|e| HarnessError::Config(e.to_string()))
                    })
                    .collect::<Result<_, _>>()?;
            }
            ("sweep", "seeds") => cfg.seeds = parse_list(&section, key, value)?,
            ("diagnose", "episodes") => cfg.episodes = parse_num(&section, key, value)?,
            ("output", "path") => cfg.out = Some(PathBuf::from(value)),
            ("output", "format") => cfg.format = OutputFormat::parse(value)?,
            _ => {
                return Err(HarnessError::Config(format!(
                    "line {}: unknown key `{}.{}`",
                    lineno + 1,
                    section,
                    key
                )))
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// One trained sweep cell: `(tracker, ε, seed)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub env: String,
    pub tracker: String,
    pub noise: String,
    pub epsilon: f64,
    pub seed: u64,
    pub frames: usize,
    pub test_return_mean: f64,
    pub test_return_se: f64,
    /// Informational only; excluded from determinism comparisons.
    pub wall_ms: u64,
}

pub const SWEEP_HEADER: [&str; 9] = [
    "env", "tracker", "noise", "epsilon", "seed", "frames", "test_return_mean", "test_return_se",
    "wall_ms",
];

/// One tracker/seed diagnostic aggregate over all history prefixes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefDiagnosticRow {
    pub env: String,
    pub tracker: String,
    pub seed: u64,
    pub episodes: usize,
    /// Number of history prefixes the TV average ranges over.
    pub histories: usize,
    pub tv_mean: f64,
    pub tv_se: f64,
}

pub const DIAGNOSTIC_HEADER: [&str; 7] =
    ["env", "tracker", "seed", "episodes", "histories", "tv_mean", "tv_se"];

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-cell RNG seed derived from `(master seed, tracker name, ε, seed)`
/// so adding trackers or ε points never perturbs other cells' streams.
pub fn cell_seed(master: u64, tracker: &str, epsilon: f64, seed: u64) -> u64 {
    let mut h = splitmix(master);
    for b in tracker.bytes() {
        h = splitmix(h ^ u64::from(b));
    }
    h = splitmix(h ^ epsilon.to_bits());
    splitmix(h ^ seed)
}

const EVAL_SEED_SALT: u64 = 0x5153_5545_5256_4d55;

fn run_cells(
    cfg: &ExperimentConfig,
    epsilons: &[f64],
) -> Result<Vec<ResultRow>, HarnessError> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    let mut cells = Vec::new();
    for &kind in &cfg.trackers {
        for &epsilon in epsilons {
            for &seed in &cfg.seeds {
                cells.push((kind, epsilon, seed));
            }
        }
    }
    let mut rows = cells
        .par_iter()
        .map(|&(kind, epsilon, seed)| -> Result<ResultRow, HarnessError> {
            let started = Instant::now();
            let spec = TrackerSpec { kind, labelling: cfg.labelling, epsilon };
            let rng_seed = cell_seed(cfg.train.seed, kind.name(), epsilon, seed);
            let train = cfg.cell_train(&model, rng_seed);
            let (q, _curve) = q_learning(&model, spec, &train)?;
            let (mean, se) = evaluate_policy(
                &model,
                spec,
                &q,
                train.eval_episodes,
                rng_seed ^ EVAL_SEED_SALT,
            )?;
            Ok(ResultRow {
                env: model.name.clone(),
                tracker: kind.name().to_string(),
                noise: cfg.labelling.name().to_string(),
                epsilon,
                seed,
                frames: train.frames,
                test_return_mean: mean,
                test_return_se: se,
                wall_ms: started.elapsed().as_millis() as u64,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    sort_result_rows(&mut rows);
    Ok(rows)
}

/// Trains and evaluates every `(tracker, seed)` cell at the single
/// configured ε.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, HarnessError> {
    run_cells(cfg, &[cfg.epsilon])
}

/// Trains and evaluates every `(tracker, ε, seed)` cell over the ε grid.
/// Cells are independent and run on the rayon worker pool; rows are
/// sorted before emission so results never depend on scheduling.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, HarnessError> {
    run_cells(cfg, &cfg.epsilons)
}

fn sort_result_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        (&a.env, &a.tracker, &a.noise)
            .cmp(&(&b.env, &b.tracker, &b.noise))
            .then(a.epsilon.total_cmp(&b.epsilon))
            .then(a.seed.cmp(&b.seed))
    });
}

/// Rolls out uniformly random policies and measures each tracker's
/// belief against the exact filter via total-variation distance, averaged
/// over every history prefix of `cfg.episodes` episodes per seed. The
/// rollouts are a function of `(master seed, seed, episode)` only, so all
/// trackers are conditioned on identical trajectories.
pub fn run_belief_diagnostic(
    cfg: &ExperimentConfig,
) -> Result<Vec<BeliefDiagnosticRow>, HarnessError> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    let mut cells = Vec::new();
    for &kind in &cfg.trackers {
        for &seed in &cfg.seeds {
            cells.push((kind, seed));
        }
    }
    let mut rows = cells
        .par_iter()
        .map(|&(kind, seed)| -> Result<BeliefDiagnosticRow, HarnessError> {
            let spec = TrackerSpec { kind, labelling: cfg.labelling, epsilon: cfg.epsilon };
            let filter_spec = TrackerSpec {
                kind: TrackerKind::ExactFilter,
                labelling: cfg.labelling,
                epsilon: cfg.epsilon,
            };
            let mut tracker = TrackerRuntime::new(&model, spec)?;
            let mut filter = TrackerRuntime::new(&model, filter_spec)?;
            let mut tvs = Vec::new();
            for episode in 0..cfg.episodes {
                let ep_seed = cell_seed(cfg.train.seed, "episode", 0.0, seed)
                    .wrapping_add(splitmix(episode as u64));
                let (mut session, first) = session_reset(&model, ep_seed);
                let mut policy_rng = ChaCha8Rng::seed_from_u64(splitmix(ep_seed));
                tracker.reset(first.0)?;
                filter.reset(first.0)?;
                let mut obs = first.0;
                tvs.push(
                    crate::belief::tv_distance(&tracker.belief(), &filter.belief())
                        .map_err(RlError::from)?,
                );
                while !session.is_done() {
                    let action = policy_rng.gen_range(0..model.n_actions());
                    let out = session.step(action).expect("session not done");
                    let hidden = (kind == TrackerKind::PerfectRm).then_some(out.info.rm_node);
                    tracker.update(obs, action, out.obs.0, hidden)?;
                    filter.update(obs, action, out.obs.0, None)?;
                    obs = out.obs.0;
                    tvs.push(
                        crate::belief::tv_distance(&tracker.belief(), &filter.belief())
                            .map_err(RlError::from)?,
                    );
                }
            }
            let (tv_mean, tv_se) = mean_se(&tvs);
            Ok(BeliefDiagnosticRow {
                env: model.name.clone(),
                tracker: kind.name().to_string(),
                seed,
                episodes: cfg.episodes,
                histories: tvs.len(),
                tv_mean,
                tv_se,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    rows.sort_by(|a, b| (&a.env, &a.tracker, a.seed).cmp(&(&b.env, &b.tracker, b.seed)));
    Ok(rows)
}

fn render_csv<T: Serialize>(rows: &[T], header: &[&str]) -> Result<String, HarnessError> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    if rows.is_empty() {
        wtr.write_record(header)?;
    }
    for row in rows {
        wtr.serialize(row)?;
    }
    let bytes = wtr.into_inner().map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Serializes rows to CSV (one header line, stable column order, `.`
/// decimals, LF endings) or to a JSON array of objects keyed by the CSV
/// column names.
pub fn render_results<T: Serialize>(
    rows: &[T],
    header: &[&str],
    format: OutputFormat,
) -> Result<String, HarnessError> {
    match format {
        OutputFormat::Csv => render_csv(rows, header),
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(rows)?;
            s.push('\n');
            Ok(s)
        }
    }
}

/// Writes rows to `path` in the requested format.
pub fn emit_results<T: Serialize>(
    rows: &[T],
    header: &[&str],
    path: &Path,
    format: OutputFormat,
) -> Result<(), HarnessError> {
    std::fs::write(path, render_results(rows, header, format)?)?;
    Ok(())
}

/// Parses rows previously produced by [`render_results`] (round-trip).
pub fn parse_results<T: for<'de> Deserialize<'de>>(
    text: &str,
    format: OutputFormat,
) -> Result<Vec<T>, HarnessError> {
    match format {
        OutputFormat::Csv => {
            let mut reader = csv::Reader::from_reader(text.as_bytes());
            reader.deserialize().collect::<Result<Vec<_>, _>>().map_err(HarnessError::from)
        }
        OutputFormat::Json => serde_json::from_str(text).map_err(HarnessError::from),
    }
}

/// Value-iteration oracles for the configured environment: the
/// cross-product optimum (the `perfect_rm` reference line), and for
/// Mining with a noisy labelling also the subjective belief-MDP optimum.
pub fn solve_report(cfg: &ExperimentConfig) -> Result<String, HarnessError> {
    use crate::labelling::MiningNoiseKind;
    use crate::product::cross_product;
    use crate::rl::{build_mining_belief_mdp, value_iteration, VI_TOLERANCE};

    let model = cfg.build_model()?;
    let product = cross_product(&model);
    let solution = value_iteration(&product, VI_TOLERANCE);
    let mut out = String::new();
    writeln!(out, "env = {}", model.name).unwrap();
    writeln!(out, "product_states = {}", product.n_states).unwrap();
    writeln!(out, "product_optimal_return = {:.12}", solution.initial_value(&product)).unwrap();
    let noise = match cfg.labelling {
        LabellingKind::MiningUniform => Some(MiningNoiseKind::Uniform),
        LabellingKind::MiningFalsePositive => Some(MiningNoiseKind::FalsePositive),
        _ => None,
    };
    if let Some(noise) = noise {
        let belief_mdp = build_mining_belief_mdp(&model, noise, cfg.epsilon)
            .map_err(RlError::from)?;
        let belief_solution = value_iteration(&belief_mdp, VI_TOLERANCE);
        writeln!(out, "noise = {}", cfg.labelling.name()).unwrap();
        writeln!(out, "epsilon = {}", cfg.epsilon).unwrap();
        writeln!(out, "belief_mdp_states = {}", belief_mdp.n_states).unwrap();
        writeln!(
            out,
            "belief_mdp_optimal_return = {:.12}",
            belief_solution.initial_value(&belief_mdp)
        )
        .unwrap();
    }
    Ok(out)
}
