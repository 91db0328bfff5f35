//! End-to-end runs: sampling, autoencoder training, latent search and
//! post-processing, plus the full-space DE baseline and latent-dimension
//! sweeps.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adam::AdamConfig;
use crate::analysis::{CurveSource, Dataset, DimCurve};
use crate::bench::{build_c1_instance, C1Instance, Problem, ProblemId, C1_DEFAULT_MINIMA, C1_DEFAULT_RADIUS, C1_MANIFOLD_DIM};
use crate::error::{Error, Result};
use crate::latent::{optimize_latent, post_process, DEConfig, PostMode};
use crate::localopt::{sample_with_log, TrainingSet};
use crate::nn::{train_autoencoder, AutoencoderBundle, Normalization, TrainConfig};
use crate::rng;
use crate::trace::{Phase, RunTrace};

/// How the planted-manifold instance is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct C1Settings {
    pub manifold_dim: usize,
    pub num_minima: usize,
    pub radius: f64,
    /// Instance seed; fixed so that every run seed faces the same problem.
    pub seed: u64,
    /// Load a saved instance instead of building one.
    pub file: Option<PathBuf>,
}

impl Default for C1Settings {
    fn default() -> Self {
        C1Settings {
            manifold_dim: C1_MANIFOLD_DIM,
            num_minima: C1_DEFAULT_MINIMA,
            radius: C1_DEFAULT_RADIUS,
            seed: 42,
            file: None,
        }
    }
}

/// Adam settings for sampling, latent refinement and post-processing.
pub fn adam_presets(problem: ProblemId) -> (AdamConfig, AdamConfig, AdamConfig) {
    match problem {
        ProblemId::C1 => (
            AdamConfig::new(0.02, 0.5, 0.75),
            AdamConfig::new(0.01, 0.9, 0.999),
            AdamConfig::new(0.001, 0.9, 0.999),
        ),
        ProblemId::C2 => (
            AdamConfig::new(20.0, 0.9, 0.999),
            AdamConfig::new(0.5, 0.9, 0.999),
            AdamConfig::new(0.5, 0.9, 0.999),
        ),
        ProblemId::C3 => (
            AdamConfig::new(3.0, 0.5, 0.75),
            AdamConfig::new(0.05, 0.9, 0.999),
            AdamConfig::new(0.05, 0.9, 0.999),
        ),
        ProblemId::C4 => (
            AdamConfig::new(30.0, 0.9, 0.999),
            AdamConfig::new(0.5, 0.9, 0.999),
            AdamConfig::new(0.5, 0.9, 0.999),
        ),
        ProblemId::Sphere => (
            AdamConfig::new(0.1, 0.9, 0.999),
            AdamConfig::new(0.05, 0.9, 0.999),
            AdamConfig::new(0.05, 0.9, 0.999),
        ),
    }
}

/// Final cost below which a run counts as having found the global basin.
pub fn success_threshold(problem: ProblemId) -> f64 {
    match problem {
        ProblemId::C1 => 0.5,
        ProblemId::Sphere => 1e-3,
        _ => 0.1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AegoConfig {
    pub problem: ProblemId,
    pub n: usize,
    /// Number of training samples.
    #[serde(rename = "N")]
    pub samples: usize,
    pub lambda: usize,
    pub mu: usize,
    pub nu: usize,
    pub m: usize,
    pub adam_train: AdamConfig,
    pub adam_latent: AdamConfig,
    pub adam_post: AdamConfig,
    /// Latent DE; its seed is derived from `master_seed`.
    pub de: DEConfig,
    /// Autoencoder training; its seed is derived from `master_seed`.
    pub train: TrainConfig,
    pub pp_mode: PostMode,
    pub master_seed: u64,
    pub output_dir: Option<PathBuf>,
    pub c1: C1Settings,
}

impl Default for AegoConfig {
    fn default() -> Self {
        AegoConfig::preset(ProblemId::C1, 100, 5)
    }
}

impl AegoConfig {
    /// Benchmark defaults for `problem`: 5000 samples, 100/5/1000 local
    /// steps, DE over `5m` members for 1000 generations.
    pub fn preset(problem: ProblemId, n: usize, m: usize) -> Self {
        let (adam_train, adam_latent, adam_post) = adam_presets(problem);
        AegoConfig {
            problem,
            n,
            samples: 5000,
            lambda: 100,
            mu: 5,
            nu: 1000,
            m,
            adam_train,
            adam_latent,
            adam_post,
            de: DEConfig::latent_default(m),
            train: TrainConfig::default(),
            pp_mode: PostMode::PP1,
            master_seed: 0,
            output_dir: None,
            c1: C1Settings::default(),
        }
    }

    /// Smaller sample set and shorter latent search.
    pub fn fast(mut self) -> Self {
        self.samples = 1000;
        self.de.generations = 300;
        self
    }

    /// Changes `m` and the population size that depends on it.
    pub fn with_latent_dim(mut self, m: usize) -> Self {
        self.m = m;
        self.de.gamma = 5 * m;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if self.m == 0 {
            return Err(Error::invalid("m must be at least 1"));
        }
        if self.samples == 0 {
            return Err(Error::invalid("N must be at least 1"));
        }
        self.adam_train.validate()?;
        self.adam_latent.validate()?;
        self.adam_post.validate()?;
        self.de.validate()?;
        self.train.validate()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::parse("config", e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn sampling_seed(&self) -> u64 {
        rng::derive_seed(self.master_seed, "sampling")
    }

    pub fn training_config(&self) -> TrainConfig {
        TrainConfig {
            seed: rng::derive_seed(self.master_seed, "train"),
            ..self.train.clone()
        }
    }

    pub fn latent_de(&self) -> DEConfig {
        self.de.with_seed(rng::derive_seed(self.master_seed, "latent-de"))
    }

    /// Builds the problem, including the c1 instance when needed.
    pub fn build_problem(&self) -> Result<Problem> {
        build_problem(self.problem, self.n, &self.c1)
    }
}

pub fn build_problem(id: ProblemId, n: usize, c1: &C1Settings) -> Result<Problem> {
    match id {
        ProblemId::C1 => {
            let inst = match &c1.file {
                Some(path) => C1Instance::load(path)?,
                None => build_c1_instance(c1.seed, n, c1.manifold_dim, c1.num_minima, c1.radius)?,
            };
            if inst.n() != n {
                return Err(Error::Shape(format!("instance has n = {}, config has n = {n}", inst.n())));
            }
            Ok(Problem::c1(inst))
        }
        other => Problem::new(other, n),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseCounts {
    pub sampling: u64,
    pub latent: u64,
    pub post: u64,
    pub baseline: u64,
    pub total: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseSeconds {
    pub sampling: f64,
    pub training: f64,
    pub latent: f64,
    pub post: f64,
    pub baseline: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub trace: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub training_set: Option<PathBuf>,
    pub instance: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub kind: String,
    pub problem: ProblemId,
    pub n: usize,
    pub config: Option<AegoConfig>,
    pub baseline_de: Option<DEConfig>,
    pub completed_phases: Vec<String>,
    pub error: Option<String>,
    /// Final point and its cost (re-evaluated).
    pub final_point: Vec<f64>,
    pub final_cost: f64,
    /// Lowest cost seen anywhere in the run.
    pub best_cost: f64,
    pub sampling_best: Option<f64>,
    pub reconstruction_loss: Option<f64>,
    pub z_star: Option<Vec<f64>>,
    /// Refined latent cost of `z_star`.
    pub latent_cost: Option<f64>,
    /// Cost where post-processing started.
    pub post_start_cost: Option<f64>,
    pub evaluations: PhaseCounts,
    pub seconds: PhaseSeconds,
    pub artifacts: Artifacts,
    pub success_threshold: f64,
    pub success: bool,
}

impl RunReport {
    fn new(kind: &str, problem: &Problem) -> Self {
        RunReport {
            kind: kind.to_string(),
            problem: problem.id(),
            n: problem.dim(),
            config: None,
            baseline_de: None,
            completed_phases: Vec::new(),
            error: None,
            final_point: Vec::new(),
            final_cost: f64::INFINITY,
            best_cost: f64::INFINITY,
            sampling_best: None,
            reconstruction_loss: None,
            z_star: None,
            latent_cost: None,
            post_start_cost: None,
            evaluations: PhaseCounts::default(),
            seconds: PhaseSeconds::default(),
            artifacts: Artifacts::default(),
            success_threshold: success_threshold(problem.id()),
            success: false,
        }
    }

    fn finish(&mut self, problem: &Problem, x: Vec<f64>, trace: &RunTrace) {
        self.final_cost = problem.cost(&x);
        self.final_point = x;
        self.best_cost = trace.best_cost().min(self.final_cost);
        self.success = self.error.is_none() && self.final_cost < self.success_threshold;
    }

    fn count(&mut self, trace: &RunTrace) {
        self.evaluations = PhaseCounts {
            sampling: trace.phase_evaluations(Phase::Sampling),
            latent: trace.phase_evaluations(Phase::Latent),
            post: trace.phase_evaluations(Phase::Post),
            baseline: trace.phase_evaluations(Phase::Baseline),
            total: trace.evaluations(),
        };
    }

    /// The report with timing fields zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        RunReport {
            seconds: PhaseSeconds::default(),
            ..self.clone()
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::parse("report", e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse("report", e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }
}

/// Sampling phase; every evaluation enters `trace` in sample order.
pub fn sampling_phase(problem: &Problem, cfg: &AegoConfig, trace: &mut RunTrace) -> Result<TrainingSet> {
    let run = sample_with_log(problem, cfg.samples, cfg.lambda, &cfg.adam_train, cfg.sampling_seed())?;
    trace.record_all(Phase::Sampling, &run.step_costs);
    trace.end_phase(Phase::Sampling);
    Ok(run.set)
}

/// Output of a completed or partial run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub trace: RunTrace,
    pub bundle: Option<AutoencoderBundle>,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// All four phases. Phase failures are recorded in the report, which is
/// still written together with the artifacts of the completed phases.
pub fn run_aego(cfg: &AegoConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let problem = cfg.build_problem()?;
    let mut trace = RunTrace::new();
    let mut report = RunReport::new("aego", &problem);
    report.config = Some(cfg.clone());
    if let Some(dir) = &cfg.output_dir {
        ensure_dir(dir)?;
        if let Some(inst) = problem.instance() {
            let path = dir.join("c1_instance.txt");
            inst.save(&path)?;
            report.artifacts.instance = Some(path);
        }
    }
    let t = Instant::now();
    let set = match sampling_phase(&problem, cfg, &mut trace) {
        Ok(set) => set,
        Err(e) => {
            report.error = Some(format!("sampling: {e}"));
            finalize(&mut report, &problem, Vec::new(), &trace, cfg.output_dir.as_deref())?;
            return Ok(RunOutcome { report, trace, bundle: None });
        }
    };
    report.seconds.sampling = t.elapsed().as_secs_f64();
    continue_from_samples(&problem, cfg, &set, trace, report)
}

/// Training, latent search and post-processing from an existing sampling
/// phase (its evaluations already in `trace`).
pub fn run_from_training_set(problem: &Problem, cfg: &AegoConfig, set: &TrainingSet, trace: RunTrace) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut report = RunReport::new("aego", problem);
    report.config = Some(cfg.clone());
    continue_from_samples(problem, cfg, set, trace, report)
}

fn continue_from_samples(
    problem: &Problem,
    cfg: &AegoConfig,
    set: &TrainingSet,
    mut trace: RunTrace,
    mut report: RunReport,
) -> Result<RunOutcome> {
    let dir = cfg.output_dir.as_deref();
    if let Some(dir) = dir {
        ensure_dir(dir)?;
        let path = dir.join("training_set.txt");
        set.save(&path)?;
        report.artifacts.training_set = Some(path);
    }
    report.completed_phases.push("sampling".into());
    report.sampling_best = trace.phase_best(Phase::Sampling);
    let best_sample = (0..set.len())
        .min_by(|&a, &b| set.costs[a].total_cmp(&set.costs[b]))
        .map(|i| set.sample(i).to_vec())
        .unwrap_or_default();

    let t = Instant::now();
    let bundle = match train_autoencoder(set, Normalization::for_problem(problem), cfg.m, &cfg.training_config()) {
        Ok(b) => b,
        Err(e) => {
            report.error = Some(format!("training: {e}"));
            finalize(&mut report, problem, best_sample, &trace, dir)?;
            return Ok(RunOutcome { report, trace, bundle: None });
        }
    };
    report.seconds.training = t.elapsed().as_secs_f64();
    report.reconstruction_loss = Some(bundle.summary.final_loss);
    if let Some(dir) = dir {
        let path = dir.join("autoencoder.txt");
        bundle.save(&path)?;
        report.artifacts.weights = Some(path);
    }
    report.completed_phases.push("training".into());

    let t = Instant::now();
    let latent = match optimize_latent(&bundle, problem, cfg.mu, &cfg.adam_latent, &cfg.latent_de(), &mut trace) {
        Ok(l) => l,
        Err(e) => {
            report.error = Some(format!("latent: {e}"));
            finalize(&mut report, problem, best_sample, &trace, dir)?;
            return Ok(RunOutcome { report, trace, bundle: Some(bundle) });
        }
    };
    report.seconds.latent = t.elapsed().as_secs_f64();
    report.z_star = Some(latent.z_star.clone());
    report.latent_cost = Some(latent.cost);
    report.completed_phases.push("latent".into());

    let t = Instant::now();
    let post = post_process(
        &bundle,
        problem,
        &latent.z_star,
        cfg.mu,
        cfg.nu,
        cfg.pp_mode,
        &cfg.adam_latent,
        &cfg.adam_post,
    );
    let x = match post {
        Ok(p) => {
            trace.record_all(Phase::Post, &p.step_costs);
            trace.end_phase(Phase::Post);
            report.post_start_cost = Some(p.start_cost);
            report.completed_phases.push("post".into());
            p.point
        }
        Err(e) => {
            report.error = Some(format!("post: {e}"));
            latent.chi_mu.clone()
        }
    };
    report.seconds.post = t.elapsed().as_secs_f64();
    finalize(&mut report, problem, x, &trace, dir)?;
    Ok(RunOutcome {
        report,
        trace,
        bundle: Some(bundle),
    })
}

fn finalize(report: &mut RunReport, problem: &Problem, x: Vec<f64>, trace: &RunTrace, dir: Option<&Path>) -> Result<()> {
    report.count(trace);
    if x.is_empty() {
        report.best_cost = trace.best_cost();
    } else {
        report.finish(problem, x, trace);
    }
    if let Some(dir) = dir {
        let path = dir.join("trace.csv");
        trace.write(&path)?;
        report.artifacts.trace = Some(path);
        let path = dir.join("report.toml");
        report.artifacts.report = Some(path.clone());
        report.write(&path)?;
    }
    Ok(())
}

/// DE directly over the problem box, mapped affinely to the unit cube.
pub fn run_de_baseline(problem: &Problem, de: &DEConfig, output_dir: Option<&Path>) -> Result<RunOutcome> {
    let mut trace = RunTrace::new();
    let mut report = RunReport::new("baseline", problem);
    report.baseline_de = Some(*de);
    let to_box = |u: &[f64]| -> Vec<f64> {
        u.iter()
            .zip(problem.lower().iter().zip(problem.upper()))
            .map(|(v, (lo, hi))| (lo + v * (hi - lo)).clamp(*lo, *hi))
            .collect()
    };
    let t = Instant::now();
    let res = crate::latent::differential_evolution_with(
        |u| Ok((problem.cost(&to_box(u)), ())),
        problem.dim(),
        de,
        |_, c, _| trace.record(Phase::Baseline, c),
    )?;
    trace.end_phase(Phase::Baseline);
    report.seconds.baseline = t.elapsed().as_secs_f64();
    report.completed_phases.push("baseline".into());
    if let Some(dir) = output_dir {
        ensure_dir(dir)?;
    }
    finalize(&mut report, problem, to_box(&res.best), &trace, output_dir)?;
    Ok(RunOutcome {
        report,
        trace,
        bundle: None,
    })
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub curve: DimCurve,
    /// One entry per `m`; failures are kept instead of aborting the sweep.
    pub runs: Vec<(usize, Result<RunOutcome>)>,
    pub training_set: TrainingSet,
}

/// Runs the pipeline for every `m` on one shared training set. Artifacts go
/// to `output_dir/m<k>/`, the shared training set and loss curve to
/// `output_dir/`.
pub fn run_sweep(cfg: &AegoConfig, m_list: &[usize]) -> Result<SweepOutcome> {
    if m_list.is_empty() {
        return Err(Error::invalid("empty latent-dimension list"));
    }
    cfg.validate()?;
    let problem = cfg.build_problem()?;
    let mut base = RunTrace::new();
    let set = sampling_phase(&problem, cfg, &mut base)?;
    if let Some(dir) = &cfg.output_dir {
        ensure_dir(dir)?;
        set.save(&dir.join("training_set.txt"))?;
    }
    let mut runs = Vec::with_capacity(m_list.len());
    let mut losses = Vec::with_capacity(m_list.len());
    for &m in m_list {
        let mut run_cfg = cfg.clone().with_latent_dim(m);
        run_cfg.output_dir = cfg.output_dir.as_ref().map(|d| d.join(format!("m{m}")));
        let out = run_from_training_set(&problem, &run_cfg, &set, base.clone());
        let loss = match &out {
            Ok(o) => o.report.reconstruction_loss.unwrap_or(f64::NAN),
            Err(_) => f64::NAN,
        };
        losses.push(loss);
        runs.push((m, out));
    }
    let curve = DimCurve {
        source: CurveSource::Autoencoder,
        dataset: Dataset::Optimized,
        m_values: m_list.to_vec(),
        losses,
        variance_ratios: None,
    };
    if let Some(dir) = &cfg.output_dir {
        DimCurve::write_csv(&[&curve], &dir.join("dim_curve.csv"))?;
    }
    Ok(SweepOutcome {
        curve,
        runs,
        training_set: set,
    })
}
