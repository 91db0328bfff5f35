//! Search over the latent cube: the decode-then-refine cost, differential
//! evolution, and post-processing of the latent optimum.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adam::AdamConfig;
use crate::bench::Problem;
use crate::error::{Error, Result};
use crate::localopt::{adam_minimize, Descent};
use crate::nn::AutoencoderBundle;
use crate::rng;
use crate::trace::{Phase, RunTrace};

/// DE/rand/1/bin settings: population, generations, differential weight,
/// crossover probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DEConfig {
    pub gamma: usize,
    pub generations: usize,
    pub f: f64,
    pub chi0: f64,
    #[serde(default)]
    pub seed: u64,
}

impl DEConfig {
    pub fn new(gamma: usize, generations: usize, f: f64, chi0: f64) -> Self {
        DEConfig {
            gamma,
            generations,
            f,
            chi0,
            seed: 0,
        }
    }

    /// Latent-space default: population `5m`, 1000 generations.
    pub fn latent_default(m: usize) -> Self {
        DEConfig::new(5 * m, 1000, 0.6, 0.95)
    }

    /// Full-space baseline default.
    pub fn baseline_default() -> Self {
        DEConfig::new(100, 10_000, 0.6, 0.95)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma < 4 {
            return Err(Error::invalid(format!("DE population must be at least 4, got {}", self.gamma)));
        }
        if !(self.f > 0.0) {
            return Err(Error::invalid("DE differential weight must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.chi0) {
            return Err(Error::invalid("DE crossover probability must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Evaluations DE spends: every member of the initial population and
    /// one trial per member per generation.
    pub fn member_evaluations(&self) -> u64 {
        (self.gamma * (self.generations + 1)) as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DEResult {
    pub best: Vec<f64>,
    pub best_cost: f64,
    /// Best cost after initialization and after every generation.
    pub generation_best: Vec<f64>,
    pub final_population: Vec<Vec<f64>>,
}

/// DE/rand/1/bin over `[0, 1]^m`.
///
/// Each candidate is evaluated once by `cost`, which returns its cost plus
/// arbitrary extra data; `observe` sees every evaluation in population order
/// so callers can build deterministic traces. All random draws of a
/// generation happen before its evaluations, which run in parallel.
pub fn differential_evolution_with<T, C, O>(cost: C, m: usize, cfg: &DEConfig, mut observe: O) -> Result<DEResult>
where
    T: Send,
    C: Fn(&[f64]) -> Result<(f64, T)> + Sync,
    O: FnMut(&[f64], f64, &T),
{
    cfg.validate()?;
    if m == 0 {
        return Err(Error::invalid("DE needs at least one dimension"));
    }
    let mut r = rng::rng(cfg.seed);
    let gamma = cfg.gamma;

    let evaluate = |points: &[Vec<f64>]| -> Result<Vec<(f64, T)>> { points.par_iter().map(|p| cost(p)).collect() };

    let mut pop: Vec<Vec<f64>> = (0..gamma).map(|_| (0..m).map(|_| r.random::<f64>()).collect()).collect();
    let mut costs = Vec::with_capacity(gamma);
    for (p, (c, extra)) in pop.iter().zip(evaluate(&pop)?) {
        observe(p, c, &extra);
        costs.push(c);
    }
    let mut best_idx = argmin(&costs);
    let mut best = pop[best_idx].clone();
    let mut best_cost = costs[best_idx];
    let mut generation_best = Vec::with_capacity(cfg.generations + 1);
    generation_best.push(best_cost);

    for _ in 0..cfg.generations {
        let trials: Vec<Vec<f64>> = (0..gamma)
            .map(|i| {
                let (a, b, c) = three_others(&mut r, gamma, i);
                let forced = r.random_range(0..m);
                (0..m)
                    .map(|j| {
                        if j == forced || r.random::<f64>() < cfg.chi0 {
                            (pop[a][j] + cfg.f * (pop[b][j] - pop[c][j])).clamp(0.0, 1.0)
                        } else {
                            pop[i][j]
                        }
                    })
                    .collect()
            })
            .collect();
        let results = evaluate(&trials)?;
        for (i, (trial, (c, extra))) in trials.into_iter().zip(results).enumerate() {
            observe(&trial, c, &extra);
            if c <= costs[i] {
                pop[i] = trial;
                costs[i] = c;
            }
        }
        best_idx = argmin(&costs);
        if costs[best_idx] < best_cost {
            best_cost = costs[best_idx];
            best = pop[best_idx].clone();
        }
        generation_best.push(best_cost);
    }
    Ok(DEResult {
        best,
        best_cost,
        generation_best,
        final_population: pop,
    })
}

/// DE on a plain cost function.
pub fn differential_evolution<C>(cost: C, m: usize, cfg: &DEConfig) -> Result<DEResult>
where
    C: Fn(&[f64]) -> f64 + Sync,
{
    differential_evolution_with(|z| Ok((cost(z), ())), m, cfg, |_, _, _| {})
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &c) in v.iter().enumerate() {
        if c < v[best] {
            best = i;
        }
    }
    best
}

fn three_others(r: &mut impl Rng, gamma: usize, target: usize) -> (usize, usize, usize) {
    let mut pick = |taken: &[usize]| loop {
        let k = r.random_range(0..gamma);
        if !taken.contains(&k) {
            return k;
        }
    };
    let a = pick(&[target]);
    let b = pick(&[target, a]);
    let c = pick(&[target, a, b]);
    (a, b, c)
}

/// Latent cost of one point: the refined point, its cost and the cost of
/// every evaluation on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentEval {
    pub cost: f64,
    pub chi: Vec<f64>,
    /// Costs at the decoded point and after each of the `mu` steps.
    pub step_costs: Vec<f64>,
}

/// Decodes `z` and takes `mu` Adam steps with fresh state; costs `mu + 1`
/// evaluations.
pub fn latent_cost(bundle: &AutoencoderBundle, problem: &Problem, z: &[f64], mu: usize, adam: &AdamConfig) -> Result<LatentEval> {
    if z.len() != bundle.latent_dim() {
        return Err(Error::Shape(format!(
            "latent point has {} coordinates, expected {}",
            z.len(),
            bundle.latent_dim()
        )));
    }
    let Descent { point, costs } = adam_minimize(problem, &bundle.decode(z), mu, adam)?;
    Ok(LatentEval {
        cost: *costs.last().expect("start point evaluated"),
        chi: point,
        step_costs: costs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentResult {
    pub z_star: Vec<f64>,
    pub chi_mu: Vec<f64>,
    pub cost: f64,
    pub generation_best: Vec<f64>,
    pub eval_count: u64,
}

/// DE over the latent cube on the refined cost; every evaluation inside the
/// local searches is recorded in `trace` under the latent phase.
pub fn optimize_latent(
    bundle: &AutoencoderBundle,
    problem: &Problem,
    mu: usize,
    adam: &AdamConfig,
    de: &DEConfig,
    trace: &mut RunTrace,
) -> Result<LatentResult> {
    let start = trace.evaluations();
    let res = differential_evolution_with(
        |z| {
            let e = latent_cost(bundle, problem, z, mu, adam)?;
            Ok((e.cost, e.step_costs))
        },
        bundle.latent_dim(),
        de,
        |_, _, steps: &Vec<f64>| trace.record_all(Phase::Latent, steps),
    )?;
    trace.end_phase(Phase::Latent);
    let chi_mu = latent_cost(bundle, problem, &res.best, mu, adam)?.chi;
    Ok(LatentResult {
        z_star: res.best,
        chi_mu,
        cost: res.best_cost,
        generation_best: res.generation_best,
        eval_count: trace.evaluations() - start,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PostMode {
    /// Continue from the refined latent point.
    PP1,
    /// Restart from the plain decoded point.
    PP2,
}

impl std::str::FromStr for PostMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "PP1" => Ok(PostMode::PP1),
            "PP2" => Ok(PostMode::PP2),
            _ => Err(Error::invalid(format!("unknown post-processing mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostResult {
    /// Where the final local search started.
    pub start: Vec<f64>,
    pub start_cost: f64,
    pub point: Vec<f64>,
    pub cost: f64,
    /// Costs of the `nu + 1` evaluations of the final search.
    pub step_costs: Vec<f64>,
}

/// Final local search from the latent optimum.
///
/// PP1 starts at `LO^mu(decode(z))` (computed with `latent_adam`), PP2 at
/// `decode(z)`; both then take `nu` steps with `post_adam` and fresh state.
pub fn post_process(
    bundle: &AutoencoderBundle,
    problem: &Problem,
    z_star: &[f64],
    mu: usize,
    nu: usize,
    mode: PostMode,
    latent_adam: &AdamConfig,
    post_adam: &AdamConfig,
) -> Result<PostResult> {
    let start = match mode {
        PostMode::PP1 => latent_cost(bundle, problem, z_star, mu, latent_adam)?.chi,
        PostMode::PP2 => bundle.decode(z_star),
    };
    let d = adam_minimize(problem, &start, nu, post_adam)?;
    Ok(PostResult {
        start_cost: d.costs[0],
        start,
        cost: d.final_cost(),
        point: d.point,
        step_costs: d.costs,
    })
}
