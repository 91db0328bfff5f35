//! Local optimization by Adam and multi-start generation of training samples.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

pub use crate::adam::AdamConfig;
use crate::adam::AdamState;
use crate::bench::{Problem, ProblemId};
use crate::error::{Error, Result};
use crate::rng;
use crate::textio::TextDoc;

/// Adam descent that can be resumed. Each evaluation fetches cost and
/// gradient together and counts as one unit; iterates are clipped to the box.
#[derive(Debug, Clone)]
pub struct AdamTrajectory<'p> {
    problem: &'p Problem,
    cfg: AdamConfig,
    x: Vec<f64>,
    grad: Vec<f64>,
    cost: f64,
    state: AdamState,
    evaluations: u64,
}

impl<'p> AdamTrajectory<'p> {
    /// Starts at `x0` (clipped into the box) and evaluates it.
    pub fn new(problem: &'p Problem, x0: &[f64], cfg: AdamConfig) -> Result<Self> {
        if x0.len() != problem.dim() {
            return Err(Error::Shape(format!(
                "start point has {} coordinates, problem has {}",
                x0.len(),
                problem.dim()
            )));
        }
        let mut x = x0.to_vec();
        problem.clip(&mut x);
        let mut grad = vec![0.0; x.len()];
        let cost = problem.cost_and_gradient(&x, &mut grad);
        Ok(AdamTrajectory {
            problem,
            cfg,
            state: AdamState::new(x.len()),
            x,
            grad,
            cost,
            evaluations: 1,
        })
    }

    pub fn point(&self) -> &[f64] {
        &self.x
    }

    pub fn into_point(self) -> Vec<f64> {
        self.x
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn steps_taken(&self) -> u64 {
        self.state.steps_taken()
    }

    /// Takes `steps` more steps and returns the cost after each one.
    pub fn advance(&mut self, steps: usize) -> Result<Vec<f64>> {
        let mut costs = Vec::with_capacity(steps);
        for _ in 0..steps {
            if let Some(coordinate) = self.grad.iter().position(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    coordinate,
                    step: self.state.steps_taken() as usize,
                });
            }
            self.state.step(&self.cfg, &mut self.x, &self.grad);
            self.problem.clip(&mut self.x);
            self.cost = self.problem.cost_and_gradient(&self.x, &mut self.grad);
            self.evaluations += 1;
            costs.push(self.cost);
        }
        Ok(costs)
    }
}

/// Result of a fresh local search.
#[derive(Debug, Clone, PartialEq)]
pub struct Descent {
    pub point: Vec<f64>,
    /// Cost at the start point followed by the cost after every step.
    pub costs: Vec<f64>,
}

impl Descent {
    pub fn final_cost(&self) -> f64 {
        *self.costs.last().expect("at least the start point is evaluated")
    }

    /// Running minimum of `costs`.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.costs
            .iter()
            .map(|&c| {
                best = best.min(c);
                best
            })
            .collect()
    }

    pub fn evaluations(&self) -> u64 {
        self.costs.len() as u64
    }
}

/// `steps` Adam iterations from `x0` with fresh moment estimates.
pub fn adam_minimize(problem: &Problem, x0: &[f64], steps: usize, cfg: &AdamConfig) -> Result<Descent> {
    cfg.validate()?;
    let mut traj = AdamTrajectory::new(problem, x0, *cfg)?;
    let mut costs = Vec::with_capacity(steps + 1);
    costs.push(traj.cost());
    costs.extend(traj.advance(steps)?);
    Ok(Descent {
        point: traj.into_point(),
        costs,
    })
}

/// Locally optimized samples used to train the autoencoder.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub problem: ProblemId,
    pub n: usize,
    pub lambda: usize,
    pub seed: u64,
    /// Optimized samples, `N x n` row-major.
    pub samples: Vec<f64>,
    /// Uniform start points, `N x n` row-major.
    pub initial: Vec<f64>,
    /// Cost at every optimized sample.
    pub costs: Vec<f64>,
    pub eval_count: u64,
}

const TRAINSET_KIND: &str = "training-set";

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.n..(i + 1) * self.n]
    }

    pub fn initial_point(&self, i: usize) -> &[f64] {
        &self.initial[i * self.n..(i + 1) * self.n]
    }

    pub fn to_doc(&self) -> TextDoc {
        let mut doc = TextDoc::new(TRAINSET_KIND, 1);
        doc.set("problem", self.problem)
            .set("N", self.len())
            .set("n", self.n)
            .set("lambda", self.lambda)
            .set("seed", self.seed)
            .set("eval_count", self.eval_count);
        doc.push_matrix("initial", self.len(), self.n, self.initial.clone());
        doc.push_matrix("samples", self.len(), self.n, self.samples.clone());
        doc.push_matrix("costs", 1, self.len(), self.costs.clone());
        doc
    }

    pub fn from_doc(doc: &TextDoc) -> Result<Self> {
        let problem: ProblemId = doc.raw("problem")?.parse()?;
        let count: usize = doc.get("N")?;
        let n: usize = doc.get("n")?;
        let grab = |name: &str, rows: usize, cols: usize| -> Result<Vec<f64>> {
            let m = doc.matrix(name)?;
            if m.rows != rows || m.cols != cols {
                return Err(Error::Shape(format!("{name}: expected {rows}x{cols}")));
            }
            Ok(m.data.clone())
        };
        Ok(TrainingSet {
            problem,
            n,
            lambda: doc.get("lambda")?,
            seed: doc.get("seed")?,
            eval_count: doc.get("eval_count")?,
            initial: grab("initial", count, n)?,
            samples: grab("samples", count, n)?,
            costs: grab("costs", 1, count)?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_doc().write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_doc(&TextDoc::read(path, TRAINSET_KIND)?)
    }
}

/// A training set together with the cost of every evaluated iterate.
#[derive(Debug, Clone)]
pub struct SamplingRun {
    pub set: TrainingSet,
    /// `N x (lambda + 1)` row-major: the cost trace of each sample.
    pub step_costs: Vec<f64>,
}

/// Multi-start sampling with the per-sample trace kept.
///
/// Sample `i` draws its start point from stream `i` of `seed`, so the output
/// does not depend on how many threads process the samples.
pub fn sample_with_log(
    problem: &Problem,
    count: usize,
    lambda: usize,
    cfg: &AdamConfig,
    seed: u64,
) -> Result<SamplingRun> {
    if count == 0 {
        return Err(Error::invalid("training set needs at least one sample"));
    }
    cfg.validate()?;
    let n = problem.dim();
    let runs: Vec<(Vec<f64>, Descent)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let x0: Vec<f64> = problem
                .lower()
                .iter()
                .zip(problem.upper())
                .map(|(lo, hi)| r.random_range(*lo..=*hi))
                .collect();
            let d = adam_minimize(problem, &x0, lambda, cfg)?;
            Ok((x0, d))
        })
        .collect::<Result<_>>()?;

    let mut set = TrainingSet {
        problem: problem.id(),
        n,
        lambda,
        seed,
        samples: Vec::with_capacity(count * n),
        initial: Vec::with_capacity(count * n),
        costs: Vec::with_capacity(count),
        eval_count: 0,
    };
    let mut step_costs = Vec::with_capacity(count * (lambda + 1));
    for (x0, d) in runs {
        set.initial.extend_from_slice(&x0);
        set.samples.extend_from_slice(&d.point);
        set.costs.push(d.final_cost());
        set.eval_count += d.evaluations();
        step_costs.extend_from_slice(&d.costs);
    }
    Ok(SamplingRun { set, step_costs })
}

pub fn generate_training_set(
    problem: &Problem,
    count: usize,
    lambda: usize,
    cfg: &AdamConfig,
    seed: u64,
) -> Result<TrainingSet> {
    Ok(sample_with_log(problem, count, lambda, cfg, seed)?.set)
}
