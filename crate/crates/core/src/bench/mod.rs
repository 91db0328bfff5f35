//! Benchmark problems with analytic gradients.

mod c1;
mod functions;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use c1::{build_c1_instance, C1Instance, C1_DEFAULT_MINIMA, C1_DEFAULT_RADIUS, C1_MANIFOLD_DIM, SINGULAR_EPS};
pub use functions::{
    eval_c2, eval_c3, eval_c4, eval_sphere, grad_c2, grad_c3, grad_c4, grad_sphere, penalty_u,
    SCHWEFEL_OFFSET,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProblemId {
    /// Planted-manifold function with one deep basin.
    C1,
    /// Schwefel.
    C2,
    /// Penalized function.
    C3,
    /// Griewank.
    C4,
    /// Convex bowl on `[-5, 5]^n`, used for sanity checks of the optimizers.
    Sphere,
}

impl ProblemId {
    pub const BENCHMARKS: [ProblemId; 4] = [ProblemId::C1, ProblemId::C2, ProblemId::C3, ProblemId::C4];

    /// Per-coordinate search interval.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            ProblemId::C1 => (-1.0, 1.0),
            ProblemId::C2 | ProblemId::C4 => (-500.0, 500.0),
            ProblemId::C3 => (-50.0, 50.0),
            ProblemId::Sphere => (-5.0, 5.0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemId::C1 => "c1",
            ProblemId::C2 => "c2",
            ProblemId::C3 => "c3",
            ProblemId::C4 => "c4",
            ProblemId::Sphere => "sphere",
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "c1" => Ok(ProblemId::C1),
            "c2" => Ok(ProblemId::C2),
            "c3" => Ok(ProblemId::C3),
            "c4" => Ok(ProblemId::C4),
            "sphere" => Ok(ProblemId::Sphere),
            other => Err(Error::invalid(format!("unknown problem `{other}`"))),
        }
    }
}

/// A cost function over an axis-aligned box.
#[derive(Debug, Clone)]
pub struct Problem {
    id: ProblemId,
    n: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    instance: Option<Arc<C1Instance>>,
}

impl Problem {
    /// One of the closed-form problems (everything but c1).
    pub fn new(id: ProblemId, n: usize) -> Result<Self> {
        if id == ProblemId::C1 {
            return Err(Error::invalid("c1 needs an instance; use Problem::c1"));
        }
        if n == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        let (lo, hi) = id.bounds();
        Ok(Problem {
            id,
            n,
            lower: vec![lo; n],
            upper: vec![hi; n],
            instance: None,
        })
    }

    pub fn c1(instance: C1Instance) -> Self {
        let n = instance.n();
        let (lo, hi) = ProblemId::C1.bounds();
        Problem {
            id: ProblemId::C1,
            n,
            lower: vec![lo; n],
            upper: vec![hi; n],
            instance: Some(Arc::new(instance)),
        }
    }

    pub fn id(&self) -> ProblemId {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn instance(&self) -> Option<&C1Instance> {
        self.instance.as_deref()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.n
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn clip(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn cost(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n);
        match self.id {
            ProblemId::C1 => self.c1_instance().eval(x),
            ProblemId::C2 => eval_c2(x),
            ProblemId::C3 => eval_c3(x),
            ProblemId::C4 => eval_c4(x),
            ProblemId::Sphere => eval_sphere(x),
        }
    }

    /// Cost at `x`, writing the gradient into `grad`.
    pub fn cost_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(grad.len(), self.n);
        match self.id {
            ProblemId::C1 => self.c1_instance().eval_with_gradient(x, grad),
            ProblemId::C2 => grad_c2(x, grad),
            ProblemId::C3 => grad_c3(x, grad),
            ProblemId::C4 => grad_c4(x, grad),
            ProblemId::Sphere => grad_sphere(x, grad),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        self.cost_and_gradient(x, &mut g);
        g
    }

    fn c1_instance(&self) -> &C1Instance {
        self.instance
            .as_deref()
            .expect("c1 problems always carry an instance")
    }
}
