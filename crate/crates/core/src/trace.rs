//! Convergence traces: best cost found against cumulative evaluations.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Sampling,
    Latent,
    Post,
    Baseline,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Sampling => "sampling",
            Phase::Latent => "latent",
            Phase::Post => "post",
            Phase::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sampling" => Phase::Sampling,
            "latent" => Phase::Latent,
            "post" => Phase::Post,
            "baseline" => Phase::Baseline,
            other => return Err(Error::invalid(format!("unknown phase `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub n_f: u64,
    pub best_cost: f64,
    pub phase: Phase,
}

/// Rows are emitted whenever the best cost improves and once at the end of
/// every phase, so `n_f` is strictly increasing and `best_cost` never rises.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    rows: Vec<TraceRow>,
    n_f: u64,
    best: f64,
}

impl Default for RunTrace {
    fn default() -> Self {
        Self::new()
    }
}

impl RunTrace {
    pub fn new() -> Self {
        RunTrace {
            rows: Vec::new(),
            n_f: 0,
            best: f64::INFINITY,
        }
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn evaluations(&self) -> u64 {
        self.n_f
    }

    pub fn best_cost(&self) -> f64 {
        self.best
    }

    /// Counts one evaluation with the given cost.
    pub fn record(&mut self, phase: Phase, cost: f64) {
        self.n_f += 1;
        if cost < self.best {
            self.best = cost;
            self.rows.push(TraceRow {
                n_f: self.n_f,
                best_cost: cost,
                phase,
            });
        }
    }

    pub fn record_all(&mut self, phase: Phase, costs: &[f64]) {
        for &c in costs {
            self.record(phase, c);
        }
    }

    /// Closes a phase with a row at the current count (unless one exists).
    pub fn end_phase(&mut self, phase: Phase) {
        if self.n_f > 0 && self.rows.last().is_none_or(|r| r.n_f < self.n_f) {
            self.rows.push(TraceRow {
                n_f: self.n_f,
                best_cost: self.best,
                phase,
            });
        }
    }

    /// Best cost at the end of the last row tagged `phase`.
    pub fn phase_best(&self, phase: Phase) -> Option<f64> {
        self.rows.iter().rev().find(|r| r.phase == phase).map(|r| r.best_cost)
    }

    /// Evaluations spent in `phase`.
    pub fn phase_evaluations(&self, phase: Phase) -> u64 {
        let mut prev = 0;
        let mut total = 0;
        for r in &self.rows {
            if r.phase == phase {
                total += r.n_f - prev;
            }
            prev = r.n_f;
        }
        total
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_F,best_cost,phase\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{}", r.n_f, r.best_cost, r.phase);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("n_F,best_cost,phase") {
            return Err(Error::parse("trace", "missing `n_F,best_cost,phase` header"));
        }
        let mut trace = RunTrace::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || Error::parse("trace", format!("bad row {}: `{line}`", i + 2));
            let mut parts = line.split(',');
            let n_f: u64 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let best_cost: f64 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let phase: Phase = parts.next().ok_or_else(bad)?.parse()?;
            trace.rows.push(TraceRow { n_f, best_cost, phase });
            trace.n_f = n_f;
            trace.best = trace.best.min(best_cost);
        }
        Ok(trace)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Checks the two ordering invariants.
    pub fn is_consistent(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].n_f < w[1].n_f && w[1].best_cost <= w[0].best_cost)
    }
}
