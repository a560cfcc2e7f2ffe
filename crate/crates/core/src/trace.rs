//! Solver traces, certificates and their CSV form.

use std::io::{self, Write};

use crate::linalg::Point;

/// Header comment of every CSV trace.
pub const TRACE_HEADER: &str = "# imopt-trace v1";

/// One accepted iteration of a minimization solver.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Iteration index `k` (the record describes step `k → k+1`).
    pub k: usize,
    /// Accepted `L_{k+1}`.
    pub l: f64,
    /// `α_{k+1}`.
    pub alpha: f64,
    /// `A_{k+1}`.
    pub a: f64,
    /// Attempts `i_k + 1`.
    pub attempts: usize,
    /// δ_k used.
    pub delta: f64,
    /// δ̃_k achieved, on the scale of `φ_{k+1}`.
    pub delta_tilde: f64,
    /// `f_δ` at the new point.
    pub f_delta: f64,
    /// `f` at the certified point after this iteration.
    pub f: f64,
    /// Certificate bound after this iteration.
    pub cert: f64,
}

/// A posteriori accuracy certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    /// `R²/A_N`.
    pub r2_term: f64,
    /// Accumulated δ term.
    pub delta_term: f64,
    /// Accumulated δ̃ term.
    pub delta_tilde_term: f64,
    /// Sum of the three components.
    pub bound_value: f64,
}

impl Certificate {
    /// Builds a certificate whose bound is the sum of its components.
    pub fn new(r2_term: f64, delta_term: f64, delta_tilde_term: f64) -> Self {
        Self {
            r2_term,
            delta_term,
            delta_tilde_term,
            bound_value: r2_term + delta_term + delta_tilde_term,
        }
    }

    /// The trivial certificate of a run with no iterations.
    pub fn infinite() -> Self {
        Self::new(f64::INFINITY, 0.0, 0.0)
    }
}

/// One stage of a restarted method.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    /// Iterations spent in the stage.
    pub iterations: usize,
    /// Stage output.
    pub x: Point,
    /// Stage-specific bound (radius or gap bound).
    pub bound: f64,
}

/// Full trace of a minimization solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverRun {
    /// Accepted iterations.
    pub records: Vec<IterationRecord>,
    /// Iterates `x_0, …, x_N`.
    pub iterates: Vec<Point>,
    /// Last iterate.
    pub x_last: Point,
    /// Weighted average `x̄_N` (equal to `x_last` for methods that certify it).
    pub x_bar: Point,
    /// Final certificate.
    pub certificate: Certificate,
    /// Per-iteration distance bounds, when the method provides them.
    pub distance_bounds: Vec<f64>,
    /// Restart stages, when the method restarts.
    pub stages: Vec<StageRecord>,
}

impl SolverRun {
    /// An empty run sitting at `x0`.
    pub fn at_start(x0: &[f64]) -> Self {
        Self {
            records: Vec::new(),
            iterates: vec![x0.to_vec()],
            x_last: x0.to_vec(),
            x_bar: x0.to_vec(),
            certificate: Certificate::infinite(),
            distance_bounds: Vec::new(),
            stages: Vec::new(),
        }
    }

    /// Number of accepted iterations `N`.
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// `Σ (i_k + 1)`.
    pub fn total_attempts(&self) -> usize {
        self.records.iter().map(|r| r.attempts).sum()
    }

    /// `A_N` (0 before the first step).
    pub fn a_n(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.a)
    }

    /// Largest accepted `L_{k+1}`.
    pub fn l_max(&self) -> f64 {
        self.records.iter().map(|r| r.l).fold(0.0, f64::max)
    }

    /// Writes the trace as CSV with columns `k,L,alpha,A,f,att,delta,cert`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        writeln!(w, "k,L,alpha,A,f,att,delta,cert")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{:e},{:e},{:e},{:e},{},{:e},{:e}",
                r.k, r.l, r.alpha, r.a, r.f, r.attempts, r.delta, r.cert
            )?;
        }
        Ok(())
    }
}

/// Why a mirror-prox run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// `S_N` reached its target.
    Target,
    /// The iteration cap fired first.
    MaxIter,
}

/// One accepted mirror-prox iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ViRecord {
    /// Iteration index.
    pub k: usize,
    /// Accepted `L_{k+1}`.
    pub l: f64,
    /// Attempts `i_k + 1`.
    pub attempts: usize,
    /// Extrapolation point `w_k`.
    pub w: Point,
    /// New point `z_{k+1}`.
    pub z: Point,
    /// Largest δ̃ achieved by the two prox steps.
    pub delta_tilde: f64,
    /// `S_{k+1} = Σ 1/L`.
    pub s: f64,
    /// A posteriori certificate after this iteration.
    pub cert: f64,
}

/// Full trace of a mirror-prox run.
#[derive(Debug, Clone, PartialEq)]
pub struct ViRun {
    /// Accepted iterations.
    pub records: Vec<ViRecord>,
    /// Starting point `z_0`.
    pub z0: Point,
    /// `ŵ_N`, the `1/L`-weighted average of `w_k`.
    pub w_hat: Point,
    /// `S_N`.
    pub s_n: f64,
    /// `V_max/S_N + 2δ + 2δ̃`.
    pub certificate: f64,
    /// `2 L V_max / N + 2δ + 2δ̃` with `L = max_k L_{k+1}`.
    pub a_priori_bound: f64,
    /// Which stopping rule fired.
    pub stop: StopReason,
    /// Iteration bound reported by universal runs.
    pub iteration_bound: Option<usize>,
    /// Restart stages.
    pub stages: Vec<StageRecord>,
}

impl ViRun {
    /// Number of accepted iterations.
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// `Σ (i_k + 1)`.
    pub fn total_attempts(&self) -> usize {
        self.records.iter().map(|r| r.attempts).sum()
    }

    /// Writes the trace as CSV with columns `k,L,att,S,dtilde,cert`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        writeln!(w, "k,L,att,S,dtilde,cert")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{:e},{},{:e},{:e},{:e}",
                r.k, r.l, r.attempts, r.s, r.delta_tilde, r.cert
            )?;
        }
        Ok(())
    }
}
