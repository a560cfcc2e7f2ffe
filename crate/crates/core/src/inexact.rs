//! Inexactness budgets and the δ̃-inexact argmin contract.
//!
//! A point `x̃` is a δ̃-solution of `min_{x in Q} Ψ(x)` when some `h ∈ ∂Ψ(x̃)`
//! satisfies `<h, x − x̃> >= −δ̃` for every `x in Q`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{check_dim, dot, norm2};
use crate::set::{FeasibleSet, Leaf};

/// `δ_k` as a function of `(k, candidate α_{k+1}, candidate A_{k+1})`.
pub type DeltaSchedule = Arc<dyn Fn(usize, f64, f64) -> f64 + Send + Sync>;

/// Error budgets handed to a solver.
#[derive(Clone, Default)]
pub struct InexactnessBudget {
    /// Model error δ added to the exit test.
    pub delta: f64,
    /// Subproblem accuracy δ̃ requested from every prox step.
    pub delta_tilde: f64,
    /// Per-iteration override of `delta`.
    pub schedule: Option<DeltaSchedule>,
}

impl fmt::Debug for InexactnessBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InexactnessBudget")
            .field("delta", &self.delta)
            .field("delta_tilde", &self.delta_tilde)
            .field("schedule", &self.schedule.as_ref().map(|_| "fn"))
            .finish()
    }
}

impl InexactnessBudget {
    /// Constant budgets.
    pub fn new(delta: f64, delta_tilde: f64) -> Result<Self> {
        if !(delta >= 0.0) || !(delta_tilde >= 0.0) {
            return Err(Error::InvalidArgument("budgets must be nonnegative".into()));
        }
        Ok(Self {
            delta,
            delta_tilde,
            schedule: None,
        })
    }

    /// Exact oracles: δ = δ̃ = 0.
    pub fn exact() -> Self {
        Self::default()
    }

    /// Replaces the constant δ by a schedule.
    pub fn with_schedule(mut self, schedule: DeltaSchedule) -> Self {
        self.schedule = Some(schedule);
        self
    }

    /// δ_k for a candidate step.
    pub fn delta_k(&self, k: usize, alpha: f64, a_next: f64) -> f64 {
        match &self.schedule {
            Some(s) => s(k, alpha, a_next).max(0.0),
            None => self.delta,
        }
    }
}

/// Converts a functional accuracy `ε̃` of a μ-strongly convex, L-smooth
/// subproblem on a set of radius `R` into a stationarity accuracy δ̃.
pub fn accuracy_translate(
    eps_tilde: f64,
    mu: f64,
    l: f64,
    r: f64,
    grad_norm_at_opt: f64,
    grad_zero_at_opt: bool,
) -> Result<f64> {
    if !(mu > 0.0) || !(l > 0.0) || !(r > 0.0) {
        return Err(Error::InvalidArgument("mu, L and R must be positive".into()));
    }
    if !(eps_tilde >= 0.0) || !(grad_norm_at_opt >= 0.0) {
        return Err(Error::InvalidArgument(
            "eps_tilde and the gradient norm must be nonnegative".into(),
        ));
    }
    if grad_zero_at_opt {
        return Ok(r * (2.0 * l * eps_tilde).sqrt());
    }
    Ok((l * r + grad_norm_at_opt) * (2.0 * eps_tilde / mu).sqrt())
}

/// Checks Definition-7 stationarity of `x_tilde` with `h = subgrad(x_tilde)`
/// by enumerating extreme points (polytope factors) or the closed-form
/// minimizer (ball factors). Intended as a test oracle.
pub fn verify_inexact_stationarity<F>(
    subgrad: F,
    x_tilde: &[f64],
    set: &FeasibleSet,
    delta_tilde: f64,
) -> Result<bool>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    check_dim(x_tilde, set.dim())?;
    let h = subgrad(x_tilde);
    check_dim(&h, set.dim())?;
    let mut min_total = 0.0;
    for (off, leaf) in set.leaves() {
        let n = leaf.dim();
        let hs = &h[off..off + n];
        let xs = &x_tilde[off..off + n];
        let part = match leaf {
            Leaf::Whole(_) => {
                return Err(Error::UnsupportedSet(
                    "stationarity check over an unbounded set".into(),
                ))
            }
            Leaf::Ball(c, r) => dot(hs, c) - r * norm2(hs) - dot(hs, xs),
            Leaf::Simplex(_) | Leaf::Box(..) => {
                let sub = match leaf {
                    Leaf::Simplex(k) => FeasibleSet::Simplex(k),
                    Leaf::Box(l, u) => FeasibleSet::new_box(l.to_vec(), u.to_vec())?,
                    _ => unreachable!(),
                };
                let hx = dot(hs, xs);
                sub.vertices()?
                    .iter()
                    .map(|v| dot(hs, v) - hx)
                    .fold(f64::INFINITY, f64::min)
            }
        };
        min_total += part;
    }
    Ok(min_total >= -delta_tilde - 1e-12)
}

/// Smallest `max_{u in Q} <h, x − u>` over subgradients `h` with
/// `lo <= h <= hi` coordinate-wise (exact for boxes and the whole space, a
/// valid upper bound otherwise). Returns `+inf` when no admissible `h`
/// certifies stationarity on an unbounded factor.
pub fn stationarity_gap(lo: &[f64], hi: &[f64], x: &[f64], set: &FeasibleSet) -> Result<f64> {
    check_dim(lo, set.dim())?;
    check_dim(hi, set.dim())?;
    check_dim(x, set.dim())?;
    let mut total = 0.0;
    for (off, leaf) in set.leaves() {
        let n = leaf.dim();
        let (ls, hs, xs) = (&lo[off..off + n], &hi[off..off + n], &x[off..off + n]);
        let part = match leaf {
            Leaf::Whole(_) => {
                if ls.iter().zip(hs).all(|(a, b)| *a <= 0.0 && 0.0 <= *b) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Leaf::Box(bl, bu) => (0..n)
                .map(|i| {
                    let cost = |h: f64| h * xs[i] - (h * bl[i]).min(h * bu[i]);
                    let mut best = cost(ls[i]).min(cost(hs[i]));
                    if ls[i] <= 0.0 && 0.0 <= hs[i] {
                        best = best.min(cost(0.0));
                    }
                    best.max(0.0)
                })
                .sum(),
            Leaf::Simplex(_) | Leaf::Ball(..) => {
                let candidates: [Vec<f64>; 3] = [
                    ls.to_vec(),
                    hs.to_vec(),
                    ls.iter().zip(hs).map(|(a, b)| 0f64.clamp(*a, *b)).collect(),
                ];
                let sub = match leaf {
                    Leaf::Simplex(k) => FeasibleSet::Simplex(k),
                    Leaf::Ball(c, r) => FeasibleSet::ball(c.to_vec(), r)?,
                    _ => unreachable!(),
                };
                let mut best = f64::INFINITY;
                for h in &candidates {
                    best = best.min(dot(h, xs) - sub.support_min(h)?);
                }
                best.max(0.0)
            }
        };
        total += part;
    }
    Ok(total)
}

/// [`stationarity_gap`] for a single subgradient `h`.
pub fn stationarity_gap_point(h: &[f64], x: &[f64], set: &FeasibleSet) -> Result<f64> {
    stationarity_gap(h, h, x, set)
}
