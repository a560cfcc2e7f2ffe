//! Closed-form Bregman prox steps for linear-plus-separable objectives.

use crate::error::{Error, Result};
use crate::linalg::{check_dim, log_sum_exp, Point};
use crate::set::{FeasibleSet, Leaf};
use crate::setup::{entropy_set_error, ProxSetup, SetupKind, ENTROPY_FLOOR};

/// A separable simple function `h(x) = Σ λ_i |x_i| + Σ (c_i / 2) x_i²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleTerm {
    /// Per-coordinate ℓ1 weights λ_i ≥ 0.
    pub l1: Vec<f64>,
    /// Per-coordinate quadratic weights c_i ≥ 0.
    pub quad: Vec<f64>,
}

impl SimpleTerm {
    /// `h = 0` on `R^n`.
    pub fn zero(n: usize) -> Self {
        Self {
            l1: vec![0.0; n],
            quad: vec![0.0; n],
        }
    }

    /// `h = λ‖x‖₁`.
    pub fn l1(lambda: f64, n: usize) -> Self {
        Self {
            l1: vec![lambda; n],
            quad: vec![0.0; n],
        }
    }

    /// `h = (c/2)‖x‖²`.
    pub fn quadratic(c: f64, n: usize) -> Self {
        Self {
            l1: vec![0.0; n],
            quad: vec![c; n],
        }
    }

    /// Builds from weight vectors, rejecting negative weights.
    pub fn from_weights(l1: Vec<f64>, quad: Vec<f64>) -> Result<Self> {
        check_dim(&quad, l1.len())?;
        if l1.iter().chain(&quad).any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidArgument("simple-term weights must be nonnegative".into()));
        }
        Ok(Self { l1, quad })
    }

    /// Concatenation `h(u, v) = a(u) + b(v)`.
    pub fn stack(a: &SimpleTerm, b: &SimpleTerm) -> Self {
        Self {
            l1: a.l1.iter().chain(&b.l1).copied().collect(),
            quad: a.quad.iter().chain(&b.quad).copied().collect(),
        }
    }

    /// Dimension.
    pub fn dim(&self) -> usize {
        self.l1.len()
    }

    /// Whether `h ≡ 0`.
    pub fn is_zero(&self) -> bool {
        self.l1.iter().chain(&self.quad).all(|v| *v == 0.0)
    }

    /// `h(x)`.
    pub fn value(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.l1.iter().zip(&self.quad))
            .map(|(xi, (l, c))| l * xi.abs() + 0.5 * c * xi * xi)
            .sum()
    }

    /// Coordinate intervals `[lo_i, hi_i]` forming `∂h(x)`.
    pub fn subdifferential(&self, x: &[f64]) -> (Point, Point) {
        let mut lo = Vec::with_capacity(x.len());
        let mut hi = Vec::with_capacity(x.len());
        for (xi, (l, c)) in x.iter().zip(self.l1.iter().zip(&self.quad)) {
            let q = c * xi;
            if *xi > 0.0 {
                lo.push(q + l);
                hi.push(q + l);
            } else if *xi < 0.0 {
                lo.push(q - l);
                hi.push(q - l);
            } else {
                lo.push(q - l);
                hi.push(q + l);
            }
        }
        (lo, hi)
    }
}

/// `sign(v) · max(|v| − t, 0)`.
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Exact solution of `min_{x in Q} α(<g, x> + h(x)) + V[z](x)`.
pub fn linear_prox(
    setup: &ProxSetup,
    set: &FeasibleSet,
    z: &[f64],
    alpha: f64,
    g: &[f64],
    h: Option<&SimpleTerm>,
) -> Result<Point> {
    let n = set.dim();
    check_dim(z, n)?;
    check_dim(g, n)?;
    if let Some(h) = h {
        check_dim(&h.l1, n)?;
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("prox step size {alpha} is not valid")));
    }
    let a = alpha / setup.scale;
    let lam = |i: usize| h.map_or(0.0, |h| a * h.l1[i]);
    let cq = |i: usize| h.map_or(0.0, |h| a * h.quad[i]);
    let mut x = vec![0.0; n];
    match setup.kind {
        SetupKind::Euclidean => {
            for (off, leaf) in set.leaves() {
                let m = leaf.dim();
                let idx = off..off + m;
                match leaf {
                    Leaf::Whole(_) | Leaf::Box(..) => {
                        for (j, i) in idx.enumerate() {
                            let w = z[i] - a * g[i];
                            let mut v = soft_threshold(w, lam(i)) / (1.0 + cq(i));
                            if let Leaf::Box(l, u) = leaf {
                                v = v.clamp(l[j], u[j]);
                            }
                            x[i] = v;
                        }
                    }
                    Leaf::Simplex(_) => {
                        let w: Vec<f64> = idx.clone().map(|i| z[i] - a * g[i] - lam(i)).collect();
                        let s: Vec<f64> = idx.clone().map(|i| 1.0 + cq(i)).collect();
                        x[idx].copy_from_slice(&weighted_simplex_projection(&w, &s));
                    }
                    Leaf::Ball(c, r) => {
                        if idx.clone().any(|i| lam(i) != 0.0) {
                            return Err(Error::UnsupportedCombination(
                                "l1 term over a Euclidean ball".into(),
                            ));
                        }
                        let c0 = cq(off);
                        if idx.clone().any(|i| cq(i) != c0) {
                            return Err(Error::UnsupportedCombination(
                                "non-uniform quadratic term over a Euclidean ball".into(),
                            ));
                        }
                        let w: Vec<f64> = idx.clone().map(|i| (z[i] - a * g[i]) / (1.0 + c0)).collect();
                        let ball = FeasibleSet::ball(c.to_vec(), r)?;
                        x[idx].copy_from_slice(&ball.project(&w)?);
                    }
                }
            }
        }
        SetupKind::Entropy => {
            if h.is_some_and(|h| h.quad.iter().any(|c| *c != 0.0)) {
                return Err(Error::UnsupportedCombination(
                    "quadratic simple term with the entropy setup".into(),
                ));
            }
            for (off, leaf) in set.leaves() {
                let Leaf::Simplex(m) = leaf else {
                    return Err(entropy_set_error());
                };
                // On the simplex |x_i| = x_i, so the ℓ1 term is linear.
                let logits: Vec<f64> = (off..off + m)
                    .map(|i| z[i].max(ENTROPY_FLOOR).ln() - a * g[i] - lam(i))
                    .collect();
                let lse = log_sum_exp(&logits);
                for (j, i) in (off..off + m).enumerate() {
                    x[i] = (logits[j] - lse).exp();
                }
            }
        }
    }
    Ok(x)
}

/// Solves `min Σ (s_i/2) x_i² − w_i x_i` over the simplex, `s_i > 0`:
/// `x_i = max(0, (w_i − τ)/s_i)` with `τ` fixed by `Σ x_i = 1`.
pub fn weighted_simplex_projection(w: &[f64], s: &[f64]) -> Point {
    let n = w.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[j].total_cmp(&w[i]));
    let (mut num, mut den) = (0.0, 0.0);
    let mut tau = 0.0;
    for (k, &i) in order.iter().enumerate() {
        num += w[i] / s[i];
        den += 1.0 / s[i];
        let t = (num - 1.0) / den;
        let next_ok = k + 1 == n || t >= w[order[k + 1]];
        if t < w[i] && next_ok {
            tau = t;
            break;
        }
        tau = t;
    }
    w.iter()
        .zip(s)
        .map(|(wi, si)| ((wi - tau) / si).max(0.0))
        .collect()
}
