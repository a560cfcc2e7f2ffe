//! Distance-generating functions and Bregman divergences.

use crate::error::{Error, Result};
use crate::linalg::{check_dim, dist2_sq, norm1, norm2, norm_inf, Point};
use crate::set::{FeasibleSet, Leaf};

/// Coordinates are clamped to at least this value before taking logarithms.
pub const ENTROPY_FLOOR: f64 = 1e-16;

/// Which distance-generating function `d` is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetupKind {
    /// `d(x) = ½‖x‖₂²`.
    Euclidean,
    /// `d(x) = Σ x_i ln x_i`, for simplices and products of simplices.
    Entropy,
}

/// The norm in which strong convexity and smoothness are measured.
///
/// `L1` on a product of simplices means `sqrt(Σ_blocks ‖v_b‖₁²)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// Euclidean norm.
    L2,
    /// Blockwise ℓ1 norm.
    L1,
}

/// A prox setup: `d`, its gradient, `V[y](x)`, the norm and the Ω bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxSetup {
    /// Distance-generating function.
    pub kind: SetupKind,
    /// Norm paired with `d`.
    pub norm_kind: NormKind,
    /// `d` is multiplied by this factor (1 for the standard setups).
    pub scale: f64,
    /// Optional override of the Ω bound.
    pub omega_bound: Option<f64>,
}

impl ProxSetup {
    /// `d = ½‖x‖²` with the Euclidean norm.
    pub fn euclidean() -> Self {
        Self {
            kind: SetupKind::Euclidean,
            norm_kind: NormKind::L2,
            scale: 1.0,
            omega_bound: None,
        }
    }

    /// Negative entropy with the (blockwise) ℓ1 norm.
    pub fn entropy() -> Self {
        Self {
            kind: SetupKind::Entropy,
            norm_kind: NormKind::L1,
            scale: 1.0,
            omega_bound: None,
        }
    }

    /// Same setup paired with another norm.
    pub fn with_norm(mut self, norm_kind: NormKind) -> Self {
        self.norm_kind = norm_kind;
        self
    }

    /// Same setup with an explicit Ω.
    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega_bound = Some(omega);
        self
    }

    /// Same setup with `d` multiplied by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.scale *= factor;
        self
    }

    /// Whether `V[y](x) >= ½‖x−y‖²` in `norm_kind`.
    pub fn is_one_strongly_convex(&self) -> bool {
        let base = !matches!((self.kind, self.norm_kind), (SetupKind::Euclidean, NormKind::L1));
        base && self.scale >= 1.0 - 1e-12
    }

    /// `d(x)`.
    pub fn d_value(&self, x: &[f64]) -> f64 {
        let v = match self.kind {
            SetupKind::Euclidean => 0.5 * norm2(x).powi(2),
            SetupKind::Entropy => x
                .iter()
                .map(|v| {
                    let c = v.max(ENTROPY_FLOOR);
                    c * c.ln()
                })
                .sum(),
        };
        self.scale * v
    }

    /// `∇d(x)`.
    pub fn d_grad(&self, x: &[f64]) -> Point {
        match self.kind {
            SetupKind::Euclidean => x.iter().map(|v| self.scale * v).collect(),
            SetupKind::Entropy => x
                .iter()
                .map(|v| self.scale * (v.max(ENTROPY_FLOOR).ln() + 1.0))
                .collect(),
        }
    }

    /// `V[y](x) = d(x) − d(y) − <∇d(y), x − y>`.
    pub fn bregman(&self, y: &[f64], x: &[f64]) -> Result<f64> {
        check_dim(x, y.len())?;
        let v = match self.kind {
            SetupKind::Euclidean => 0.5 * dist2_sq(x, y),
            SetupKind::Entropy => {
                check_entropy_domain(y)?;
                check_entropy_domain(x)?;
                x.iter()
                    .zip(y)
                    .map(|(a, b)| {
                        let a = a.max(ENTROPY_FLOOR);
                        let b = b.max(ENTROPY_FLOOR);
                        a * (a / b).ln() - a + b
                    })
                    .sum::<f64>()
            }
        };
        Ok(self.scale * v)
    }

    /// `‖v‖` in `norm_kind`, blockwise over the factors of `set`.
    pub fn norm(&self, v: &[f64], set: &FeasibleSet) -> f64 {
        match self.norm_kind {
            NormKind::L2 => norm2(v),
            NormKind::L1 => blockwise(v, set, norm1),
        }
    }

    /// Dual norm of `g`.
    pub fn dual_norm(&self, g: &[f64], set: &FeasibleSet) -> f64 {
        match self.norm_kind {
            NormKind::L2 => norm2(g),
            NormKind::L1 => blockwise(g, set, norm_inf),
        }
    }

    /// Ω: explicit override, else 1 (Euclidean) or `2 Σ ln n_b` over simplex blocks (entropy).
    pub fn omega(&self, set: &FeasibleSet) -> Result<f64> {
        if let Some(o) = self.omega_bound {
            return Ok(o);
        }
        match self.kind {
            SetupKind::Euclidean => Ok(1.0),
            SetupKind::Entropy => {
                let mut total = 0.0;
                for (_, leaf) in set.leaves() {
                    match leaf {
                        Leaf::Simplex(n) => total += 2.0 * (n as f64).ln(),
                        _ => return Err(entropy_set_error()),
                    }
                }
                Ok(total)
            }
        }
    }

    /// `argmin_{x in Q} d(x)`.
    pub fn prox_center(&self, set: &FeasibleSet) -> Result<Point> {
        match self.kind {
            SetupKind::Euclidean => set.project(&vec![0.0; set.dim()]),
            SetupKind::Entropy => {
                let mut out = vec![0.0; set.dim()];
                for (off, leaf) in set.leaves() {
                    match leaf {
                        Leaf::Simplex(n) => {
                            out[off..off + n].iter_mut().for_each(|v| *v = 1.0 / n as f64)
                        }
                        _ => return Err(entropy_set_error()),
                    }
                }
                Ok(out)
            }
        }
    }

    /// `max_{u in Q} V[z](u)`; convexity puts the maximum at extreme points.
    pub fn max_divergence(&self, set: &FeasibleSet, z: &[f64]) -> Result<f64> {
        check_dim(z, set.dim())?;
        let mut total = 0.0;
        for (off, leaf) in set.leaves() {
            let zs = &z[off..off + leaf.dim()];
            let part = match (self.kind, leaf) {
                (_, Leaf::Whole(_)) => {
                    return Err(Error::UnsupportedSet("unbounded set has no V_max".into()))
                }
                (_, Leaf::Simplex(n)) => {
                    let mut best: f64 = 0.0;
                    for i in 0..n {
                        let mut e = vec![0.0; n];
                        e[i] = 1.0;
                        best = best.max(self.bregman(zs, &e)?);
                    }
                    best
                }
                (SetupKind::Euclidean, Leaf::Box(l, u)) => {
                    0.5 * zs
                        .iter()
                        .zip(l.iter().zip(u))
                        .map(|(zi, (lo, hi))| (zi - lo).powi(2).max((hi - zi).powi(2)))
                        .sum::<f64>()
                        * self.scale
                }
                (SetupKind::Euclidean, Leaf::Ball(c, r)) => {
                    0.5 * (r + dist2_sq(zs, c).sqrt()).powi(2) * self.scale
                }
                (SetupKind::Entropy, _) => return Err(entropy_set_error()),
            };
            total += part;
        }
        Ok(total)
    }
}

/// `V[y](x)` for `setup`.
pub fn bregman(setup: &ProxSetup, y: &[f64], x: &[f64]) -> Result<f64> {
    setup.bregman(y, x)
}

fn blockwise(v: &[f64], set: &FeasibleSet, f: fn(&[f64]) -> f64) -> f64 {
    if v.len() != set.dim() {
        return f(v);
    }
    set.leaves()
        .iter()
        .map(|(off, leaf)| f(&v[*off..*off + leaf.dim()]).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn check_entropy_domain(x: &[f64]) -> Result<()> {
    for (index, value) in x.iter().enumerate() {
        if !value.is_finite() || *value < -1e-12 {
            return Err(Error::Domain {
                index,
                value: *value,
            });
        }
    }
    Ok(())
}

pub(crate) fn entropy_set_error() -> Error {
    Error::UnsupportedCombination("entropy setup needs a simplex or a product of simplices".into())
}
