//! Variational inequality models built from monotone operators and
//! convex-concave saddle functions.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{check_dim, dot, sub, Matrix, Point};
use crate::model::{Linearization, Local, ViModel};
use crate::prox::SimpleTerm;
use crate::set::FeasibleSet;

use super::universal::holder_l;

/// Samples used by the monotonicity spot check.
const MONOTONE_SAMPLES: usize = 200;

/// A vector field `g: R^n → R^n`.
pub trait Operator: Send + Sync {
    /// Dimension.
    fn dim(&self) -> usize;
    /// `g(x)`.
    fn apply(&self, x: &[f64]) -> Point;
}

/// `g(x) = Mx + q`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineOperator {
    /// `M`.
    pub m: Matrix,
    /// `q`.
    pub q: Point,
}

impl Operator for AffineOperator {
    fn dim(&self) -> usize {
        self.q.len()
    }
    fn apply(&self, x: &[f64]) -> Point {
        let mut g = self.m.mul_vec(x);
        for (gi, qi) in g.iter_mut().zip(&self.q) {
            *gi += qi;
        }
        g
    }
}

/// `g(u, v) = (Av, −Aᵀu)` for the bilinear game `uᵀAv`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGameOperator {
    /// Payoff matrix `A` (`dim u × dim v`).
    pub a: Matrix,
}

impl Operator for MatrixGameOperator {
    fn dim(&self) -> usize {
        self.a.rows() + self.a.cols()
    }
    fn apply(&self, x: &[f64]) -> Point {
        let (u, v) = x.split_at(self.a.rows());
        let mut g = self.a.mul_vec(v);
        g.extend(self.a.tr_mul_vec(u).into_iter().map(|t| -t));
        g
    }
}

/// `g_i(x) = sign(x_i − a_i)·|x_i − a_i|^ν`, Hölder continuous with
/// `L_ν = 2^{1−ν}·n^{(1−ν)/2}` in the Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderSignOperator {
    /// Center `a`.
    pub a: Point,
    /// Exponent `ν ∈ [0, 1]`.
    pub nu: f64,
}

impl HolderSignOperator {
    /// The Hölder constant of the field.
    pub fn l_nu(&self) -> f64 {
        2f64.powf(1.0 - self.nu) * (self.a.len() as f64).powf(0.5 * (1.0 - self.nu))
    }
}

impl Operator for HolderSignOperator {
    fn dim(&self) -> usize {
        self.a.len()
    }
    fn apply(&self, x: &[f64]) -> Point {
        x.iter()
            .zip(&self.a)
            .map(|(xi, ai)| {
                let t = xi - ai;
                if t == 0.0 {
                    0.0
                } else {
                    t.signum() * t.abs().powf(self.nu)
                }
            })
            .collect()
    }
}

/// An operator given by a closure.
pub struct FnOperator {
    dim: usize,
    f: Box<dyn Fn(&[f64]) -> Point + Send + Sync>,
}

impl FnOperator {
    /// Wraps `f`.
    pub fn new(dim: usize, f: impl Fn(&[f64]) -> Point + Send + Sync + 'static) -> Self {
        Self { dim, f: Box::new(f) }
    }
}

impl Operator for FnOperator {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[f64]) -> Point {
        (self.f)(x)
    }
}

/// Regularity of an operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorConstants {
    /// Lipschitz with constant `L`, `δ = 0`.
    Lipschitz(f64),
    /// Hölder with `(ν, L_ν)`, traded for additive error `δ > 0`.
    Holder {
        /// Exponent.
        nu: f64,
        /// Constant.
        l_nu: f64,
        /// Additive error.
        delta: f64,
    },
}

/// `ψ(x, y) = <g(y), x − y> + h(x) − h(y)`.
pub struct OperatorModel {
    op: Arc<dyn Operator>,
    h: Option<SimpleTerm>,
    l: f64,
    delta: f64,
    holder: Option<(f64, f64)>,
    mu: Option<f64>,
}

/// Builds the VI model of a monotone operator, optionally with a composite term.
/// Monotonicity is spot-checked on `[−1, 1]^n`.
pub fn make_vi_operator_model(
    op: Arc<dyn Operator>,
    constants: OperatorConstants,
    h: Option<SimpleTerm>,
) -> Result<OperatorModel> {
    let n = op.dim();
    if let Some(h) = &h {
        check_dim(&h.l1, n)?;
    }
    let (l, delta, holder) = match constants {
        OperatorConstants::Lipschitz(l) if l > 0.0 => (l, 0.0, None),
        OperatorConstants::Holder { nu, l_nu, delta }
            if (0.0..=1.0).contains(&nu) && l_nu > 0.0 && delta > 0.0 =>
        {
            (holder_l(nu, l_nu, delta), delta, Some((nu, l_nu)))
        }
        _ => return Err(Error::InvalidArgument("invalid operator constants".into())),
    };
    let cube = FeasibleSet::uniform_box(n, -1.0, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d6f6e6f);
    for _ in 0..MONOTONE_SAMPLES {
        let x = cube.sample(&mut rng);
        let y = cube.sample(&mut rng);
        let r = dot(&sub(&op.apply(&x), &op.apply(&y)), &sub(&x, &y));
        if r < -1e-10 {
            return Err(Error::InvalidArgument(format!(
                "operator is not monotone: residual {r:e}"
            )));
        }
    }
    Ok(OperatorModel {
        op,
        h,
        l,
        delta,
        holder,
        mu: None,
    })
}

impl OperatorModel {
    /// Declares strong monotonicity `μ`.
    pub fn with_mu(mut self, mu: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::InvalidArgument("mu must be positive".into()));
        }
        self.mu = Some(mu);
        Ok(self)
    }

    /// The operator.
    pub fn operator(&self) -> &Arc<dyn Operator> {
        &self.op
    }
}

impl ViModel for OperatorModel {
    fn dim(&self) -> usize {
        self.op.dim()
    }
    fn at(&self, y: &[f64]) -> Result<Local<'_>> {
        let mut lin = Linearization::linear(y.to_vec(), self.op.apply(y), 0.0);
        lin.h = self.h.clone();
        Ok(Box::new(lin))
    }
    fn declared_delta(&self) -> f64 {
        self.delta
    }
    fn declared_l(&self) -> f64 {
        self.l
    }
    fn mu(&self) -> Option<f64> {
        self.mu
    }
    fn holder(&self) -> Option<(f64, f64)> {
        self.holder
    }
}

/// A function `f̃(u, v)` convex in `u` and concave in `v`.
pub trait SaddleFunction: Send + Sync {
    /// `(dim u, dim v)`.
    fn dims(&self) -> (usize, usize);
    /// `f̃(u, v)`.
    fn value(&self, u: &[f64], v: &[f64]) -> f64;
    /// `∇_u f̃(u, v)`.
    fn grad_u(&self, u: &[f64], v: &[f64]) -> Point;
    /// `∇_v f̃(u, v)`.
    fn grad_v(&self, u: &[f64], v: &[f64]) -> Point;
    /// `A` when `f̃(u, v) = uᵀAv`.
    fn bilinear(&self) -> Option<&Matrix> {
        None
    }
}

/// `f̃(u, v) = uᵀAv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bilinear {
    /// `A` (`dim u × dim v`).
    pub a: Matrix,
}

impl SaddleFunction for Bilinear {
    fn dims(&self) -> (usize, usize) {
        (self.a.rows(), self.a.cols())
    }
    fn value(&self, u: &[f64], v: &[f64]) -> f64 {
        dot(u, &self.a.mul_vec(v))
    }
    fn grad_u(&self, _u: &[f64], v: &[f64]) -> Point {
        self.a.mul_vec(v)
    }
    fn grad_v(&self, u: &[f64], _v: &[f64]) -> Point {
        self.a.tr_mul_vec(u)
    }
    fn bilinear(&self) -> Option<&Matrix> {
        Some(&self.a)
    }
}

/// VI model of `min_u max_v f̃(u, v) + h(u) − φ(v)`:
/// `ψ(x, y) = <g̃(y), x − y> + h(u_x) + φ(v_x) − h(u_y) − φ(v_y)` with
/// `g̃(y) = (∇_u f̃(y), −∇_v f̃(y))`.
pub struct CompositeSaddleModel {
    f: Arc<dyn SaddleFunction>,
    h: SimpleTerm,
    phi: SimpleTerm,
    stacked: SimpleTerm,
    l: f64,
}

/// Builds the composite saddle model with declared `L`.
pub fn make_composite_saddle_vi_model(
    f: Arc<dyn SaddleFunction>,
    h: SimpleTerm,
    phi: SimpleTerm,
    l: f64,
) -> Result<CompositeSaddleModel> {
    let (du, dv) = f.dims();
    check_dim(&h.l1, du)?;
    check_dim(&phi.l1, dv)?;
    if !(l > 0.0) {
        return Err(Error::InvalidArgument("L must be positive".into()));
    }
    Ok(CompositeSaddleModel {
        stacked: SimpleTerm::stack(&h, &phi),
        f,
        h,
        phi,
        l,
    })
}

impl CompositeSaddleModel {
    /// `dim u`.
    pub fn u_dim(&self) -> usize {
        self.f.dims().0
    }

    /// The smooth part `f̃`.
    pub fn function(&self) -> &Arc<dyn SaddleFunction> {
        &self.f
    }

    /// `h`.
    pub fn h(&self) -> &SimpleTerm {
        &self.h
    }

    /// `φ`.
    pub fn phi(&self) -> &SimpleTerm {
        &self.phi
    }

    /// `f(u, v) = f̃(u, v) + h(u) − φ(v)`.
    pub fn saddle_value(&self, u: &[f64], v: &[f64]) -> f64 {
        self.f.value(u, v) + self.h.value(u) - self.phi.value(v)
    }

    /// `f(u_y, v_x) − f(u_x, v_y) + ψ(x, y)`, nonpositive for a valid model.
    pub fn duality_residual(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let k = self.u_dim();
        let (ux, vx) = x.split_at(k);
        let (uy, vy) = y.split_at(k);
        Ok(self.saddle_value(uy, vx) - self.saddle_value(ux, vy) + self.psi(x, y)?)
    }
}

impl ViModel for CompositeSaddleModel {
    fn dim(&self) -> usize {
        let (a, b) = self.f.dims();
        a + b
    }
    fn at(&self, y: &[f64]) -> Result<Local<'_>> {
        check_dim(y, self.dim())?;
        let (u, v) = y.split_at(self.u_dim());
        let mut g = self.f.grad_u(u, v);
        g.extend(self.f.grad_v(u, v).into_iter().map(|t| -t));
        let mut lin = Linearization::linear(y.to_vec(), g, 0.0);
        if !self.stacked.is_zero() {
            lin.h = Some(self.stacked.clone());
        }
        Ok(Box::new(lin))
    }
    fn declared_delta(&self) -> f64 {
        0.0
    }
    fn declared_l(&self) -> f64 {
        self.l
    }
}
