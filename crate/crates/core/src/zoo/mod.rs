//! Concrete minimization and VI models.

mod composite;
mod inexact;
mod perturb;
mod proximal;
mod smooth;
mod superposition;
mod universal;
mod vi;

use std::sync::Arc;

pub use composite::{make_composite_model, CompositeModel, CompositeProblem, SimpleH};
pub use inexact::{
    make_inexact_linearization_model, InnerProblem, JointFunction, MinMinModel, MoreauModel,
    SaddleMaxModel, SaddleMaxProblem,
};
pub use perturb::{PerturbedProxModel, ShiftedModel};
pub use proximal::{make_proximal_model, L1Norm, LinearFunction, ProxOperator, ProximalModel};
pub use smooth::{make_smooth_model, SmoothModel};
pub use superposition::{make_superposition_model, SuperpositionModel, SuperpositionProblem};
pub use universal::{holder_l, make_universal_model, HolderProblem, UniversalModel};
pub use vi::{
    make_composite_saddle_vi_model, make_vi_operator_model, AffineOperator, Bilinear,
    CompositeSaddleModel, FnOperator, HolderSignOperator, MatrixGameOperator, Operator,
    OperatorConstants, OperatorModel, SaddleFunction,
};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix, Point};

/// A differentiable (or subdifferentiable) function with an oracle for
/// `f(x)` and one element of `∂f(x)`.
pub trait SmoothFunction: Send + Sync {
    /// Dimension.
    fn dim(&self) -> usize;
    /// `f(x)`.
    fn value(&self, x: &[f64]) -> f64;
    /// `∇f(x)` (a subgradient when `f` is nonsmooth).
    fn gradient(&self, x: &[f64]) -> Point;
}

/// Shared pointer to a function oracle.
pub type SharedFunction = Arc<dyn SmoothFunction>;

/// A function given by closures.
pub struct FnFunction {
    dim: usize,
    value: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    gradient: Box<dyn Fn(&[f64]) -> Point + Send + Sync>,
}

impl FnFunction {
    /// Wraps a value closure and a gradient closure.
    pub fn new(
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Point + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            value: Box::new(value),
            gradient: Box::new(gradient),
        }
    }
}

impl SmoothFunction for FnFunction {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64]) -> Point {
        (self.gradient)(x)
    }
}

/// `f(x) = ½<Ax, x> − <b, x> + c` with `A` symmetric positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProblem {
    a: Matrix,
    b: Point,
    c: f64,
    eig_min: f64,
    eig_max: f64,
}

impl QuadraticProblem {
    /// Validates symmetry (1e-12) and `λ_min >= −1e-10`.
    pub fn new(a: Matrix, b: Point, c: f64) -> Result<Self> {
        if a.rows() != a.cols() || a.rows() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.rows(),
                got: b.len(),
            });
        }
        if a.asymmetry() > 1e-12 {
            return Err(Error::InvalidArgument("matrix is not symmetric".into()));
        }
        let ev = a.symmetric_eigenvalues();
        let (eig_min, eig_max) = (ev[0], ev[ev.len() - 1]);
        if eig_min < -1e-10 {
            return Err(Error::InvalidArgument(format!(
                "matrix has negative eigenvalue {eig_min:e}"
            )));
        }
        Ok(Self {
            a,
            b,
            c,
            eig_min,
            eig_max,
        })
    }

    /// `½‖x − a‖²`.
    pub fn centered(center: &[f64]) -> Self {
        let n = center.len();
        Self::new(Matrix::identity(n), center.to_vec(), 0.5 * dot(center, center))
            .expect("identity is positive definite")
    }

    /// `A`.
    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    /// `b`.
    pub fn linear(&self) -> &[f64] {
        &self.b
    }

    /// Largest eigenvalue, the gradient's Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        self.eig_max
    }

    /// Smallest eigenvalue, the strong convexity modulus.
    pub fn strong_convexity(&self) -> f64 {
        self.eig_min.max(0.0)
    }
}

impl SmoothFunction for QuadraticProblem {
    fn dim(&self) -> usize {
        self.b.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * dot(&self.a.mul_vec(x), x) - dot(&self.b, x) + self.c
    }
    fn gradient(&self, x: &[f64]) -> Point {
        let mut g = self.a.mul_vec(x);
        for (gi, bi) in g.iter_mut().zip(&self.b) {
            *gi -= bi;
        }
        g
    }
}
