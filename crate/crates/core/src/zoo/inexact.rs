//! Models built from inexactly solved inner problems.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::inexact::stationarity_gap_point;
use crate::linalg::{axpy, dot, norm2, norm2_sq, sub, Matrix, Point};
use crate::model::{Linearization, Local, MinModel};
use crate::set::{FeasibleSet, Leaf};

use super::SharedFunction;

/// Iteration cap of the inner projected gradient solvers.
const INNER_MAX_ITERS: usize = 200_000;
/// Stopping threshold used when the inner target is zero.
const INNER_FLOOR: f64 = 1e-13;

/// A jointly convex smooth function `F(z, x)`.
pub trait JointFunction: Send + Sync {
    /// Dimension of `z`.
    fn z_dim(&self) -> usize;
    /// Dimension of `x`.
    fn x_dim(&self) -> usize;
    /// `F(z, x)`.
    fn value(&self, z: &[f64], x: &[f64]) -> f64;
    /// `∇_z F(z, x)`.
    fn grad_z(&self, z: &[f64], x: &[f64]) -> Point;
    /// `∇_x F(z, x)`.
    fn grad_x(&self, z: &[f64], x: &[f64]) -> Point;
}

/// `f(x) = max_{z in Q} <x, b − Az> − (μ/2)‖z − c‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleMaxProblem {
    /// `A`, of shape `dim(x) × dim(z)`.
    pub a: Matrix,
    /// `b`.
    pub b: Point,
    /// Strong concavity modulus of the inner objective.
    pub mu: f64,
    /// Center `c` of the regularizer.
    pub center: Point,
    /// Inner set (whole space or a box).
    pub qz: FeasibleSet,
}

/// Inner problem of an inexact-linearization model.
pub enum InnerProblem {
    /// `f(x) = min_{z in Q_z} F(z, x)` with `∇F` `L`-Lipschitz.
    MinMin {
        /// `F`.
        f: Arc<dyn JointFunction>,
        /// Bounded inner set.
        qz: FeasibleSet,
        /// Lipschitz constant of `∇F`.
        l: f64,
    },
    /// `f(x) = max_z <x, b − Az> − φ(z)`.
    SaddleMax(SaddleMaxProblem),
    /// Moreau envelope `f_L(x) = min_z f(z) + (L/2)‖z − x‖²`.
    Moreau {
        /// `f`, `μ_f`-strongly convex with `L_f`-Lipschitz gradient.
        f: SharedFunction,
        /// `L_f`.
        l_f: f64,
        /// `μ_f`.
        mu_f: f64,
        /// Envelope parameter `L`.
        l: f64,
        /// Diameter of the region on which the model is used.
        diameter: f64,
    },
}

/// Builds the model of the respective inner problem with inner tolerance `delta_inner`.
pub fn make_inexact_linearization_model(
    inner: InnerProblem,
    delta_inner: f64,
) -> Result<Box<dyn MinModel>> {
    Ok(match inner {
        InnerProblem::MinMin { f, qz, l } => Box::new(MinMinModel::new(f, qz, l, delta_inner)?),
        InnerProblem::SaddleMax(p) => Box::new(SaddleMaxModel::new(p, delta_inner)?),
        InnerProblem::Moreau {
            f,
            l_f,
            mu_f,
            l,
            diameter,
        } => Box::new(MoreauModel::new(f, l_f, mu_f, l, diameter, delta_inner)?),
    })
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument("inner tolerance must be nonnegative".into()));
    }
    Ok(())
}

/// `(6δ, 2L)`-model of `min_{z in Q_z} F(z, x)`:
/// `ψ(x, y) = <∇_x F(z̃, y), x − y>`, `f_δ(y) = F(z̃, y) − 2δ`.
pub struct MinMinModel {
    f: Arc<dyn JointFunction>,
    qz: FeasibleSet,
    l: f64,
    delta: f64,
    warm: Mutex<Option<Point>>,
}

impl MinMinModel {
    /// Requires a bounded `Q_z` and `L > 0`.
    pub fn new(f: Arc<dyn JointFunction>, qz: FeasibleSet, l: f64, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        if !(l > 0.0) {
            return Err(Error::InvalidArgument("L must be positive".into()));
        }
        if !qz.is_bounded() {
            return Err(Error::UnsupportedSet("min-min inner set must be bounded".into()));
        }
        if qz.dim() != f.z_dim() {
            return Err(Error::DimensionMismatch {
                expected: f.z_dim(),
                got: qz.dim(),
            });
        }
        Ok(Self {
            f,
            qz,
            l,
            delta,
            warm: Mutex::new(None),
        })
    }

    /// Projected gradient on `z` until the stationarity gap is at most `target`.
    fn inner_solve(&self, x: &[f64], target: f64) -> Result<(Point, f64)> {
        let start = self.warm.lock().expect("warm start lock").clone();
        let mut z = match start {
            Some(z) => z,
            None => self.qz.project(&vec![0.0; self.qz.dim()])?,
        };
        let step = 1.0 / self.l;
        let mut gap = f64::INFINITY;
        for _ in 0..INNER_MAX_ITERS {
            let g = self.f.grad_z(&z, x);
            gap = stationarity_gap_point(&g, &z, &self.qz)?;
            if gap <= target {
                break;
            }
            let mut next = z.clone();
            axpy(-step, &g, &mut next);
            z = self.qz.project(&next)?;
        }
        if gap > target.max(1e-9) {
            return Err(Error::InnerSolveFailure {
                target,
                achieved: gap,
                iterations: INNER_MAX_ITERS,
            });
        }
        *self.warm.lock().expect("warm start lock") = Some(z.clone());
        Ok((z, gap))
    }
}

impl MinModel for MinMinModel {
    fn dim(&self) -> usize {
        self.f.x_dim()
    }
    fn f_value(&self, x: &[f64]) -> f64 {
        match self.inner_solve(x, INNER_FLOOR) {
            Ok((z, _)) => self.f.value(&z, x),
            Err(_) => f64::NAN,
        }
    }
    fn at(&self, y: &[f64]) -> Result<Local<'_>> {
        let (z, gap) = self.inner_solve(y, self.delta.max(INNER_FLOOR))?;
        let mut lin = Linearization::linear(y.to_vec(), self.f.grad_x(&z, y), self.f.value(&z, y) - 2.0 * gap);
        lin.delta = 6.0 * gap;
        Ok(Box::new(lin))
    }
    fn declared_delta(&self) -> f64 {
        6.0 * self.delta
    }
    fn declared_l(&self) -> f64 {
        2.0 * self.l
    }
}

/// `(δ, 2L)`-model of the saddle maximum with `L = ‖A‖²/μ`:
/// `ψ(x, y) = <b − A z(y), x − y>`, `f_δ(y) = <y, b − A z(y)> − φ(z(y))`.
pub struct SaddleMaxModel {
    p: SaddleMaxProblem,
    l: f64,
    delta: f64,
}

impl SaddleMaxModel {
    /// Validates shapes; the inner set must be the whole space or a box.
    pub fn new(p: SaddleMaxProblem, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        if !(p.mu > 0.0) {
            return Err(Error::InvalidArgument("mu must be positive".into()));
        }
        let (n, m) = (p.a.rows(), p.a.cols());
        if p.b.len() != n || p.center.len() != m || p.qz.dim() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: p.qz.dim(),
            });
        }
        if !matches!(p.qz, FeasibleSet::WholeSpace(_) | FeasibleSet::Box { .. }) {
            return Err(Error::UnsupportedSet(
                "saddle inner set must be the whole space or a box".into(),
            ));
        }
        let norm = p.a.spectral_norm();
        Ok(Self {
            l: norm * norm / p.mu,
            p,
            delta,
        })
    }

    /// The inner maximizer `z(x)`.
    pub fn inner_argmax(&self, x: &[f64]) -> Point {
        let atx = self.p.a.tr_mul_vec(x);
        let mut z: Point = self
            .p
            .center
            .iter()
            .zip(&atx)
            .map(|(c, v)| c - v / self.p.mu)
            .collect();
        if let Some((_, Leaf::Box(lo, hi))) = self.p.qz.leaves().first() {
            for ((zi, l), u) in z.iter_mut().zip(*lo).zip(*hi) {
                *zi = zi.clamp(*l, *u);
            }
        }
        z
    }

    fn inner_value(&self, x: &[f64], z: &[f64]) -> (Point, f64) {
        let g = sub(&self.p.b, &self.p.a.mul_vec(z));
        let phi = 0.5 * self.p.mu * norm2_sq(&sub(z, &self.p.center));
        let v = dot(x, &g) - phi;
        (g, v)
    }
}

impl MinModel for SaddleMaxModel {
    fn dim(&self) -> usize {
        self.p.b.len()
    }
    fn f_value(&self, x: &[f64]) -> f64 {
        self.inner_value(x, &self.inner_argmax(x)).1
    }
    fn at(&self, y: &[f64]) -> Result<Local<'_>> {
        let z = self.inner_argmax(y);
        let (g, v) = self.inner_value(y, &z);
        Ok(Box::new(Linearization::linear(y.to_vec(), g, v)))
    }
    fn declared_delta(&self) -> f64 {
        self.delta
    }
    fn declared_l(&self) -> f64 {
        2.0 * self.l
    }
}

/// `(δ, L)`-model of the Moreau envelope on a region of diameter `D`:
/// `ψ(x, y) = <L(y − z̃), x − y>` with `z̃` from gradient descent on
/// `Λ(z) = f(z) + (L/2)‖z − y‖²`.
///
/// With inner residual `r = ∇Λ(z̃)` the model error is at most
/// `Δ = ‖r‖²/(μ_f + L) + 2L·D·‖r‖/(μ_f + L)`, and `f_δ(y) = Λ(z̃) − Δ/2`.
pub struct MoreauModel {
    f: SharedFunction,
    l_f: f64,
    mu_f: f64,
    l: f64,
    diameter: f64,
    delta: f64,
    warm: Mutex<Option<Point>>,
    grad_evals: AtomicUsize,
}

impl MoreauModel {
    /// Validates constants.
    pub fn new(
        f: SharedFunction,
        l_f: f64,
        mu_f: f64,
        l: f64,
        diameter: f64,
        delta: f64,
    ) -> Result<Self> {
        check_delta(delta)?;
        if !(l_f > 0.0) || !(mu_f >= 0.0) || !(l > 0.0) || !(diameter > 0.0) {
            return Err(Error::InvalidArgument(
                "Moreau model needs L_f, L, D > 0 and mu_f >= 0".into(),
            ));
        }
        Ok(Self {
            f,
            l_f,
            mu_f,
            l,
            diameter,
            delta,
            warm: Mutex::new(None),
            grad_evals: AtomicUsize::new(0),
        })
    }

    /// Gradient evaluations of `f` spent by linearization queries so far.
    pub fn gradient_evaluations(&self) -> usize {
        self.grad_evals.load(Ordering::Relaxed)
    }

    /// Resets the evaluation counter and the warm start.
    pub fn reset(&self) {
        self.grad_evals.store(0, Ordering::Relaxed);
        *self.warm.lock().expect("warm start lock") = None;
    }

    /// Model error bound for residual `r`; with `value_only`, the bound on `Λ(z̃) − f_L(y)` doubled.
    fn error_bound(&self, r: f64, value_only: bool) -> f64 {
        let s = self.mu_f + self.l;
        if value_only {
            r * r / s
        } else {
            r * r / s + 2.0 * self.l * self.diameter * r / s
        }
    }

    /// Gradient descent on `Λ` until the error bound is at most `target`.
    /// Returns `(z̃, error bound, evaluations)`. Warm starts are used and
    /// updated only by linearization queries.
    fn inner_solve(&self, y: &[f64], target: f64, warm: bool) -> Result<(Point, f64, usize)> {
        let mut z = if warm {
            self.warm.lock().expect("warm start lock").clone().unwrap_or_else(|| y.to_vec())
        } else {
            y.to_vec()
        };
        let step = 1.0 / (self.l_f + self.l);
        let mut evals = 0;
        let mut bound = f64::INFINITY;
        for _ in 0..INNER_MAX_ITERS {
            let mut g = self.f.gradient(&z);
            evals += 1;
            axpy(self.l, &sub(&z, y), &mut g);
            bound = self.error_bound(norm2(&g), !warm);
            if bound <= target {
                break;
            }
            axpy(-step, &g, &mut z);
        }
        if bound > target.max(1e-9) {
            return Err(Error::InnerSolveFailure {
                target,
                achieved: bound,
                iterations: INNER_MAX_ITERS,
            });
        }
        if warm {
            *self.warm.lock().expect("warm start lock") = Some(z.clone());
        }
        Ok((z, bound, evals))
    }

    fn lambda(&self, y: &[f64], z: &[f64]) -> f64 {
        self.f.value(z) + 0.5 * self.l * norm2_sq(&sub(z, y))
    }
}

impl MinModel for MoreauModel {
    fn dim(&self) -> usize {
        self.f.dim()
    }
    fn f_value(&self, x: &[f64]) -> f64 {
        match self.inner_solve(x, INNER_FLOOR, false) {
            Ok((z, _, _)) => self.lambda(x, &z),
            Err(_) => f64::NAN,
        }
    }
    fn at(&self, y: &[f64]) -> Result<Local<'_>> {
        let (z, bound, evals) = self.inner_solve(y, self.delta.max(INNER_FLOOR), true)?;
        self.grad_evals.fetch_add(evals, Ordering::Relaxed);
        let g: Point = y.iter().zip(&z).map(|(a, b)| self.l * (a - b)).collect();
        let mut lin = Linearization::linear(y.to_vec(), g, self.lambda(y, &z) - 0.5 * bound);
        lin.delta = bound;
        Ok(Box::new(lin))
    }
    fn declared_delta(&self) -> f64 {
        self.delta
    }
    fn declared_l(&self) -> f64 {
        self.l
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_min_model_is_vi_model, validate_min_model, validate_min_model_with_tol};
    use crate::setup::ProxSetup;
    use crate::zoo::QuadraticProblem;

    /// `F(z, x) = ½‖z − x‖²`.
    struct Distance(usize);

    impl JointFunction for Distance {
        fn z_dim(&self) -> usize {
            self.0
        }
        fn x_dim(&self) -> usize {
            self.0
        }
        fn value(&self, z: &[f64], x: &[f64]) -> f64 {
            0.5 * norm2_sq(&sub(z, x))
        }
        fn grad_z(&self, z: &[f64], x: &[f64]) -> Point {
            sub(z, x)
        }
        fn grad_x(&self, z: &[f64], x: &[f64]) -> Point {
            sub(x, z)
        }
    }

    #[test]
    fn moreau_of_half_norm_is_closed_form() {
        let m = MoreauModel::new(Arc::new(QuadraticProblem::centered(&[0.0, 0.0])), 1.0, 1.0, 1.0, 10.0, 0.0)
            .unwrap();
        let y = [1.0, -2.0];
        let psi = m.psi(&[0.0, 0.0], &y).unwrap();
        // z_L(y) = y/2, so ψ(x, y) = <y/2, x − y> = −‖y‖²/2.
        assert!((psi + 2.5).abs() < 1e-10, "{psi}");
        // f_L(y) = ‖y‖²/4.
        assert!((m.f_value(&y) - 1.25).abs() < 1e-12);
    }

    #[test]
    fn moreau_counts_gradients_and_validates() {
        let f = Arc::new(QuadraticProblem::centered(&[0.5, -0.5, 1.0]));
        let m = MoreauModel::new(f, 1.0, 1.0, 2.0, 8.0, 1e-6).unwrap();
        let set = FeasibleSet::uniform_box(3, -2.0, 2.0).unwrap();
        let r = validate_min_model_with_tol(&m, &ProxSetup::euclidean(), &set, 1000, 5, 1e-8).unwrap();
        assert!(r.passed(), "{r}");
        assert!(m.gradient_evaluations() > 0);
        m.reset();
        assert_eq!(m.gradient_evaluations(), 0);
    }

    #[test]
    fn min_min_distance_to_ball() {
        let ball = FeasibleSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let m = MinMinModel::new(Arc::new(Distance(2)), ball, 1.0, 0.0).unwrap();
        // f(x) = dist(x, ball)²/2.
        assert!((m.f_value(&[3.0, 0.0]) - 2.0).abs() < 1e-12);
        assert_eq!(m.f_value(&[0.5, 0.0]), 0.0);
        let set = FeasibleSet::uniform_box(2, -3.0, 3.0).unwrap();
        let r = validate_min_model(&m, &ProxSetup::euclidean(), &set, 1000, 3).unwrap();
        assert!(r.passed(), "{r}");
        assert!(check_min_model_is_vi_model(&m, &ProxSetup::euclidean(), &set, 300, 4).unwrap());
    }

    #[test]
    fn min_min_rejects_unbounded_inner_set() {
        assert!(MinMinModel::new(Arc::new(Distance(2)), FeasibleSet::WholeSpace(2), 1.0, 0.0).is_err());
    }

    #[test]
    fn saddle_gradient_matches_closed_form() {
        let b = vec![1.0, -1.0];
        let p = SaddleMaxProblem {
            a: Matrix::identity(2),
            b: b.clone(),
            mu: 2.0,
            center: vec![0.0, 0.0],
            qz: FeasibleSet::WholeSpace(2),
        };
        let m = SaddleMaxModel::new(p, 0.0).unwrap();
        // z(y) = −y/μ, f(y) = <y, b> + ‖y‖²/(2μ), ∇f(y) = b + y/μ.
        let y = [0.4, 2.0];
        let local = m.at(&y).unwrap();
        let grad = local.linear_part().unwrap();
        for i in 0..2 {
            assert!((grad[i] - (b[i] + y[i] / 2.0)).abs() < 1e-8);
        }
        let fy = dot(&y, &b) + norm2_sq(&y) / 4.0;
        assert!((m.f_value(&y) - fy).abs() < 1e-12);
        let r = validate_min_model(&m, &ProxSetup::euclidean(), &FeasibleSet::uniform_box(2, -2.0, 2.0).unwrap(), 1000, 8)
            .unwrap();
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn saddle_box_inner_set_clips() {
        let p = SaddleMaxProblem {
            a: Matrix::identity(1),
            b: vec![0.0],
            mu: 1.0,
            center: vec![0.0],
            qz: FeasibleSet::uniform_box(1, -0.5, 0.5).unwrap(),
        };
        let m = SaddleMaxModel::new(p, 0.0).unwrap();
        assert_eq!(m.inner_argmax(&[3.0]), vec![-0.5]);
    }
}
