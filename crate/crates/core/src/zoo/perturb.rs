//! Wrappers that inject controlled inexactness into an exact model.

use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::inexact::stationarity_gap;
use crate::linalg::{combine, sub, Point};
use crate::model::{Local, LocalModel, MinModel, ProxPoint};
use crate::set::FeasibleSet;
use crate::setup::ProxSetup;

/// Bisection steps used to place the perturbed point.
const BISECTION_STEPS: usize = 50;

/// Lowers `f_δ` by `δ`, turning a `(δ₀, L)`-model into a `(δ₀ + δ, L)`-model.
pub struct ShiftedModel<'a> {
    inner: &'a dyn MinModel,
    shift: f64,
}

impl<'a> ShiftedModel<'a> {
    /// Shifts by `delta >= 0`.
    pub fn new(inner: &'a dyn MinModel, delta: f64) -> Self {
        Self {
            inner,
            shift: delta.max(0.0),
        }
    }
}

struct ShiftedLocal<'a> {
    inner: Local<'a>,
    shift: f64,
}

impl LocalModel for ShiftedLocal<'_> {
    fn center(&self) -> &[f64] {
        self.inner.center()
    }
    fn f_delta(&self) -> f64 {
        self.inner.f_delta() - self.shift
    }
    fn delta(&self) -> f64 {
        self.inner.delta() + self.shift
    }
    fn psi(&self, x: &[f64]) -> f64 {
        self.inner.psi(x)
    }
    fn prox_step(
        &self,
        z: &[f64],
        alpha: f64,
        setup: &ProxSetup,
        set: &FeasibleSet,
        delta_tilde: f64,
    ) -> Result<ProxPoint> {
        self.inner.prox_step(z, alpha, setup, set, delta_tilde)
    }
    fn linear_part(&self) -> Option<&[f64]> {
        self.inner.linear_part()
    }
    fn subdifferential(&self, x: &[f64]) -> Option<(Point, Point)> {
        self.inner.subdifferential(x)
    }
}

impl MinModel for ShiftedModel<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn f_value(&self, x: &[f64]) -> f64 {
        self.inner.f_value(x)
    }
    fn at(&self, y: &[f64]) -> Result<Local<'_>> {
        Ok(Box::new(ShiftedLocal {
            inner: self.inner.at(y)?,
            shift: self.shift,
        }))
    }
    fn declared_delta(&self) -> f64 {
        self.inner.declared_delta() + self.shift
    }
    fn declared_l(&self) -> f64 {
        self.inner.declared_l()
    }
    fn norm_based(&self) -> bool {
        self.inner.norm_based()
    }
}

/// Replaces exact prox points by δ̃-inexact ones: the exact minimizer is
/// moved toward a seeded random feasible point as far as the measured
/// stationarity gap allows. Coordinates at a kink of `ψ` stay fixed on boxes.
/// Unbounded sets and models without a separable subdifferential are left exact.
pub struct PerturbedProxModel<'a> {
    inner: &'a dyn MinModel,
    rng: Mutex<ChaCha8Rng>,
}

impl<'a> PerturbedProxModel<'a> {
    /// Wraps `inner`; the perturbation directions are drawn from `seed`.
    pub fn new(inner: &'a dyn MinModel, seed: u64) -> Self {
        Self {
            inner,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }
}

struct PerturbedLocal<'a> {
    inner: Local<'a>,
    rng: &'a Mutex<ChaCha8Rng>,
}

impl PerturbedLocal<'_> {
    /// Definition-7 gap of `x` for `min α ψ(·, y) + V[z]`.
    fn gap(&self, x: &[f64], z: &[f64], alpha: f64, setup: &ProxSetup, set: &FeasibleSet) -> Option<f64> {
        let (lo, hi) = self.inner.subdifferential(x)?;
        let shift = sub(&setup.d_grad(x), &setup.d_grad(z));
        let lo: Point = lo.iter().zip(&shift).map(|(a, s)| alpha * a + s).collect();
        let hi: Point = hi.iter().zip(&shift).map(|(a, s)| alpha * a + s).collect();
        stationarity_gap(&lo, &hi, x, set).ok()
    }
}

impl LocalModel for PerturbedLocal<'_> {
    fn center(&self) -> &[f64] {
        self.inner.center()
    }
    fn f_delta(&self) -> f64 {
        self.inner.f_delta()
    }
    fn delta(&self) -> f64 {
        self.inner.delta()
    }
    fn psi(&self, x: &[f64]) -> f64 {
        self.inner.psi(x)
    }
    fn prox_step(
        &self,
        z: &[f64],
        alpha: f64,
        setup: &ProxSetup,
        set: &FeasibleSet,
        delta_tilde: f64,
    ) -> Result<ProxPoint> {
        let exact = self.inner.prox_step(z, alpha, setup, set, 0.0)?;
        if !(delta_tilde > 0.0) || !set.is_bounded() {
            return Ok(exact);
        }
        let Some(base_gap) = self.gap(&exact.x, z, alpha, setup, set) else {
            return Ok(exact);
        };
        let mut target = set.sample(&mut *self.rng.lock().expect("rng lock"));
        if matches!(set, FeasibleSet::Box { .. }) {
            if let Some((lo, hi)) = self.inner.subdifferential(&exact.x) {
                for i in 0..target.len() {
                    if lo[i] < hi[i] {
                        target[i] = exact.x[i];
                    }
                }
            }
        }
        let at = |t: f64| combine(1.0 - t, &exact.x, t, &target);
        let gap_at = |t: f64| self.gap(&at(t), z, alpha, setup, set).unwrap_or(f64::INFINITY);
        let (mut best_t, mut best_gap) = (0.0, base_gap);
        let full = gap_at(1.0);
        if full <= delta_tilde {
            best_t = 1.0;
            best_gap = full;
        } else {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (lo + hi);
                let g = gap_at(mid);
                if g <= delta_tilde {
                    lo = mid;
                    best_t = mid;
                    best_gap = g;
                } else {
                    hi = mid;
                }
            }
        }
        Ok(ProxPoint {
            x: at(best_t),
            delta_tilde: best_gap.max(exact.delta_tilde),
        })
    }
    fn linear_part(&self) -> Option<&[f64]> {
        self.inner.linear_part()
    }
    fn subdifferential(&self, x: &[f64]) -> Option<(Point, Point)> {
        self.inner.subdifferential(x)
    }
}

impl MinModel for PerturbedProxModel<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn f_value(&self, x: &[f64]) -> f64 {
        self.inner.f_value(x)
    }
    fn at(&self, y: &[f64]) -> Result<Local<'_>> {
        Ok(Box::new(PerturbedLocal {
            inner: self.inner.at(y)?,
            rng: &self.rng,
        }))
    }
    fn declared_delta(&self) -> f64 {
        self.inner.declared_delta()
    }
    fn declared_l(&self) -> f64 {
        self.inner.declared_l()
    }
    fn norm_based(&self) -> bool {
        self.inner.norm_based()
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::inexact::verify_inexact_stationarity;
    use crate::linalg::add;
    use crate::zoo::{make_smooth_model, QuadraticProblem};

    #[test]
    fn shift_lowers_f_delta() {
        let m = make_smooth_model(Arc::new(QuadraticProblem::centered(&[0.0])), 1.0);
        let s = ShiftedModel::new(&m, 0.25);
        assert_eq!(s.f_delta(&[1.0]).unwrap(), 0.25);
        assert_eq!(s.declared_delta(), 0.25);
    }

    #[test]
    fn perturbed_point_meets_its_reported_accuracy() {
        let m = make_smooth_model(Arc::new(QuadraticProblem::centered(&[0.3, -0.4, 0.9])), 1.0);
        let p = PerturbedProxModel::new(&m, 5);
        let set = FeasibleSet::uniform_box(3, -0.5, 0.5).unwrap();
        let e = ProxSetup::euclidean();
        let (y, z, alpha) = ([0.1, 0.2, 0.0], [0.0, 0.4, -0.2], 0.7);
        let out = p.prox_step(&y, &z, alpha, &e, &set, 1e-3).unwrap();
        assert!(out.delta_tilde <= 1e-3);
        let exact = m.prox_step(&y, &z, alpha, &e, &set, 0.0).unwrap();
        assert_ne!(out.x, exact.x);
        assert!(set.contains(&out.x, 1e-12));
        let grad = m.at(&y).unwrap().linear_part().unwrap().to_vec();
        let subgrad = |x: &[f64]| add(&grad.iter().map(|g| alpha * g).collect::<Vec<_>>(), &sub(x, &z));
        assert!(verify_inexact_stationarity(subgrad, &out.x, &set, out.delta_tilde).unwrap());
    }
}
