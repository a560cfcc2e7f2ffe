//! The proximal model `ψ(x, y) = f(x) − f(y)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{dot, Point};
use crate::model::{Local, LocalModel, MinModel, ProxPoint};
use crate::prox::{linear_prox, SimpleTerm};
use crate::set::FeasibleSet;
use crate::setup::ProxSetup;

/// A convex function together with a solver for `min_{x in Q} α f(x) + V[z](x)`.
pub trait ProxOperator: Send + Sync {
    /// Dimension.
    fn dim(&self) -> usize;
    /// `f(x)`.
    fn value(&self, x: &[f64]) -> f64;
    /// δ̃-solution of `min_{x in Q} α f(x) + V[z](x)`.
    fn prox(
        &self,
        z: &[f64],
        alpha: f64,
        setup: &ProxSetup,
        set: &FeasibleSet,
        delta_tilde: f64,
    ) -> Result<ProxPoint>;
    /// Coordinate intervals of `∂f(x)`, when separable.
    fn subdifferential(&self, _x: &[f64]) -> Option<(Point, Point)> {
        None
    }
    /// `c` when `f(x) = <c, x>`.
    fn linear_part(&self) -> Option<&[f64]> {
        None
    }
}

/// `f(x) = <c, x>`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFunction {
    /// Cost vector.
    pub c: Point,
}

impl ProxOperator for LinearFunction {
    fn dim(&self) -> usize {
        self.c.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        dot(&self.c, x)
    }
    fn prox(
        &self,
        z: &[f64],
        alpha: f64,
        setup: &ProxSetup,
        set: &FeasibleSet,
        _delta_tilde: f64,
    ) -> Result<ProxPoint> {
        let x = linear_prox(setup, set, z, alpha, &self.c, None)?;
        Ok(ProxPoint { x, delta_tilde: 0.0 })
    }
    fn subdifferential(&self, _x: &[f64]) -> Option<(Point, Point)> {
        Some((self.c.clone(), self.c.clone()))
    }
    fn linear_part(&self) -> Option<&[f64]> {
        Some(&self.c)
    }
}

/// `f(x) = λ‖x‖₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Norm {
    term: SimpleTerm,
}

impl L1Norm {
    /// `λ‖x‖₁` on `R^n`.
    pub fn new(lambda: f64, n: usize) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::InvalidArgument("lambda must be nonnegative".into()));
        }
        Ok(Self {
            term: SimpleTerm::l1(lambda, n),
        })
    }
}

impl ProxOperator for L1Norm {
    fn dim(&self) -> usize {
        self.term.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.term.value(x)
    }
    fn prox(
        &self,
        z: &[f64],
        alpha: f64,
        setup: &ProxSetup,
        set: &FeasibleSet,
        _delta_tilde: f64,
    ) -> Result<ProxPoint> {
        let zero = vec![0.0; self.dim()];
        let x = linear_prox(setup, set, z, alpha, &zero, Some(&self.term))?;
        Ok(ProxPoint { x, delta_tilde: 0.0 })
    }
    fn subdifferential(&self, x: &[f64]) -> Option<(Point, Point)> {
        Some(self.term.subdifferential(x))
    }
}

/// `ψ(x, y) = f(x) − f(y)`, `δ = 0`, any `L`.
pub struct ProximalModel {
    f: Arc<dyn ProxOperator>,
    l: f64,
}

/// Proximal model of `f` with regularization constant `L_reg`.
pub fn make_proximal_model(f: Arc<dyn ProxOperator>, l_reg: f64) -> Result<ProximalModel> {
    if !(l_reg > 0.0) {
        return Err(Error::InvalidArgument("L_reg must be positive".into()));
    }
    Ok(ProximalModel { f, l: l_reg })
}

struct ProximalLocal<'a> {
    f: &'a dyn ProxOperator,
    center: Point,
    f_y: f64,
}

impl LocalModel for ProximalLocal<'_> {
    fn center(&self) -> &[f64] {
        &self.center
    }
    fn f_delta(&self) -> f64 {
        self.f_y
    }
    fn delta(&self) -> f64 {
        0.0
    }
    fn psi(&self, x: &[f64]) -> f64 {
        self.f.value(x) - self.f_y
    }
    fn prox_step(
        &self,
        z: &[f64],
        alpha: f64,
        setup: &ProxSetup,
        set: &FeasibleSet,
        delta_tilde: f64,
    ) -> Result<ProxPoint> {
        self.f.prox(z, alpha, setup, set, delta_tilde)
    }
    fn linear_part(&self) -> Option<&[f64]> {
        self.f.linear_part()
    }
    fn subdifferential(&self, x: &[f64]) -> Option<(Point, Point)> {
        self.f.subdifferential(x)
    }
}

impl MinModel for ProximalModel {
    fn dim(&self) -> usize {
        self.f.dim()
    }
    fn f_value(&self, x: &[f64]) -> f64 {
        self.f.value(x)
    }
    fn at(&self, y: &[f64]) -> Result<Local<'_>> {
        Ok(Box::new(ProximalLocal {
            f: self.f.as_ref(),
            center: y.to_vec(),
            f_y: self.f.value(y),
        }))
    }
    fn declared_delta(&self) -> f64 {
        0.0
    }
    fn declared_l(&self) -> f64 {
        self.l
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_min_model;

    #[test]
    fn linear_prox_step_is_gradient_step() {
        let m = make_proximal_model(Arc::new(LinearFunction { c: vec![1.0, -2.0] }), 2.0).unwrap();
        let p = m
            .prox_step(&[0.0, 0.0], &[1.0, 1.0], 0.5, &ProxSetup::euclidean(), &FeasibleSet::WholeSpace(2), 0.0)
            .unwrap();
        assert_eq!(p.x, vec![0.5, 2.0]);
    }

    #[test]
    fn l1_prox_is_soft_threshold() {
        let m = make_proximal_model(Arc::new(L1Norm::new(1.0, 3).unwrap()), 1.0).unwrap();
        let z = [2.5, -0.4, -3.0];
        let p = m
            .prox_step(&[0.0; 3], &z, 1.0, &ProxSetup::euclidean(), &FeasibleSet::WholeSpace(3), 0.0)
            .unwrap();
        // Grid oracle for min |x| + ½(x − z_i)².
        for (xi, zi) in p.x.iter().zip(z) {
            let best = (-40_000..=40_000)
                .map(|k| k as f64 * 1e-4)
                .min_by(|a, b| {
                    let f = |x: f64| x.abs() + 0.5 * (x - zi) * (x - zi);
                    f(*a).total_cmp(&f(*b))
                })
                .unwrap();
            assert!((xi - best).abs() <= 1e-4, "{xi} vs {best}");
        }
    }

    #[test]
    fn psi_vanishes_on_diagonal_and_validates() {
        let m = make_proximal_model(Arc::new(L1Norm::new(0.7, 2).unwrap()), 3.0).unwrap();
        assert_eq!(m.psi(&[0.3, -1.0], &[0.3, -1.0]).unwrap(), 0.0);
        let r = validate_min_model(&m, &ProxSetup::euclidean(), &FeasibleSet::WholeSpace(2), 500, 2).unwrap();
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn rejects_nonpositive_regularization() {
        assert!(make_proximal_model(Arc::new(LinearFunction { c: vec![1.0] }), 0.0).is_err());
    }
}
