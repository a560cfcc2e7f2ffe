//! Composite models `g + h` with a simple `h`.

use crate::error::{Error, Result};
use crate::linalg::Point;
use crate::model::{Linearization, Local, LocalModel, MinModel, ProxPoint};
use crate::prox::SimpleTerm;
use crate::set::FeasibleSet;
use crate::setup::{ProxSetup, SetupKind};

use super::SharedFunction;

/// The simple part of a composite objective.
#[derive(Debug, Clone, PartialEq)]
pub enum SimpleH {
    /// `λ‖x‖₁`.
    L1(f64),
    /// Indicator of a convex set.
    IndicatorOfSet(FeasibleSet),
}

/// `f = g + h` with `g` smooth.
pub struct CompositeProblem {
    /// Smooth part.
    pub g: SharedFunction,
    /// Simple part.
    pub h: SimpleH,
}

/// `ψ(x, y) = <∇g(y), x − y> + h(x) − h(y)`, `δ = 0`.
pub struct CompositeModel {
    p: CompositeProblem,
    term: Option<SimpleTerm>,
    l: f64,
}

/// Model of a composite problem whose smooth part is `L`-smooth.
pub fn make_composite_model(p: CompositeProblem, l: f64) -> Result<CompositeModel> {
    let term = match &p.h {
        SimpleH::L1(lambda) if *lambda < 0.0 => {
            return Err(Error::InvalidArgument("lambda must be nonnegative".into()))
        }
        SimpleH::L1(lambda) => Some(SimpleTerm::l1(*lambda, p.g.dim())),
        SimpleH::IndicatorOfSet(s) if s.dim() != p.g.dim() => {
            return Err(Error::DimensionMismatch {
                expected: p.g.dim(),
                got: s.dim(),
            })
        }
        SimpleH::IndicatorOfSet(_) => None,
    };
    Ok(CompositeModel { p, term, l })
}

impl CompositeModel {
    fn h_value(&self, x: &[f64]) -> f64 {
        match (&self.p.h, &self.term) {
            (SimpleH::L1(_), Some(t)) => t.value(x),
            (SimpleH::IndicatorOfSet(s), _) if !s.contains(x, 1e-9) => f64::INFINITY,
            _ => 0.0,
        }
    }
}

struct CompositeLocal {
    lin: Linearization,
    l1: bool,
}

impl LocalModel for CompositeLocal {
    fn center(&self) -> &[f64] {
        &self.lin.center
    }
    fn f_delta(&self) -> f64 {
        self.lin.f_delta
    }
    fn delta(&self) -> f64 {
        0.0
    }
    fn psi(&self, x: &[f64]) -> f64 {
        self.lin.psi(x)
    }
    fn prox_step(
        &self,
        z: &[f64],
        alpha: f64,
        setup: &ProxSetup,
        set: &FeasibleSet,
        delta_tilde: f64,
    ) -> Result<ProxPoint> {
        if self.l1 && setup.kind == SetupKind::Entropy {
            return Err(Error::UnsupportedCombination(
                "l1 composite term with the entropy setup".into(),
            ));
        }
        self.lin.prox_step(z, alpha, setup, set, delta_tilde)
    }
    fn linear_part(&self) -> Option<&[f64]> {
        self.lin.linear_part()
    }
    fn subdifferential(&self, x: &[f64]) -> Option<(Point, Point)> {
        self.lin.subdifferential(x)
    }
}

impl MinModel for CompositeModel {
    fn dim(&self) -> usize {
        self.p.g.dim()
    }
    fn f_value(&self, x: &[f64]) -> f64 {
        self.p.g.value(x) + self.h_value(x)
    }
    fn at(&self, y: &[f64]) -> Result<Local<'_>> {
        let restrict = match &self.p.h {
            SimpleH::IndicatorOfSet(s) => Some(s.clone()),
            SimpleH::L1(_) => None,
        };
        let lin = Linearization {
            center: y.to_vec(),
            grad: self.p.g.gradient(y),
            h: self.term.clone(),
            restrict,
            f_delta: self.f_value(y),
            delta: 0.0,
        };
        Ok(Box::new(CompositeLocal {
            lin,
            l1: self.term.as_ref().is_some_and(|t| !t.is_zero()),
        }))
    }
    fn declared_delta(&self) -> f64 {
        0.0
    }
    fn declared_l(&self) -> f64 {
        self.l
    }
}
