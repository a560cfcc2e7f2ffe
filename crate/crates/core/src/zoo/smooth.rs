//! Gradient linearization of an L-smooth function.

use crate::error::Result;
use crate::model::{Linearization, Local, MinModel};

use super::SharedFunction;

/// `ψ(x, y) = <∇f(y), x − y>`, `δ = 0`.
pub struct SmoothModel {
    f: SharedFunction,
    l: f64,
}

/// Model of an `L`-smooth `f`.
pub fn make_smooth_model(f: SharedFunction, l: f64) -> SmoothModel {
    SmoothModel { f, l }
}

impl SmoothModel {
    /// The wrapped function.
    pub fn function(&self) -> &SharedFunction {
        &self.f
    }
}

impl MinModel for SmoothModel {
    fn dim(&self) -> usize {
        self.f.dim()
    }
    fn f_value(&self, x: &[f64]) -> f64 {
        self.f.value(x)
    }
    fn at(&self, y: &[f64]) -> Result<Local<'_>> {
        Ok(Box::new(Linearization::linear(
            y.to_vec(),
            self.f.gradient(y),
            self.f.value(y),
        )))
    }
    fn declared_delta(&self) -> f64 {
        0.0
    }
    fn declared_l(&self) -> f64 {
        self.l
    }
}
