//! Models of functions with Hölder continuous (sub)gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{norm2, sub};
use crate::model::{Linearization, Local, MinModel};
use crate::set::FeasibleSet;

use super::SharedFunction;

/// `L(δ) = L_ν^{2/(1+ν)} · (1/(2δ))^{(1−ν)/(1+ν)}`, the smoothness constant
/// that trades the Hölder condition for an additive error δ.
pub fn holder_l(nu: f64, l_nu: f64, delta: f64) -> f64 {
    let e = (1.0 - nu) / (1.0 + nu);
    if e == 0.0 {
        return l_nu;
    }
    l_nu.powf(2.0 / (1.0 + nu)) * (0.5 / delta).powf(e)
}

/// `f` with `‖∇f(x) − ∇f(y)‖_* <= L_ν ‖x − y‖^ν`.
#[derive(Clone)]
pub struct HolderProblem {
    /// Value and subgradient oracle.
    pub f: SharedFunction,
    /// Exponent `ν ∈ [0, 1]`.
    pub nu: f64,
    /// Constant `L_ν > 0`.
    pub l_nu: f64,
}

impl HolderProblem {
    /// Validates `ν ∈ [0, 1]` and `L_ν > 0`.
    pub fn new(f: SharedFunction, nu: f64, l_nu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&nu) || !(l_nu > 0.0) {
            return Err(Error::InvalidArgument(
                "Hölder constants need nu in [0, 1] and L_nu > 0".into(),
            ));
        }
        Ok(Self { f, nu, l_nu })
    }

    /// Samples the Hölder condition (relative slack 1e-6) on pairs from `set`.
    pub fn check_holder(&self, set: &FeasibleSet, n_samples: usize, seed: u64) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_samples).all(|_| {
            let x = set.sample(&mut rng);
            let y = set.sample(&mut rng);
            let lhs = norm2(&sub(&self.f.gradient(&x), &self.f.gradient(&y)));
            lhs <= self.l_nu * norm2(&sub(&x, &y)).powf(self.nu) * (1.0 + 1e-6) + 1e-12
        })
    }
}

/// `ψ(x, y) = <∇f(y), x − y>`, `f_δ = f`, declared `(δ, L(δ))`.
pub struct UniversalModel {
    p: HolderProblem,
    delta: f64,
}

/// Universal model of `p` at accuracy `delta > 0`.
pub fn make_universal_model(p: HolderProblem, delta: f64) -> Result<UniversalModel> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument("universal model needs delta > 0".into()));
    }
    Ok(UniversalModel { p, delta })
}

impl UniversalModel {
    /// The Hölder problem.
    pub fn problem(&self) -> &HolderProblem {
        &self.p
    }
}

impl MinModel for UniversalModel {
    fn dim(&self) -> usize {
        self.p.f.dim()
    }
    fn f_value(&self, x: &[f64]) -> f64 {
        self.p.f.value(x)
    }
    fn at(&self, y: &[f64]) -> Result<Local<'_>> {
        Ok(Box::new(Linearization::linear(
            y.to_vec(),
            self.p.f.gradient(y),
            self.p.f.value(y),
        )))
    }
    fn declared_delta(&self) -> f64 {
        self.delta
    }
    fn declared_l(&self) -> f64 {
        holder_l(self.p.nu, self.p.l_nu, self.delta)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::linalg::norm1;
    use crate::model::validate_min_model;
    use crate::setup::ProxSetup;
    use crate::zoo::FnFunction;

    #[test]
    fn holder_constant_examples() {
        assert_eq!(holder_l(1.0, 3.0, 1e-9), 3.0);
        assert!((holder_l(0.0, 1.0, 0.5) - 1.0).abs() < 1e-15);
        assert!((holder_l(0.0, 2.0, 1.0) - 2.0).abs() < 1e-15);
    }

    fn l1_problem(n: usize) -> HolderProblem {
        let f = FnFunction::new(n, norm1, |x| x.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect());
        // Subgradients of ‖x‖₁ differ by at most 2√n in ℓ2.
        HolderProblem::new(Arc::new(f), 0.0, 2.0 * (n as f64).sqrt()).unwrap()
    }

    #[test]
    fn nonsmooth_l1_validates_for_several_deltas() {
        let set = FeasibleSet::uniform_box(3, -1.0, 1.0).unwrap();
        let p = l1_problem(3);
        assert!(p.check_holder(&set, 500, 1));
        for delta in [1e-1, 1e-3] {
            let m = make_universal_model(p.clone(), delta).unwrap();
            let r = validate_min_model(&m, &ProxSetup::euclidean(), &set, 1000, 2).unwrap();
            assert!(r.passed(), "{r}");
        }
    }

    #[test]
    fn rejects_zero_delta() {
        assert!(make_universal_model(l1_problem(2), 0.0).is_err());
    }
}
