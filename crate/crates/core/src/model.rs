//! Model interfaces and their numeric validators.
//!
//! A minimization model of `f` is a triple `(f_δ, ψ_δ, prox)` such that for
//! all `x, y` in `Q`
//!
//! ```text
//! 0 <= f(x) − f_δ(y) − ψ_δ(x, y) <= L·V[y](x) + δ,   f_δ(y) ∈ [f(y) − δ, f(y)],
//! ```
//!
//! with `ψ_δ(·, y)` convex and `ψ_δ(x, x) = 0`. A VI model is a `ψ_δ` that is
//! δ-monotone, `ψ(x,y) + ψ(y,x) <= δ`, and generalized relatively smooth,
//! `ψ(x,y) <= ψ(x,z) + ψ(z,y) + L·V[z](x) + L·V[y](z) + δ`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{add, combine, dot, sub, Point};
use crate::prox::{linear_prox, SimpleTerm};
use crate::set::FeasibleSet;
use crate::setup::ProxSetup;

/// Default absolute tolerance of the validators.
pub const VALIDATION_TOL: f64 = 1e-10;

/// Output of a prox step: the point and the accuracy actually achieved.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxPoint {
    /// The (approximate) minimizer.
    pub x: Point,
    /// Achieved δ̃ for the objective `α·ψ(x, y) + V[z](x)`.
    pub delta_tilde: f64,
}

/// A model frozen at its linearization center `y`.
pub trait LocalModel: Send + Sync {
    /// The center `y`.
    fn center(&self) -> &[f64];
    /// `f_δ(y)`.
    fn f_delta(&self) -> f64;
    /// The δ this query actually incurred.
    fn delta(&self) -> f64;
    /// `ψ_δ(x, y)`.
    fn psi(&self, x: &[f64]) -> f64;
    /// δ̃-solution of `min_{x in Q} α·ψ_δ(x, y) + V[z](x)`.
    fn prox_step(
        &self,
        z: &[f64],
        alpha: f64,
        setup: &ProxSetup,
        set: &FeasibleSet,
        delta_tilde: f64,
    ) -> Result<ProxPoint>;
    /// `g` when `ψ_δ(x, y) = <g, x − y>`.
    fn linear_part(&self) -> Option<&[f64]> {
        None
    }
    /// Coordinate intervals whose product is `∂ψ_δ(·, y)(x)`, when separable.
    fn subdifferential(&self, _x: &[f64]) -> Option<(Point, Point)> {
        None
    }
}

/// A boxed local model.
pub type Local<'a> = Box<dyn LocalModel + 'a>;

/// An inexact (δ, L)-model of a convex objective.
pub trait MinModel: Send + Sync {
    /// Ambient dimension.
    fn dim(&self) -> usize;
    /// `f(x)`, or an upper proxy when `f` is only available inexactly.
    fn f_value(&self, x: &[f64]) -> f64;
    /// Freezes the model at `y`.
    fn at(&self, y: &[f64]) -> Result<Local<'_>>;
    /// Declared δ.
    fn declared_delta(&self) -> f64;
    /// Declared L.
    fn declared_l(&self) -> f64;
    /// Whether the model is stated in a norm, so 1-strong convexity of the setup is needed.
    fn norm_based(&self) -> bool {
        true
    }
    /// `f_δ(y)`.
    fn f_delta(&self, y: &[f64]) -> Result<f64> {
        Ok(self.at(y)?.f_delta())
    }
    /// `ψ_δ(x, y)`.
    fn psi(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.at(y)?.psi(x))
    }
    /// δ̃-solution of `min_{x in Q} α·ψ_δ(x, y) + V[z](x)`.
    fn prox_step(
        &self,
        y: &[f64],
        z: &[f64],
        alpha: f64,
        setup: &ProxSetup,
        set: &FeasibleSet,
        delta_tilde: f64,
    ) -> Result<ProxPoint> {
        self.at(y)?.prox_step(z, alpha, setup, set, delta_tilde)
    }
}

/// An abstract (δ, L)-model of a variational inequality.
pub trait ViModel: Send + Sync {
    /// Ambient dimension.
    fn dim(&self) -> usize;
    /// Freezes the model at `y`; `f_delta` of the result is unused.
    fn at(&self, y: &[f64]) -> Result<Local<'_>>;
    /// Declared δ.
    fn declared_delta(&self) -> f64;
    /// Declared L.
    fn declared_l(&self) -> f64;
    /// Strong monotonicity: `ψ(x,y) + ψ(y,x) + μ‖y − x‖² <= 0`.
    fn mu(&self) -> Option<f64> {
        None
    }
    /// Hölder constants `(ν, L_ν)` of the underlying operator.
    fn holder(&self) -> Option<(f64, f64)> {
        None
    }
    /// `ψ_δ(x, y)`.
    fn psi(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.at(y)?.psi(x))
    }
    /// δ̃-solution of `min_{x in Q} ψ_δ(x, y) + L·V[z](x)`; accuracies refer to this objective.
    fn prox_step(
        &self,
        y: &[f64],
        z: &[f64],
        l: f64,
        setup: &ProxSetup,
        set: &FeasibleSet,
        delta_tilde: f64,
    ) -> Result<ProxPoint> {
        let mut p = self.at(y)?.prox_step(z, 1.0 / l, setup, set, delta_tilde / l)?;
        p.delta_tilde *= l;
        Ok(p)
    }
}

/// Strong convexity flavors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrongConvexityTag {
    /// No strong convexity.
    None,
    /// `f(x) >= f_δ(y) + ψ_δ(x, y) + μ·V[y](x)`.
    RightRelative(f64),
    /// `f(x) >= f_δ(y) + ψ_δ(x, y) + μ·V[x](y)`.
    LeftRelative(f64),
    /// `f(x) >= f(y) + <g, x − y> + (μ/2)‖x − y‖²`.
    NormStrong(f64),
}

impl StrongConvexityTag {
    /// The modulus, if any.
    pub fn mu(&self) -> Option<f64> {
        match self {
            Self::None => None,
            Self::RightRelative(m) | Self::LeftRelative(m) | Self::NormStrong(m) => Some(*m),
        }
    }

    /// Rejects a nonpositive modulus.
    pub fn validate(&self) -> Result<()> {
        match self.mu() {
            Some(m) if !(m > 0.0) => Err(Error::InvalidArgument("mu must be positive".into())),
            _ => Ok(()),
        }
    }
}

/// A linear-plus-simple local model `ψ(x, y) = <g, x − y> + h(x) − h(y)`.
#[derive(Debug, Clone)]
pub struct Linearization {
    /// Center `y`.
    pub center: Point,
    /// Linear part `g`.
    pub grad: Point,
    /// Separable simple term `h`.
    pub h: Option<SimpleTerm>,
    /// Indicator term: ψ is `+inf` outside this set and the prox is taken over it.
    pub restrict: Option<FeasibleSet>,
    /// `f_δ(y)`.
    pub f_delta: f64,
    /// δ incurred by the query.
    pub delta: f64,
}

impl Linearization {
    /// Exact linearization `<g, x − y>` with `f_δ(y) = f(y)`.
    pub fn linear(center: Point, grad: Point, f_y: f64) -> Self {
        Self {
            center,
            grad,
            h: None,
            restrict: None,
            f_delta: f_y,
            delta: 0.0,
        }
    }

    fn h_at(&self, x: &[f64]) -> f64 {
        self.h.as_ref().map_or(0.0, |h| h.value(x))
    }
}

impl LocalModel for Linearization {
    fn center(&self) -> &[f64] {
        &self.center
    }
    fn f_delta(&self) -> f64 {
        self.f_delta
    }
    fn delta(&self) -> f64 {
        self.delta
    }
    fn psi(&self, x: &[f64]) -> f64 {
        if let Some(s) = &self.restrict {
            if !s.contains(x, 1e-9) {
                return f64::INFINITY;
            }
        }
        dot(&self.grad, &sub(x, &self.center)) + self.h_at(x) - self.h_at(&self.center)
    }
    fn prox_step(
        &self,
        z: &[f64],
        alpha: f64,
        setup: &ProxSetup,
        set: &FeasibleSet,
        _delta_tilde: f64,
    ) -> Result<ProxPoint> {
        let target = match &self.restrict {
            None => set,
            Some(s) if matches!(set, FeasibleSet::WholeSpace(_)) || s == set => s,
            Some(_) => {
                return Err(Error::UnsupportedCombination(
                    "indicator term over a different feasible set".into(),
                ))
            }
        };
        let x = linear_prox(setup, target, z, alpha, &self.grad, self.h.as_ref())?;
        Ok(ProxPoint { x, delta_tilde: 0.0 })
    }
    fn linear_part(&self) -> Option<&[f64]> {
        if self.h.as_ref().map_or(true, SimpleTerm::is_zero) && self.restrict.is_none() {
            Some(&self.grad)
        } else {
            None
        }
    }
    fn subdifferential(&self, x: &[f64]) -> Option<(Point, Point)> {
        if self.restrict.is_some() {
            return None;
        }
        match &self.h {
            None => Some((self.grad.clone(), self.grad.clone())),
            Some(h) => {
                let (lo, hi) = h.subdifferential(x);
                Some((add(&self.grad, &lo), add(&self.grad, &hi)))
            }
        }
    }
}

/// One named check of a validation run.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    /// Which inequality.
    pub name: &'static str,
    /// Number of sampled violations.
    pub violations: usize,
    /// Largest violation amount (0 when none).
    pub worst: f64,
}

/// Result of sampling a model against its defining inequalities.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// Samples drawn per check.
    pub samples: usize,
    /// Individual checks.
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    /// Whether every check recorded zero violations.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.violations == 0)
    }

    /// The check called `name`.
    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "samples: {}", self.samples)?;
        for c in &self.checks {
            writeln!(f, "{:<12} violations={:<5} worst={:.3e}", c.name, c.violations, c.worst)?;
        }
        write!(f, "result: {}", if self.passed() { "pass" } else { "fail" })
    }
}

struct Tally {
    name: &'static str,
    violations: usize,
    worst: f64,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            violations: 0,
            worst: 0.0,
        }
    }
    /// Records `excess`, a violation when positive or NaN.
    fn record(&mut self, excess: f64) {
        if excess > 0.0 || excess.is_nan() {
            self.violations += 1;
            self.worst = self.worst.max(if excess.is_nan() { f64::INFINITY } else { excess });
        }
    }
    fn finish(self) -> CheckOutcome {
        CheckOutcome {
            name: self.name,
            violations: self.violations,
            worst: self.worst,
        }
    }
}

/// Samples the sandwich inequality, `ψ(x,x) = 0`, convexity of `ψ(·, y)` and
/// the range of `f_δ` at tolerance [`VALIDATION_TOL`].
pub fn validate_min_model(
    model: &dyn MinModel,
    setup: &ProxSetup,
    set: &FeasibleSet,
    n_samples: usize,
    rng_seed: u64,
) -> Result<ValidationReport> {
    validate_min_model_with_tol(model, setup, set, n_samples, rng_seed, VALIDATION_TOL)
}

/// [`validate_min_model`] with an explicit tolerance.
pub fn validate_min_model_with_tol(
    model: &dyn MinModel,
    setup: &ProxSetup,
    set: &FeasibleSet,
    n_samples: usize,
    rng_seed: u64,
    tol: f64,
) -> Result<ValidationReport> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let (l, delta) = (model.declared_l(), model.declared_delta());
    let mut zero = Tally::new("psi_zero");
    let mut convex = Tally::new("convexity");
    let mut lower = Tally::new("lower");
    let mut upper = Tally::new("upper");
    let mut range = Tally::new("f_delta");
    for _ in 0..n_samples {
        let x = set.sample(&mut rng);
        let y = set.sample(&mut rng);
        let x2 = set.sample(&mut rng);
        let local = model.at(&y)?;
        let fy = model.f_value(&y);
        let fd = local.f_delta();
        range.record((fd - fy - tol).max(fy - delta - fd - tol));
        zero.record(local.psi(&y).abs() - 1e-12);
        let mid = combine(1.0, &x, 1.0, &x2);
        convex.record(local.psi(&mid) - 0.5 * (local.psi(&x) + local.psi(&x2)) - tol);
        let gap = model.f_value(&x) - fd - local.psi(&x);
        lower.record(-gap - tol);
        upper.record(gap - l * setup.bregman(&y, &x)? - delta - tol);
    }
    Ok(ValidationReport {
        samples: n_samples,
        checks: vec![
            zero.finish(),
            convex.finish(),
            range.finish(),
            lower.finish(),
            upper.finish(),
        ],
    })
}

/// Samples properties (i)–(iv) of a VI model at tolerance [`VALIDATION_TOL`].
pub fn validate_vi_model(
    model: &dyn ViModel,
    setup: &ProxSetup,
    set: &FeasibleSet,
    n_samples: usize,
    rng_seed: u64,
) -> Result<ValidationReport> {
    validate_vi_model_with_tol(model, setup, set, n_samples, rng_seed, VALIDATION_TOL)
}

/// [`validate_vi_model`] with an explicit tolerance.
pub fn validate_vi_model_with_tol(
    model: &dyn ViModel,
    setup: &ProxSetup,
    set: &FeasibleSet,
    n_samples: usize,
    rng_seed: u64,
    tol: f64,
) -> Result<ValidationReport> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let (l, delta) = (model.declared_l(), model.declared_delta());
    let mut zero = Tally::new("psi_zero");
    let mut convex = Tally::new("convexity");
    let mut mono = Tally::new("monotone");
    let mut smooth = Tally::new("smoothness");
    for _ in 0..n_samples {
        let x = set.sample(&mut rng);
        let y = set.sample(&mut rng);
        let z = set.sample(&mut rng);
        let at_y = model.at(&y)?;
        let at_x = model.at(&x)?;
        let at_z = model.at(&z)?;
        zero.record(at_y.psi(&y).abs() - 1e-12);
        let mid = combine(1.0, &x, 1.0, &z);
        convex.record(at_y.psi(&mid) - 0.5 * (at_y.psi(&x) + at_y.psi(&z)) - tol);
        mono.record(at_y.psi(&x) + at_x.psi(&y) - delta - tol);
        let rhs = at_z.psi(&x) + at_y.psi(&z) + l * setup.bregman(&z, &x)? + l * setup.bregman(&y, &z)? + delta;
        smooth.record(at_y.psi(&x) - rhs - tol);
    }
    Ok(ValidationReport {
        samples: n_samples,
        checks: vec![zero.finish(), convex.finish(), mono.finish(), smooth.finish()],
    })
}

/// Views a minimization model as a VI model with budget `5·δ`.
pub struct MinAsVi<'a>(pub &'a dyn MinModel);

impl ViModel for MinAsVi<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn at(&self, y: &[f64]) -> Result<Local<'_>> {
        self.0.at(y)
    }
    fn declared_delta(&self) -> f64 {
        5.0 * self.0.declared_delta()
    }
    fn declared_l(&self) -> f64 {
        self.0.declared_l()
    }
}

/// Whether a (δ, L)-minimization model passes the VI checks with budget `5δ`.
pub fn check_min_model_is_vi_model(
    model: &dyn MinModel,
    setup: &ProxSetup,
    set: &FeasibleSet,
    n_samples: usize,
    rng_seed: u64,
) -> Result<bool> {
    Ok(validate_vi_model(&MinAsVi(model), setup, set, n_samples, rng_seed)?.passed())
}
