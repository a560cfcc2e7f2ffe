//! Adaptive gradient method with an inexact model, its strongly convex
//! variant and the restarted scheme.

use crate::error::{Error, Result};
use crate::inexact::InexactnessBudget;
use crate::linalg::{axpy, check_dim, Point};
use crate::model::{Local, MinModel, StrongConvexityTag};
use crate::set::FeasibleSet;
use crate::setup::ProxSetup;
use crate::trace::{Certificate, IterationRecord, SolverRun, StageRecord};

/// Largest backtracking exponent before the line search gives up.
pub const MAX_BACKTRACK: usize = 60;

/// Relative slack of the exit tests.
pub(crate) const EXIT_SLACK: f64 = 1e-12;

/// Inputs of [`gm_solve`].
#[derive(Debug, Clone)]
pub struct GmConfig {
    /// Initial guess `L_0 > 0`.
    pub l0: f64,
    /// Iteration cap.
    pub max_iter: usize,
    /// δ and δ̃ budgets.
    pub budget: InexactnessBudget,
    /// Stop once the certificate drops below this value.
    pub target_eps: Option<f64>,
    /// Backtracking on (`true`) or constant `L = L_0` (`false`).
    pub adaptive: bool,
}

impl GmConfig {
    /// Adaptive run with exact oracles.
    pub fn new(l0: f64, max_iter: usize) -> Self {
        Self {
            l0,
            max_iter,
            budget: InexactnessBudget::exact(),
            target_eps: None,
            adaptive: true,
        }
    }

    /// Same config with another budget.
    pub fn with_budget(mut self, budget: InexactnessBudget) -> Self {
        self.budget = budget;
        self
    }

    /// Same config with a fixed `L = L_0`.
    pub fn non_adaptive(mut self) -> Self {
        self.adaptive = false;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.l0 > 0.0) || !self.l0.is_finite() {
            return Err(Error::InvalidArgument("L0 must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// `lhs <= rhs` up to a relative slack of 1e-12.
pub(crate) fn passes(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + EXIT_SLACK * lhs.abs().max(rhs.abs()).max(1.0)
}

pub(crate) fn clamp_l(l: f64, l0: f64) -> f64 {
    let span = (MAX_BACKTRACK as f64).exp2();
    l.clamp(l0 / span, l0 * span)
}

pub(crate) fn check_setup(model: &dyn MinModel, setup: &ProxSetup) -> Result<()> {
    if model.norm_based() && !setup.is_one_strongly_convex() {
        return Err(Error::NotOneStronglyConvex);
    }
    Ok(())
}

/// Gradient method with model: `x_{k+1}` is a δ̃-solution of
/// `min α_{k+1} ψ(x, x_k) + V[x_k](x)` with `α_{k+1} = 1/L_{k+1}` and
/// `L_{k+1}` found by backtracking from `L_k/2`.
///
/// Returns `x̄_N = Σ α_{k+1} x_{k+1} / A_N` with the certificate
/// `R²/A_N + (2/A_N) Σ α δ_k + (1/A_N) Σ α δ̃_k`.
pub fn gm_solve(
    model: &dyn MinModel,
    setup: &ProxSetup,
    set: &FeasibleSet,
    x0: &[f64],
    r2: f64,
    cfg: &GmConfig,
) -> Result<SolverRun> {
    cfg.validate()?;
    check_dim(x0, model.dim())?;
    check_setup(model, setup)?;
    let mut run = SolverRun::at_start(x0);
    let mut x = x0.to_vec();
    let mut local: Local<'_> = model.at(&x)?;
    let mut l = cfg.l0;
    let (mut a, mut sum_ad, mut sum_adt) = (0.0, 0.0, 0.0);
    let mut weighted: Point = vec![0.0; x0.len()];
    for k in 0..cfg.max_iter {
        let mut trial = if cfg.adaptive { clamp_l(l / 2.0, cfg.l0) } else { l };
        let mut i = 0;
        let (x_next, local_next, alpha, delta_k, dt) = loop {
            let alpha = 1.0 / trial;
            let p = local.prox_step(&x, alpha, setup, set, cfg.budget.delta_tilde / trial)?;
            let next = model.at(&p.x)?;
            let delta_k = cfg
                .budget
                .delta_k(k, alpha, a + alpha)
                .max(local.delta())
                .max(next.delta());
            let ok = !cfg.adaptive || {
                let rhs = local.f_delta()
                    + local.psi(&p.x)
                    + trial * setup.bregman(&x, &p.x)?
                    + delta_k;
                passes(next.f_delta(), rhs)
            };
            if ok {
                break (p.x, next, alpha, delta_k, p.delta_tilde * trial);
            }
            i += 1;
            if i > MAX_BACKTRACK {
                return Err(Error::LineSearchDiverged { iteration: k, l: trial });
            }
            trial = clamp_l(2.0 * trial, cfg.l0);
        };
        l = trial;
        a += alpha;
        sum_ad += alpha * delta_k;
        sum_adt += alpha * dt;
        axpy(alpha, &x_next, &mut weighted);
        let x_bar: Point = weighted.iter().map(|v| v / a).collect();
        let cert = Certificate::new(r2 / a, 2.0 * sum_ad / a, sum_adt / a);
        run.records.push(IterationRecord {
            k,
            l,
            alpha,
            a,
            attempts: i + 1,
            delta: delta_k,
            delta_tilde: dt,
            f_delta: local_next.f_delta(),
            f: model.f_value(&x_bar),
            cert: cert.bound_value,
        });
        run.iterates.push(x_next.clone());
        run.certificate = cert;
        run.x_bar = x_bar;
        x = x_next;
        local = local_next;
        if cfg.target_eps.is_some_and(|e| cert.bound_value <= e) {
            break;
        }
    }
    run.x_last = x;
    Ok(run)
}

/// Recomputes the certificate of a [`gm_solve`] run and checks
/// `A_N >= N/(2L)` when the model's `L` is supplied.
pub fn gm_certificate(run: &SolverRun, r2: f64, declared_l: Option<f64>) -> Result<Certificate> {
    let a_n = run.a_n();
    if run.records.is_empty() {
        return Ok(Certificate::infinite());
    }
    if let Some(l) = declared_l {
        let n = run.iterations() as f64;
        if a_n < n / (2.0 * l) * (1.0 - 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "A_N = {a_n:e} is below N/(2L) = {:e}",
                n / (2.0 * l)
            )));
        }
    }
    let sum_ad: f64 = run.records.iter().map(|r| r.alpha * r.delta).sum();
    let sum_adt: f64 = run.records.iter().map(|r| r.alpha * r.delta_tilde).sum();
    Ok(Certificate::new(r2 / a_n, 2.0 * sum_ad / a_n, sum_adt / a_n))
}

/// Constant-step gradient method for a right relative μ-strongly convex
/// model. Tracks the best iterate; record `k` certifies
/// `f(best) − f* <= L R² exp(−(k+1)μ/L) + δ + δ̃` and
/// `distance_bounds[k]` holds `(δ + δ̃)/μ + (1 − μ/L)^{k+1} R²`.
#[allow(clippy::too_many_arguments)]
pub fn gm_strongly_convex_solve(
    model: &dyn MinModel,
    tag: StrongConvexityTag,
    setup: &ProxSetup,
    set: &FeasibleSet,
    x0: &[f64],
    r2: f64,
    l_fixed: f64,
    n: usize,
    budget: &InexactnessBudget,
) -> Result<SolverRun> {
    let StrongConvexityTag::RightRelative(mu) = tag else {
        return Err(Error::InvalidArgument("strongly convex GM needs a right relative tag".into()));
    };
    tag.validate()?;
    if !(mu <= l_fixed) {
        return Err(Error::InvalidArgument(format!("mu = {mu} exceeds L = {l_fixed}")));
    }
    check_dim(x0, model.dim())?;
    check_setup(model, setup)?;
    let alpha = 1.0 / l_fixed;
    let mut run = SolverRun::at_start(x0);
    let mut x = x0.to_vec();
    let mut best = (model.f_value(x0), x0.to_vec());
    let (mut a, mut delta_max, mut dt_max) = (0.0, 0.0_f64, 0.0_f64);
    for k in 0..n {
        let local = model.at(&x)?;
        let p = local.prox_step(&x, alpha, setup, set, budget.delta_tilde / l_fixed)?;
        let next = model.at(&p.x)?;
        a += alpha;
        let delta_k = budget.delta_k(k, alpha, a).max(local.delta()).max(next.delta());
        let dt = p.delta_tilde * l_fixed;
        delta_max = delta_max.max(delta_k);
        dt_max = dt_max.max(dt);
        let f = model.f_value(&p.x);
        if f < best.0 {
            best = (f, p.x.clone());
        }
        let steps = (k + 1) as f64;
        let cert = Certificate::new(
            l_fixed * r2 * (-steps * mu / l_fixed).exp(),
            delta_max,
            dt_max,
        );
        run.distance_bounds
            .push((delta_max + dt_max) / mu + (1.0 - mu / l_fixed).powf(steps) * r2);
        run.records.push(IterationRecord {
            k,
            l: l_fixed,
            alpha,
            a,
            attempts: 1,
            delta: delta_k,
            delta_tilde: dt,
            f_delta: next.f_delta(),
            f: best.0,
            cert: cert.bound_value,
        });
        run.certificate = cert;
        run.iterates.push(p.x.clone());
        x = p.x;
    }
    run.x_last = x;
    run.x_bar = best.1;
    Ok(run)
}

/// Restarted gradient method for a left relative μ-strongly convex model:
/// `max(1, ⌈log₂(R²/ε)⌉)` stages of adaptive [`gm_solve`] with `L_0 = L`,
/// `⌈4L/μ⌉` iterations each, restarted from `x̄`.
///
/// `distance_bounds[p]` holds the guaranteed `V[x̄_p](x*)` after stage `p`,
/// ending at `ε + 2δ̃/μ + 4δ/μ`.
#[allow(clippy::too_many_arguments)]
pub fn gm_restart_solve(
    model: &dyn MinModel,
    tag: StrongConvexityTag,
    setup: &ProxSetup,
    set: &FeasibleSet,
    x0: &[f64],
    r0_sq: f64,
    eps: f64,
    l: f64,
    budget: &InexactnessBudget,
) -> Result<SolverRun> {
    let StrongConvexityTag::LeftRelative(mu) = tag else {
        return Err(Error::InvalidArgument("restarted GM needs a left relative tag".into()));
    };
    tag.validate()?;
    if !(eps > 0.0) || !(r0_sq > 0.0) {
        return Err(Error::InvalidArgument("restarts need eps > 0 and R0^2 > 0".into()));
    }
    let stages = restart_stages(r0_sq / eps);
    let per_stage = (4.0 * l / mu).ceil() as usize;
    let cfg = GmConfig {
        l0: l,
        max_iter: per_stage,
        budget: budget.clone(),
        target_eps: None,
        adaptive: true,
    };
    let floor = (2.0 * budget.delta_tilde + 4.0 * budget.delta) / mu;
    let mut out = SolverRun::at_start(x0);
    let mut x = x0.to_vec();
    let mut r2 = r0_sq;
    for p in 0..stages {
        let stage = gm_solve(model, setup, set, &x, r2, &cfg)?;
        let offset = out.records.len();
        out.records.extend(stage.records.iter().cloned().map(|mut r| {
            r.k += offset;
            r
        }));
        out.iterates.extend(stage.iterates.into_iter().skip(1));
        out.certificate = stage.certificate;
        x = stage.x_bar;
        r2 = r0_sq * (-((p + 1) as f64)).exp2();
        let bound = r2 + floor;
        out.distance_bounds.push(bound);
        out.stages.push(StageRecord {
            iterations: stage.records.len(),
            x: x.clone(),
            bound,
        });
    }
    out.x_last = x.clone();
    out.x_bar = x;
    Ok(out)
}

/// `max(1, ⌈log₂ ratio⌉)`.
fn restart_stages(ratio: f64) -> usize {
    ratio.log2().ceil().max(1.0) as usize
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::zoo::{make_smooth_model, QuadraticProblem};

    fn half_sq(a: &[f64]) -> crate::zoo::SmoothModel {
        make_smooth_model(Arc::new(QuadraticProblem::centered(a)), 1.0)
    }

    #[test]
    fn first_step_backtracks_once_and_lands_on_minimizer() {
        let m = half_sq(&[1.0, -2.0]);
        let set = FeasibleSet::WholeSpace(2);
        let run = gm_solve(&m, &ProxSetup::euclidean(), &set, &[0.0, 0.0], 5.0, &GmConfig::new(1.0, 1))
            .unwrap();
        let r = &run.records[0];
        assert_eq!((r.attempts, r.l), (2, 1.0));
        assert_eq!(run.x_last, vec![1.0, -2.0]);
    }

    #[test]
    fn fixed_point_at_minimizer() {
        let m = half_sq(&[0.5]);
        let run = gm_solve(
            &m,
            &ProxSetup::euclidean(),
            &FeasibleSet::WholeSpace(1),
            &[0.5],
            0.0,
            &GmConfig::new(1.0, 5),
        )
        .unwrap();
        assert!(run.iterates.iter().all(|x| x == &vec![0.5]));
        assert!(run.certificate.bound_value >= 0.0);
    }

    #[test]
    fn certificate_components() {
        let m = half_sq(&[1.0]);
        let set = FeasibleSet::WholeSpace(1);
        let run = gm_solve(&m, &ProxSetup::euclidean(), &set, &[0.0], 0.5, &GmConfig::new(1.0, 10))
            .unwrap();
        let c = gm_certificate(&run, 0.5, Some(1.0)).unwrap();
        assert_eq!(c.bound_value, 0.5 / run.a_n());
        assert!(run.a_n() >= 5.0);
        let budget = InexactnessBudget::new(1e-3, 0.0).unwrap();
        let run = gm_solve(
            &m,
            &ProxSetup::euclidean(),
            &set,
            &[0.0],
            0.5,
            &GmConfig::new(1.0, 10).with_budget(budget),
        )
        .unwrap();
        let c = gm_certificate(&run, 0.5, None).unwrap();
        assert!((c.delta_term - 2e-3).abs() < 1e-15);
    }

    #[test]
    fn quadratic_bound_with_l4() {
        let q = QuadraticProblem::new(
            crate::linalg::Matrix::diag(&[4.0, 1.0]),
            vec![0.0, 0.0],
            0.0,
        )
        .unwrap();
        let m = make_smooth_model(Arc::new(q), 4.0);
        let x0 = [1.0, 1.0];
        let r2 = 1.0;
        let cfg = GmConfig::new(4.0, 8).non_adaptive();
        let run = gm_solve(&m, &ProxSetup::euclidean(), &FeasibleSet::WholeSpace(2), &x0, r2, &cfg)
            .unwrap();
        assert!(m.f_value(&run.x_bar) <= 2.0 * 4.0 * r2 / 8.0);
    }

    #[test]
    fn strongly_convex_one_step() {
        let m = half_sq(&[0.0, 0.0]);
        let run = gm_strongly_convex_solve(
            &m,
            StrongConvexityTag::RightRelative(1.0),
            &ProxSetup::euclidean(),
            &FeasibleSet::WholeSpace(2),
            &[3.0, -1.0],
            5.0,
            1.0,
            1,
            &InexactnessBudget::exact(),
        )
        .unwrap();
        assert_eq!(run.x_last, vec![0.0, 0.0]);
        assert_eq!(run.records[0].f, 0.0);
    }

    #[test]
    fn strongly_convex_rejects_mu_above_l() {
        let m = half_sq(&[0.0]);
        let r = gm_strongly_convex_solve(
            &m,
            StrongConvexityTag::RightRelative(2.0),
            &ProxSetup::euclidean(),
            &FeasibleSet::WholeSpace(1),
            &[1.0],
            1.0,
            1.0,
            3,
            &InexactnessBudget::exact(),
        );
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn restart_stage_arithmetic() {
        assert_eq!(restart_stages(8.0), 3);
        assert_eq!(restart_stages(1.0), 1);
        assert_eq!(restart_stages(0.5), 1);
    }

    #[test]
    fn wrong_model_diverges() {
        // True curvature 2e20 is beyond L0·2^60.
        struct Overclaims;
        impl MinModel for Overclaims {
            fn dim(&self) -> usize {
                1
            }
            fn f_value(&self, x: &[f64]) -> f64 {
                1e20 * x[0] * x[0]
            }
            fn at(&self, y: &[f64]) -> Result<Local<'_>> {
                let g = vec![2e20 * y[0]];
                Ok(Box::new(crate::model::Linearization::linear(y.to_vec(), g, self.f_value(y))))
            }
            fn declared_delta(&self) -> f64 {
                0.0
            }
            fn declared_l(&self) -> f64 {
                1.0
            }
        }
        let r = gm_solve(
            &Overclaims,
            &ProxSetup::euclidean(),
            &FeasibleSet::WholeSpace(1),
            &[1.0],
            1.0,
            &GmConfig::new(1.0, 3),
        );
        assert!(matches!(r, Err(Error::LineSearchDiverged { iteration: 0, .. })));
    }
}
