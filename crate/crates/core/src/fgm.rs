//! Fast gradient method with an inexact model, its universal and
//! Frank–Wolfe variants, and the restarted scheme.

use crate::error::{Error, Result};
use crate::gm::{clamp_l, passes, MAX_BACKTRACK};
use crate::inexact::InexactnessBudget;
use crate::linalg::{check_dim, combine, sub, Point};
use crate::model::{MinModel, StrongConvexityTag};
use crate::set::FeasibleSet;
use crate::setup::ProxSetup;
use crate::trace::{Certificate, IterationRecord, SolverRun, StageRecord};
use crate::zoo::{make_universal_model, HolderProblem};

/// Inputs of [`fgm_solve`].
#[derive(Debug, Clone)]
pub struct FgmConfig {
    /// Initial guess `L_0 > 0`.
    pub l0: f64,
    /// Iteration cap.
    pub max_iter: usize,
    /// δ and δ̃ budgets.
    pub budget: InexactnessBudget,
    /// Universal schedule `δ_k = ε α_{k+1} / (4 A_{k+1})` with stop at `R²/A_N <= ε/2`.
    pub universal: Option<f64>,
    /// Replace the prox step by a linear minimization oracle.
    pub fw_mode: bool,
    /// Set diameter `R_Q`, required in FW mode.
    pub r_q: Option<f64>,
    /// Backtracking on (`true`) or constant `L = L_0` (`false`).
    pub adaptive: bool,
    /// Stop once the certificate drops below this value.
    pub target_eps: Option<f64>,
}

impl FgmConfig {
    /// Adaptive run with exact oracles.
    pub fn new(l0: f64, max_iter: usize) -> Self {
        Self {
            l0,
            max_iter,
            budget: InexactnessBudget::exact(),
            universal: None,
            fw_mode: false,
            r_q: None,
            adaptive: true,
            target_eps: None,
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

    fn validate(&self) -> Result<()> {
        if !(self.l0 > 0.0) || !self.l0.is_finite() {
            return Err(Error::InvalidArgument("L0 must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if self.universal.is_some_and(|e| !(e > 0.0)) {
            return Err(Error::InvalidArgument("universal eps must be positive".into()));
        }
        if self.fw_mode && !self.r_q.is_some_and(|r| r > 0.0) {
            return Err(Error::InvalidArgument("FW mode needs the set diameter R_Q".into()));
        }
        Ok(())
    }
}

/// Largest root of `L α² − α − A = 0`.
pub fn fgm_alpha(l: f64, a: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * l * a).sqrt()) / (2.0 * l)
}

/// Fast gradient method with model.
///
/// Each attempt sets `y = (α u_k + A_k x_k)/A_{k+1}`, takes `u_{k+1}` as a
/// δ̃-solution of `min α ψ(x, y) + V[u_k](x)` and
/// `x_{k+1} = (α u_{k+1} + A_k x_k)/A_{k+1}`, accepting once
/// `f_δ(x_{k+1}) <= f_δ(y) + ψ(x_{k+1}, y) + (L/2)‖x_{k+1} − y‖² + δ_k`.
/// Returns `x_N` with the certificate
/// `R²/A_N + 2 Σ δ_k A_{k+1} / A_N + Σ (δ̃_k / L_{k+1}) / A_N`.
pub fn fgm_solve(
    model: &dyn MinModel,
    setup: &ProxSetup,
    set: &FeasibleSet,
    x0: &[f64],
    r2: f64,
    cfg: &FgmConfig,
) -> Result<SolverRun> {
    cfg.validate()?;
    check_dim(x0, model.dim())?;
    if !setup.is_one_strongly_convex() {
        return Err(Error::NotOneStronglyConvex);
    }
    if cfg.fw_mode && !set.is_bounded() {
        return Err(Error::UnsupportedSet("FW mode needs a bounded set with an LMO".into()));
    }
    let r_q2 = cfg.r_q.map_or(0.0, |r| r * r);
    let mut run = SolverRun::at_start(x0);
    let (mut x, mut u) = (x0.to_vec(), x0.to_vec());
    let mut l = cfg.l0;
    let (mut a, mut sum_da, mut sum_dtl) = (0.0, 0.0, 0.0);
    for k in 0..cfg.max_iter {
        let mut trial = if cfg.adaptive { clamp_l(l / 2.0, cfg.l0) } else { l };
        let mut i = 0;
        let (x_next, u_next, alpha, a_next, delta_k, dt, f_delta) = loop {
            let alpha = fgm_alpha(trial, a);
            let a_next = a + alpha;
            let y = combine(alpha / a_next, &u, a / a_next, &x);
            let ly = model.at(&y)?;
            let (u_next, dt) = if cfg.fw_mode {
                let g = ly.linear_part().ok_or_else(|| {
                    Error::UnsupportedCombination("FW mode needs a linear model".into())
                })?;
                (set.lmo(g)?, 2.0 * trial * r_q2)
            } else {
                let p = ly.prox_step(&u, alpha, setup, set, cfg.budget.delta_tilde / trial)?;
                (p.x, p.delta_tilde * trial)
            };
            let x_next = combine(alpha / a_next, &u_next, a / a_next, &x);
            let lx = model.at(&x_next)?;
            let scheduled = match cfg.universal {
                Some(eps) => eps * alpha / (4.0 * a_next),
                None => cfg.budget.delta_k(k, alpha, a_next),
            };
            let delta_k = scheduled.max(ly.delta()).max(lx.delta());
            let ok = !cfg.adaptive || {
                let d = setup.norm(&sub(&x_next, &y), set);
                let rhs = ly.f_delta() + ly.psi(&x_next) + 0.5 * trial * d * d + delta_k;
                passes(lx.f_delta(), rhs)
            };
            if ok {
                break (x_next, u_next, alpha, a_next, delta_k, dt, lx.f_delta());
            }
            i += 1;
            if i > MAX_BACKTRACK {
                return Err(Error::LineSearchDiverged { iteration: k, l: trial });
            }
            trial = clamp_l(2.0 * trial, cfg.l0);
        };
        l = trial;
        a = a_next;
        sum_da += delta_k * a_next;
        sum_dtl += dt / trial;
        let cert = Certificate::new(r2 / a, 2.0 * sum_da / a, sum_dtl / a);
        run.records.push(IterationRecord {
            k,
            l,
            alpha,
            a,
            attempts: i + 1,
            delta: delta_k,
            delta_tilde: dt,
            f_delta,
            f: model.f_value(&x_next),
            cert: cert.bound_value,
        });
        run.iterates.push(x_next.clone());
        run.certificate = cert;
        x = x_next;
        u = u_next;
        let stop = match cfg.universal {
            Some(eps) if cfg.fw_mode => cert.bound_value <= eps,
            Some(eps) => r2 / a <= 0.5 * eps,
            None => false,
        };
        if stop || cfg.target_eps.is_some_and(|e| cert.bound_value <= e) {
            break;
        }
    }
    run.x_bar = x.clone();
    run.x_last = x;
    Ok(run)
}

/// Universal fast gradient method on a Hölder problem: [`fgm_solve`] with the
/// schedule `δ_k = ε α_{k+1} / (4 A_{k+1})`, recomputed for every candidate
/// `L`, stopping once `R²/A_N <= ε/2`.
pub fn fgm_universal_solve(
    p: &HolderProblem,
    setup: &ProxSetup,
    set: &FeasibleSet,
    x0: &[f64],
    r2: f64,
    eps: f64,
    cfg: &FgmConfig,
) -> Result<SolverRun> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let model = make_universal_model(p.clone(), 0.5 * eps)?;
    let cfg = FgmConfig {
        universal: Some(eps),
        ..cfg.clone()
    };
    fgm_solve(&model, setup, set, x0, r2, &cfg)
}

/// Universal conditional gradient: [`fgm_solve`] whose `u_{k+1}` minimizes the
/// linear part of the model over `set`. Records `δ̃_k = 2 L_{k+1} R_Q²` and
/// stops when the certificate reaches `eps`.
pub fn fw_solve(
    model: &dyn MinModel,
    set: &FeasibleSet,
    x0: &[f64],
    eps: f64,
    cfg: &FgmConfig,
) -> Result<SolverRun> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let r_q = cfg
        .r_q
        .ok_or_else(|| Error::InvalidArgument("FW needs the set diameter R_Q".into()))?;
    let cfg = FgmConfig {
        universal: Some(eps),
        fw_mode: true,
        ..cfg.clone()
    };
    fgm_solve(model, &ProxSetup::euclidean(), set, x0, 0.5 * r_q * r_q, &cfg)
}

/// Number of stages `⌈log₄(μR²/ε)⌉` (zero when `μR² <= ε`) and their length
/// `⌈6 √(L/μ)⌉` for [`fgm_restart_solve`].
pub fn fgm_restart_schedule(mu: f64, r2: f64, eps: f64, l: f64) -> (usize, usize) {
    let ratio = mu * r2 / eps;
    let stages = if ratio <= 1.0 { 0 } else { (ratio.ln() / 4f64.ln()).ceil() as usize };
    (stages, (6.0 * (l / mu).sqrt()).ceil() as usize)
}

/// Restarted non-adaptive fast gradient method for a left relative
/// μ-strongly convex model; each stage divides the guaranteed `V[x](x*)`
/// by four.
#[allow(clippy::too_many_arguments)]
pub fn fgm_restart_solve(
    model: &dyn MinModel,
    tag: StrongConvexityTag,
    setup: &ProxSetup,
    set: &FeasibleSet,
    x0: &[f64],
    r2: f64,
    eps: f64,
    l: f64,
    budget: &InexactnessBudget,
) -> Result<SolverRun> {
    let StrongConvexityTag::LeftRelative(mu) = tag else {
        return Err(Error::InvalidArgument("restarted FGM needs a left relative tag".into()));
    };
    tag.validate()?;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let (stages, per_stage) = fgm_restart_schedule(mu, r2, eps, l);
    let cfg = FgmConfig::new(l, per_stage.max(1))
        .with_budget(budget.clone())
        .non_adaptive();
    let mut out = SolverRun::at_start(x0);
    let mut x: Point = x0.to_vec();
    let mut rp = r2;
    for _ in 0..stages {
        let stage = fgm_solve(model, setup, set, &x, rp, &cfg)?;
        let offset = out.records.len();
        out.records.extend(stage.records.iter().cloned().map(|mut r| {
            r.k += offset;
            r
        }));
        out.iterates.extend(stage.iterates.into_iter().skip(1));
        out.certificate = stage.certificate;
        x = stage.x_last;
        rp /= 4.0;
        out.distance_bounds.push(rp);
        out.stages.push(StageRecord {
            iterations: stage.records.len(),
            x: x.clone(),
            bound: rp,
        });
    }
    out.x_bar = x.clone();
    out.x_last = x;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::zoo::{make_smooth_model, QuadraticProblem};

    #[test]
    fn alpha_is_largest_root() {
        for (l, a) in [(1.0, 0.0), (3.0, 2.5), (0.1, 10.0)] {
            let al = fgm_alpha(l, a);
            assert!((l * al * al - al - a).abs() < 1e-12);
            assert!(al > 0.0);
        }
        assert_eq!(fgm_alpha(2.0, 0.0), 0.5);
    }

    #[test]
    fn fixed_point_at_minimizer() {
        let m = make_smooth_model(Arc::new(QuadraticProblem::centered(&[0.2, 0.1])), 1.0);
        let run = fgm_solve(
            &m,
            &ProxSetup::euclidean(),
            &FeasibleSet::WholeSpace(2),
            &[0.2, 0.1],
            0.0,
            &FgmConfig::new(1.0, 6).non_adaptive(),
        )
        .unwrap();
        for x in &run.iterates {
            assert!((x[0] - 0.2).abs() < 1e-15 && (x[1] - 0.1).abs() < 1e-15, "{x:?}");
        }
    }

    #[test]
    fn restart_schedule_examples() {
        assert_eq!(fgm_restart_schedule(1.0, 1.0, 1.0, 36.0), (0, 36));
        assert_eq!(fgm_restart_schedule(1.0, 16.0, 1.0, 36.0), (2, 36));
        assert_eq!(fgm_restart_schedule(1.0, 17.0, 1.0, 36.0).0, 3);
    }

    #[test]
    fn zero_stages_returns_start() {
        let m = make_smooth_model(Arc::new(QuadraticProblem::centered(&[1.0])), 1.0);
        let run = fgm_restart_solve(
            &m,
            StrongConvexityTag::LeftRelative(1.0),
            &ProxSetup::euclidean(),
            &FeasibleSet::WholeSpace(1),
            &[0.0],
            0.5,
            1.0,
            1.0,
            &InexactnessBudget::exact(),
        )
        .unwrap();
        assert_eq!(run.x_last, vec![0.0]);
        assert!(run.records.is_empty());
    }

    #[test]
    fn shrunk_setup_is_rejected() {
        let m = make_smooth_model(Arc::new(QuadraticProblem::centered(&[1.0])), 1.0);
        let r = fgm_solve(
            &m,
            &ProxSetup::euclidean().scaled(0.5),
            &FeasibleSet::WholeSpace(1),
            &[0.0],
            1.0,
            &FgmConfig::new(1.0, 2),
        );
        assert!(matches!(r, Err(Error::NotOneStronglyConvex)));
    }

    #[test]
    fn linear_objective_on_simplex_reaches_vertex() {
        let f = crate::zoo::FnFunction::new(3, |x| 2.0 * x[0] + x[1] + 3.0 * x[2], |_| vec![2.0, 1.0, 3.0]);
        let m = make_smooth_model(Arc::new(f), 1.0);
        let mut cfg = FgmConfig::new(1.0, 1);
        cfg.r_q = Some(2f64.sqrt());
        let run = fw_solve(&m, &FeasibleSet::Simplex(3), &[1.0 / 3.0; 3], 1e-3, &cfg).unwrap();
        assert!((m.f_value(&run.x_last) - 1.0).abs() < 1e-12);
        assert_eq!(run.x_last, vec![0.0, 1.0, 0.0]);
        assert!((run.records[0].delta_tilde - 4.0 * run.records[0].l).abs() < 1e-12);
    }
}
