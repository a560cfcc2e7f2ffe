//! Generalized mirror prox for abstract VI models, its universal and
//! restarted variants, and the saddle-point wrapper.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gm::{clamp_l, passes, MAX_BACKTRACK};
use crate::linalg::{axpy, check_dim, dot, Point};
use crate::model::{ProxPoint, ViModel};
use crate::prox::{weighted_simplex_projection, SimpleTerm};
use crate::set::{FeasibleSet, Leaf};
use crate::setup::{ProxSetup, SetupKind};
use crate::trace::{StageRecord, StopReason, ViRecord, ViRun};
use crate::zoo::{make_composite_saddle_vi_model, SaddleFunction};

/// Inputs of [`mirror_prox_solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpParams {
    /// Target accuracy: the run stops once `S_N >= V_max/ε`.
    pub eps: f64,
    /// Constant δ of the exit test.
    pub delta: f64,
    /// Initial guess `L_0 > 0`.
    pub l0: f64,
    /// Iteration cap.
    pub max_iter: usize,
    /// δ̃ requested from both prox steps.
    pub delta_tilde: f64,
    /// `V_max >= max_{u in Q} V[z_0](u)`.
    pub v_max: f64,
}

impl MpParams {
    fn validate(&self) -> Result<()> {
        if !(self.v_max > 0.0) {
            return Err(Error::InvalidArgument("V_max must be positive".into()));
        }
        if !(self.eps > 0.0) || !(self.l0 > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidArgument("need eps > 0, L0 > 0, max_iter >= 1".into()));
        }
        if !(self.delta >= 0.0) || !(self.delta_tilde >= 0.0) {
            return Err(Error::InvalidArgument("budgets must be nonnegative".into()));
        }
        Ok(())
    }
}

/// δ̃-solution of `min ψ(x, y) + L V[z](x)` on the scale of that objective.
fn vi_prox(
    local: &dyn crate::model::LocalModel,
    z: &[f64],
    l: f64,
    setup: &ProxSetup,
    set: &FeasibleSet,
    delta_tilde: f64,
) -> Result<ProxPoint> {
    let mut p = local.prox_step(z, 1.0 / l, setup, set, delta_tilde / l)?;
    p.delta_tilde *= l;
    Ok(p)
}

/// Shared loop: starts at `z0`, stops once `Σ 1/L_{k+1} >= s_target`.
#[allow(clippy::too_many_arguments)]
fn run_mirror_prox(
    model: &dyn ViModel,
    setup: &ProxSetup,
    set: &FeasibleSet,
    z0: &[f64],
    s_target: f64,
    delta: f64,
    l0: f64,
    max_iter: usize,
    delta_tilde: f64,
    v_max: f64,
) -> Result<ViRun> {
    check_dim(z0, model.dim())?;
    let mut z = z0.to_vec();
    let mut l = l0;
    let mut s = 0.0;
    let mut dt_max = 0.0_f64;
    let mut weighted: Point = vec![0.0; z0.len()];
    let mut records = Vec::new();
    let mut stop = StopReason::MaxIter;
    for k in 0..max_iter {
        let lz = model.at(&z)?;
        let mut trial = clamp_l(l / 2.0, l0);
        let mut i = 0;
        let (w, z_next, dt) = loop {
            let pw = vi_prox(lz.as_ref(), &z, trial, setup, set, delta_tilde)?;
            let lw = model.at(&pw.x)?;
            let pz = vi_prox(lw.as_ref(), &z, trial, setup, set, delta_tilde)?;
            let lhs = lz.psi(&pz.x);
            let rhs = lw.psi(&pz.x)
                + lz.psi(&pw.x)
                + trial * (setup.bregman(&z, &pw.x)? + setup.bregman(&pw.x, &pz.x)?)
                + delta;
            if passes(lhs, rhs) {
                break (pw.x, pz.x, pw.delta_tilde.max(pz.delta_tilde));
            }
            i += 1;
            if i > MAX_BACKTRACK {
                return Err(Error::LineSearchDiverged { iteration: k, l: trial });
            }
            trial = clamp_l(2.0 * trial, l0);
        };
        l = trial;
        s += 1.0 / l;
        dt_max = dt_max.max(dt);
        axpy(1.0 / l, &w, &mut weighted);
        records.push(ViRecord {
            k,
            l,
            attempts: i + 1,
            w,
            z: z_next.clone(),
            delta_tilde: dt,
            s,
            cert: v_max / s + 2.0 * delta + 2.0 * dt_max,
        });
        z = z_next;
        if s >= s_target {
            stop = StopReason::Target;
            break;
        }
    }
    let n = records.len();
    let l_max = records.iter().map(|r| r.l).fold(0.0, f64::max);
    let (w_hat, certificate, a_priori_bound) = if n == 0 {
        (z0.to_vec(), f64::INFINITY, f64::INFINITY)
    } else {
        (
            weighted.iter().map(|v| v / s).collect(),
            v_max / s + 2.0 * delta + 2.0 * dt_max,
            2.0 * l_max * v_max / n as f64 + 2.0 * delta + 2.0 * dt_max,
        )
    };
    Ok(ViRun {
        records,
        z0: z0.to_vec(),
        w_hat,
        s_n: s,
        certificate,
        a_priori_bound,
        stop,
        iteration_bound: None,
        stages: Vec::new(),
    })
}

/// Generalized mirror prox from `z_0 = argmin_Q d`: per iteration
/// `w_k = argmin ψ(·, z_k) + L V[z_k]`, `z_{k+1} = argmin ψ(·, w_k) + L V[z_k]`,
/// with `L_{k+1}` found by backtracking from `L_k/2` until
/// `ψ(z_{k+1}, z_k) <= ψ(z_{k+1}, w_k) + ψ(w_k, z_k) + L(V[z_k](w_k) + V[w_k](z_{k+1})) + δ`.
/// Stops at `S_N >= V_max/ε` or `max_iter`.
pub fn mirror_prox_solve(
    model: &dyn ViModel,
    setup: &ProxSetup,
    set: &FeasibleSet,
    params: &MpParams,
) -> Result<ViRun> {
    params.validate()?;
    let z0 = setup.prox_center(set)?;
    run_mirror_prox(
        model,
        setup,
        set,
        &z0,
        params.v_max / params.eps,
        params.delta,
        params.l0,
        params.max_iter,
        params.delta_tilde,
        params.v_max,
    )
}

/// `⌈2 (2L_ν/ε)^{2/(1+ν)} V_max⌉`.
pub fn universal_mp_iteration_bound(nu: f64, l_nu: f64, eps: f64, v_max: f64) -> usize {
    (2.0 * (2.0 * l_nu / eps).powf(2.0 / (1.0 + nu)) * v_max).ceil() as usize
}

/// Mirror prox with `δ = ε/2` on a Hölder operator model; the run carries the
/// iteration bound `⌈2 (2L_ν/ε)^{2/(1+ν)} V_max⌉`.
#[allow(clippy::too_many_arguments)]
pub fn mirror_prox_universal_solve(
    model: &dyn ViModel,
    setup: &ProxSetup,
    set: &FeasibleSet,
    eps: f64,
    l0: f64,
    max_iter: usize,
    v_max: f64,
) -> Result<ViRun> {
    let params = MpParams {
        eps,
        delta: 0.5 * eps,
        l0,
        max_iter,
        delta_tilde: 0.0,
        v_max,
    };
    let mut run = mirror_prox_solve(model, setup, set, &params)?;
    run.iteration_bound = model
        .holder()
        .map(|(nu, l_nu)| universal_mp_iteration_bound(nu, l_nu, eps, v_max));
    Ok(run)
}

/// Stage count `⌈log₂(2R0²/ε)⌉` of [`mirror_prox_restart_solve`], zero when `ε >= 2R0²`.
pub fn mp_restart_stages(r0_sq: f64, eps: f64) -> usize {
    let ratio = 2.0 * r0_sq / eps;
    if ratio <= 1.0 {
        0
    } else {
        ratio.log2().ceil() as usize
    }
}

/// Restarted mirror prox for a strongly monotone model (Euclidean setup).
///
/// Stage `p` runs mirror prox with `d_p(x) = d((x − x_p)/R_p)` from `z_0 = x_p`,
/// exit-test δ = με/4 (so the stage gap tolerance is με/2) and stop rule
/// `Σ 1/L >= Ω/μ` in the original scale; then
/// `R²_{p+1} = R0² 2^{−(p+1)} + (1 − 2^{−(p+1)}) ε/2`. The run reports the
/// iteration bound `⌈(2LΩ/μ) log₂(2R0²/ε)⌉` with the model's declared `L`.
#[allow(clippy::too_many_arguments)]
pub fn mirror_prox_restart_solve(
    model: &dyn ViModel,
    setup: &ProxSetup,
    set: &FeasibleSet,
    x0: &[f64],
    r0_sq: f64,
    eps: f64,
    l0: f64,
    max_iter_per_stage: usize,
) -> Result<ViRun> {
    let mu = model
        .mu()
        .ok_or_else(|| Error::InvalidArgument("restarted mirror prox needs mu".into()))?;
    if setup.kind != SetupKind::Euclidean {
        return Err(Error::UnsupportedCombination(
            "restarted mirror prox rescales a Euclidean setup".into(),
        ));
    }
    if !(eps > 0.0) || !(r0_sq > 0.0) || !(l0 > 0.0) {
        return Err(Error::InvalidArgument("need eps, R0^2, L0 > 0".into()));
    }
    check_dim(x0, model.dim())?;
    let omega = setup.omega(set)?;
    let stages = mp_restart_stages(r0_sq, eps);
    let mut x = x0.to_vec();
    let mut r2 = r0_sq;
    let mut l = l0;
    let mut records = Vec::new();
    let mut stage_records = Vec::new();
    let mut s_total = 0.0;
    for p in 0..stages {
        let stage_setup = setup.clone().scaled(1.0 / r2);
        let v_max = 0.5 * omega;
        let run = run_mirror_prox(
            model,
            &stage_setup,
            set,
            &x,
            omega / (mu * r2),
            0.25 * mu * eps,
            l * r2,
            max_iter_per_stage,
            0.0,
            v_max,
        )?;
        if let Some(last) = run.records.last() {
            l = last.l / r2;
        }
        s_total += run.s_n * r2;
        let offset = records.len();
        records.extend(run.records.into_iter().map(|mut r| {
            r.k += offset;
            r
        }));
        x = run.w_hat;
        let half = (-((p + 1) as f64)).exp2();
        r2 = r0_sq * half + (1.0 - half) * 0.5 * eps;
        stage_records.push(StageRecord {
            iterations: records.len() - offset,
            x: x.clone(),
            bound: r2,
        });
    }
    let bound = if stages == 0 {
        0
    } else {
        (2.0 * model.declared_l() * omega / mu * (2.0 * r0_sq / eps).log2()).ceil() as usize
    };
    Ok(ViRun {
        records,
        z0: x0.to_vec(),
        w_hat: x,
        s_n: s_total,
        certificate: r2,
        a_priori_bound: r2,
        stop: StopReason::Target,
        iteration_bound: Some(bound),
        stages: stage_records,
    })
}

/// A convex-concave saddle problem `min_{u in Q₁} max_{v in Q₂} f(u,v) + h(u) − φ(v)`.
#[derive(Clone)]
pub struct SaddleSpec {
    /// Smooth part `f̃`.
    pub f: Arc<dyn SaddleFunction>,
    /// Convex composite term of the minimizing player.
    pub h: SimpleTerm,
    /// Convex composite term of the maximizing player.
    pub phi: SimpleTerm,
    /// Feasible set of `u`.
    pub q1: FeasibleSet,
    /// Feasible set of `v`.
    pub q2: FeasibleSet,
    /// Declared `L` of the VI model.
    pub l: f64,
}

/// Solver settings of [`saddle_solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleConfig {
    /// Initial guess `L_0`.
    pub l0: f64,
    /// Iteration cap.
    pub max_iter: usize,
    /// δ̃ requested from the prox steps.
    pub delta_tilde: f64,
    /// `V_max`; defaults to `max_u V[z_0](u)` over the product set.
    pub v_max: Option<f64>,
    /// The gap series is evaluated every `log_every` iterations (and at the end).
    pub log_every: usize,
}

impl SaddleConfig {
    /// Exact prox steps, gap logged every iteration.
    pub fn new(l0: f64, max_iter: usize) -> Self {
        Self {
            l0,
            max_iter,
            delta_tilde: 0.0,
            v_max: None,
            log_every: 1,
        }
    }
}

/// One logged point of the duality gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapSample {
    /// Iterations `N`.
    pub n: usize,
    /// Duality gap of `(û_N, v̂_N)`.
    pub gap: f64,
    /// `2 L V_max / N + 2δ̃ + δ` with `L = max_k L_{k+1}`.
    pub bound: f64,
}

/// Output of [`saddle_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleResult {
    /// `û_N`.
    pub u_hat: Point,
    /// `v̂_N`.
    pub v_hat: Point,
    /// Duality gap `max_v f(û, v) − min_u f(u, v̂)` of the final pair.
    pub gap: f64,
    /// The mirror-prox trace.
    pub run: ViRun,
    /// Gap series at the logged iteration counts.
    pub gap_series: Vec<GapSample>,
}

/// `min_{x in Q} <c, x> + h(x)` for separable `h` over a box or simplex.
fn best_response(c: &[f64], h: &SimpleTerm, set: &FeasibleSet) -> Result<f64> {
    let unavailable = || {
        Error::GapOracleUnavailable("best response needs a box or simplex set".into())
    };
    let mut total = 0.0;
    for (off, leaf) in set.leaves() {
        let m = leaf.dim();
        let cs = &c[off..off + m];
        let l1 = &h.l1[off..off + m];
        let q = &h.quad[off..off + m];
        match leaf {
            Leaf::Box(lo, hi) => {
                for i in 0..m {
                    let phi = |x: f64| cs[i] * x + l1[i] * x.abs() + 0.5 * q[i] * x * x;
                    let mut cands = vec![lo[i], hi[i]];
                    if lo[i] < 0.0 && hi[i] > 0.0 {
                        cands.push(0.0);
                    }
                    if q[i] > 0.0 {
                        for s in [-1.0, 1.0] {
                            cands.push((-(cs[i] + s * l1[i]) / q[i]).clamp(lo[i], hi[i]));
                        }
                    }
                    total += cands.into_iter().map(phi).fold(f64::INFINITY, f64::min);
                }
            }
            Leaf::Simplex(_) => {
                let lin: Vec<f64> = cs.iter().zip(l1).map(|(a, b)| a + b).collect();
                if q.iter().all(|v| *v == 0.0) {
                    total += lin.iter().copied().fold(f64::INFINITY, f64::min);
                } else if q.iter().all(|v| *v > 0.0) {
                    let w: Vec<f64> = lin.iter().map(|v| -v).collect();
                    let x = weighted_simplex_projection(&w, q);
                    total += dot(&lin, &x)
                        + 0.5 * x.iter().zip(q).map(|(xi, qi)| qi * xi * xi).sum::<f64>();
                } else {
                    return Err(unavailable());
                }
            }
            _ => return Err(unavailable()),
        }
    }
    Ok(total)
}

/// Exact duality gap of `(u, v)` for bilinear `f̃` with separable `h`, `φ`
/// over boxes and simplices.
pub fn saddle_gap(spec: &SaddleSpec, u: &[f64], v: &[f64]) -> Result<f64> {
    let a = spec.f.bilinear().ok_or_else(|| {
        Error::GapOracleUnavailable("exact gap needs a bilinear saddle function".into())
    })?;
    let best_v = -best_response(&a.tr_mul_vec(u).iter().map(|t| -t).collect::<Vec<_>>(), &spec.phi, &spec.q2)?;
    let best_u = best_response(&a.mul_vec(v), &spec.h, &spec.q1)?;
    Ok(best_v + spec.h.value(u) - best_u - spec.phi.value(v))
}

/// Solves the saddle problem with mirror prox on its composite VI model and
/// reports the duality gap of `(û_N, v̂_N) = ŵ_N` by exact best responses.
pub fn saddle_solve(
    spec: &SaddleSpec,
    setup: &ProxSetup,
    eps: f64,
    cfg: &SaddleConfig,
) -> Result<SaddleResult> {
    let (du, dv) = spec.f.dims();
    check_dim(&spec.h.l1, du)?;
    check_dim(&spec.phi.l1, dv)?;
    if spec.q1.dim() != du || spec.q2.dim() != dv {
        return Err(Error::DimensionMismatch {
            expected: du + dv,
            got: spec.q1.dim() + spec.q2.dim(),
        });
    }
    if spec.f.bilinear().is_none() {
        return Err(Error::GapOracleUnavailable(
            "exact gap needs a bilinear saddle function".into(),
        ));
    }
    let model = make_composite_saddle_vi_model(spec.f.clone(), spec.h.clone(), spec.phi.clone(), spec.l)?;
    let set = FeasibleSet::Product(vec![spec.q1.clone(), spec.q2.clone()]);
    let z0 = setup.prox_center(&set)?;
    let v_max = match cfg.v_max {
        Some(v) => v,
        None => setup.max_divergence(&set, &z0)?,
    };
    let params = MpParams {
        eps,
        delta: 0.0,
        l0: cfg.l0,
        max_iter: cfg.max_iter,
        delta_tilde: cfg.delta_tilde,
        v_max,
    };
    let run = mirror_prox_solve(&model, setup, &set, &params)?;
    let every = cfg.log_every.max(1);
    let mut gap_series = Vec::new();
    let mut weighted: Point = vec![0.0; du + dv];
    let (mut s, mut l_max, mut dt_max) = (0.0, 0.0_f64, 0.0_f64);
    for (i, r) in run.records.iter().enumerate() {
        axpy(1.0 / r.l, &r.w, &mut weighted);
        s += 1.0 / r.l;
        l_max = l_max.max(r.l);
        dt_max = dt_max.max(r.delta_tilde);
        let n = i + 1;
        if n % every == 0 || n == run.records.len() {
            let w: Point = weighted.iter().map(|t| t / s).collect();
            gap_series.push(GapSample {
                n,
                gap: saddle_gap(spec, &w[..du], &w[du..])?,
                bound: 2.0 * l_max * v_max / n as f64 + 2.0 * dt_max,
            });
        }
    }
    let (u_hat, v_hat) = (run.w_hat[..du].to_vec(), run.w_hat[du..].to_vec());
    let gap = saddle_gap(spec, &u_hat, &v_hat)?;
    Ok(SaddleResult {
        u_hat,
        v_hat,
        gap,
        run,
        gap_series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::zoo::{make_vi_operator_model, Bilinear, FnOperator, OperatorConstants};

    fn pennies() -> SaddleSpec {
        SaddleSpec {
            f: Arc::new(Bilinear {
                a: Matrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap(),
            }),
            h: SimpleTerm::zero(2),
            phi: SimpleTerm::zero(2),
            q1: FeasibleSet::Simplex(2),
            q2: FeasibleSet::Simplex(2),
            l: 1.0,
        }
    }

    #[test]
    fn zero_operator_is_a_fixed_point() {
        let m = make_vi_operator_model(
            Arc::new(FnOperator::new(2, |_| vec![0.0, 0.0])),
            OperatorConstants::Lipschitz(1.0),
            None,
        )
        .unwrap();
        let set = FeasibleSet::uniform_box(2, -1.0, 1.0).unwrap();
        let params = MpParams {
            eps: 0.1,
            delta: 0.0,
            l0: 1.0,
            max_iter: 5,
            delta_tilde: 0.0,
            v_max: 4.0,
        };
        let run = mirror_prox_solve(&m, &ProxSetup::euclidean(), &set, &params).unwrap();
        assert!(run.records.iter().all(|r| r.w == vec![0.0, 0.0] && r.z == vec![0.0, 0.0]));
        assert_eq!(run.w_hat, vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_nonpositive_v_max() {
        let m = make_vi_operator_model(
            Arc::new(FnOperator::new(1, |_| vec![0.0])),
            OperatorConstants::Lipschitz(1.0),
            None,
        )
        .unwrap();
        let params = MpParams {
            eps: 0.1,
            delta: 0.0,
            l0: 1.0,
            max_iter: 5,
            delta_tilde: 0.0,
            v_max: 0.0,
        };
        let r = mirror_prox_solve(&m, &ProxSetup::euclidean(), &FeasibleSet::Simplex(1), &params);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn pennies_gap_vanishes_at_uniform_strategies() {
        let spec = pennies();
        assert!(saddle_gap(&spec, &[0.5, 0.5], &[0.5, 0.5]).unwrap().abs() < 1e-15);
        assert_eq!(saddle_gap(&spec, &[1.0, 0.0], &[0.5, 0.5]).unwrap(), 1.0);
    }

    #[test]
    fn singleton_player_gap_is_linear_residual() {
        let spec = SaddleSpec {
            f: Arc::new(Bilinear {
                a: Matrix::from_rows(&[vec![3.0], vec![1.0], vec![2.0]]).unwrap(),
            }),
            h: SimpleTerm::zero(3),
            phi: SimpleTerm::zero(1),
            q1: FeasibleSet::Simplex(3),
            q2: FeasibleSet::Simplex(1),
            l: 3.0,
        };
        let u = [0.2, 0.5, 0.3];
        let residual = 3.0 * 0.2 + 0.5 + 2.0 * 0.3 - 1.0;
        assert!((saddle_gap(&spec, &u, &[1.0]).unwrap() - residual).abs() < 1e-15);
    }

    #[test]
    fn pennies_converges_to_uniform() {
        let res = saddle_solve(&pennies(), &ProxSetup::entropy(), 1e-3, &SaddleConfig::new(1.0, 5000)).unwrap();
        assert!(res.gap <= 1e-3);
        for v in res.u_hat.iter().chain(&res.v_hat) {
            assert!((v - 0.5).abs() < 1e-2);
        }
        assert!(res.gap_series.iter().all(|g| g.gap <= g.bound + 1e-9));
    }

    #[test]
    fn restart_stage_counts() {
        assert_eq!(mp_restart_stages(1.0, 2.0), 0);
        assert_eq!(mp_restart_stages(1.0, 1.0), 1);
        assert_eq!(mp_restart_stages(1.0, 0.25), 3);
    }

    #[test]
    fn universal_bound_formula() {
        assert_eq!(universal_mp_iteration_bound(1.0, 1.0, 0.5, 1.0), 8);
        assert_eq!(universal_mp_iteration_bound(0.0, 1.0, 1.0, 0.5), 4);
    }
}
