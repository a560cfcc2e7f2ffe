//! The desk-scale acceptance suite: eleven criteria, each with a wall-clock
//! limit, reported one line per criterion.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use imopt::linalg::{dist2_sq, dot, norm2_sq, sub};
use imopt::zoo::{
    holder_l, make_composite_model, make_composite_saddle_vi_model, make_inexact_linearization_model,
    make_proximal_model, make_smooth_model, make_superposition_model, make_universal_model,
    make_vi_operator_model, Bilinear, CompositeProblem, FnFunction, HolderProblem,
    HolderSignOperator, InnerProblem, JointFunction, L1Norm, LinearFunction, MatrixGameOperator,
    MoreauModel, OperatorConstants, SaddleMaxProblem, SharedFunction, SimpleH, SmoothFunction, SuperpositionProblem,
};
use imopt::{
    exact_ot_oracle, fgm_alpha, fgm_restart_schedule, fgm_restart_solve, fgm_solve,
    fgm_universal_solve, fw_solve, gm_restart_solve, gm_solve, mirror_prox_restart_solve,
    mirror_prox_universal_solve, proximal_sinkhorn, saddle_solve, validate_min_model,
    validate_vi_model, FeasibleSet, FgmConfig, GmConfig, InexactnessBudget, MinModel,
    Point, ProxSetup, ProxSinkhornConfig, Result, SaddleConfig, SaddleSpec, SimpleTerm,
    SolverRun, StrongConvexityTag, ValidationReport,
};
use nalgebra::{DMatrix, DVector};

use crate::compare::compare_sinkhorn;
use crate::problems::{
    certificate_suite, holder_l1, holder_quadratic, matching_pennies, planted_quadratic,
    random_game, random_ot, random_spd, rng, strongly_monotone_affine, with_injection,
    PlantedProblem,
};

/// Slack added to every guarantee inequality.
const SLACK: f64 = 1e-9;
/// Injected `(δ, δ̃)` pairs of the certificate criteria.
const INJECTIONS: [(f64, f64); 4] = [(0.0, 0.0), (1e-3, 0.0), (0.0, 1e-3), (1e-3, 1e-3)];

/// Outcome of one criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    /// Criterion number, 1 to 11.
    pub id: usize,
    /// Short title.
    pub name: &'static str,
    /// Whether every assertion and the runtime limit held.
    pub passed: bool,
    /// Measured quantities.
    pub detail: String,
    /// Wall-clock seconds.
    pub seconds: f64,
    /// Wall-clock limit in seconds.
    pub limit: f64,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{:>2}] {} ({:.2} s, limit {} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.limit,
            self.detail
        )
    }
}

struct Outcome {
    passed: bool,
    detail: String,
}

type CriterionFn = fn() -> Result<Outcome>;

/// `(id, name, limit in seconds, check)` for every criterion.
const CRITERIA: [(usize, &str, f64, CriterionFn); 11] = [
    (1, "GM certificate", 5.0, gm_certificate_criterion),
    (2, "FGM certificate", 5.0, fgm_certificate_criterion),
    (3, "GM/FGM rate separation", 10.0, rate_separation_criterion),
    (4, "universal FGM scaling", 30.0, universal_fgm_criterion),
    (5, "mirror prox on matrix games", 10.0, mirror_prox_games_criterion),
    (6, "universal mirror prox scaling", 30.0, universal_mp_criterion),
    (7, "restart schemes", 10.0, restarts_criterion),
    (8, "model validation", 10.0, model_validation_criterion),
    (9, "proximal Sinkhorn", 60.0, proximal_sinkhorn_criterion),
    (10, "Catalyst-style envelope acceleration", 60.0, catalyst_criterion),
    (11, "Frank-Wolfe trajectory", 5.0, frank_wolfe_criterion),
];

/// Number of criteria.
pub fn criterion_count() -> usize {
    CRITERIA.len()
}

/// Runs criterion `id` (1-based).
///
/// # Panics
/// If `id` is not in `1..=11`.
pub fn run_criterion(id: usize) -> CriterionReport {
    let (id, name, limit, check) = CRITERIA[id - 1];
    let start = Instant::now();
    let outcome = check().unwrap_or_else(|e| Outcome {
        passed: false,
        detail: format!("error: {e}"),
    });
    let seconds = start.elapsed().as_secs_f64();
    let mut detail = outcome.detail;
    let in_time = seconds < limit;
    if !in_time {
        detail.push_str("; over the time limit");
    }
    CriterionReport {
        id,
        name,
        passed: outcome.passed && in_time,
        detail,
        seconds,
        limit,
    }
}

/// Runs every criterion in order.
pub fn run_all() -> Vec<CriterionReport> {
    (1..=CRITERIA.len()).map(run_criterion).collect()
}

/// Collects failed checks, keeping the first few messages.
#[derive(Default)]
struct Failures {
    count: usize,
    first: Vec<String>,
}

impl Failures {
    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.count += 1;
            if self.first.len() < 3 {
                self.first.push(msg());
            }
        }
    }

    fn outcome(self, summary: String) -> Outcome {
        if self.count == 0 {
            Outcome {
                passed: true,
                detail: summary,
            }
        } else {
            Outcome {
                passed: false,
                detail: format!("{summary}; {} violations, e.g. {}", self.count, self.first.join(" | ")),
            }
        }
    }
}

fn l0_for(i: usize, l: f64) -> f64 {
    if i % 2 == 0 {
        0.1 * l
    } else {
        10.0 * l
    }
}

fn gm_certificate_criterion() -> Result<Outcome> {
    let setup = ProxSetup::euclidean();
    let mut fails = Failures::default();
    let (mut runs, mut worst) = (0, f64::NEG_INFINITY);
    for (i, p) in certificate_suite().iter().enumerate() {
        for (j, &(delta, dt)) in INJECTIONS.iter().enumerate() {
            let l0 = l0_for(i + j, p.l);
            let cfg = GmConfig::new(l0, 100).with_budget(InexactnessBudget::new(delta, dt)?);
            let run = with_injection(p.model.as_ref(), delta, dt, (i * 4 + j) as u64, |m| {
                gm_solve(m, &setup, &p.set, &p.x0, p.r2(), &cfg)
            })?;
            runs += 1;
            let mut attempts = 0;
            let (mut sum_ad, mut sum_adt) = (0.0, 0.0);
            for r in &run.records {
                let n = (r.k + 1) as f64;
                attempts += r.attempts;
                sum_ad += r.alpha * r.delta;
                sum_adt += r.alpha * r.delta_tilde;
                let bound = p.r2() / r.a + 2.0 * sum_ad / r.a + sum_adt / r.a;
                let gap = r.f - p.f_star;
                worst = worst.max(gap - bound);
                fails.check(gap <= bound + SLACK, || {
                    format!("{} δ={delta} δ̃={dt} N={n}: gap {gap:e} > {bound:e}", p.name)
                });
                fails.check(r.cert <= bound * (1.0 + 1e-9) + 1e-15, || {
                    format!("{} N={n}: recorded certificate {:e} differs from {bound:e}", p.name, r.cert)
                });
                // The growth and attempt bounds presuppose L0 <= L.
                let bounded = l0 <= p.l;
                fails.check(!bounded || r.a >= n / (2.0 * p.l) * (1.0 - 1e-12), || {
                    format!("{} N={n}: A_N {:e} < N/(2L)", p.name, r.a)
                });
                let cap = 2.0 * n + (p.l / l0).log2() + 1.0;
                fails.check(!bounded || attempts as f64 <= cap + 1e-9, || {
                    format!("{} N={n}: {attempts} attempts > {cap:.2}", p.name)
                });
            }
        }
    }
    Ok(fails.outcome(format!(
        "{runs} runs x 100 iterations, max (gap - bound) = {worst:.3e}"
    )))
}

fn fgm_certificate_criterion() -> Result<Outcome> {
    let setup = ProxSetup::euclidean();
    let mut fails = Failures::default();
    let (mut runs, mut worst) = (0, f64::NEG_INFINITY);
    for (i, p) in certificate_suite().iter().enumerate() {
        for (j, &(delta, dt)) in INJECTIONS.iter().enumerate() {
            let l0 = l0_for(i + j, p.l);
            let cfg = FgmConfig::new(l0, 100).with_budget(InexactnessBudget::new(delta, dt)?);
            let run = with_injection(p.model.as_ref(), delta, dt, (i * 4 + j) as u64, |m| {
                fgm_solve(m, &setup, &p.set, &p.x0, p.r2(), &cfg)
            })?;
            runs += 1;
            let mut attempts = 0;
            let (mut sum_da, mut sum_dtl) = (0.0, 0.0);
            for r in &run.records {
                let n = (r.k + 1) as f64;
                attempts += r.attempts;
                sum_da += r.delta * r.a;
                sum_dtl += r.delta_tilde / r.l;
                let errors = 2.0 * sum_da / r.a + sum_dtl / r.a;
                let bound = 8.0 * p.l * p.r2() / ((n + 1.0) * (n + 1.0)) + errors;
                let gap = r.f - p.f_star;
                worst = worst.max(gap - bound);
                fails.check(gap <= bound + SLACK, || {
                    format!("{} δ={delta} δ̃={dt} N={n}: gap {gap:e} > {bound:e}", p.name)
                });
                fails.check(gap <= r.cert + SLACK, || {
                    format!("{} N={n}: gap {gap:e} > certificate {:e}", p.name, r.cert)
                });
                let bounded = l0 <= p.l;
                fails.check(!bounded || r.a >= (n + 1.0) * (n + 1.0) / (8.0 * p.l) * (1.0 - 1e-12), || {
                    format!("{} N={n}: A_N {:e} < (N+1)²/(8L)", p.name, r.a)
                });
                let cap = 4.0 * n + (p.l / l0).log2() + 1.0;
                fails.check(!bounded || attempts as f64 <= cap + 1e-9, || {
                    format!("{} N={n}: {attempts} attempts > {cap:.2}", p.name)
                });
            }
        }
    }
    Ok(fails.outcome(format!(
        "{runs} runs x 100 iterations, max (gap - bound) = {worst:.3e}"
    )))
}

/// First `N` at which `f(x_N) − f* <= target`, continuing a GM run in chunks.
fn gm_iterations_to(p: &PlantedProblem, target: f64, cap: usize) -> Result<Option<usize>> {
    const CHUNK: usize = 2000;
    let setup = ProxSetup::euclidean();
    let (mut x, mut l, mut done) = (p.x0.clone(), p.l, 0);
    while done < cap {
        let run = gm_solve(p.model.as_ref(), &setup, &p.set, &x, p.r2(), &GmConfig::new(l, CHUNK))?;
        if let Some(i) = run.iterates.iter().skip(1).position(|z| p.model.f_value(z) - p.f_star <= target) {
            return Ok(Some(done + i + 1));
        }
        done += CHUNK;
        x = run.x_last.clone();
        l = run.records.last().map_or(l, |r| r.l);
    }
    Ok(None)
}

fn rate_separation_criterion() -> Result<Outcome> {
    let p = planted_quadratic(50, 1e-4, 1.0, 3);
    let target = 1e-6;
    let fgm = fgm_solve(
        p.model.as_ref(),
        &ProxSetup::euclidean(),
        &p.set,
        &p.x0,
        p.r2(),
        &FgmConfig::new(p.l, 200_000),
    )?;
    let n_fgm = fgm.records.iter().position(|r| r.f - p.f_star <= target).map(|i| i + 1);
    let n_gm = gm_iterations_to(&p, target, 2_000_000)?;
    let (Some(n_fgm), Some(n_gm)) = (n_fgm, n_gm) else {
        return Ok(Outcome {
            passed: false,
            detail: format!("target not reached: FGM {n_fgm:?}, GM {n_gm:?}"),
        });
    };
    let ratio = n_gm as f64 / n_fgm as f64;
    Ok(Outcome {
        passed: 5 * n_fgm <= n_gm,
        detail: format!("gap 1e-6 after FGM {n_fgm} vs GM {n_gm} iterations (ratio {ratio:.1})"),
    })
}

/// `max/min` of `values`.
fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

fn universal_fgm_criterion() -> Result<Outcome> {
    const EPS: [f64; 3] = [1e-1, 1e-2, 1e-3];
    let setup = ProxSetup::euclidean();
    let mut fails = Failures::default();
    let mut parts = Vec::new();
    let cases = [(0.0, holder_l1(2, 0.3, 7)), (1.0, holder_quadratic(10, 8))];
    for (nu, (p, x_star)) in &cases {
        let n = x_star.len();
        let x0 = vec![0.0; n];
        let r2 = 0.5 * dist2_sq(&x0, x_star);
        let f_star = p.f.value(x_star);
        let exponent = 2.0 / (1.0 + 3.0 * nu);
        let mut scaled = Vec::new();
        let mut counts = Vec::new();
        for eps in EPS {
            let cfg = FgmConfig::new(1.0, 5_000_000);
            let run = fgm_universal_solve(p, &setup, &FeasibleSet::WholeSpace(n), &x0, r2, eps, &cfg)?;
            let iters = run.iterations();
            let gap = p.f.value(&run.x_last) - f_star;
            fails.check(gap <= eps + SLACK, || format!("ν={nu} ε={eps}: gap {gap:e}"));
            fails.check(r2 / run.a_n() <= 0.5 * eps * (1.0 + 1e-12), || {
                format!("ν={nu} ε={eps}: stopped by the cap")
            });
            counts.push(iters);
            scaled.push(iters as f64 * eps.powf(exponent));
        }
        let s = spread(&scaled);
        fails.check(s <= 4.0, || format!("ν={nu}: N·ε^{exponent:.2} spread {s:.2} > 4"));
        parts.push(format!("ν={nu}: N={counts:?}, spread of N·ε^{exponent:.2} = {s:.2}"));
    }
    Ok(fails.outcome(parts.join("; ")))
}

fn mirror_prox_games_criterion() -> Result<Outcome> {
    let setup = ProxSetup::entropy();
    let mut fails = Failures::default();
    let mut parts = Vec::new();
    for (name, a) in [("matching pennies", matching_pennies()), ("random 5x5", random_game(5, 5, 11))] {
        let (m, n) = (a.rows(), a.cols());
        let l = a.max_abs();
        let spec = SaddleSpec {
            f: Arc::new(Bilinear { a }),
            h: SimpleTerm::zero(m),
            phi: SimpleTerm::zero(n),
            q1: FeasibleSet::Simplex(m),
            q2: FeasibleSet::Simplex(n),
            l,
        };
        let v_max = (m as f64).ln() + (n as f64).ln();
        let cap = (2.0 * l * v_max / 1e-3).ceil() as usize;
        let res = saddle_solve(&spec, &setup, 1e-3, &SaddleConfig::new(l, cap))?;
        for s in &res.gap_series {
            let bound = 2.0 * l * v_max / s.n as f64;
            fails.check(s.gap <= bound + SLACK && s.gap <= s.bound + SLACK, || {
                format!("{name} N={}: gap {:e} > {bound:e}", s.n, s.gap)
            });
        }
        let first = res.gap_series.iter().find(|s| s.gap <= 1e-3).map(|s| s.n);
        fails.check(first.is_some(), || format!("{name}: gap 1e-3 not reached in {cap} iterations"));
        parts.push(format!(
            "{name}: gap <= 1e-3 at N={} (cap {cap}), final gap {:.2e} after {}",
            first.map_or("-".into(), |n| n.to_string()),
            res.gap,
            res.run.iterations()
        ));
    }
    Ok(fails.outcome(parts.join("; ")))
}

fn universal_mp_criterion() -> Result<Outcome> {
    const EPS: [f64; 3] = [1e-1, 1e-2, 1e-3];
    let setup = ProxSetup::euclidean();
    let mut fails = Failures::default();
    let mut parts = Vec::new();
    let n = 2;
    let set = FeasibleSet::uniform_box(n, -1.0, 1.0)?;
    let z0 = setup.prox_center(&set)?;
    let v_max = setup.max_divergence(&set, &z0)?;
    for nu in [0.0, 1.0] {
        let op = HolderSignOperator {
            a: vec![0.3, -0.2],
            nu,
        };
        let l_nu = op.l_nu();
        let mut counts = Vec::new();
        let mut scaled = Vec::new();
        for eps in EPS {
            let constants = OperatorConstants::Holder {
                nu,
                l_nu,
                delta: 0.5 * eps,
            };
            let model = make_vi_operator_model(Arc::new(op.clone()), constants, None)?;
            let run = mirror_prox_universal_solve(&model, &setup, &set, eps, l_nu, 50_000_000, v_max)?;
            let iters = run.iterations();
            let bound = run.iteration_bound.unwrap_or(usize::MAX);
            fails.check(iters <= bound, || format!("ν={nu} ε={eps}: {iters} > bound {bound}"));
            fails.check(run.s_n * eps >= v_max * (1.0 - 1e-12), || {
                format!("ν={nu} ε={eps}: stopped by the cap")
            });
            counts.push(iters);
            scaled.push(iters as f64 * eps.powf(2.0 / (1.0 + nu)));
        }
        let s = spread(&scaled);
        fails.check(s <= 4.0, || format!("ν={nu}: spread {s:.2} > 4"));
        parts.push(format!(
            "ν={nu}: N={counts:?}, spread of N·ε^{} = {s:.2}",
            2.0 / (1.0 + nu)
        ));
    }
    Ok(fails.outcome(parts.join("; ")))
}

fn restarts_criterion() -> Result<Outcome> {
    let setup = ProxSetup::euclidean();
    let mut fails = Failures::default();
    let mut parts = Vec::new();

    // Restarted GM, with and without injected error.
    let p = planted_quadratic(10, 0.1, 1.0, 21);
    let eps = 1e-6;
    for (delta, dt) in [(0.0, 0.0), (1e-8, 0.0)] {
        let budget = InexactnessBudget::new(delta, dt)?;
        let mu = p.mu;
        let run = with_injection(p.model.as_ref(), delta, dt, 5, |m| {
            gm_restart_solve(m, StrongConvexityTag::LeftRelative(mu), &setup, &p.set, &p.x0, p.r2(), eps, p.l, &budget)
        })?;
        let expected = (p.r2() / eps).log2().ceil() as usize * (4.0 * p.l / mu).ceil() as usize;
        let v = 0.5 * dist2_sq(&run.x_last, &p.x_star);
        let floor = eps + 2.0 * dt / mu + 4.0 * delta / mu;
        fails.check(run.iterations() == expected, || {
            format!("GM restart: {} iterations, expected {expected}", run.iterations())
        });
        fails.check(v <= floor + SLACK, || format!("GM restart: V = {v:e} > {floor:e}"));
        parts.push(format!("GM δ={delta}: {} iterations, V={v:.1e}", run.iterations()));
    }

    // Restarted FGM.
    let (stages, per_stage) = fgm_restart_schedule(p.mu, p.r2(), eps, p.l);
    let run = fgm_restart_solve(
        p.model.as_ref(),
        StrongConvexityTag::LeftRelative(p.mu),
        &setup,
        &p.set,
        &p.x0,
        p.r2(),
        eps,
        p.l,
        &InexactnessBudget::exact(),
    )?;
    let gap = p.model.f_value(&run.x_last) - p.f_star;
    fails.check(run.iterations() <= stages * per_stage, || {
        format!("FGM restart: {} iterations > {}", run.iterations(), stages * per_stage)
    });
    fails.check(gap <= eps, || format!("FGM restart: gap {gap:e} > {eps:e}"));
    parts.push(format!("FGM: {} iterations ({stages}x{per_stage}), gap {gap:.1e}", run.iterations()));

    // Restarted mirror prox on an affine strongly monotone VI.
    let (op, a, mu, l) = strongly_monotone_affine(5, 1.0, 4);
    let model = make_vi_operator_model(Arc::new(op), OperatorConstants::Lipschitz(l), None)?.with_mu(mu)?;
    let ball = FeasibleSet::ball(vec![0.0; 5], 2.0)?;
    let x0 = vec![0.0; 5];
    let r0_sq = 4.0;
    let eps = 1e-6;
    let run = mirror_prox_restart_solve(&model, &setup, &ball, &x0, r0_sq, eps, l, 100_000)?;
    let bound = run.iteration_bound.unwrap_or(0);
    let d2 = dist2_sq(&run.w_hat, &a);
    fails.check(run.iterations() <= bound, || {
        format!("MP restart: {} iterations > {bound}", run.iterations())
    });
    fails.check(d2 <= eps, || format!("MP restart: ‖x_p − x*‖² = {d2:e} > {eps:e}"));
    parts.push(format!(
        "MP: {} iterations (bound {bound}) over {} stages, ‖x−x*‖²={d2:.1e}",
        run.iterations(),
        run.stages.len()
    ));
    Ok(fails.outcome(parts.join("; ")))
}

/// `Σ |x_i − a_i|^{1+ν}/(1+ν)`, whose gradient is [`HolderSignOperator`].
fn holder_power(a: Point, nu: f64) -> HolderProblem {
    let n = a.len();
    let op = HolderSignOperator { a: a.clone(), nu };
    let l_nu = op.l_nu();
    let f = FnFunction::new(
        n,
        move |x| {
            x.iter()
                .zip(&a)
                .map(|(xi, ai)| (xi - ai).abs().powf(1.0 + nu) / (1.0 + nu))
                .sum()
        },
        move |x| {
            use imopt::zoo::Operator;
            op.apply(x)
        },
    );
    HolderProblem::new(Arc::new(f), nu, l_nu).expect("valid constants")
}

/// `F(z, x) = ½‖z − x‖² + ½‖x‖²`, jointly convex with `L = 2`.
struct JointQuadratic(usize);

impl JointFunction for JointQuadratic {
    fn z_dim(&self) -> usize {
        self.0
    }
    fn x_dim(&self) -> usize {
        self.0
    }
    fn value(&self, z: &[f64], x: &[f64]) -> f64 {
        0.5 * dist2_sq(z, x) + 0.5 * norm2_sq(x)
    }
    fn grad_z(&self, z: &[f64], x: &[f64]) -> Point {
        sub(z, x)
    }
    fn grad_x(&self, z: &[f64], x: &[f64]) -> Point {
        x.iter().zip(z).map(|(xi, zi)| 2.0 * xi - zi).collect()
    }
}

fn model_validation_criterion() -> Result<Outcome> {
    const SAMPLES: usize = 1000;
    let eu = ProxSetup::euclidean();
    let ent = ProxSetup::entropy();
    let n = 4;
    let cube = FeasibleSet::uniform_box(n, -1.0, 1.0)?;
    let simplex = FeasibleSet::Simplex(n);
    let quad = planted_quadratic(n, 0.2, 2.0, 31);
    let q: SharedFunction = quad.quadratic.clone();
    let l = quad.l;
    let mut reports: Vec<(String, ValidationReport)> = Vec::new();
    let mut min = |name: &str, m: &dyn MinModel, setup: &ProxSetup, set: &FeasibleSet| -> Result<()> {
        reports.push((name.to_string(), validate_min_model(m, setup, set, SAMPLES, 8)?));
        Ok(())
    };

    min("smooth", &make_smooth_model(q.clone(), l), &eu, &cube)?;
    min("smooth/entropy", &make_smooth_model(q.clone(), l), &ent, &simplex)?;
    let comp = |h| make_composite_model(CompositeProblem { g: q.clone(), h }, l);
    min("composite l1", &comp(SimpleH::L1(0.5))?, &eu, &cube)?;
    min("composite indicator", &comp(SimpleH::IndicatorOfSet(cube.clone()))?, &eu, &cube)?;
    min("composite indicator/entropy", &comp(SimpleH::IndicatorOfSet(simplex.clone()))?, &ent, &simplex)?;
    let pieces: Vec<SharedFunction> = (0..3)
        .map(|s| planted_quadratic(n, 0.1, 1.0 + s as f64, 40 + s).quadratic as SharedFunction)
        .collect();
    let sup = make_superposition_model(SuperpositionProblem {
        lipschitz: vec![1.0, 2.0, 3.0],
        pieces,
    })?;
    min("superposition", &sup, &eu, &cube)?;
    min(
        "proximal linear",
        &make_proximal_model(Arc::new(LinearFunction { c: vec![1.0, -2.0, 0.5, 0.0] }), 1.0)?,
        &eu,
        &cube,
    )?;
    min("proximal l1", &make_proximal_model(Arc::new(L1Norm::new(0.7, n)?), 1.0)?, &eu, &cube)?;
    for nu in [0.0, 0.5, 1.0] {
        let p = holder_power(vec![0.2, -0.4, 0.1, 0.6], nu);
        for delta in [1e-1, 1e-3] {
            min(&format!("universal ν={nu} δ={delta}"), &make_universal_model(p.clone(), delta)?, &eu, &cube)?;
        }
    }
    let ball = FeasibleSet::ball(vec![0.0; n], 1.0)?;
    let minmin = make_inexact_linearization_model(
        InnerProblem::MinMin {
            f: Arc::new(JointQuadratic(n)),
            qz: ball,
            l: 2.0,
        },
        1e-8,
    )?;
    min("min-min", minmin.as_ref(), &eu, &cube)?;
    let saddle = make_inexact_linearization_model(
        InnerProblem::SaddleMax(SaddleMaxProblem {
            a: random_spd(&mut rng(5), n, 0.5, 1.5),
            b: vec![0.1, 0.2, -0.3, 0.0],
            mu: 2.0,
            center: vec![0.0; n],
            qz: FeasibleSet::uniform_box(n, -0.5, 0.5)?,
        }),
        0.0,
    )?;
    min("saddle max", saddle.as_ref(), &eu, &cube)?;
    let moreau = make_inexact_linearization_model(
        InnerProblem::Moreau {
            f: q.clone(),
            l_f: l,
            mu_f: quad.mu,
            l: 1.0,
            diameter: 2.0 * (n as f64).sqrt(),
        },
        1e-9,
    )?;
    min("Moreau envelope", moreau.as_ref(), &eu, &cube)?;

    let mut vi = |name: &str, m: &dyn imopt::ViModel, setup: &ProxSetup, set: &FeasibleSet| -> Result<()> {
        reports.push((name.to_string(), validate_vi_model(m, setup, set, SAMPLES, 9)?));
        Ok(())
    };
    let (aff, _, mu, l_aff) = strongly_monotone_affine(n, 0.5, 6);
    let aff_model = make_vi_operator_model(Arc::new(aff), OperatorConstants::Lipschitz(l_aff), None)?.with_mu(mu)?;
    vi("affine operator", &aff_model, &eu, &cube)?;
    let game = random_game(2, 3, 12);
    // max |A_ij| under the entropy setup, the spectral norm under the Euclidean one.
    let game_op = make_vi_operator_model(
        Arc::new(MatrixGameOperator { a: game.clone() }),
        OperatorConstants::Lipschitz(game.max_abs()),
        None,
    )?;
    let game_l2 = game.spectral_norm();
    vi("matrix game", &game_op, &ent, &FeasibleSet::ProductOfSimplices(2, 3))?;
    for nu in [0.0, 0.5, 1.0] {
        let op = HolderSignOperator {
            a: vec![0.1, -0.3, 0.2, 0.0],
            nu,
        };
        for delta in [1e-1, 1e-3] {
            let l_nu = op.l_nu();
            let m = make_vi_operator_model(
                Arc::new(op.clone()),
                OperatorConstants::Holder { nu, l_nu, delta },
                None,
            )?;
            vi(&format!("Hölder operator ν={nu} δ={delta}"), &m, &eu, &cube)?;
        }
    }
    let cs = make_composite_saddle_vi_model(
        Arc::new(Bilinear { a: game }),
        SimpleTerm::l1(0.2, 2),
        SimpleTerm::quadratic(0.5, 3),
        game_l2,
    )?;
    vi("composite saddle", &cs, &eu, &FeasibleSet::uniform_box(5, -1.0, 1.0)?)?;

    let mut fails = Failures::default();
    for (name, r) in &reports {
        fails.check(r.passed(), || format!("{name}: {r}"));
    }

    // Hölder interpolation `f(x) <= f(y) + <∇f(y), x − y> + L(δ)/2 ‖x − y‖² + δ`.
    let mut triples = 0;
    let mut r = rng(77);
    let wide = FeasibleSet::uniform_box(n, -3.0, 3.0)?;
    for nu in [0.0, 0.5, 1.0] {
        let p = holder_power(vec![0.5, -1.0, 0.0, 1.5], nu);
        for delta in [1e-1, 1e-3] {
            let ld = holder_l(nu, p.l_nu, delta);
            for _ in 0..SAMPLES {
                let (x, y) = (wide.sample(&mut r), wide.sample(&mut r));
                let d = sub(&x, &y);
                let rhs = p.f.value(&y) + dot(&p.f.gradient(&y), &d) + 0.5 * ld * norm2_sq(&d) + delta;
                let lhs = p.f.value(&x);
                triples += 1;
                fails.check(lhs <= rhs + 1e-12 * (1.0 + rhs.abs()), || {
                    format!("interpolation ν={nu} δ={delta}: {lhs:e} > {rhs:e}")
                });
            }
        }
    }
    Ok(fails.outcome(format!(
        "{} models x {SAMPLES} samples, {triples} interpolation triples",
        reports.len()
    )))
}

fn proximal_sinkhorn_criterion() -> Result<Outcome> {
    const INSTANCES: u64 = 50;
    let eps = 1e-3;
    let results: Vec<Result<(f64, usize, usize, f64)>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..INSTANCES)
            .map(|i| {
                s.spawn(move || -> Result<(f64, usize, usize, f64)> {
                    let n = 2 + (i % 5) as usize;
                    let inst = random_ot(n, 1000, 500 + i)?;
                    let exact = exact_ot_oracle(&inst, 1000)?;
                    let res = proximal_sinkhorn(&inst, inst.max_cost(), eps, &ProxSinkhornConfig::default())?;
                    let cmax = inst.max_cost();
                    // Largest proximal-descent violation, relative to the inner accuracy of the step.
                    let mut descent_violations = 0;
                    let mut prev_residual = 0.0;
                    for r in &res.outer {
                        let slack = (r.residual + prev_residual) * (cmax + r.gamma * (2.0 * (n * n) as f64 / eps).ln());
                        if r.cost + r.gamma * r.kl > r.prior_cost + slack + SLACK {
                            descent_violations += 1;
                        }
                        prev_residual = r.residual;
                    }
                    Ok(((res.cost - exact).abs(), descent_violations, res.total_sweeps, exact))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut fails = Failures::default();
    let (mut worst, mut sweeps) = (0.0_f64, 0);
    for (i, r) in results.into_iter().enumerate() {
        let (dev, viol, sw, exact) = r?;
        worst = worst.max(dev);
        sweeps += sw;
        fails.check(dev <= 1e-3, || format!("instance {i}: |cost − {exact:.6}| = {dev:e}"));
        fails.check(viol == 0, || format!("instance {i}: {viol} proximal descent violations"));
    }
    let trivial = crate::problems::random_ot(2, 10, 1)?;
    let table = compare_sinkhorn(&trivial, eps, &[1.0, 0.1, 0.01])?;
    let finite = table.rows.iter().all(|r| r.prox_sweeps > 0 && r.plain_sweeps > 0 && r.prox_cost.is_finite());
    fails.check(finite, || "comparison table has a non-finite entry".into());
    let fewer = table.rows.iter().any(|r| r.prox_sweeps <= r.plain_sweeps);
    Ok(fails.outcome(format!(
        "{INSTANCES} instances, max |cost − oracle| = {worst:.2e}, {sweeps} sweeps; n=2 table: {} rows, proximal <= plain for some γ: {fewer}",
        table.rows.len()
    )))
}

/// Counts gradient calls of the wrapped function.
struct Counting {
    f: SharedFunction,
    grads: AtomicUsize,
}

impl SmoothFunction for Counting {
    fn dim(&self) -> usize {
        self.f.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.f.value(x)
    }
    fn gradient(&self, x: &[f64]) -> Point {
        self.grads.fetch_add(1, Ordering::Relaxed);
        self.f.gradient(x)
    }
}

fn catalyst_criterion() -> Result<Outcome> {
    let setup = ProxSetup::euclidean();
    let n = 20;
    let p = planted_quadratic(n, 1e-3, 1.0, 61);
    let eps = 1e-6;
    let (l_f, mu_f) = (p.l, p.mu);

    let counting = Arc::new(Counting {
        f: p.quadratic.clone(),
        grads: AtomicUsize::new(0),
    });
    let direct_model = make_smooth_model(counting.clone(), l_f);
    let direct = fgm_restart_solve(
        &direct_model,
        StrongConvexityTag::LeftRelative(mu_f),
        &setup,
        &p.set,
        &p.x0,
        p.r2(),
        eps,
        l_f,
        &InexactnessBudget::exact(),
    )?;
    let direct_grads = counting.grads.load(Ordering::Relaxed);
    let direct_gap = p.model.f_value(&direct.x_last) - p.f_star;

    // Envelope parameter L = L_f: inner condition number about 2.
    let l_env = l_f;
    let mu_env = mu_f * l_env / (mu_f + l_env);
    let diameter = 4.0 * (2.0 * p.r2()).sqrt() + 1.0;
    let moreau = MoreauModel::new(p.quadratic.clone(), l_f, mu_f, l_env, diameter, 1e-9)?;
    let outer = fgm_restart_solve(
        &moreau,
        StrongConvexityTag::LeftRelative(mu_env),
        &setup,
        &p.set,
        &p.x0,
        p.r2(),
        eps,
        l_env,
        &InexactnessBudget::exact(),
    )?;
    let inner_grads = moreau.gradient_evaluations();
    // Gap of the exact proximal point of the final outer iterate.
    let a = p.quadratic.matrix();
    let m = DMatrix::from_fn(n, n, |i, j| a.row(i)[j] + if i == j { l_env } else { 0.0 });
    let rhs = DVector::from_iterator(
        n,
        p.quadratic.linear().iter().zip(&outer.x_last).map(|(b, x)| b + l_env * x),
    );
    let z = m.lu().solve(&rhs).map(|v| v.as_slice().to_vec());
    let Some(z) = z else {
        return Ok(Outcome {
            passed: false,
            detail: "singular envelope system".into(),
        });
    };
    let gap = p.model.f_value(&z) - p.f_star;
    let ratio = inner_grads as f64 / direct_grads as f64;
    Ok(Outcome {
        passed: gap <= eps && direct_gap <= eps,
        detail: format!(
            "envelope gap {gap:.1e} with {inner_grads} inner gradients over {} outer iterations; direct restarted FGM gap {direct_gap:.1e} with {direct_grads} gradients; ratio {ratio:.2} (within 10: {})",
            outer.iterations(),
            ratio <= 10.0
        ),
    })
}

/// Conditional gradient with the accelerated step rule, fixed `L`, ties
/// broken toward the lowest index.
fn textbook_conditional_gradient(q: &dyn SmoothFunction, x0: &[f64], l: f64, iters: usize) -> Vec<Point> {
    let (mut x, mut u, mut a) = (x0.to_vec(), x0.to_vec(), 0.0);
    let mut out = Vec::with_capacity(iters);
    for _ in 0..iters {
        let alpha = (1.0 + (1.0 + 4.0 * l * a).sqrt()) / (2.0 * l);
        let a_next = a + alpha;
        let y: Point = u.iter().zip(&x).map(|(ui, xi)| (alpha * ui + a * xi) / a_next).collect();
        let g = q.gradient(&y);
        let mut best = 0;
        for i in 1..g.len() {
            if g[i] < g[best] {
                best = i;
            }
        }
        let mut s = vec![0.0; g.len()];
        s[best] = 1.0;
        x = s.iter().zip(&x).map(|(si, xi)| (alpha * si + a * xi) / a_next).collect();
        u = s;
        a = a_next;
        out.push(x.clone());
    }
    out
}

fn frank_wolfe_criterion() -> Result<Outcome> {
    let n = 10;
    let p = planted_quadratic(n, 0.1, 2.0, 71);
    let model = make_smooth_model(p.quadratic.clone(), p.l);
    let set = FeasibleSet::Simplex(n);
    let x0 = vec![1.0 / n as f64; n];
    let r_q = 2f64.sqrt();
    let iters = 300;
    let mut cfg = FgmConfig::new(p.l, iters).non_adaptive();
    cfg.r_q = Some(r_q);
    let run: SolverRun = fw_solve(&model, &set, &x0, 1e-12, &cfg)?;
    let oracle = textbook_conditional_gradient(p.quadratic.as_ref(), &x0, p.l, run.iterations());
    let mut fails = Failures::default();
    let mut worst = 0.0_f64;
    for (k, (x, r)) in run.iterates.iter().skip(1).zip(&oracle).enumerate() {
        let d = crate::problems::max_abs_diff(x, r);
        worst = worst.max(d);
        fails.check(d <= 1e-10, || format!("iterate {}: deviation {d:e}", k + 1));
    }
    let mut a = 0.0;
    for rec in &run.records {
        let want = 2.0 * rec.l * r_q * r_q;
        fails.check((rec.delta_tilde - want).abs() <= 1e-12 * want, || {
            format!("k={}: δ̃ {:e} != 2LR_Q² = {want:e}", rec.k, rec.delta_tilde)
        });
        let alpha = fgm_alpha(p.l, a);
        a += alpha;
        fails.check((rec.a - a).abs() <= 1e-10 * a, || format!("k={}: A mismatch", rec.k));
    }
    Ok(fails.outcome(format!(
        "{} iterates, max deviation from the reference {worst:.1e}",
        run.iterations()
    )))
}
