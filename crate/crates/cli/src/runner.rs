//! Builds the configured problem, runs the solver and renders its trace.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use imopt::linalg::{dist2_sq, norm2_sq};
use imopt::ot::sinkhorn_warm;
use imopt::zoo::{
    make_universal_model, make_vi_operator_model, Bilinear, HolderProblem, HolderSignOperator,
    MatrixGameOperator, OperatorConstants, OperatorModel,
};
use imopt::{
    exact_ot_oracle, fgm_restart_solve, fgm_solve, fgm_universal_solve, fw_solve,
    gm_restart_solve, gm_solve, mirror_prox_restart_solve, mirror_prox_solve,
    mirror_prox_universal_solve, proximal_sinkhorn, round_to_polytope, saddle_gap, saddle_solve,
    Error, FeasibleSet, FgmConfig, GmConfig, InexactnessBudget, Matrix, MinModel, MpParams,
    OTInstance, Point, ProxSetup, ProxSinkhornConfig, SaddleConfig, SaddleSpec, SetupKind,
    SimpleTerm, SolverRun, StrongConvexityTag, TransportPlan, ViModel, ViRun,
};
use rand::Rng;

use crate::compare::plain_gamma;
use crate::config::{ConfigError, RunConfig};
use crate::problems::{
    holder_l1, holder_quadratic, matching_pennies, planted_box_lasso, planted_box_quadratic,
    planted_quadratic, random_game, random_ot, rng, strongly_monotone_affine, with_injection,
    PlantedProblem,
};

/// Environment variable overriding the configured seed.
pub const SEED_ENV: &str = "IMOPT_SEED";

/// Marginal scale of generated OT instances.
const OT_SCALE: u64 = 1000;

/// Why `run` failed; maps onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    /// Bad configuration or input file.
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// The solver rejected the problem or failed.
    #[error("solver error: {0}")]
    Solver(#[from] Error),
    /// The trace could not be written.
    #[error("cannot write {path}: {source}")]
    Io {
        /// Target path.
        path: String,
        /// Underlying error.
        source: std::io::Error,
    },
}

impl RunError {
    /// 3 for configuration errors, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 3,
            Self::Solver(_) | Self::Io { .. } => 2,
        }
    }
}

/// A finished run: the CSV trace and a one-line summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// Trace in CSV form, starting with the schema header comment.
    pub csv: String,
    /// `key=value` summary line.
    pub summary: String,
    /// Where the trace was written, if anywhere.
    pub written_to: Option<PathBuf>,
}

struct MinProblem {
    model: Box<dyn MinModel>,
    set: FeasibleSet,
    x0: Point,
    r2: f64,
    l: f64,
    mu: f64,
    f_star: Option<f64>,
    holder: Option<HolderProblem>,
}

struct ViProblem {
    model: OperatorModel,
    set: FeasibleSet,
    x0: Point,
    solution: Option<Point>,
}

enum Problem {
    Min(MinProblem),
    Vi(ViProblem),
    Game(Matrix),
    Ot(OTInstance),
}

fn bad(field: &str, message: impl Into<String>) -> RunError {
    RunError::Config(ConfigError {
        field: field.into(),
        message: message.into(),
    })
}

fn from_planted(p: PlantedProblem) -> MinProblem {
    let r2 = p.r2();
    MinProblem {
        model: p.model,
        set: p.set,
        x0: p.x0,
        r2,
        l: p.l,
        mu: p.mu,
        f_star: Some(p.f_star),
        holder: None,
    }
}

fn from_holder(h: HolderProblem, x_star: &[f64], eps: f64) -> Result<MinProblem, RunError> {
    let model = make_universal_model(h.clone(), 0.5 * eps)?;
    let n = x_star.len();
    Ok(MinProblem {
        f_star: Some(h.f.value(x_star)),
        l: model.declared_l(),
        model: Box::new(model),
        set: FeasibleSet::WholeSpace(n),
        x0: vec![0.0; n],
        r2: 0.5 * norm2_sq(x_star),
        mu: 0.0,
        holder: Some(h),
    })
}

/// `max_{x in Q} ‖x − x0‖²` for bounded sets.
fn max_dist_sq(set: &FeasibleSet, x0: &[f64]) -> Result<f64, Error> {
    match set {
        FeasibleSet::Box { lower, upper } => Ok(x0
            .iter()
            .zip(lower.iter().zip(upper))
            .map(|(x, (lo, hi))| (x - lo).abs().max((hi - x).abs()).powi(2))
            .sum()),
        FeasibleSet::Ball { center, radius } => Ok((dist2_sq(x0, center).sqrt() + radius).powi(2)),
        FeasibleSet::Simplex(_) => Ok(set
            .vertices()?
            .iter()
            .map(|v| dist2_sq(v, x0))
            .fold(0.0, f64::max)),
        _ => Err(Error::UnsupportedSet("needs a box, ball or simplex".into())),
    }
}

/// Euclidean diameter of a box, ball or simplex.
fn diameter(set: &FeasibleSet) -> Result<f64, Error> {
    match set {
        FeasibleSet::Box { lower, upper } => Ok(dist2_sq(lower, upper).sqrt()),
        FeasibleSet::Ball { radius, .. } => Ok(2.0 * radius),
        FeasibleSet::Simplex(n) if *n > 1 => Ok(2f64.sqrt()),
        FeasibleSet::Simplex(_) => Ok(0.0),
        _ => Err(Error::UnsupportedSet("Frank-Wolfe needs a box, ball or simplex".into())),
    }
}

fn build_problem(cfg: &RunConfig) -> Result<Problem, RunError> {
    let (n, seed) = (cfg.n, cfg.seed);
    let mut problem = match cfg.model.as_str() {
        "quadratic" => Problem::Min(from_planted(planted_quadratic(n, 1.0 / cfg.cond, 1.0, seed))),
        "box_quadratic" => Problem::Min(from_planted(planted_box_quadratic(n, seed))),
        "lasso" => Problem::Min(from_planted(planted_box_lasso(n, 0.3, seed))),
        "simplex_quadratic" => {
            let p = planted_quadratic(n, 1.0 / cfg.cond, 1.0, seed);
            let set = FeasibleSet::Simplex(n);
            let x0 = vec![1.0 / n as f64; n];
            Problem::Min(MinProblem {
                r2: 0.5 * max_dist_sq(&set, &x0)?,
                model: p.model,
                set,
                x0,
                l: p.l,
                mu: p.mu,
                f_star: None,
                holder: None,
            })
        }
        "holder_l1" => {
            let (h, a) = holder_l1(n, 1.0, seed);
            Problem::Min(from_holder(h, &a, cfg.eps)?)
        }
        "holder_quadratic" => {
            let (h, x_star) = holder_quadratic(n, seed);
            Problem::Min(from_holder(h, &x_star, cfg.eps)?)
        }
        "affine_vi" => {
            let (op, a, mu, l) = strongly_monotone_affine(n, 1.0, seed);
            let model = make_vi_operator_model(Arc::new(op), OperatorConstants::Lipschitz(l), None)?
                .with_mu(mu)?;
            Problem::Vi(ViProblem {
                model,
                set: FeasibleSet::ball(vec![0.0; n], 2.0)?,
                x0: vec![0.0; n],
                solution: Some(a),
            })
        }
        "holder_vi" => {
            let mut r = rng(seed);
            let a: Point = (0..n).map(|_| r.gen_range(-0.5..0.5)).collect();
            let op = HolderSignOperator { a: a.clone(), nu: cfg.nu };
            let constants = OperatorConstants::Holder {
                nu: cfg.nu,
                l_nu: op.l_nu(),
                delta: 0.5 * cfg.eps,
            };
            Problem::Vi(ViProblem {
                model: make_vi_operator_model(Arc::new(op), constants, None)?,
                set: FeasibleSet::uniform_box(n, -1.0, 1.0)?,
                x0: vec![0.0; n],
                solution: Some(a),
            })
        }
        "pennies" => Problem::Game(matching_pennies()),
        "game" => Problem::Game(random_game(n, n, seed)),
        "ot" => Problem::Ot(match &cfg.instance {
            Some(path) => OTInstance::read(path).map_err(|e| bad("instance", e.to_string()))?,
            None => random_ot(n, OT_SCALE.max(n as u64), seed)?,
        }),
        other => return Err(bad("model", format!("unknown model `{other}`"))),
    };
    if let Some(set) = &cfg.set {
        let (slot, x0, dim) = match &mut problem {
            Problem::Min(p) => {
                p.f_star = None;
                (&mut p.set, &mut p.x0, p.model.dim())
            }
            Problem::Vi(p) => {
                p.solution = None;
                let d = p.model.dim();
                (&mut p.set, &mut p.x0, d)
            }
            _ => return Err(bad("set", "this model fixes its own set")),
        };
        if set.dim() != dim {
            return Err(bad("set", format!("dimension {} does not match the model's {dim}", set.dim())));
        }
        *slot = set.clone();
        *x0 = set.project(x0)?;
        if let Problem::Min(p) = &mut problem {
            p.r2 = 0.5 * max_dist_sq(&p.set, &p.x0).unwrap_or(p.r2 * 4.0);
        }
    }
    Ok(problem)
}

fn setup_for(kind: SetupKind) -> ProxSetup {
    match kind {
        SetupKind::Euclidean => ProxSetup::euclidean(),
        SetupKind::Entropy => ProxSetup::entropy(),
    }
}

fn csv_of(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> String {
    let mut buf = Vec::new();
    write(&mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("CSV is UTF-8")
}

fn min_summary(cfg: &RunConfig, p: &MinProblem, run: &SolverRun, x: &[f64]) -> String {
    let mut s = format!(
        "solver={} model={} iterations={} attempts={} cert={:.6e} f={:.6e}",
        cfg.solver,
        cfg.model,
        run.iterations(),
        run.total_attempts(),
        run.certificate.bound_value,
        p.model.f_value(x)
    );
    if let Some(f_star) = p.f_star {
        write!(s, " gap={:.6e}", p.model.f_value(x) - f_star).expect("string");
    }
    s
}

fn vi_summary(cfg: &RunConfig, run: &ViRun) -> String {
    format!(
        "solver={} model={} iterations={} attempts={} cert={:.6e}",
        cfg.solver,
        cfg.model,
        run.iterations(),
        run.total_attempts(),
        run.certificate
    )
}

fn min_problem(problem: Problem, solver: &str) -> Result<MinProblem, RunError> {
    match problem {
        Problem::Min(p) => Ok(p),
        _ => Err(bad("model", format!("solver `{solver}` needs a minimization model"))),
    }
}

fn run_min(cfg: &RunConfig, p: MinProblem) -> Result<RunOutput, RunError> {
    let setup = setup_for(cfg.setup);
    let budget = InexactnessBudget::new(cfg.delta, cfg.delta_tilde)?;
    let l0 = cfg.l0.unwrap_or(p.l);
    let max_iter = cfg.max_iter.unwrap_or(1000);
    let model = p.model.as_ref();
    let (run, use_bar) = with_injection(model, cfg.delta, cfg.delta_tilde, cfg.seed, |m| {
        match cfg.solver.as_str() {
            "gm" => {
                let mut c = GmConfig::new(l0, max_iter).with_budget(budget.clone());
                c.target_eps = Some(cfg.eps);
                gm_solve(m, &setup, &p.set, &p.x0, p.r2, &c).map(|r| (r, true))
            }
            "gm_restart" => gm_restart_solve(
                m,
                StrongConvexityTag::LeftRelative(p.mu),
                &setup,
                &p.set,
                &p.x0,
                p.r2,
                cfg.eps,
                p.l,
                &budget,
            )
            .map(|r| (r, true)),
            "fgm" => {
                let mut c = FgmConfig::new(l0, max_iter).with_budget(budget.clone());
                c.target_eps = Some(cfg.eps);
                fgm_solve(m, &setup, &p.set, &p.x0, p.r2, &c).map(|r| (r, false))
            }
            "fgm_universal" => {
                let h = p.holder.as_ref().ok_or_else(|| {
                    Error::UnsupportedCombination("fgm_universal needs a Hölder model".into())
                })?;
                let c = FgmConfig::new(l0, max_iter);
                fgm_universal_solve(h, &setup, &p.set, &p.x0, p.r2, cfg.eps, &c).map(|r| (r, false))
            }
            "fgm_restart" => fgm_restart_solve(
                m,
                StrongConvexityTag::LeftRelative(p.mu),
                &setup,
                &p.set,
                &p.x0,
                p.r2,
                cfg.eps,
                p.l,
                &budget,
            )
            .map(|r| (r, false)),
            "fw" => {
                let mut c = FgmConfig::new(l0, max_iter);
                c.r_q = Some(diameter(&p.set)?);
                fw_solve(m, &p.set, &p.x0, cfg.eps, &c).map(|r| (r, false))
            }
            other => Err(Error::InvalidArgument(format!("`{other}` is not a minimization solver"))),
        }
    })?;
    let x = if use_bar { &run.x_bar } else { &run.x_last };
    Ok(RunOutput {
        summary: min_summary(cfg, &p, &run, x),
        csv: csv_of(|w| run.write_csv(w)),
        written_to: None,
    })
}

fn game_spec(a: Matrix) -> SaddleSpec {
    let (m, n) = (a.rows(), a.cols());
    let l = a.max_abs().max(f64::MIN_POSITIVE);
    SaddleSpec {
        f: Arc::new(Bilinear { a }),
        h: SimpleTerm::zero(m),
        phi: SimpleTerm::zero(n),
        q1: FeasibleSet::Simplex(m),
        q2: FeasibleSet::Simplex(n),
        l,
    }
}

fn run_vi(cfg: &RunConfig, problem: Problem) -> Result<RunOutput, RunError> {
    let setup = setup_for(cfg.setup);
    let max_iter = cfg.max_iter.unwrap_or(100_000);
    if cfg.solver == "saddle" {
        let Problem::Game(a) = problem else {
            return Err(bad("model", "solver `saddle` needs `pennies` or `game`"));
        };
        let spec = game_spec(a);
        let mut c = SaddleConfig::new(cfg.l0.unwrap_or(spec.l), max_iter);
        c.delta_tilde = cfg.delta_tilde;
        c.log_every = max_iter;
        let res = saddle_solve(&spec, &setup, cfg.eps, &c)?;
        return Ok(RunOutput {
            summary: format!("{} gap={:.6e}", vi_summary(cfg, &res.run), res.gap),
            csv: csv_of(|w| res.run.write_csv(w)),
            written_to: None,
        });
    }
    let (vi, game) = match problem {
        Problem::Vi(p) => (p, None),
        Problem::Game(a) => {
            let spec = game_spec(a.clone());
            let (m, n) = (a.rows(), a.cols());
            let model = make_vi_operator_model(
                Arc::new(MatrixGameOperator { a }),
                OperatorConstants::Lipschitz(spec.l),
                None,
            )?;
            let set = FeasibleSet::Product(vec![FeasibleSet::Simplex(m), FeasibleSet::Simplex(n)]);
            let x0 = setup.prox_center(&set)?;
            (
                ViProblem {
                    model,
                    set,
                    x0,
                    solution: None,
                },
                Some(spec),
            )
        }
        _ => return Err(bad("model", format!("solver `{}` needs a VI or game model", cfg.solver))),
    };
    let l0 = cfg.l0.unwrap_or_else(|| vi.model.declared_l());
    let z0 = setup.prox_center(&vi.set)?;
    let run = match cfg.solver.as_str() {
        "mirror_prox" => {
            let params = MpParams {
                eps: cfg.eps,
                delta: cfg.delta,
                l0,
                max_iter,
                delta_tilde: cfg.delta_tilde,
                v_max: setup.max_divergence(&vi.set, &z0)?,
            };
            mirror_prox_solve(&vi.model, &setup, &vi.set, &params)?
        }
        "mp_universal" => {
            let v_max = setup.max_divergence(&vi.set, &z0)?;
            mirror_prox_universal_solve(&vi.model, &setup, &vi.set, cfg.eps, l0, max_iter, v_max)?
        }
        "mp_restart" => {
            let r0_sq = max_dist_sq(&vi.set, &vi.x0)?;
            mirror_prox_restart_solve(&vi.model, &setup, &vi.set, &vi.x0, r0_sq, cfg.eps, l0, max_iter)?
        }
        other => return Err(bad("solver", format!("`{other}` is not a VI solver"))),
    };
    let mut summary = vi_summary(cfg, &run);
    if let Some(a) = &vi.solution {
        write!(summary, " dist_sq={:.6e}", dist2_sq(&run.w_hat, a)).expect("string");
    }
    if let Some(spec) = &game {
        let (u, v) = run.w_hat.split_at(spec.q1.dim());
        write!(summary, " gap={:.6e}", saddle_gap(spec, u, v)?).expect("string");
    }
    Ok(RunOutput {
        summary,
        csv: csv_of(|w| run.write_csv(w)),
        written_to: None,
    })
}

/// Exact OT value at the smallest power-of-ten scale that makes the
/// marginals integral.
pub fn oracle_value(inst: &OTInstance) -> Result<f64, Error> {
    let mut last = None;
    for k in 0..=12 {
        match exact_ot_oracle(inst, 10u64.pow(k)) {
            Ok(v) => return Ok(v),
            Err(e @ Error::ScaleError { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one scale tried"))
}

fn run_ot(cfg: &RunConfig, inst: OTInstance) -> Result<RunOutput, RunError> {
    let (cost, csv, mut summary) = if cfg.solver == "sinkhorn" {
        let gamma = cfg.gamma.unwrap_or_else(|| plain_gamma(inst.n(), cfg.eps));
        let tol = cfg.eps / (8.0 * inst.max_cost().max(f64::MIN_POSITIVE));
        let prior = TransportPlan::outer(&inst.l, &inst.w);
        let max_iter = cfg.max_iter.unwrap_or(1_000_000);
        let out = sinkhorn_warm(&inst, gamma, &prior, tol, max_iter, None)?;
        let cost = round_to_polytope(&out.plan.x, &inst.l, &inst.w).cost(&inst.cost);
        let mut csv = format!("{}\nsweep,residual\n", imopt::trace::TRACE_HEADER);
        for (k, r) in out.residuals.iter().enumerate() {
            writeln!(csv, "{},{r:e}", k + 1).expect("string");
        }
        let summary = format!(
            "solver=sinkhorn n={} gamma={gamma:.6e} sweeps={} cost={cost:.6e}",
            inst.n(),
            out.sweeps
        );
        (cost, csv, summary)
    } else {
        let gamma = cfg.gamma.unwrap_or_else(|| inst.max_cost().max(1e-12));
        let mut c = ProxSinkhornConfig::default();
        if let Some(m) = cfg.max_iter {
            c.max_outer = m;
        }
        let res = proximal_sinkhorn(&inst, gamma, cfg.eps, &c)?;
        let summary = format!(
            "solver=prox_sinkhorn n={} outer={} sweeps={} cost={:.6e}",
            inst.n(),
            res.outer.len(),
            res.total_sweeps,
            res.cost
        );
        (res.cost, csv_of(|w| res.write_csv(w)), summary)
    };
    if cfg.oracle {
        let exact = oracle_value(&inst)?;
        write!(summary, " oracle={exact:.6e} deviation={:.6e}", cost - exact).expect("string");
    }
    Ok(RunOutput {
        csv,
        summary,
        written_to: None,
    })
}

/// Runs a parsed configuration.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput, RunError> {
    let problem = build_problem(cfg)?;
    match cfg.solver.as_str() {
        "sinkhorn" | "prox_sinkhorn" => match problem {
            Problem::Ot(inst) => run_ot(cfg, inst),
            _ => Err(bad("model", "OT solvers need an OT instance")),
        },
        "mirror_prox" | "mp_universal" | "mp_restart" | "saddle" => run_vi(cfg, problem),
        s => run_min(cfg, min_problem(problem, s)?),
    }
}

/// Parses `path`, applies `seed_override`, runs, and writes the trace to the
/// configured output (returned in [`RunOutput::csv`] either way).
pub fn cli_run(path: &Path, seed_override: Option<u64>) -> Result<RunOutput, RunError> {
    let mut cfg = RunConfig::read(path)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    let mut out = execute(&cfg)?;
    if let Some(target) = &cfg.output {
        std::fs::write(target, &out.csv).map_err(|source| RunError::Io {
            path: target.display().to_string(),
            source,
        })?;
        out.written_to = Some(target.clone());
    }
    Ok(out)
}

/// Reads [`SEED_ENV`], rejecting values that are not a `u64`.
pub fn seed_from_env() -> Result<Option<u64>, ConfigError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| ConfigError {
            field: SEED_ENV.into(),
            message: format!("cannot parse `{v}`"),
        }),
        Err(_) => Ok(None),
    }
}
