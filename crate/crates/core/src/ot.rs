//! Discrete optimal transport: entropic Sinkhorn scaling, rounding onto the
//! transport polytope, the proximal Sinkhorn outer loop and an exact
//! min-cost-flow oracle.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{log_sum_exp, Matrix, Point};
use crate::trace::{Certificate, IterationRecord, SolverRun};

/// Tolerance on the marginal sums.
const MASS_TOL: f64 = 1e-12;

/// Sinkhorn switches to log-domain updates below `γ = LOG_DOMAIN_RATIO · max C`.
pub const LOG_DOMAIN_RATIO: f64 = 1e-2;

/// A discrete OT problem `min <C, X>` over plans with marginals `l`, `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct OTInstance {
    /// Cost matrix (`n × n`, nonnegative).
    pub cost: Matrix,
    /// Row marginal.
    pub l: Point,
    /// Column marginal.
    pub w: Point,
}

impl OTInstance {
    /// Validates sizes, nonnegativity and unit mass.
    pub fn new(cost: Matrix, l: Point, w: Point) -> Result<Self> {
        let n = l.len();
        if n == 0 || cost.rows() != n || cost.cols() != n || w.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: cost.rows().max(cost.cols()).max(w.len()),
            });
        }
        if cost.data().iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidArgument("costs must be finite and nonnegative".into()));
        }
        for m in [&l, &w] {
            if m.iter().any(|v| !(*v >= 0.0)) || (m.iter().sum::<f64>() - 1.0).abs() > MASS_TOL {
                return Err(Error::InvalidArgument("marginals must lie on the simplex".into()));
            }
        }
        Ok(Self { cost, l, w })
    }

    /// Number of points per side.
    pub fn n(&self) -> usize {
        self.l.len()
    }

    /// `max_ij C_ij`.
    pub fn max_cost(&self) -> f64 {
        self.cost.max_abs()
    }

    /// Parses the text format: a line with `n`, `n` comma-separated cost rows,
    /// then `l: …` and `w: …`. Lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|s| !s.is_empty() && !s.starts_with('#'));
        let head = lines.next().ok_or_else(|| Error::Parse("empty instance".into()))?;
        let head = head.trim_start_matches(|c: char| c == 'n' || c == '=' || c == ',' || c == ':');
        let n: usize = head
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad size line `{head}`")))?;
        let nums = |s: &str| -> Result<Vec<f64>> {
            s.split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{t}`"))))
                .collect()
        };
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines.next().ok_or_else(|| Error::Parse("missing cost row".into()))?;
            let row = nums(line)?;
            if row.len() != n {
                return Err(Error::Parse(format!("cost row has {} entries, expected {n}", row.len())));
            }
            rows.push(row);
        }
        let (mut l, mut w) = (None, None);
        for line in lines {
            if let Some(rest) = line.strip_prefix("l:") {
                l = Some(nums(rest)?);
            } else if let Some(rest) = line.strip_prefix("w:") {
                w = Some(nums(rest)?);
            } else {
                return Err(Error::Parse(format!("unexpected line `{line}`")));
            }
        }
        let l = l.ok_or_else(|| Error::Parse("missing `l:` row".into()))?;
        let w = w.ok_or_else(|| Error::Parse("missing `w:` row".into()))?;
        Self::new(Matrix::from_rows(&rows)?, l, w)
    }

    /// Reads an instance file.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Serializes into the text format read by [`OTInstance::parse`].
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut out = format!("{}\n", self.n());
        for i in 0..self.n() {
            let _ = writeln!(out, "{}", join(self.cost.row(i)));
        }
        let _ = writeln!(out, "l: {}", join(&self.l));
        let _ = writeln!(out, "w: {}", join(&self.w));
        out
    }
}

/// An `n × n` nonnegative plan with its marginal residual.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// Entries, row-major.
    pub x: Matrix,
    /// `‖row(x) − l‖₁ + ‖col(x) − w‖₁` against the instance it was built for.
    pub residual: f64,
}

impl TransportPlan {
    /// Wraps `x` and records its residual against `l`, `w`.
    pub fn new(x: Matrix, l: &[f64], w: &[f64]) -> Self {
        let residual = marginal_residual(&x, l, w);
        Self { x, residual }
    }

    /// The product plan `l wᵀ`.
    pub fn outer(l: &[f64], w: &[f64]) -> Self {
        let n = l.len();
        let data = (0..n * n).map(|k| l[k / n] * w[k % n]).collect();
        let x = Matrix::from_row_major(n, n, data).expect("square product");
        Self::new(x, l, w)
    }

    /// Row sums.
    pub fn row_sums(&self) -> Point {
        row_sums(&self.x)
    }

    /// Column sums.
    pub fn col_sums(&self) -> Point {
        col_sums(&self.x)
    }

    /// `<C, x>`.
    pub fn cost(&self, c: &Matrix) -> f64 {
        self.x.data().iter().zip(c.data()).map(|(x, c)| x * c).sum()
    }
}

fn row_sums(x: &Matrix) -> Point {
    (0..x.rows()).map(|i| x.row(i).iter().sum()).collect()
}

fn col_sums(x: &Matrix) -> Point {
    let mut c = vec![0.0; x.cols()];
    for i in 0..x.rows() {
        for (cj, v) in c.iter_mut().zip(x.row(i)) {
            *cj += v;
        }
    }
    c
}

/// `‖row(x) − l‖₁ + ‖col(x) − w‖₁`.
pub fn marginal_residual(x: &Matrix, l: &[f64], w: &[f64]) -> f64 {
    let r: f64 = row_sums(x).iter().zip(l).map(|(a, b)| (a - b).abs()).sum();
    let c: f64 = col_sums(x).iter().zip(w).map(|(a, b)| (a - b).abs()).sum();
    r + c
}

/// Generalized KL divergence `Σ x ln(x/y) − x + y`.
pub fn kl_divergence(x: &Matrix, y: &Matrix) -> f64 {
    x.data()
        .iter()
        .zip(y.data())
        .map(|(a, b)| if *a > 0.0 { a * (a / b).ln() - a + b } else { *b })
        .sum()
}

/// A Sinkhorn solve with its dual state and sweep count.
#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornOutcome {
    /// The scaled plan.
    pub plan: TransportPlan,
    /// Column log-potential, reusable as a warm start.
    pub log_v: Point,
    /// Full (row + column) sweeps performed.
    pub sweeps: usize,
    /// Row residual after every sweep.
    pub residuals: Vec<f64>,
}

/// Sinkhorn for `min <C, x> + γ KL(x ‖ prior)` over the transport polytope.
/// Stops once the marginal ℓ1 residual is at most `tol`; at `max_iter` sweeps
/// returns [`Error::MaxIterExceeded`] carrying the last plan.
pub fn sinkhorn(
    inst: &OTInstance,
    gamma: f64,
    prior: &TransportPlan,
    tol: f64,
    max_iter: usize,
) -> Result<TransportPlan> {
    sinkhorn_warm(inst, gamma, prior, tol, max_iter, None).map(|o| o.plan)
}

/// [`sinkhorn`] with an optional warm-start column log-potential.
pub fn sinkhorn_warm(
    inst: &OTInstance,
    gamma: f64,
    prior: &TransportPlan,
    tol: f64,
    max_iter: usize,
    log_v0: Option<&[f64]>,
) -> Result<SinkhornOutcome> {
    let n = inst.n();
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument("gamma must be positive".into()));
    }
    if prior.x.rows() != n || prior.x.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: prior.x.rows(),
        });
    }
    if prior.x.data().iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument("prior entries must be positive".into()));
    }
    let log_k: Vec<f64> = prior
        .x
        .data()
        .iter()
        .zip(inst.cost.data())
        .map(|(p, c)| p.ln() - c / gamma)
        .collect();
    let log_domain = gamma < LOG_DOMAIN_RATIO * inst.max_cost();
    let ln_l: Vec<f64> = inst.l.iter().map(|v| v.ln()).collect();
    let ln_w: Vec<f64> = inst.w.iter().map(|v| v.ln()).collect();
    let mut f = vec![0.0; n];
    let mut g = match log_v0 {
        Some(v) if v.len() == n && v.iter().all(|t| t.is_finite()) => v.to_vec(),
        _ => vec![0.0; n],
    };
    let kernel: Vec<f64> = if log_domain { Vec::new() } else { log_k.iter().map(|v| v.exp()).collect() };
    let mut buf = vec![0.0; n];
    let mut residuals = Vec::new();
    let plan_of = |f: &[f64], g: &[f64]| {
        let data = (0..n * n).map(|k| (f[k / n] + log_k[k] + g[k % n]).exp()).collect();
        Matrix::from_row_major(n, n, data).expect("square plan")
    };
    for sweep in 1..=max_iter {
        if log_domain {
            for i in 0..n {
                for j in 0..n {
                    buf[j] = log_k[i * n + j] + g[j];
                }
                f[i] = ln_l[i] - log_sum_exp(&buf);
            }
            for j in 0..n {
                for i in 0..n {
                    buf[i] = log_k[i * n + j] + f[i];
                }
                g[j] = ln_w[j] - log_sum_exp(&buf);
            }
        } else {
            let ev: Vec<f64> = g.iter().map(|v| v.exp()).collect();
            for i in 0..n {
                let s: f64 = (0..n).map(|j| kernel[i * n + j] * ev[j]).sum();
                f[i] = ln_l[i] - s.ln();
            }
            let eu: Vec<f64> = f.iter().map(|v| v.exp()).collect();
            for j in 0..n {
                let s: f64 = (0..n).map(|i| kernel[i * n + j] * eu[i]).sum();
                g[j] = ln_w[j] - s.ln();
            }
        }
        let x = plan_of(&f, &g);
        let plan = TransportPlan::new(x, &inst.l, &inst.w);
        residuals.push(plan.residual);
        if plan.residual <= tol {
            return Ok(SinkhornOutcome {
                plan,
                log_v: g,
                sweeps: sweep,
                residuals,
            });
        }
        if sweep == max_iter || !plan.residual.is_finite() {
            return Err(Error::MaxIterExceeded {
                sweeps: sweep,
                residual: plan.residual,
                plan: Box::new(plan),
            });
        }
    }
    let plan = TransportPlan::new(plan_of(&f, &g), &inst.l, &inst.w);
    Err(Error::MaxIterExceeded {
        sweeps: 0,
        residual: plan.residual,
        plan: Box::new(plan),
    })
}

/// Rounds a nonnegative matrix onto the transport polytope: rows and then
/// columns are scaled down to their targets and the missing mass is added as
/// the rank-one correction `e_r e_cᵀ / ‖e_c‖₁`. The output moves at most
/// twice the input marginal residual in ℓ1.
pub fn round_to_polytope(x: &Matrix, l: &[f64], w: &[f64]) -> TransportPlan {
    let n = l.len();
    let mut f = x.data().to_vec();
    let r = row_sums(x);
    for i in 0..n {
        let s = if r[i] > l[i] { l[i] / r[i] } else { 1.0 };
        f[i * n..(i + 1) * n].iter_mut().for_each(|v| *v *= s);
    }
    let mut c = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            c[j] += f[i * n + j];
        }
    }
    for j in 0..n {
        let s = if c[j] > w[j] { w[j] / c[j] } else { 1.0 };
        for i in 0..n {
            f[i * n + j] *= s;
        }
    }
    let fm = Matrix::from_row_major(n, n, f).expect("square plan");
    let er: Point = row_sums(&fm).iter().zip(l).map(|(a, b)| (b - a).max(0.0)).collect();
    let ec: Point = col_sums(&fm).iter().zip(w).map(|(a, b)| (b - a).max(0.0)).collect();
    let mass: f64 = ec.iter().sum();
    let mut data = fm.data().to_vec();
    if mass > 0.0 {
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] += er[i] * ec[j] / mass;
            }
        }
    }
    TransportPlan::new(Matrix::from_row_major(n, n, data).expect("square plan"), l, w)
}

/// Inner accuracy of each proximal step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerTolRule {
    /// A fixed marginal residual.
    Fixed(f64),
    /// `factor · ε / max C` (so rounding moves the cost by at most `2·factor·ε`).
    Relative(f64),
}

/// Settings of [`proximal_sinkhorn`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxSinkhornConfig {
    /// Inner tolerance rule.
    pub inner_tol: InnerTolRule,
    /// Outer iteration cap.
    pub max_outer: usize,
    /// Sweep cap of one inner solve.
    pub max_inner: usize,
    /// Halve γ until the inner cost explodes, then freeze it.
    pub adaptive_gamma: bool,
    /// Fixed-sweep inner solves starting at this count, doubled whenever the
    /// outer loop stalls with an infeasible inner plan.
    pub doubling: Option<usize>,
    /// Stall threshold on `|Δ cost|`, relative to ε; 0 disables the stall stop.
    pub stall_factor: f64,
}

impl Default for ProxSinkhornConfig {
    fn default() -> Self {
        Self {
            inner_tol: InnerTolRule::Relative(0.05),
            max_outer: 200,
            max_inner: 200_000,
            adaptive_gamma: true,
            doubling: None,
            stall_factor: 1e-2,
        }
    }
}

/// One outer step of [`proximal_sinkhorn`].
#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    /// Outer index.
    pub k: usize,
    /// γ of the step.
    pub gamma: f64,
    /// Inner sweeps.
    pub sweeps: usize,
    /// `<C, x_{k+1}>` of the inner plan.
    pub cost: f64,
    /// `<C, x_k>` of the prior.
    pub prior_cost: f64,
    /// `KL(x_{k+1} ‖ x_k)`.
    pub kl: f64,
    /// Marginal residual of the inner plan.
    pub residual: f64,
    /// Cost of the rounded plan.
    pub rounded_cost: f64,
}

/// Output of [`proximal_sinkhorn`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProxSinkhornResult {
    /// Final rounded plan.
    pub plan: TransportPlan,
    /// Its cost.
    pub cost: f64,
    /// Gradient-method view: `L = γ`, `α = 1/γ`, certificate `ln n / A`.
    pub run: SolverRun,
    /// Outer steps.
    pub outer: Vec<OuterRecord>,
    /// Total inner sweeps.
    pub total_sweeps: usize,
}

impl ProxSinkhornResult {
    /// Writes the outer trace with columns `k,gamma,sweeps,cost,residual`.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{}", crate::trace::TRACE_HEADER)?;
        writeln!(w, "k,gamma,sweeps,cost,residual")?;
        for r in &self.outer {
            writeln!(w, "{},{:e},{},{:e},{:e}", r.k, r.gamma, r.sweeps, r.rounded_cost, r.residual)?;
        }
        Ok(())
    }
}

/// Proximal Sinkhorn: the gradient method with the proximal model
/// `ψ(x, y) = <C, x − y>` and KL prox, so every outer step solves
/// `min <C, x> + γ KL(x ‖ x_k)` by Sinkhorn from the prior `x_k`, starting at
/// `l wᵀ`. With `adaptive_gamma`, γ halves after each step until an inner solve
/// needs more than ten times the first step's sweeps, then stays fixed.
/// Stops when the rounded cost stalls or `ln n / Σ 1/γ_k <= ε`.
pub fn proximal_sinkhorn(
    inst: &OTInstance,
    gamma0: f64,
    eps: f64,
    cfg: &ProxSinkhornConfig,
) -> Result<ProxSinkhornResult> {
    if !(gamma0 > 0.0) || !(eps > 0.0) {
        return Err(Error::InvalidArgument("need gamma0 > 0 and eps > 0".into()));
    }
    let n = inst.n();
    let cmax = inst.max_cost().max(f64::MIN_POSITIVE);
    let tol = match cfg.inner_tol {
        InnerTolRule::Fixed(t) => t,
        InnerTolRule::Relative(f) => f * eps / cmax,
    };
    let floor = eps / (2.0 * (n * n) as f64);
    let r2 = (n as f64).ln().max(f64::MIN_POSITIVE);
    let mut prior = TransportPlan::outer(&inst.l, &inst.w);
    let mut run = SolverRun::at_start(prior.x.data());
    let mut outer = Vec::new();
    let mut gamma = gamma0;
    let mut frozen = !cfg.adaptive_gamma;
    let mut first_sweeps: Option<usize> = None;
    let mut warm: Option<(f64, Point)> = None;
    let mut sweep_cap = cfg.doubling.unwrap_or(cfg.max_inner).max(1);
    let (mut a, mut total) = (0.0, 0usize);
    let mut best = round_to_polytope(&prior.x, &inst.l, &inst.w);
    let mut last_cost = f64::INFINITY;
    for k in 0..cfg.max_outer {
        let log_v0 = warm.as_ref().filter(|(g, _)| *g == gamma).map(|(_, v)| v.as_slice());
        let floored = TransportPlan {
            x: Matrix::from_row_major(n, n, prior.x.data().iter().map(|v| v.max(floor)).collect())?,
            residual: prior.residual,
        };
        let outcome = match sinkhorn_warm(inst, gamma, &floored, tol, sweep_cap, log_v0) {
            Ok(o) => o,
            Err(Error::MaxIterExceeded { sweeps, plan, .. }) if cfg.doubling.is_some() => {
                SinkhornOutcome {
                    plan: *plan,
                    log_v: Vec::new(),
                    sweeps,
                    residuals: Vec::new(),
                }
            }
            Err(e) => return Err(e),
        };
        total += outcome.sweeps;
        let plan = outcome.plan;
        let rounded = round_to_polytope(&plan.x, &inst.l, &inst.w);
        let rounded_cost = rounded.cost(&inst.cost);
        let record = OuterRecord {
            k,
            gamma,
            sweeps: outcome.sweeps,
            cost: plan.cost(&inst.cost),
            prior_cost: prior.cost(&inst.cost),
            kl: kl_divergence(&plan.x, &floored.x),
            residual: plan.residual,
            rounded_cost,
        };
        a += 1.0 / gamma;
        let cert = Certificate::new(r2 / a, 0.0, 0.0);
        run.records.push(IterationRecord {
            k,
            l: gamma,
            alpha: 1.0 / gamma,
            a,
            attempts: 1,
            delta: 0.0,
            delta_tilde: 0.0,
            f_delta: record.cost,
            f: rounded_cost,
            cert: cert.bound_value,
        });
        run.certificate = cert;
        outer.push(record);
        best = rounded;
        if !outcome.log_v.is_empty() {
            warm = Some((gamma, outcome.log_v));
        }
        let stalled =
            cfg.stall_factor > 0.0 && k > 0 && (rounded_cost - last_cost).abs() <= cfg.stall_factor * eps;
        last_cost = rounded_cost;
        prior = plan;
        if cert.bound_value <= eps {
            break;
        }
        if stalled {
            if cfg.doubling.is_some() && prior.residual > tol {
                sweep_cap = sweep_cap.saturating_mul(2);
            } else {
                break;
            }
        }
        if k + 1 == cfg.max_outer {
            return Err(Error::MaxOuterExceeded { outer: cfg.max_outer });
        }
        if !frozen {
            let base = *first_sweeps.get_or_insert(outcome.sweeps);
            if outcome.sweeps > 10 * base {
                frozen = true;
            } else {
                gamma *= 0.5;
            }
        }
    }
    let cost = best.cost(&inst.cost);
    run.x_last = best.x.data().to_vec();
    run.x_bar = run.x_last.clone();
    Ok(ProxSinkhornResult {
        plan: best,
        cost,
        run,
        outer,
        total_sweeps: total,
    })
}

/// Exact OT value by successive shortest paths (Bellman–Ford) on the
/// bipartite flow network with marginals scaled to integers by `scale`.
pub fn exact_ot_oracle(inst: &OTInstance, scale: u64) -> Result<f64> {
    let n = inst.n();
    if scale == 0 || scale > (1u64 << 50) {
        return Err(Error::ScaleError { scale });
    }
    let s = scale as f64;
    let to_int = |m: &[f64]| -> Result<Vec<i64>> {
        m.iter()
            .map(|v| {
                let t = v * s;
                let r = t.round();
                if (t - r).abs() > 1e-9 * s.max(1.0) {
                    Err(Error::ScaleError { scale })
                } else {
                    Ok(r as i64)
                }
            })
            .collect()
    };
    let supply = to_int(&inst.l)?;
    let demand = to_int(&inst.w)?;
    if supply.iter().sum::<i64>() != demand.iter().sum::<i64>() {
        return Err(Error::ScaleError { scale });
    }
    let mut g = FlowGraph::new(2 * n + 2);
    let (src, dst) = (2 * n, 2 * n + 1);
    for i in 0..n {
        g.add_edge(src, i, supply[i], 0.0);
        g.add_edge(n + i, dst, demand[i], 0.0);
        for j in 0..n {
            g.add_edge(i, n + j, i64::MAX / 4, inst.cost.row(i)[j]);
        }
    }
    Ok(g.min_cost_flow(src, dst) / s)
}

struct Edge {
    to: usize,
    cap: i64,
    cost: f64,
}

struct FlowGraph {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl FlowGraph {
    fn new(n: usize) -> Self {
        Self {
            edges: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap, cost });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: 0, cost: -cost });
    }

    /// Pushes the maximum flow along successive cheapest paths; returns its cost.
    fn min_cost_flow(&mut self, src: usize, dst: usize) -> f64 {
        let nv = self.adj.len();
        let mut total = 0.0;
        loop {
            let mut dist = vec![f64::INFINITY; nv];
            let mut via: Vec<Option<usize>> = vec![None; nv];
            dist[src] = 0.0;
            for _ in 0..nv {
                let mut changed = false;
                for u in 0..nv {
                    if dist[u] == f64::INFINITY {
                        continue;
                    }
                    for &e in &self.adj[u] {
                        let edge = &self.edges[e];
                        let nd = dist[u] + edge.cost;
                        if edge.cap > 0 && nd < dist[edge.to] - 1e-15 {
                            dist[edge.to] = nd;
                            via[edge.to] = Some(e);
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            if dist[dst] == f64::INFINITY {
                return total;
            }
            let mut push = i64::MAX;
            let mut v = dst;
            while let Some(e) = via[v] {
                push = push.min(self.edges[e].cap);
                v = self.edges[e ^ 1].to;
            }
            let mut v = dst;
            while let Some(e) = via[v] {
                self.edges[e].cap -= push;
                self.edges[e ^ 1].cap += push;
                v = self.edges[e ^ 1].to;
            }
            total += push as f64 * dist[dst];
        }
    }
}
