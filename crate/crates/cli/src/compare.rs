//! Total inner-iteration counts of plain entropic Sinkhorn against proximal
//! Sinkhorn over a grid of γ.

use std::io::{self, Write};

use imopt::ot::sinkhorn_warm;
use imopt::{
    proximal_sinkhorn, round_to_polytope, Error, OTInstance, ProxSinkhornConfig, Result,
    TransportPlan,
};

/// Sweep cap of the plain Sinkhorn run.
const PLAIN_MAX_SWEEPS: usize = 10_000_000;

/// One γ of the comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    /// Proximal γ (held fixed).
    pub gamma: f64,
    /// Outer proximal steps.
    pub outer: usize,
    /// Total Sinkhorn sweeps of the proximal run.
    pub prox_sweeps: usize,
    /// Rounded cost of the proximal run.
    pub prox_cost: f64,
    /// Sweeps of plain Sinkhorn (same for every row).
    pub plain_sweeps: usize,
    /// Rounded cost of plain Sinkhorn.
    pub plain_cost: f64,
}

/// The comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareTable {
    /// Target accuracy.
    pub eps: f64,
    /// γ used by plain Sinkhorn.
    pub plain_gamma: f64,
    /// One row per grid value.
    pub rows: Vec<CompareRow>,
}

impl CompareTable {
    /// Writes a versioned CSV with one row per γ.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "{}", imopt::trace::TRACE_HEADER)?;
        writeln!(w, "# eps={:e} plain_gamma={:e}", self.eps, self.plain_gamma)?;
        writeln!(w, "gamma,outer,prox_sweeps,prox_cost,plain_sweeps,plain_cost")?;
        for r in &self.rows {
            writeln!(
                w,
                "{:e},{},{},{:e},{},{:e}",
                r.gamma, r.outer, r.prox_sweeps, r.prox_cost, r.plain_sweeps, r.plain_cost
            )?;
        }
        Ok(())
    }
}

/// `γ = ε / (4 ln n)` (`ε/4` for `n = 1`), the usual entropic choice for an
/// ε-accurate plan.
pub fn plain_gamma(n: usize, eps: f64) -> f64 {
    let ln_n = (n as f64).ln();
    if ln_n > 0.0 {
        eps / (4.0 * ln_n)
    } else {
        0.25 * eps
    }
}

/// Plain Sinkhorn at [`plain_gamma`] with marginal tolerance `ε/(8 max C)`,
/// rounded onto the polytope. Returns the plan and the sweep count.
pub fn plain_sinkhorn(inst: &OTInstance, eps: f64) -> Result<(TransportPlan, usize)> {
    let gamma = plain_gamma(inst.n(), eps);
    let tol = eps / (8.0 * inst.max_cost().max(f64::MIN_POSITIVE));
    let prior = TransportPlan::outer(&inst.l, &inst.w);
    let out = sinkhorn_warm(inst, gamma, &prior, tol, PLAIN_MAX_SWEEPS, None)?;
    Ok((round_to_polytope(&out.plan.x, &inst.l, &inst.w), out.sweeps))
}

/// Builds the comparison table; an empty grid or a non-positive γ is an
/// [`Error::InvalidArgument`].
pub fn compare_sinkhorn(inst: &OTInstance, eps: f64, gamma_grid: &[f64]) -> Result<CompareTable> {
    if gamma_grid.is_empty() {
        return Err(Error::InvalidArgument("gamma grid is empty".into()));
    }
    if gamma_grid.iter().any(|g| !(*g > 0.0)) || !(eps > 0.0) {
        return Err(Error::InvalidArgument("gamma values and eps must be positive".into()));
    }
    let (plain, plain_sweeps) = plain_sinkhorn(inst, eps)?;
    let plain_cost = plain.cost(&inst.cost);
    let cfg = ProxSinkhornConfig {
        adaptive_gamma: false,
        max_outer: 10_000_000,
        stall_factor: 0.0,
        ..ProxSinkhornConfig::default()
    };
    let rows = gamma_grid
        .iter()
        .map(|&gamma| {
            let res = proximal_sinkhorn(inst, gamma, eps, &cfg)?;
            Ok(CompareRow {
                gamma,
                outer: res.outer.len(),
                prox_sweeps: res.total_sweeps,
                prox_cost: res.cost,
                plain_sweeps,
                plain_cost,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CompareTable {
        eps,
        plain_gamma: plain_gamma(inst.n(), eps),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use imopt::Matrix;

    #[test]
    fn empty_grid_is_rejected() {
        let inst = OTInstance::new(Matrix::zeros(1, 1), vec![1.0], vec![1.0]).unwrap();
        assert!(matches!(compare_sinkhorn(&inst, 1e-3, &[]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn plain_gamma_values() {
        assert_eq!(plain_gamma(1, 1e-2), 2.5e-3);
        assert!((plain_gamma(4, 1e-2) - 1e-2 / (8.0 * 2f64.ln())).abs() < 1e-18);
    }

    #[test]
    fn large_gamma_needs_about_gamma_over_eps_outer_steps() {
        let inst = OTInstance::new(
            Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
            vec![0.5, 0.5],
            vec![0.5, 0.5],
        )
        .unwrap();
        let eps = 1e-2;
        let table = compare_sinkhorn(&inst, eps, &[1.0, 4.0]).unwrap();
        for r in &table.rows {
            // Outer stop `ln n / (k/γ) <= ε`.
            let expected = (r.gamma * 2f64.ln() / eps).ceil() as usize;
            assert!(r.outer.abs_diff(expected) <= 1, "{r:?} vs {expected}");
            assert!(r.prox_cost < eps && r.plain_cost < eps);
        }
    }
}
