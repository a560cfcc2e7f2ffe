//! Superposition `f(x) = max_k g_k(x)` of smooth functions.
//!
//! The prox subproblem `min_x α·max_k ℓ_k(x) + V[z](x)` over affine minorants
//! `ℓ_k` is solved through its dual over multipliers `λ` in the simplex:
//! `x(λ)` is the closed-form prox of `<Σ λ_k ∇g_k(y), x>`, and the dual is
//! maximized by accelerated projected gradient ascent with backtracking.
//! Since `Σ λ_k ℓ_k <= max_k ℓ_k`, the point `x(λ)` is an exact minimizer of a
//! lower model of the objective, so it is a δ̃-solution with
//! `δ̃ = α·(max_k ℓ_k(x) − Σ λ_k ℓ_k(x))`.

use crate::error::{Error, Result};
use crate::linalg::{dot, sub, Point};
use crate::model::{Local, LocalModel, MinModel, ProxPoint};
use crate::prox::linear_prox;
use crate::set::{project_simplex, FeasibleSet};
use crate::setup::ProxSetup;

use super::SharedFunction;

/// Floor on the requested subproblem accuracy.
const MIN_TARGET: f64 = 1e-13;
/// Hard cap on dual iterations.
const MAX_DUAL_ITERS: usize = 1_000_000;

/// `f(x) = max_k g_k(x)` with each `g_k` `L_k`-smooth.
pub struct SuperpositionProblem {
    /// Inner functions.
    pub pieces: Vec<SharedFunction>,
    /// Their smoothness constants.
    pub lipschitz: Vec<f64>,
}

/// `ψ(x, y) = max_k {g_k(y) + <∇g_k(y), x − y>} − f(y)`, `δ = 0`, `L = Σ L_k`.
pub struct SuperpositionModel {
    p: SuperpositionProblem,
}

/// Model of a coordinate-max superposition.
pub fn make_superposition_model(p: SuperpositionProblem) -> Result<SuperpositionModel> {
    if p.pieces.is_empty() || p.pieces.len() != p.lipschitz.len() {
        return Err(Error::InvalidArgument(
            "superposition needs m >= 1 pieces with one constant each".into(),
        ));
    }
    let n = p.pieces[0].dim();
    if p.pieces.iter().any(|g| g.dim() != n) {
        return Err(Error::InvalidArgument("pieces disagree on dimension".into()));
    }
    Ok(SuperpositionModel { p })
}

struct MaxAffine {
    center: Point,
    values: Vec<f64>,
    grads: Vec<Point>,
    f_y: f64,
}

impl MaxAffine {
    fn pieces_at(&self, x: &[f64]) -> Vec<f64> {
        let d = sub(x, &self.center);
        self.values
            .iter()
            .zip(&self.grads)
            .map(|(v, g)| v + dot(g, &d))
            .collect()
    }

    fn mixed_grad(&self, lambda: &[f64]) -> Point {
        let mut g = vec![0.0; self.center.len()];
        for (l, gk) in lambda.iter().zip(&self.grads) {
            if *l != 0.0 {
                for (gi, v) in g.iter_mut().zip(gk) {
                    *gi += l * v;
                }
            }
        }
        g
    }
}

impl LocalModel for MaxAffine {
    fn center(&self) -> &[f64] {
        &self.center
    }
    fn f_delta(&self) -> f64 {
        self.f_y
    }
    fn delta(&self) -> f64 {
        0.0
    }
    fn psi(&self, x: &[f64]) -> f64 {
        self.pieces_at(x).into_iter().fold(f64::NEG_INFINITY, f64::max) - self.f_y
    }
    fn prox_step(
        &self,
        z: &[f64],
        alpha: f64,
        setup: &ProxSetup,
        set: &FeasibleSet,
        delta_tilde: f64,
    ) -> Result<ProxPoint> {
        let m = self.values.len();
        let target = delta_tilde.max(MIN_TARGET);
        let primal = |lambda: &[f64]| -> Result<(Point, Vec<f64>, f64, f64)> {
            let x = linear_prox(setup, set, z, alpha, &self.mixed_grad(lambda), None)?;
            let ell = self.pieces_at(&x);
            let mixed = dot(lambda, &ell);
            let dual = alpha * mixed + setup.bregman(z, &x)?;
            let deficit = alpha * (ell.iter().copied().fold(f64::NEG_INFINITY, f64::max) - mixed);
            Ok((x, ell, dual, deficit.max(0.0)))
        };
        // Start from the piece active at z.
        let mut lambda = vec![0.0; m];
        let ell_z = self.pieces_at(z);
        let top = (0..m).max_by(|&i, &j| ell_z[i].total_cmp(&ell_z[j])).unwrap_or(0);
        lambda[top] = 1.0;
        let (mut best_x, _, _, mut best_def) = primal(&lambda)?;
        if best_def <= target || m == 1 {
            return Ok(ProxPoint {
                x: best_x,
                delta_tilde: best_def,
            });
        }
        let cap = ((10.0 * set.dim() as f64 / target).ceil() as usize).clamp(1000, MAX_DUAL_ITERS);
        let mut prev = lambda.clone();
        let mut t = 1.0f64;
        let mut lip = 1.0f64;
        for _ in 0..cap {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            let mu: Vec<f64> = lambda
                .iter()
                .zip(&prev)
                .map(|(a, b)| a + beta * (a - b))
                .collect();
            let mu = project_simplex(&mu);
            let (_, ell_mu, d_mu, _) = primal(&mu)?;
            let grad: Vec<f64> = ell_mu.iter().map(|v| alpha * v).collect();
            // Backtracking on the concave dual: accept when the quadratic minorant holds.
            let next = loop {
                let cand: Vec<f64> = mu.iter().zip(&grad).map(|(a, g)| a + g / lip).collect();
                let cand = project_simplex(&cand);
                let (_, _, d_c, _) = primal(&cand)?;
                let step = sub(&cand, &mu);
                let bound = d_mu + dot(&grad, &step) - 0.5 * lip * dot(&step, &step);
                if d_c >= bound - 1e-15 * d_mu.abs().max(1.0) || lip > 1e300 {
                    break cand;
                }
                lip *= 2.0;
            };
            prev = std::mem::replace(&mut lambda, next);
            t = t_next;
            let (x, _, _, def) = primal(&lambda)?;
            if def < best_def {
                best_def = def;
                best_x = x;
            }
            if best_def <= target {
                return Ok(ProxPoint {
                    x: best_x,
                    delta_tilde: best_def,
                });
            }
            lip *= 0.9;
        }
        if delta_tilde > 0.0 && best_def > delta_tilde {
            return Err(Error::InnerSolveFailure {
                target: delta_tilde,
                achieved: best_def,
                iterations: cap,
            });
        }
        Ok(ProxPoint {
            x: best_x,
            delta_tilde: best_def,
        })
    }
    fn linear_part(&self) -> Option<&[f64]> {
        (self.grads.len() == 1).then(|| self.grads[0].as_slice())
    }
}

impl MinModel for SuperpositionModel {
    fn dim(&self) -> usize {
        self.p.pieces[0].dim()
    }
    fn f_value(&self, x: &[f64]) -> f64 {
        self.p
            .pieces
            .iter()
            .map(|g| g.value(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }
    fn at(&self, y: &[f64]) -> Result<Local<'_>> {
        let values: Vec<f64> = self.p.pieces.iter().map(|g| g.value(y)).collect();
        let f_y = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Box::new(MaxAffine {
            center: y.to_vec(),
            grads: self.p.pieces.iter().map(|g| g.gradient(y)).collect(),
            values,
            f_y,
        }))
    }
    fn declared_delta(&self) -> f64 {
        0.0
    }
    fn declared_l(&self) -> f64 {
        self.p.lipschitz.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::validate_min_model;
    use crate::zoo::{make_smooth_model, FnFunction, QuadraticProblem};

    fn coordinate(i: usize) -> SharedFunction {
        Arc::new(FnFunction::new(
            2,
            move |x| x[i],
            move |_| {
                let mut g = vec![0.0; 2];
                g[i] = 1.0;
                g
            },
        ))
    }

    #[test]
    fn max_of_coordinates_psi() {
        let m = make_superposition_model(SuperpositionProblem {
            pieces: vec![coordinate(0), coordinate(1)],
            lipschitz: vec![0.0, 0.0],
        })
        .unwrap();
        assert_eq!(m.psi(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), -1.0);
    }

    #[test]
    fn single_piece_reduces_to_smooth_model() {
        let q: SharedFunction = Arc::new(QuadraticProblem::centered(&[1.0, -1.0]));
        let sup = make_superposition_model(SuperpositionProblem {
            pieces: vec![q.clone()],
            lipschitz: vec![1.0],
        })
        .unwrap();
        let smooth = make_smooth_model(q, 1.0);
        let e = ProxSetup::euclidean();
        let set = FeasibleSet::WholeSpace(2);
        let (y, z) = ([0.3, 0.1], [0.0, 2.0]);
        assert_eq!(
            sup.prox_step(&y, &z, 0.5, &e, &set, 0.0).unwrap().x,
            smooth.prox_step(&y, &z, 0.5, &e, &set, 0.0).unwrap().x
        );
        assert_eq!(sup.psi(&z, &y).unwrap(), smooth.psi(&z, &y).unwrap());
    }

    #[test]
    fn prox_reaches_kink_solution() {
        // min α·max(x1, x2) + ½‖x − z‖² with z = (1, 1), α = 1 is x = (0.5, 0.5).
        let m = make_superposition_model(SuperpositionProblem {
            pieces: vec![coordinate(0), coordinate(1)],
            lipschitz: vec![0.0, 0.0],
        })
        .unwrap();
        let p = m
            .prox_step(&[0.0, 0.0], &[1.0, 1.0], 1.0, &ProxSetup::euclidean(), &FeasibleSet::WholeSpace(2), 1e-10)
            .unwrap();
        assert!((p.x[0] - 0.5).abs() < 1e-4 && (p.x[1] - 0.5).abs() < 1e-4, "{:?}", p.x);
        assert!(p.delta_tilde <= 1e-10);
    }

    #[test]
    fn sandwich_holds_with_summed_constants() {
        let a: SharedFunction = Arc::new(QuadraticProblem::centered(&[1.0, 0.0]));
        let b: SharedFunction = Arc::new(QuadraticProblem::centered(&[-1.0, 0.5]));
        let m = make_superposition_model(SuperpositionProblem {
            pieces: vec![a, b],
            lipschitz: vec![1.0, 1.0],
        })
        .unwrap();
        let r = validate_min_model(&m, &ProxSetup::euclidean(), &FeasibleSet::uniform_box(2, -1.0, 1.0).unwrap(), 1000, 9)
            .unwrap();
        assert!(r.passed(), "{r}");
    }
}
