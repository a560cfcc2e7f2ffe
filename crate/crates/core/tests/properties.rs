//! Property tests of the invariants every solver and model must keep.

use std::sync::Arc;

use imopt::linalg::{dist2_sq, dot, norm1, sub};
use imopt::zoo::*;
use imopt::*;
use proptest::prelude::*;

fn unit_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, n)
}

fn simplex_point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01..1.0f64, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

/// A diagonal quadratic with spectrum in `[0.1, 4]` and minimizer inside `[-1, 1]^n`.
#[derive(Debug, Clone)]
struct Quad {
    d: Vec<f64>,
    x_star: Vec<f64>,
}

impl Quad {
    fn function(&self) -> QuadraticProblem {
        let b: Vec<f64> = self.d.iter().zip(&self.x_star).map(|(d, x)| d * x).collect();
        let c = 0.5 * dot(&b, &self.x_star);
        QuadraticProblem::new(Matrix::diag(&self.d), b, c).unwrap()
    }

    fn l(&self) -> f64 {
        self.d.iter().copied().fold(0.0, f64::max)
    }
}

fn quad(n: usize) -> impl Strategy<Value = Quad> {
    (
        prop::collection::vec(0.1..4.0f64, n),
        prop::collection::vec(-0.9..0.9f64, n),
    )
        .prop_map(|(d, x_star)| Quad { d, x_star })
}

/// Injected model and prox errors.
fn injection() -> impl Strategy<Value = (f64, f64)> {
    prop_oneof![Just((0.0, 0.0)), (0.0..1e-3f64, 0.0..1e-3f64)]
}

mod bregman {
    use super::*;

    proptest! {
        #[test]
        fn three_point_identity_euclidean(x in unit_vec(4), y in unit_vec(4), z in unit_vec(4)) {
            let s = ProxSetup::euclidean();
            let lhs = dot(&sub(&s.d_grad(&y), &s.d_grad(&z)), &sub(&y, &x));
            let rhs = s.bregman(&z, &y).unwrap() + s.bregman(&y, &x).unwrap() - s.bregman(&z, &x).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10);
        }

        #[test]
        fn three_point_identity_entropy(x in simplex_point(4), y in simplex_point(4), z in simplex_point(4)) {
            let s = ProxSetup::entropy();
            let lhs = dot(&sub(&s.d_grad(&y), &s.d_grad(&z)), &sub(&y, &x));
            let rhs = s.bregman(&z, &y).unwrap() + s.bregman(&y, &x).unwrap() - s.bregman(&z, &x).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10);
        }

        #[test]
        fn euclidean_divergence_is_half_squared_distance(x in unit_vec(5), y in unit_vec(5)) {
            let s = ProxSetup::euclidean();
            prop_assert_eq!(s.bregman(&y, &x).unwrap(), 0.5 * dist2_sq(&x, &y));
            prop_assert_eq!(s.bregman(&x, &x).unwrap(), 0.0);
        }

        #[test]
        fn entropy_divergence_satisfies_pinsker(x in simplex_point(5), y in simplex_point(5)) {
            let s = ProxSetup::entropy();
            let v = s.bregman(&y, &x).unwrap();
            prop_assert!(v >= 0.0);
            prop_assert!(v >= 0.5 * norm1(&sub(&x, &y)).powi(2) - 1e-12);
            prop_assert!(s.bregman(&x, &x).unwrap().abs() <= 1e-15);
        }
    }
}

mod models {
    use super::*;

    proptest! {
        #[test]
        fn smooth_psi_matches_finite_differences(q in quad(3), x in unit_vec(3), y in unit_vec(3)) {
            let f = q.function();
            let m = make_smooth_model(Arc::new(f.clone()), q.l());
            let h = 1e-5;
            let at = |t: f64| -> Vec<f64> { y.iter().zip(&x).map(|(a, b)| a + t * (b - a)).collect() };
            let fd = (f.value(&at(h)) - f.value(&at(-h))) / (2.0 * h);
            let psi = m.psi(&x, &y).unwrap();
            prop_assert!((psi - fd).abs() <= 1e-6 * fd.abs().max(1.0), "psi {psi} fd {fd}");
            prop_assert_eq!(m.psi(&x, &x).unwrap(), 0.0);
        }

        #[test]
        fn smooth_prox_is_first_order_stationary(q in quad(3), y in unit_vec(3), z in unit_vec(3), alpha in 0.1..2.0f64) {
            let m = make_smooth_model(Arc::new(q.function()), q.l());
            let eu = ProxSetup::euclidean();
            let p = m.prox_step(&y, &z, alpha, &eu, &FeasibleSet::WholeSpace(3), 0.0).unwrap();
            let phi = |x: &[f64]| alpha * m.psi(x, &y).unwrap() + eu.bregman(&z, x).unwrap();
            let h = 1e-4;
            for i in 0..3 {
                let mut up = p.x.clone();
                let mut down = p.x.clone();
                up[i] += h;
                down[i] -= h;
                let g = (phi(&up) - phi(&down)) / (2.0 * h);
                prop_assert!(g.abs() <= 1e-8, "coordinate {i}: {g:e}");
            }
        }

        #[test]
        fn moreau_envelope_lies_below_f(q in quad(2), x in unit_vec(2), l in 0.5..4.0f64) {
            let f = q.function();
            let mu = q.d.iter().copied().fold(f64::INFINITY, f64::min);
            let f_star = f.value(&q.x_star);
            let m = make_inexact_linearization_model(
                InnerProblem::Moreau { f: Arc::new(f.clone()), l_f: q.l(), mu_f: mu, l, diameter: 4.0 },
                1e-12,
            )
            .unwrap();
            prop_assert!(m.f_value(&x) <= f.value(&x) + 1e-9);
            prop_assert!(m.f_value(&x) >= f_star - 1e-9);
        }

        #[test]
        fn holder_interpolation(
            a in unit_vec(3),
            x in unit_vec(3),
            y in unit_vec(3),
            z in unit_vec(3),
            nu in 0.0..1.0f64,
            small in any::<bool>(),
        ) {
            let delta = if small { 1e-3 } else { 1e-1 };
            let op = HolderSignOperator { a, nu };
            let l = holder_l(nu, op.l_nu(), delta);
            let lhs = dot(&sub(&op.apply(&z), &op.apply(&y)), &sub(&z, &x));
            let rhs = 0.5 * l * (dist2_sq(&z, &x) + dist2_sq(&z, &y)) + delta;
            prop_assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
        }

        #[test]
        fn game_operator_psi_is_antisymmetric(a in prop::collection::vec(-1.0..1.0f64, 6), x in unit_vec(5), y in unit_vec(5)) {
            let a = Matrix::from_row_major(2, 3, a).unwrap();
            let m = make_vi_operator_model(
                Arc::new(MatrixGameOperator { a }),
                OperatorConstants::Lipschitz(3.0),
                None,
            )
            .unwrap();
            prop_assert!((m.psi(&x, &y).unwrap() + m.psi(&y, &x).unwrap()).abs() <= 1e-14);
        }
    }
}

mod gradient_method {
    use super::*;

    fn run(q: &Quad, l0: f64, adaptive: bool, (delta, dt): (f64, f64), n: usize) -> SolverRun {
        let base = make_smooth_model(Arc::new(q.function()), q.l());
        let shifted = ShiftedModel::new(&base, delta);
        let model = PerturbedProxModel::new(&shifted, 7);
        let dim = q.d.len();
        let set = FeasibleSet::uniform_box(dim, -1.0, 1.0).unwrap();
        let mut cfg = GmConfig::new(l0, n).with_budget(InexactnessBudget::new(delta, dt).unwrap());
        cfg.adaptive = adaptive;
        gm_solve(&model, &ProxSetup::euclidean(), &set, &vec![1.0; dim], 2.0 * dim as f64, &cfg).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn certificate_holds_at_every_n(q in quad(3), l_scale in 0.05..1.0f64, adaptive in any::<bool>(), inj in injection()) {
            let l0 = if adaptive { l_scale * q.l() } else { q.l() };
            let f_star = q.function().value(&q.x_star);
            let r = run(&q, l0, adaptive, inj, 50);
            prop_assert_eq!(r.iterations(), 50);
            for rec in &r.records {
                prop_assert!(rec.f - f_star <= rec.cert + 1e-9, "k={}: {} > {}", rec.k, rec.f - f_star, rec.cert);
            }
        }

        #[test]
        fn attempts_and_step_sizes(q in quad(3), l_scale in 0.05..1.0f64, inj in injection()) {
            let l0 = l_scale * q.l();
            let r = run(&q, l0, true, inj, 40);
            let n = r.iterations() as f64;
            prop_assert!(r.total_attempts() as f64 <= 2.0 * n + (q.l() / l0).log2() + 1.0);
            let mut a_prev = 0.0;
            for rec in &r.records {
                prop_assert_eq!(rec.alpha, 1.0 / rec.l);
                prop_assert!(rec.a > a_prev);
                a_prev = rec.a;
            }
        }

        #[test]
        fn per_iteration_descent_at_the_minimizer(q in quad(3), l_scale in 0.05..1.0f64, inj in injection()) {
            let f = q.function();
            let r = run(&q, l_scale * q.l(), true, inj, 30);
            let eu = ProxSetup::euclidean();
            for (k, rec) in r.records.iter().enumerate() {
                let lhs = rec.alpha * (f.value(&r.iterates[k + 1]) - f.value(&q.x_star));
                let rhs = eu.bregman(&r.iterates[k], &q.x_star).unwrap()
                    - eu.bregman(&r.iterates[k + 1], &q.x_star).unwrap()
                    + rec.alpha * rec.delta_tilde
                    + 2.0 * rec.alpha * rec.delta;
                // The exit test accepts steps within a relative slack of 1e-12.
                prop_assert!(lhs <= rhs + 1e-10, "k={k}: {lhs} > {rhs}");
            }
        }
    }
}

mod fast_gradient_method {
    use super::*;

    fn run(q: &Quad, l0: f64, (delta, dt): (f64, f64), n: usize) -> SolverRun {
        let base = make_smooth_model(Arc::new(q.function()), q.l());
        let shifted = ShiftedModel::new(&base, delta);
        let model = PerturbedProxModel::new(&shifted, 11);
        let dim = q.d.len();
        let set = FeasibleSet::uniform_box(dim, -1.0, 1.0).unwrap();
        let cfg = FgmConfig::new(l0, n).with_budget(InexactnessBudget::new(delta, dt).unwrap());
        fgm_solve(&model, &ProxSetup::euclidean(), &set, &vec![-1.0; dim], 2.0 * dim as f64, &cfg).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn certificate_holds_at_every_n(q in quad(3), l_scale in 0.05..1.0f64, inj in injection()) {
            let f_star = q.function().value(&q.x_star);
            let r = run(&q, l_scale * q.l(), inj, 40);
            for rec in &r.records {
                prop_assert!(rec.f - f_star <= rec.cert + 1e-9, "k={}: {} > {}", rec.k, rec.f - f_star, rec.cert);
            }
        }

        #[test]
        fn alpha_recursion_membership_and_attempts(q in quad(4), l_scale in 0.05..1.0f64, inj in injection()) {
            let l0 = l_scale * q.l();
            let r = run(&q, l0, inj, 40);
            let mut a_prev = 0.0;
            for rec in &r.records {
                let res = rec.l * rec.alpha * rec.alpha - rec.alpha - a_prev;
                prop_assert!(res.abs() <= 1e-10 * rec.a.max(1.0), "k={}: residual {res:e}", rec.k);
                prop_assert_eq!(rec.alpha, fgm_alpha(rec.l, a_prev));
                a_prev = rec.a;
            }
            let set = FeasibleSet::uniform_box(4, -1.0, 1.0).unwrap();
            for x in &r.iterates {
                prop_assert!(set.contains(x, 1e-10));
            }
            let n = r.iterations() as f64;
            prop_assert!(r.total_attempts() as f64 <= 4.0 * n + (q.l() / l0).log2() + 1.0);
        }
    }
}

mod mirror_prox {
    use super::*;

    /// `g(x) = M(x − x*)` with `M = sI + skew`, so `x*` solves the VI on the box.
    fn affine(s: f64, skew: &[f64], x_star: &[f64]) -> (OperatorModel, f64) {
        let n = x_star.len();
        let mut m = Matrix::identity(n).data().iter().map(|v| s * v).collect::<Vec<_>>();
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                m[i * n + j] += skew[k];
                m[j * n + i] -= skew[k];
                k += 1;
            }
        }
        let m = Matrix::from_row_major(n, n, m).unwrap();
        let l = m.spectral_norm();
        let q: Vec<f64> = m.mul_vec(x_star).iter().map(|v| -v).collect();
        let op = AffineOperator { m, q };
        (make_vi_operator_model(Arc::new(op), OperatorConstants::Lipschitz(l), None).unwrap(), l)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn key_inequality_and_bookkeeping(
            s in 0.0..1.0f64,
            skew in prop::collection::vec(-1.0..1.0f64, 3),
            x_star in prop::collection::vec(-0.9..0.9f64, 3),
            l_scale in 0.05..1.0f64,
        ) {
            let (model, l) = affine(s, &skew, &x_star);
            let set = FeasibleSet::uniform_box(3, -1.0, 1.0).unwrap();
            let eu = ProxSetup::euclidean();
            let l0 = l_scale * l.max(1e-3);
            let params = MpParams { eps: 1e-3, delta: 0.0, l0, max_iter: 60, delta_tilde: 0.0, v_max: 6.0 };
            let run = mirror_prox_solve(&model, &eu, &set, &params).unwrap();
            let mut z = run.z0.clone();
            let mut s_prev = 0.0;
            let mut weighted = vec![0.0; 3];
            for rec in &run.records {
                let lhs = -model.psi(&x_star, &rec.w).unwrap();
                let rhs = rec.l * (eu.bregman(&z, &x_star).unwrap() - eu.bregman(&rec.z, &x_star).unwrap())
                    + params.delta
                    + 2.0 * rec.delta_tilde;
                prop_assert!(lhs <= rhs + 1e-12, "k={}: {lhs} > {rhs}", rec.k);
                prop_assert!(rec.s > s_prev);
                prop_assert!((rec.s - s_prev - 1.0 / rec.l).abs() <= 1e-12 * rec.s);
                s_prev = rec.s;
                for i in 0..3 {
                    weighted[i] += rec.w[i] / rec.l;
                }
                z = rec.z.clone();
            }
            for i in 0..3 {
                prop_assert!((weighted[i] / run.s_n - run.w_hat[i]).abs() <= 1e-12);
            }
            let n = run.iterations() as f64;
            prop_assert!(run.total_attempts() as f64 <= 4.0 * n + (l / l0).log2().max(0.0) + 1.0);
        }

        #[test]
        fn game_certificate_over_vertices(a in prop::collection::vec(-1.0..1.0f64, 6)) {
            let a = Matrix::from_row_major(2, 3, a).unwrap();
            let l = a.max_abs().max(1e-3);
            let model = make_vi_operator_model(
                Arc::new(MatrixGameOperator { a }),
                OperatorConstants::Lipschitz(l),
                None,
            )
            .unwrap();
            let set = FeasibleSet::ProductOfSimplices(2, 3);
            let setup = ProxSetup::entropy();
            let v_max = 2f64.ln() + 3f64.ln();
            let params = MpParams { eps: 1e-2, delta: 0.0, l0: l, max_iter: 300, delta_tilde: 0.0, v_max };
            let run = mirror_prox_solve(&model, &setup, &set, &params).unwrap();
            let l_max = run.records.iter().map(|r| r.l).fold(0.0, f64::max);
            let bound = 2.0 * l_max * v_max / run.iterations() as f64;
            let worst = set
                .vertices()
                .unwrap()
                .iter()
                .map(|u| model.psi(&run.w_hat, u).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(worst <= bound + 1e-9, "{worst} > {bound}");
        }
    }
}

mod transport {
    use super::*;

    /// A random instance with marginals on the grid `k/60`.
    fn instance(n: usize) -> impl Strategy<Value = OTInstance> {
        let weights = || prop::collection::vec(1u32..10, n);
        (prop::collection::vec(0.0..1.0f64, n * n), weights(), weights()).prop_map(move |(c, a, b)| {
            let to_grid = |v: Vec<u32>| -> Vec<f64> {
                let total: u32 = v.iter().sum();
                let mut k: Vec<u32> = v.iter().map(|x| x * 60 / total).collect();
                let missing = 60 - k.iter().sum::<u32>();
                k[0] += missing;
                k.into_iter().map(|x| x as f64 / 60.0).collect()
            };
            OTInstance::new(Matrix::from_row_major(n, n, c).unwrap(), to_grid(a), to_grid(b)).unwrap()
        })
    }

    fn sized_instance() -> impl Strategy<Value = OTInstance> {
        (2usize..=6).prop_flat_map(instance)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn sinkhorn_residuals_decrease_and_plan_stays_positive(inst in sized_instance(), gamma in 0.05..1.0f64) {
            let prior = TransportPlan::outer(&inst.l, &inst.w);
            let out = imopt::ot::sinkhorn_warm(&inst, gamma, &prior, 1e-10, 100_000, None).unwrap();
            for w in out.residuals.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
            }
            prop_assert!(out.plan.x.data().iter().all(|v| *v > 0.0));
        }

        #[test]
        fn rounding_is_feasible_and_close(inst in sized_instance(), noise in prop::collection::vec(-0.02..0.02f64, 36)) {
            let n = inst.n();
            let exact = TransportPlan::outer(&inst.l, &inst.w);
            let perturbed: Vec<f64> = exact.x.data().iter().zip(&noise).map(|(v, e)| (v + e).max(0.0)).collect();
            let x = Matrix::from_row_major(n, n, perturbed).unwrap();
            let r = imopt::ot::marginal_residual(&x, &inst.l, &inst.w);
            let out = round_to_polytope(&x, &inst.l, &inst.w);
            prop_assert!(imopt::ot::marginal_residual(&out.x, &inst.l, &inst.w) <= 1e-12);
            prop_assert!(out.x.data().iter().all(|v| *v >= 0.0));
            let moved: f64 = out.x.data().iter().zip(x.data()).map(|(a, b)| (a - b).abs()).sum();
            prop_assert!(moved <= 2.0 * r + 1e-12, "moved {moved} > 2·{r}");
        }

        #[test]
        fn proximal_steps_descend(inst in sized_instance(), gamma in 0.01..0.05f64) {
            let eps = 1e-3;
            let cfg = ProxSinkhornConfig { adaptive_gamma: false, max_outer: 500, stall_factor: 0.0, ..Default::default() };
            let res = proximal_sinkhorn(&inst, gamma, eps, &cfg).unwrap();
            let n = inst.n() as f64;
            // Each inner solve sees the prior floored at ε/(2n²), which moves at most ε/2 of mass.
            let floor_mass = 0.5 * eps;
            let spread = inst.max_cost() + gamma * (2.0 * n * n / eps).ln();
            let mut prev_res = 0.0;
            for o in &res.outer {
                let slack = (o.residual + prev_res + floor_mass) * spread;
                prop_assert!(
                    o.cost + o.gamma * o.kl <= o.prior_cost + slack + 1e-12,
                    "k={}: {} + {}·{} vs {} + {slack:e}", o.k, o.cost, o.gamma, o.kl, o.prior_cost
                );
                prev_res = o.residual;
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn proximal_sinkhorn_agrees_with_the_exact_oracle(inst in sized_instance()) {
            let eps = 1e-3;
            let res = proximal_sinkhorn(&inst, inst.max_cost().max(1e-3), eps, &ProxSinkhornConfig::default()).unwrap();
            let exact = exact_ot_oracle(&inst, 60).unwrap();
            prop_assert!((res.cost - exact).abs() <= eps, "{} vs {exact}", res.cost);
        }
    }
}
