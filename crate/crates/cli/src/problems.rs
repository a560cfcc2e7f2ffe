//! Seeded problem generators with planted optima.

use std::sync::Arc;

use imopt::linalg::{dist2_sq, dot, norm2_sq};
use imopt::zoo::{
    make_composite_model, make_smooth_model, AffineOperator, CompositeProblem, FnFunction,
    HolderProblem, PerturbedProxModel, QuadraticProblem, ShiftedModel, SimpleH,
};
use imopt::{FeasibleSet, Matrix, MinModel, OTInstance, Point, Result};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Seeded generator used by every problem family.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Point {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Symmetric matrix `Q diag(λ) Qᵀ` with `λ` log-spaced on `[eig_min, eig_max]`
/// and `Q` the orthogonal factor of a Gaussian matrix.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, eig_min: f64, eig_max: f64) -> Matrix {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let eig: Vec<f64> = (0..n)
        .map(|i| {
            let t = if n == 1 { 1.0 } else { i as f64 / (n - 1) as f64 };
            eig_min * (eig_max / eig_min).powf(t)
        })
        .collect();
    let a = &q * DMatrix::from_diagonal(&DVector::from_vec(eig)) * q.transpose();
    let sym = 0.5 * (&a + a.transpose());
    Matrix::from_row_major(n, n, sym.transpose().as_slice().to_vec()).expect("square matrix")
}

/// A minimization problem with a known minimizer.
pub struct PlantedProblem {
    /// Short description.
    pub name: String,
    /// Exact model of the objective.
    pub model: Box<dyn MinModel>,
    /// Feasible set.
    pub set: FeasibleSet,
    /// Starting point.
    pub x0: Point,
    /// A minimizer.
    pub x_star: Point,
    /// Optimal value.
    pub f_star: f64,
    /// Smoothness constant of the smooth part.
    pub l: f64,
    /// Strong convexity modulus of the smooth part.
    pub mu: f64,
    /// The quadratic `½<Ax, x> − <b, x> + c` behind the objective.
    pub quadratic: Arc<QuadraticProblem>,
}

impl PlantedProblem {
    /// `½‖x0 − x*‖²`.
    pub fn r2(&self) -> f64 {
        0.5 * dist2_sq(&self.x0, &self.x_star)
    }
}

/// `½(x − x*)ᵀA(x − x*)` on the whole space with spectrum in `[eig_min, eig_max]`.
pub fn planted_quadratic(n: usize, eig_min: f64, eig_max: f64, seed: u64) -> PlantedProblem {
    let mut rng = rng(seed);
    let a = random_spd(&mut rng, n, eig_min, eig_max);
    let x_star = gaussian_vec(&mut rng, n);
    let b = a.mul_vec(&x_star);
    let c = 0.5 * dot(&x_star, &b);
    let q = Arc::new(QuadraticProblem::new(a, b, c).expect("spd by construction"));
    let model = make_smooth_model(q.clone(), q.lipschitz());
    let f_star = model.f_value(&x_star);
    PlantedProblem {
        name: format!("quadratic(n={n}, cond={:.0e})", eig_max / eig_min),
        model: Box::new(model),
        set: FeasibleSet::WholeSpace(n),
        x0: vec![0.0; n],
        x_star,
        f_star,
        l: q.lipschitz(),
        mu: q.strong_convexity(),
        quadratic: q,
    }
}

/// Coordinate roles in a planted box solution.
#[derive(Clone, Copy)]
enum Role {
    Interior,
    Lower,
    Upper,
    Zero,
}

fn planted_roles(rng: &mut ChaCha8Rng, n: usize, with_zero: bool) -> Vec<Role> {
    let mut roles: Vec<Role> = (0..n)
        .map(|i| match i % if with_zero { 4 } else { 3 } {
            0 => Role::Interior,
            1 => Role::Lower,
            2 => Role::Upper,
            _ => Role::Zero,
        })
        .collect();
    roles.shuffle(rng);
    roles
}

/// Quadratic over `[−1, 1]^n` whose minimizer has interior and active
/// coordinates; `b` is chosen so the KKT conditions hold at `x*` with strict
/// multipliers.
pub fn planted_box_quadratic(n: usize, seed: u64) -> PlantedProblem {
    let mut rng = rng(seed);
    let a = random_spd(&mut rng, n, 0.1, 2.0);
    let roles = planted_roles(&mut rng, n, false);
    let mut x_star = vec![0.0; n];
    let mut grad = vec![0.0; n];
    for (i, role) in roles.iter().enumerate() {
        let m = 0.1 + rng.gen::<f64>();
        match role {
            Role::Lower => (x_star[i], grad[i]) = (-1.0, m),
            Role::Upper => (x_star[i], grad[i]) = (1.0, -m),
            _ => x_star[i] = rng.gen_range(-0.9..0.9),
        }
    }
    // ∇f(x*) = A x* − b.
    let b: Point = a.mul_vec(&x_star).iter().zip(&grad).map(|(ax, g)| ax - g).collect();
    let q = Arc::new(QuadraticProblem::new(a, b, 0.0).expect("spd by construction"));
    let model = make_smooth_model(q.clone(), q.lipschitz());
    let f_star = model.f_value(&x_star);
    PlantedProblem {
        name: format!("box_quadratic(n={n}, seed={seed})"),
        model: Box::new(model),
        set: FeasibleSet::uniform_box(n, -1.0, 1.0).expect("valid box"),
        x0: vec![0.0; n],
        x_star,
        f_star,
        l: q.lipschitz(),
        mu: q.strong_convexity(),
        quadratic: q,
    }
}

/// `g(x) + λ‖x‖₁` over `[−1, 1]^n` with `g` quadratic and a planted minimizer
/// that has zero, interior and active coordinates.
pub fn planted_box_lasso(n: usize, lambda: f64, seed: u64) -> PlantedProblem {
    let mut rng = rng(seed);
    let a = random_spd(&mut rng, n, 0.1, 2.0);
    let roles = planted_roles(&mut rng, n, true);
    let mut x_star = vec![0.0; n];
    let mut grad = vec![0.0; n];
    for (i, role) in roles.iter().enumerate() {
        let m = 0.1 + rng.gen::<f64>();
        match role {
            Role::Zero => grad[i] = lambda * rng.gen_range(-0.9..0.9),
            Role::Interior => {
                let s = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                x_star[i] = s * rng.gen_range(0.1..0.9);
                grad[i] = -lambda * s;
            }
            Role::Lower => (x_star[i], grad[i]) = (-1.0, lambda + m),
            Role::Upper => (x_star[i], grad[i]) = (1.0, -lambda - m),
        }
    }
    let b: Point = a.mul_vec(&x_star).iter().zip(&grad).map(|(ax, g)| ax - g).collect();
    let q = Arc::new(QuadraticProblem::new(a, b, 0.0).expect("spd by construction"));
    let model = make_composite_model(
        CompositeProblem {
            g: q.clone(),
            h: SimpleH::L1(lambda),
        },
        q.lipschitz(),
    )
    .expect("valid composite problem");
    let f_star = model.f_value(&x_star);
    PlantedProblem {
        name: format!("box_lasso(n={n}, lambda={lambda}, seed={seed})"),
        model: Box::new(model),
        set: FeasibleSet::uniform_box(n, -1.0, 1.0).expect("valid box"),
        x0: vec![0.0; n],
        x_star,
        f_star,
        l: q.lipschitz(),
        mu: q.strong_convexity(),
        quadratic: q,
    }
}

/// The 20 seeded certificate instances: box quadratics and box lassos with
/// `n ∈ {5, 10, 20, 50}`.
pub fn certificate_suite() -> Vec<PlantedProblem> {
    const DIMS: [usize; 4] = [5, 10, 20, 50];
    (0..20u64)
        .map(|s| {
            let n = DIMS[(s / 2) as usize % DIMS.len()];
            if s % 2 == 0 {
                planted_box_quadratic(n, 100 + s)
            } else {
                planted_box_lasso(n, 0.3, 100 + s)
            }
        })
        .collect()
}

/// `‖x − a‖₁` (ν = 0, `L_0 = 2√n`) with `a` Gaussian of standard deviation
/// `scale`; minimum 0 at `a`.
pub fn holder_l1(n: usize, scale: f64, seed: u64) -> (HolderProblem, Point) {
    let a: Point = gaussian_vec(&mut rng(seed), n).into_iter().map(|v| scale * v).collect();
    let center = a.clone();
    let c2 = a.clone();
    let f = FnFunction::new(
        n,
        move |x| x.iter().zip(&center).map(|(xi, ai)| (xi - ai).abs()).sum(),
        move |x| {
            x.iter()
                .zip(&c2)
                .map(|(xi, ai)| if xi > ai { 1.0 } else if xi < ai { -1.0 } else { 0.0 })
                .collect()
        },
    );
    let p = HolderProblem::new(Arc::new(f), 0.0, 2.0 * (n as f64).sqrt()).expect("valid constants");
    (p, a)
}

/// A quadratic viewed as a Hölder problem with `ν = 1`, `L_1 = λ_max`.
pub fn holder_quadratic(n: usize, seed: u64) -> (HolderProblem, Point) {
    let p = planted_quadratic(n, 0.01, 1.0, seed);
    let h = HolderProblem::new(p.quadratic.clone(), 1.0, p.l).expect("valid constants");
    (h, p.x_star)
}

/// Random `m × n` payoff matrix with entries uniform in `[−1, 1]`.
pub fn random_game(m: usize, n: usize, seed: u64) -> Matrix {
    let mut rng = rng(seed);
    let data = (0..m * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Matrix::from_row_major(m, n, data).expect("shape matches")
}

/// Matching pennies.
pub fn matching_pennies() -> Matrix {
    Matrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).expect("2x2")
}

/// Strongly monotone affine operator `g(x) = M(x − a)` on a Euclidean ball,
/// with `M = I + S` for a skew `S`, so `μ = 1` and `L = ‖M‖`. Returns the
/// operator, `a` (inside the ball, hence the solution), `μ` and `L`.
pub fn strongly_monotone_affine(n: usize, skew: f64, seed: u64) -> (AffineOperator, Point, f64, f64) {
    let mut rng = rng(seed);
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
        for j in i + 1..n {
            let s = skew * rng.gen_range(-1.0..1.0);
            m[i * n + j] = s;
            m[j * n + i] = -s;
        }
    }
    let m = Matrix::from_row_major(n, n, m).expect("square");
    let a: Point = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let q: Point = m.mul_vec(&a).into_iter().map(|v| -v).collect();
    let l = m.spectral_norm();
    (AffineOperator { m, q }, a, 1.0, l)
}

/// Random OT instance of size `n` with costs uniform in `[0, 1]` and
/// marginals that are integer multiples of `1/scale`.
pub fn random_ot(n: usize, scale: u64, seed: u64) -> Result<OTInstance> {
    let mut rng = rng(seed);
    let data = (0..n * n).map(|_| rng.gen::<f64>()).collect();
    let cost = Matrix::from_row_major(n, n, data)?;
    let l = random_composition(&mut rng, n, scale);
    let w = random_composition(&mut rng, n, scale);
    OTInstance::new(cost, l, w)
}

/// `n` positive integers summing to `scale`, divided by `scale`.
fn random_composition(rng: &mut ChaCha8Rng, n: usize, scale: u64) -> Point {
    assert!(scale >= n as u64, "scale must allow positive parts");
    let mut cuts: Vec<u64> = Vec::with_capacity(n + 1);
    cuts.push(0);
    while cuts.len() < n {
        let c = rng.gen_range(1..scale);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.push(scale);
    cuts.sort_unstable();
    cuts.windows(2).map(|w| (w[1] - w[0]) as f64 / scale as f64).collect()
}

/// Calls `f` on `base` wrapped with a δ shift and a δ̃ perturbation.
pub fn with_injection<T>(
    base: &dyn MinModel,
    delta: f64,
    delta_tilde: f64,
    seed: u64,
    f: impl FnOnce(&dyn MinModel) -> T,
) -> T {
    let shifted = ShiftedModel::new(base, delta);
    let inner: &dyn MinModel = if delta > 0.0 { &shifted } else { base };
    if delta_tilde > 0.0 {
        f(&PerturbedProxModel::new(inner, seed))
    } else {
        f(inner)
    }
}

/// `max_i |x_i − y_i|`.
pub fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// `½‖x‖²`.
pub fn half_sq(x: &[f64]) -> f64 {
    0.5 * norm2_sq(x)
}
