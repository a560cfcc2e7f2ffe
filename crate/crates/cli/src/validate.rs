//! Named model-zoo entries for `validate-model`.

use std::sync::Arc;

use imopt::zoo::{
    make_composite_model, make_proximal_model, make_smooth_model, make_universal_model,
    make_vi_operator_model, CompositeProblem, HolderProblem, HolderSignOperator, L1Norm,
    MatrixGameOperator, OperatorConstants, SimpleH,
};
use imopt::{
    validate_min_model, validate_vi_model, Error, FeasibleSet, ProxSetup, Result,
    ValidationReport,
};

use crate::problems::{holder_l1, planted_quadratic, random_game, strongly_monotone_affine};

/// Names accepted by [`validate_named`].
pub const VALIDATE_MODELS: [&str; 9] = [
    "smooth",
    "smooth_entropy",
    "composite_l1",
    "proximal_l1",
    "universal_l1",
    "affine_vi",
    "game_vi",
    "holder_vi",
    "smooth_underestimated",
];

const DIM: usize = 4;

/// Samples the named model on a 4-dimensional instance. The
/// `smooth_underestimated` entry declares half the true `L` and is expected
/// to fail.
pub fn validate_named(name: &str, samples: usize, seed: u64) -> Result<ValidationReport> {
    let eu = ProxSetup::euclidean();
    let cube = FeasibleSet::uniform_box(DIM, -1.0, 1.0)?;
    let quad = planted_quadratic(DIM, 0.2, 2.0, 31);
    let q = quad.quadratic.clone();
    match name {
        "smooth" => validate_min_model(&make_smooth_model(q, quad.l), &eu, &cube, samples, seed),
        "smooth_entropy" => validate_min_model(
            &make_smooth_model(q, quad.l),
            &ProxSetup::entropy(),
            &FeasibleSet::Simplex(DIM),
            samples,
            seed,
        ),
        "composite_l1" => {
            let m = make_composite_model(CompositeProblem { g: q, h: SimpleH::L1(0.5) }, quad.l)?;
            validate_min_model(&m, &eu, &cube, samples, seed)
        }
        "proximal_l1" => {
            let m = make_proximal_model(Arc::new(L1Norm::new(0.7, DIM)?), 1.0)?;
            validate_min_model(&m, &eu, &cube, samples, seed)
        }
        "universal_l1" => {
            let (h, _): (HolderProblem, _) = holder_l1(DIM, 0.3, 7);
            validate_min_model(&make_universal_model(h, 1e-2)?, &eu, &cube, samples, seed)
        }
        "affine_vi" => {
            let (op, _, mu, l) = strongly_monotone_affine(DIM, 0.5, 6);
            let m = make_vi_operator_model(Arc::new(op), OperatorConstants::Lipschitz(l), None)?
                .with_mu(mu)?;
            validate_vi_model(&m, &eu, &cube, samples, seed)
        }
        "game_vi" => {
            let a = random_game(2, 3, 12);
            let l = a.max_abs();
            let m = make_vi_operator_model(
                Arc::new(MatrixGameOperator { a }),
                OperatorConstants::Lipschitz(l),
                None,
            )?;
            validate_vi_model(
                &m,
                &ProxSetup::entropy(),
                &FeasibleSet::ProductOfSimplices(2, 3),
                samples,
                seed,
            )
        }
        "holder_vi" => {
            let op = HolderSignOperator {
                a: vec![0.1, -0.3, 0.2, 0.0],
                nu: 0.5,
            };
            let constants = OperatorConstants::Holder {
                nu: 0.5,
                l_nu: op.l_nu(),
                delta: 1e-2,
            };
            let m = make_vi_operator_model(Arc::new(op), constants, None)?;
            validate_vi_model(&m, &eu, &cube, samples, seed)
        }
        "smooth_underestimated" => {
            validate_min_model(&make_smooth_model(q, 0.5 * quad.l), &eu, &cube, samples, seed)
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown model `{other}` (known: {})",
            VALIDATE_MODELS.join(", ")
        ))),
    }
}
