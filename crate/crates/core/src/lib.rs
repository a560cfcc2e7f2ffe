//! First-order methods driven by inexact `(δ, L)`-models.
//!
//! A model replaces the gradient linearization of an objective (or of a
//! monotone operator) by any convex surrogate `ψ_δ(x, y)` sandwiched between
//! `f(x) − f_δ(y)` and that plus `L·V[y](x) + δ`. The solvers here consume such
//! models through [`MinModel`] and [`ViModel`]:
//!
//! - [`gm_solve`]: adaptive gradient method, plus strongly convex and restarted variants;
//! - [`fgm_solve`]: adaptive fast gradient method, universal, restarted and Frank–Wolfe modes;
//! - [`mirror_prox_solve`]: generalized mirror prox for VIs and saddle problems;
//! - [`proximal_sinkhorn`]: KL-proximal outer loop over entropic Sinkhorn for discrete OT.
//!
//! Every solver returns a trace with an a posteriori accuracy certificate.

pub mod error;
pub mod fgm;
pub mod gm;
pub mod inexact;
pub mod linalg;
pub mod mirror_prox;
pub mod model;
pub mod ot;
pub mod prox;
pub mod set;
pub mod setup;
pub mod trace;
pub mod zoo;

pub use error::{Error, Result};
pub use fgm::{
    fgm_alpha, fgm_restart_schedule, fgm_restart_solve, fgm_solve, fgm_universal_solve, fw_solve,
    FgmConfig,
};
pub use gm::{gm_certificate, gm_restart_solve, gm_solve, gm_strongly_convex_solve, GmConfig};
pub use inexact::{
    accuracy_translate, stationarity_gap, verify_inexact_stationarity, DeltaSchedule,
    InexactnessBudget,
};
pub use linalg::{Matrix, Point};
pub use mirror_prox::{
    mirror_prox_restart_solve, mirror_prox_solve, mirror_prox_universal_solve, mp_restart_stages,
    saddle_gap, saddle_solve, universal_mp_iteration_bound, GapSample, MpParams, SaddleConfig,
    SaddleResult, SaddleSpec,
};
pub use model::{
    check_min_model_is_vi_model, validate_min_model, validate_min_model_with_tol,
    validate_vi_model, validate_vi_model_with_tol, Linearization, LocalModel, MinAsVi, MinModel,
    ProxPoint, StrongConvexityTag, ValidationReport, ViModel,
};
pub use ot::{
    exact_ot_oracle, proximal_sinkhorn, round_to_polytope, sinkhorn, InnerTolRule, OTInstance,
    ProxSinkhornConfig, ProxSinkhornResult, TransportPlan,
};
pub use prox::SimpleTerm;
pub use set::FeasibleSet;
pub use setup::{NormKind, ProxSetup, SetupKind};
pub use trace::{Certificate, IterationRecord, SolverRun, StopReason, ViRecord, ViRun};
