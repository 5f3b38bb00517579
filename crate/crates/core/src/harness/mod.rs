//! Identifiability experiments, gauge-invariance checks and the finite
//! counterexample constructions.
//!
//! An experiment samples a ground truth for every `(size, trial)`, generates
//! exact rank data from it, solves, and aligns the solution to the truth
//! with the variant's gauge group:
//!
//! | variant           | gauge                        | recovery error            |
//! |-------------------|------------------------------|---------------------------|
//! | `external-point`  | none                         | `‖x̂ − x*‖`                |
//! | `external-vector` | none                         | angle between `x̂`, `x*`   |
//! | `mds`             | similarity                   | aligned residual          |
//! | `internal-point`  | similarity on `X ∪ Y`        | aligned residual          |
//! | `internal-vector` | gauge pair `(L, τ)`          | aligned residual          |
//! | `sphere-mds`      | orthogonal                   | aligned residual          |

mod counterexamples;
mod experiment;
mod invariance;

pub use counterexamples::{
    counterexample_internal_point_ray, counterexample_internal_vector, internal_point_ray_with,
    internal_vector_coordinatewise_with, internal_vector_disconnected_with, Counterexample, CounterexampleReport,
    UnfoldingPair, BALL_POINTS, BALL_RADIUS, POINT_RESIDUAL_FLOOR, RAY_POSITIONS, VECTOR_RESIDUAL_FLOOR,
};
pub use experiment::{
    configured_threads, recount_violations, run_identifiability_experiment, run_with_threads, ExperimentReport,
    ExperimentSpec, HarnessError, Size, SizeSummary, TrialRecord, TrialStatus,
};
pub use invariance::{gauge_invariance_suite, InvarianceGroup, InvarianceReport};
