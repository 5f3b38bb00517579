//! Solvers for the six ordinal embedding problems.
//!
//! External problems (one individual against known objects) have linear
//! constraints and are solved as max-margin halfspace feasibility in
//! [`external`]. The joint problems (ordinal MDS, internal unfolding,
//! spherical MDS) minimize a hinge surrogate by projected gradient descent
//! with random restarts in [`descent`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Configuration, GeometryError, SphericalConfiguration};
use crate::rankings::RankError;

mod descent;
mod external;

pub use descent::{solve_internal_point, solve_internal_vector, solve_ordinal_mds, solve_sphere_mds};
pub use external::{solve_external_point, solve_external_vector};

/// The solver variants exposed by the CLI and the experiment harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    ExternalPoint,
    ExternalVector,
    Mds,
    InternalPoint,
    InternalVector,
    SphereMds,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::ExternalPoint,
        Variant::ExternalVector,
        Variant::Mds,
        Variant::InternalPoint,
        Variant::InternalVector,
        Variant::SphereMds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::ExternalPoint => "external-point",
            Variant::ExternalVector => "external-vector",
            Variant::Mds => "mds",
            Variant::InternalPoint => "internal-point",
            Variant::InternalVector => "internal-vector",
            Variant::SphereMds => "sphere-mds",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown variant '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Base step size; decays on a cosine schedule over `max_iterations`.
    pub learning_rate: f64,
    /// Hinge margin δ, applied to squared distances or inner products.
    pub margin: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Relative loss change below which a descent run counts as stalled.
    pub tolerance: f64,
    /// Weight λ of the internal point-model repulsion penalty (0 = off).
    pub repulsion_weight: f64,
    /// Radius ρ of the repulsion penalty.
    pub repulsion_radius: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            learning_rate: 0.05,
            margin: 0.01,
            restarts: 5,
            seed: 0,
            tolerance: 1e-8,
            repulsion_weight: 0.0,
            repulsion_radius: 0.1,
        }
    }
}

impl SolverOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |what: &str| Err(SolverError::InvalidOptions(what.to_string()));
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return bad("margin must be positive");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return bad("tolerance must be positive");
        }
        if !(self.repulsion_weight >= 0.0 && self.repulsion_weight.is_finite()) {
            return bad("repulsion_weight must be non-negative");
        }
        if !(self.repulsion_radius > 0.0 && self.repulsion_radius.is_finite()) {
            return bad("repulsion_radius must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Solution {
    ExternalPoint {
        individual: Vec<f64>,
    },
    ExternalVector {
        individual: Vec<f64>,
    },
    Embedding {
        items: Configuration,
    },
    SphereEmbedding {
        items: SphericalConfiguration,
    },
    PointUnfolding {
        individuals: Configuration,
        objects: Configuration,
    },
    VectorUnfolding {
        individuals: SphericalConfiguration,
        objects: Configuration,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub solution: Solution,
    /// Supplied comparisons that the solution fails to satisfy strictly.
    pub violations: usize,
    /// Number of supplied comparisons.
    pub comparisons: usize,
    pub loss: f64,
    /// Smallest normalized slack over the constraints (external solvers).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub margin: Option<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    /// Restart that produced the returned solution.
    pub restart: usize,
    /// Loss after each accepted iteration of the returned restart.
    pub loss_trace: Vec<f64>,
}

impl SolveResult {
    pub fn violation_fraction(&self) -> f64 {
        if self.comparisons == 0 {
            0.0
        } else {
            self.violations as f64 / self.comparisons as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("infeasible: {} of {} comparisons violated after all restarts", .0.violations, .0.comparisons)]
    Infeasible(Box<SolveResult>),
    #[error("not converged: {} of {} comparisons violated at loss {:.3e}", .0.violations, .0.comparisons, .0.loss)]
    NonConverged(Box<SolveResult>),
    #[error("degenerate solution: individuals collapsed relative to objects")]
    DegenerateSolution(Box<SolveResult>),
}

impl SolverError {
    /// The best configuration found, for errors that carry one.
    pub fn partial_result(&self) -> Option<&SolveResult> {
        match self {
            SolverError::Infeasible(r) | SolverError::NonConverged(r) | SolverError::DegenerateSolution(r) => Some(r),
            _ => None,
        }
    }

    pub fn into_partial_result(self) -> Option<SolveResult> {
        match self {
            SolverError::Infeasible(r) | SolverError::NonConverged(r) | SolverError::DegenerateSolution(r) => Some(*r),
            _ => None,
        }
    }
}

/// Either a clean result or the result carried by a solver error.
pub fn result_or_partial(outcome: Result<SolveResult, SolverError>) -> Result<SolveResult, SolverError> {
    match outcome {
        Ok(r) => Ok(r),
        Err(e) => match e.partial_result() {
            Some(_) => Ok(e.into_partial_result().expect("checked above")),
            None => Err(e),
        },
    }
}
