//! Finite versions of the non-uniqueness constructions for internal
//! unfolding. Each builds two configuration pairs with identical rank data
//! that are not related by the model's gauge group.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::geometry::{gauge_align_vector_model, similarity_procrustes, Configuration, SphericalConfiguration};
use crate::rankings::{rank_data_equal, ComparisonModel};
use crate::rng::{stream_id, stream_rng};
use crate::sampling::uniform_ball;

const CONSTRUCTION_SEED: u64 = 20_240_601;
const CONSTRUCTION_TAG: u8 = 2;

/// Ball points (individuals, also objects) in the ray construction.
pub const BALL_POINTS: usize = 12;
/// Radius of the ball the ray construction samples from. Small enough that
/// every individual prefers every ball object to every ray object.
pub const BALL_RADIUS: f64 = 0.3;
pub const RAY_POSITIONS: [f64; 6] = [1.0, 1.3, 1.7, 2.2, 2.8, 3.5];
pub const POINT_RESIDUAL_FLOOR: f64 = 0.1;
pub const VECTOR_RESIDUAL_FLOOR: f64 = 0.05;

const COORDINATEWISE_OBJECTS: usize = 10;
const PER_BALL_OBJECTS: usize = 8;
const FAR_BALL_DISTANCE: f64 = 3.0;
const DISCONNECTED_SHIFT: [f64; 2] = [0.4, 0.4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnfoldingPair {
    pub individuals: Configuration,
    pub objects: Configuration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub name: String,
    pub model: ComparisonModel,
    pub config_a: UnfoldingPair,
    pub config_b: UnfoldingPair,
    /// Exact equality of the two rank matrices.
    pub rank_data_equal: bool,
    /// `similarity` or `vector-gauge`.
    pub alignment: String,
    /// Residual of the best gauge element mapping `config_a` onto `config_b`.
    pub alignment_residual: f64,
    pub residual_floor: f64,
    /// Both halves: equal data and a residual above the floor.
    pub holds: bool,
}

/// The shipped constructions, by CLI name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Counterexample {
    InternalPointRay,
    InternalVectorCoordinatewise,
    InternalVectorDisconnected,
}

impl Counterexample {
    pub const ALL: [Counterexample; 3] = [
        Counterexample::InternalPointRay,
        Counterexample::InternalVectorCoordinatewise,
        Counterexample::InternalVectorDisconnected,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Counterexample::InternalPointRay => "internal-point-ray",
            Counterexample::InternalVectorCoordinatewise => "internal-vector-coordinatewise",
            Counterexample::InternalVectorDisconnected => "internal-vector-disconnected",
        }
    }

    pub fn build(self) -> Result<CounterexampleReport, HarnessError> {
        match self {
            Counterexample::InternalPointRay => counterexample_internal_point_ray(),
            Counterexample::InternalVectorCoordinatewise => {
                internal_vector_coordinatewise_with(|u| vec![u[0].powi(3), 2.0 * u[1]])
            }
            Counterexample::InternalVectorDisconnected => internal_vector_disconnected_with(DISCONNECTED_SHIFT),
        }
    }
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Counterexample {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Counterexample::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown counterexample '{s}'"))
    }
}

fn report(
    name: &str,
    model: ComparisonModel,
    a: UnfoldingPair,
    b: UnfoldingPair,
    alignment: &str,
    residual: f64,
    floor: f64,
) -> Result<CounterexampleReport, HarnessError> {
    let equal = rank_data_equal(&a.individuals, &a.objects, &b.individuals, &b.objects, model)?;
    Ok(CounterexampleReport {
        name: name.to_string(),
        model,
        config_a: a,
        config_b: b,
        rank_data_equal: equal,
        alignment: alignment.to_string(),
        alignment_residual: residual,
        residual_floor: floor,
        holds: equal && residual > floor,
    })
}

/// Point model, `p = 2`: individuals in a small ball, objects are the same
/// ball points plus points `a·e₁` on a ray. The second configuration moves
/// the ray points to `ray_map(a)`.
pub fn internal_point_ray_with(ray_map: impl Fn(f64) -> f64) -> Result<CounterexampleReport, HarnessError> {
    let mut rng = stream_rng(CONSTRUCTION_SEED, stream_id(CONSTRUCTION_TAG, 1, 0, 0));
    let ball: Vec<Vec<f64>> = (0..BALL_POINTS)
        .map(|_| uniform_ball(2, &mut rng).into_iter().map(|c| BALL_RADIUS * c).collect())
        .collect();
    let individuals = Configuration::new(2, ball.clone())?;
    let objects_with = |f: &dyn Fn(f64) -> f64| {
        let mut pts = ball.clone();
        pts.extend(RAY_POSITIONS.iter().map(|&a| vec![f(a), 0.0]));
        Configuration::new(2, pts)
    };
    let a = UnfoldingPair {
        individuals: individuals.clone(),
        objects: objects_with(&|a| a)?,
    };
    let b = UnfoldingPair {
        individuals,
        objects: objects_with(&ray_map)?,
    };
    let src = a.individuals.stack(&a.objects)?;
    let tgt = b.individuals.stack(&b.objects)?;
    let residual = similarity_procrustes(&src, &tgt, true)?.residual;
    report(
        "internal-point-ray",
        ComparisonModel::PointDistance,
        a,
        b,
        "similarity",
        residual,
        POINT_RESIDUAL_FLOOR,
    )
}

/// The ray construction with `a ↦ a²`.
pub fn counterexample_internal_point_ray() -> Result<CounterexampleReport, HarnessError> {
    internal_point_ray_with(|a| a * a)
}

fn vector_report(
    name: &str,
    individuals: Configuration,
    a_objects: Configuration,
    b_objects: Configuration,
) -> Result<CounterexampleReport, HarnessError> {
    let x = SphericalConfiguration::new(individuals.clone())?;
    let residual = gauge_align_vector_model(&x, &a_objects, &x, &b_objects)?.residual;
    report(
        name,
        ComparisonModel::VectorInnerProduct,
        UnfoldingPair {
            individuals: individuals.clone(),
            objects: a_objects,
        },
        UnfoldingPair {
            individuals,
            objects: b_objects,
        },
        "vector-gauge",
        residual,
        VECTOR_RESIDUAL_FLOOR,
    )
}

/// Vector model, `p = 2`, individuals `{e₁, e₂}`: any coordinatewise
/// increasing `g` keeps both rankings.
pub fn internal_vector_coordinatewise_with(
    g: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<CounterexampleReport, HarnessError> {
    let mut rng = stream_rng(CONSTRUCTION_SEED, stream_id(CONSTRUCTION_TAG, 2, 0, 0));
    let objects = Configuration::new(
        2,
        (0..COORDINATEWISE_OBJECTS)
            .map(|_| {
                use rand::Rng;
                vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]
            })
            .collect(),
    )?;
    let individuals = Configuration::new(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]])?;
    let moved = objects.map_points(g)?;
    vector_report("internal-vector-coordinatewise", individuals, objects, moved)
}

/// Vector model, `p = 2`, individuals `{e₀, e₁, e₂}` with `e₀ ∝ (1, 1)`:
/// objects in two disjoint balls, the far one translated by `shift`.
pub fn internal_vector_disconnected_with(shift: [f64; 2]) -> Result<CounterexampleReport, HarnessError> {
    let mut rng = stream_rng(CONSTRUCTION_SEED, stream_id(CONSTRUCTION_TAG, 3, 0, 0));
    let e0 = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];
    let far = [FAR_BALL_DISTANCE * e0[0], FAR_BALL_DISTANCE * e0[1]];
    let mut pts = Vec::with_capacity(2 * PER_BALL_OBJECTS);
    for center in [[0.0, 0.0], far] {
        for _ in 0..PER_BALL_OBJECTS {
            let u = uniform_ball(2, &mut rng);
            pts.push(vec![center[0] + u[0], center[1] + u[1]]);
        }
    }
    let objects = Configuration::new(2, pts)?;
    let moved = objects.map_points(|y| {
        // Points of the far ball lie beyond the midpoint along e₀.
        if y[0] * e0[0] + y[1] * e0[1] > FAR_BALL_DISTANCE / 2.0 {
            vec![y[0] + shift[0], y[1] + shift[1]]
        } else {
            y.to_vec()
        }
    })?;
    let individuals = Configuration::new(2, vec![e0.to_vec(), vec![1.0, 0.0], vec![0.0, 1.0]])?;
    vector_report("internal-vector-disconnected", individuals, objects, moved)
}

/// Both vector-model constructions with their default maps.
pub fn counterexample_internal_vector() -> Result<Vec<CounterexampleReport>, HarnessError> {
    Ok(vec![
        Counterexample::InternalVectorCoordinatewise.build()?,
        Counterexample::InternalVectorDisconnected.build()?,
    ])
}
