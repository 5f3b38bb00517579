use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::geometry::{apply_orthogonal, apply_similarity, Configuration, SphericalConfiguration};
use crate::rankings::{mds_row_ranks, row_ranks_point, row_ranks_vector};
use crate::rng::{stream_id, stream_rng};
use crate::sampling::{random_gauge_pair, random_orthogonal, random_similarity, sample_sphere, Design};
use crate::solvers::Variant;

const INVARIANCE_TAG: u8 = 3;
/// Largest condition number of the sampled linear part of a gauge pair.
const MAX_CONDITION: f64 = 10.0;
const VIEWERS: usize = 10;
const OBJECTS: usize = 15;

/// The group acting on a variant's configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InvarianceGroup {
    /// Similarities acting on viewers and objects of the point model.
    PointSimilarity,
    /// Similarities acting on an ordinal MDS configuration.
    MdsSimilarity,
    /// Orthogonal maps acting on a spherical configuration.
    Orthogonal,
    /// Gauge pairs `(L, τ)` acting on the vector model.
    VectorGauge,
}

impl InvarianceGroup {
    pub fn for_variant(variant: Variant) -> Self {
        match variant {
            Variant::ExternalPoint | Variant::InternalPoint => InvarianceGroup::PointSimilarity,
            Variant::Mds => InvarianceGroup::MdsSimilarity,
            Variant::SphereMds => InvarianceGroup::Orthogonal,
            Variant::ExternalVector | Variant::InternalVector => InvarianceGroup::VectorGauge,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub variant: Variant,
    pub group: InvarianceGroup,
    pub trials: usize,
    pub passes: usize,
    /// Trial indices whose rank data changed.
    pub failures: Vec<usize>,
}

impl InvarianceReport {
    pub fn all_passed(&self) -> bool {
        self.passes == self.trials
    }
}

/// Samples a configuration and a random group element per trial and checks
/// that the rank data is exactly unchanged by the action. The dimension
/// cycles through 2, 3 and 4.
pub fn gauge_invariance_suite(variant: Variant, trials: usize, seed: u64) -> Result<InvarianceReport, HarnessError> {
    if trials == 0 {
        return Err(HarnessError::InvalidSpec("trials must be at least 1".into()));
    }
    let group = InvarianceGroup::for_variant(variant);
    let mut failures = Vec::new();
    for trial in 0..trials {
        let mut rng = stream_rng(seed, stream_id(INVARIANCE_TAG, group as u64, 0, trial as u64));
        let p = 2 + trial % 3;
        let same = match group {
            InvarianceGroup::PointSimilarity => {
                let x = Design::UniformBall.sample(p, VIEWERS, &mut rng)?;
                let y = Design::UniformBall.sample(p, OBJECTS, &mut rng)?;
                let t = random_similarity(p, &mut rng);
                row_ranks_point(&x, &y)? == row_ranks_point(&apply_similarity(&t, &x)?, &apply_similarity(&t, &y)?)?
            }
            InvarianceGroup::MdsSimilarity => {
                let items = Design::UniformCube.sample(p, OBJECTS, &mut rng)?;
                let t = random_similarity(p, &mut rng);
                mds_row_ranks(&items)? == mds_row_ranks(&apply_similarity(&t, &items)?)?
            }
            InvarianceGroup::Orthogonal => {
                let items = sample_sphere(p, OBJECTS, &mut rng)?;
                let q = random_orthogonal(p, &mut rng);
                let moved = apply_orthogonal(&q, &items)?;
                let before = mds_row_ranks(items.as_configuration())?;
                let after = mds_row_ranks(moved.as_configuration())?;
                // The inner-product ranking on the sphere is the distance ranking.
                let by_inner = row_ranks_vector(&moved, moved.as_configuration())?;
                before == after && after == by_inner
            }
            InvarianceGroup::VectorGauge => {
                let x: SphericalConfiguration = sample_sphere(p, VIEWERS, &mut rng)?;
                let y: Configuration = Design::UniformBall.sample(p, OBJECTS, &mut rng)?;
                let g = random_gauge_pair(p, MAX_CONDITION, &mut rng);
                row_ranks_vector(&x, &y)? == row_ranks_vector(&g.apply_individuals(&x)?, &g.apply_objects(&y)?)?
            }
        };
        if !same {
            failures.push(trial);
        }
    }
    Ok(InvarianceReport {
        variant,
        group,
        trials,
        passes: trials - failures.len(),
        failures,
    })
}
