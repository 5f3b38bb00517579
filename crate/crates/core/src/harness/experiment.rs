use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    gauge_align_vector_model, norm, orthogonal_align, similarity_procrustes, Configuration, GeometryError,
    SphericalConfiguration,
};
use crate::rankings::{
    mds_row_ranks, row_ranks_point, row_ranks_vector, triples_from_ranks, violation_count, ComparisonModel, RankError,
    RankMatrix, TripleSet,
};
use crate::rng::{stream_id, stream_rng, StreamRng};
use crate::sampling::{sample_sphere, standard_normal_vec, uniform_sphere, Design};
use crate::solvers::{
    solve_external_point, solve_external_vector, solve_internal_point, solve_internal_vector, solve_ordinal_mds,
    solve_sphere_mds, Solution, SolveResult, SolverError, SolverOptions, Variant,
};

const TRIAL_TAG: u8 = 1;
/// Standard deviation of the jitter added when sampled data contains ties.
const TIE_JITTER: f64 = 1e-9;
const MAX_TIE_RETRIES: usize = 32;
/// Shrink factor toward the design center for external ground truths, so
/// the individual lies in the interior of the object cloud.
const INTERIOR_SHRINK: f64 = 0.5;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("could not build thread pool: {0}")]
    ThreadPool(String),
}

/// One entry of a size sweep: `n` objects, or `[m, n]` individuals and
/// objects for the internal unfolding variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Size {
    Items(usize),
    Unfolding(usize, usize),
}

impl Size {
    pub fn objects(self) -> usize {
        match self {
            Size::Items(n) | Size::Unfolding(_, n) => n,
        }
    }

    /// Number of individuals; equals the object count when only `n` is given.
    pub fn individuals(self) -> usize {
        match self {
            Size::Items(n) => n,
            Size::Unfolding(m, _) => m,
        }
    }

    fn key(self) -> (usize, usize) {
        (self.objects(), self.individuals())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub variant: Variant,
    pub dim: usize,
    pub sizes: Vec<Size>,
    pub design: Design,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub solver_opts: SolverOptions,
    /// Feed the ground truth in place of the solver output.
    #[serde(default)]
    pub bypass_solver: bool,
    /// For `mds` and `sphere-mds`: solve from a uniform sample of this many
    /// triples instead of all of them.
    #[serde(default)]
    pub triple_sample: Option<usize>,
    /// For the internal variants: shift the object sample by this amount
    /// along the first axis, so that individuals and objects overlap only
    /// partially. Purely exploratory.
    #[serde(default)]
    pub object_shift: f64,
    /// Record per-trial wall time. Off by default because timings make the
    /// report non-reproducible.
    #[serde(default)]
    pub record_timings: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::InvalidSpec(msg));
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.trials > 0xFFFF {
            return bad(format!("at most {} trials per size", 0xFFFF));
        }
        if self.sizes.is_empty() {
            return bad("sizes must not be empty".into());
        }
        for w in self.sizes.windows(2) {
            if w[0].key() >= w[1].key() {
                return bad(format!("sizes must be strictly increasing: {:?} then {:?}", w[0], w[1]));
            }
        }
        for s in &self.sizes {
            if s.objects() < 2 || s.individuals() < 1 || s.objects() > 0xF_FFFF || s.individuals() > 0xF_FFFF {
                return bad(format!("unsupported size {s:?}"));
            }
            if matches!(s, Size::Unfolding(..))
                && !matches!(self.variant, Variant::InternalPoint | Variant::InternalVector)
            {
                return bad(format!("[m, n] sizes only apply to internal variants, got {s:?}"));
            }
        }
        let vector = matches!(
            self.variant,
            Variant::ExternalVector | Variant::InternalVector | Variant::SphereMds
        );
        if vector && self.dim < 2 {
            return bad(format!("{} needs dim >= 2", self.variant));
        }
        if self.variant == Variant::SphereMds && self.design != Design::UniformSphere {
            return bad("sphere-mds requires the uniform-sphere design".into());
        }
        if !self.object_shift.is_finite() {
            return bad("object_shift must be finite".into());
        }
        if self.triple_sample.is_some() && !matches!(self.variant, Variant::Mds | Variant::SphereMds) {
            return bad("triple_sample only applies to mds and sphere-mds".into());
        }
        self.solver_opts.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialStatus {
    Solved,
    NonConverged,
    Infeasible,
    Degenerate,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub size: Size,
    pub trial: usize,
    pub status: TrialStatus,
    pub violations: Option<usize>,
    pub comparisons: Option<usize>,
    pub aligned_residual: Option<f64>,
    pub recovery_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub solution: Option<Solution>,
}

impl TrialRecord {
    pub fn violation_fraction(&self) -> Option<f64> {
        match (self.violations, self.comparisons) {
            (Some(v), Some(c)) if c > 0 => Some(v as f64 / c as f64),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub size: Size,
    pub trials: usize,
    pub failed: usize,
    pub zero_violation: usize,
    pub median_recovery_error: Option<f64>,
    /// First and third quartile.
    pub iqr_recovery_error: Option<[f64; 2]>,
    pub median_aligned_residual: Option<f64>,
    pub iqr_aligned_residual: Option<[f64; 2]>,
    pub median_violation_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    /// Ordered by size, then trial.
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SizeSummary>,
}

impl ExperimentReport {
    pub fn records_for(&self, size: Size) -> impl Iterator<Item = &TrialRecord> {
        self.records.iter().filter(move |r| r.size == size)
    }

    pub fn summary_for(&self, size: Size) -> Option<&SizeSummary> {
        self.summary.iter().find(|s| s.size == size)
    }
}

/// Rank data handed to the solver.
enum Data {
    Row { objects: Configuration, row: Vec<u32> },
    Triples { triples: TripleSet, n: usize },
    Ranks(RankMatrix),
}

struct Instance {
    data: Data,
    truth: Solution,
    solver_seed: u64,
}

/// Thread count from `ORDINAL_EMBED_THREADS` (unset, unparsable or 0 = auto).
pub fn configured_threads() -> usize {
    std::env::var("ORDINAL_EMBED_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

pub fn run_identifiability_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport, HarnessError> {
    run_with_threads(spec, configured_threads())
}

/// Runs the sweep on a dedicated pool of `threads` workers (0 = one per
/// core). Records come back in `(size, trial)` order regardless of the
/// number of workers.
pub fn run_with_threads(spec: &ExperimentSpec, threads: usize) -> Result<ExperimentReport, HarnessError> {
    spec.validate()?;
    let jobs: Vec<(Size, usize)> = spec
        .sizes
        .iter()
        .flat_map(|&s| (0..spec.trials).map(move |t| (s, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
    let records: Vec<TrialRecord> = pool.install(|| jobs.par_iter().map(|&(s, t)| run_trial(spec, s, t)).collect());
    let summary = spec.sizes.iter().map(|&s| summarize(s, &records)).collect();
    Ok(ExperimentReport {
        spec: spec.clone(),
        records,
        summary,
    })
}

fn run_trial(spec: &ExperimentSpec, size: Size, trial: usize) -> TrialRecord {
    let start = Instant::now();
    let mut record = TrialRecord {
        size,
        trial,
        status: TrialStatus::Failed,
        violations: None,
        comparisons: None,
        aligned_residual: None,
        recovery_error: None,
        wall_time_ms: None,
        error: None,
        solution: None,
    };
    match attempt_trial(spec, size, trial) {
        Ok((status, result, residual, recovery)) => {
            record.status = status;
            record.violations = Some(result.violations);
            record.comparisons = Some(result.comparisons);
            match (residual, recovery) {
                (Ok(a), Ok(r)) => {
                    record.aligned_residual = Some(a);
                    record.recovery_error = Some(r);
                }
                (Err(e), _) | (_, Err(e)) => record.error = Some(format!("alignment failed: {e}")),
            }
            record.solution = Some(result.solution);
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    if spec.record_timings {
        record.wall_time_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    record
}

type Metric = Result<f64, GeometryError>;

fn attempt_trial(
    spec: &ExperimentSpec,
    size: Size,
    trial: usize,
) -> Result<(TrialStatus, SolveResult, Metric, Metric), HarnessError> {
    let inst = sample_instance(spec, size, trial)?;
    let (status, result) = if spec.bypass_solver {
        let violations = count_violations(&inst.data, &inst.truth)?;
        let result = SolveResult {
            comparisons: comparisons(&inst.data),
            solution: inst.truth.clone(),
            violations,
            loss: 0.0,
            margin: None,
            iterations_used: 0,
            converged: true,
            restart: 0,
            loss_trace: Vec::new(),
        };
        (TrialStatus::Solved, result)
    } else {
        let opts = spec.solver_opts.clone().with_seed(inst.solver_seed);
        classify(solve(spec.variant, spec.dim, &inst.data, &opts))?
    };
    let (residual, recovery) = score(&result.solution, &inst.truth);
    Ok((status, result, residual, recovery))
}

fn classify(outcome: Result<SolveResult, SolverError>) -> Result<(TrialStatus, SolveResult), SolverError> {
    match outcome {
        Ok(r) => Ok((TrialStatus::Solved, r)),
        Err(SolverError::Infeasible(r)) => Ok((TrialStatus::Infeasible, *r)),
        Err(SolverError::NonConverged(r)) => Ok((TrialStatus::NonConverged, *r)),
        Err(SolverError::DegenerateSolution(r)) => Ok((TrialStatus::Degenerate, *r)),
        Err(e) => Err(e),
    }
}

fn solve(variant: Variant, dim: usize, data: &Data, opts: &SolverOptions) -> Result<SolveResult, SolverError> {
    match (variant, data) {
        (Variant::ExternalPoint, Data::Row { objects, row }) => solve_external_point(objects, row, opts),
        (Variant::ExternalVector, Data::Row { objects, row }) => solve_external_vector(objects, row, opts),
        (Variant::Mds, Data::Triples { triples, n }) => solve_ordinal_mds(triples, *n, dim, opts),
        (Variant::SphereMds, Data::Triples { triples, n }) => solve_sphere_mds(triples, *n, dim, opts),
        (Variant::InternalPoint, Data::Ranks(r)) => solve_internal_point(r, dim, opts),
        (Variant::InternalVector, Data::Ranks(r)) => solve_internal_vector(r, dim, opts),
        _ => unreachable!("instance data always matches the variant"),
    }
}

fn comparisons(data: &Data) -> usize {
    match data {
        Data::Row { row, .. } => row.len() * row.len().saturating_sub(1) / 2,
        Data::Triples { triples, .. } => triples.len(),
        Data::Ranks(r) => r.rows() * r.cols() * r.cols().saturating_sub(1) / 2,
    }
}

/// `(aligned_residual, recovery_error)` of `solution` against `truth`.
fn score(solution: &Solution, truth: &Solution) -> (Metric, Metric) {
    let both = |r: Metric| (r.clone(), r);
    match (solution, truth) {
        (Solution::ExternalPoint { individual: a }, Solution::ExternalPoint { individual: b }) => {
            let d = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            (Ok(d), Ok(d))
        }
        (Solution::ExternalVector { individual: a }, Solution::ExternalVector { individual: b }) => {
            let chord = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let cos = crate::geometry::dot(a, b) / (norm(a) * norm(b));
            (Ok(chord), Ok(cos.clamp(-1.0, 1.0).acos()))
        }
        (Solution::Embedding { items: a }, Solution::Embedding { items: b }) => {
            both(similarity_procrustes(a, b, true).map(|r| r.residual))
        }
        (Solution::SphereEmbedding { items: a }, Solution::SphereEmbedding { items: b }) => {
            both(orthogonal_align(a, b).map(|r| r.residual))
        }
        (
            Solution::PointUnfolding {
                individuals: ax,
                objects: ay,
            },
            Solution::PointUnfolding {
                individuals: bx,
                objects: by,
            },
        ) => both(
            ax.stack(ay)
                .and_then(|a| bx.stack(by).map(|b| (a, b)))
                .and_then(|(a, b)| similarity_procrustes(&a, &b, true))
                .map(|r| r.residual),
        ),
        (
            Solution::VectorUnfolding {
                individuals: ax,
                objects: ay,
            },
            Solution::VectorUnfolding {
                individuals: bx,
                objects: by,
            },
        ) => both(gauge_align_vector_model(ax, ay, bx, by).map(|r| r.residual)),
        _ => unreachable!("solution kind always matches the truth"),
    }
}

fn count_violations(data: &Data, solution: &Solution) -> Result<usize, HarnessError> {
    let single = |x: &[f64]| Configuration::new(x.len(), vec![x.to_vec()]);
    let row_triples = |row: &[u32], model| -> Result<TripleSet, RankError> {
        triples_from_ranks(&RankMatrix::new(vec![row.to_vec()])?, model, None, 0)
    };
    let count = match (data, solution) {
        (Data::Row { objects, row }, Solution::ExternalPoint { individual }) => violation_count(
            &row_triples(row, ComparisonModel::PointDistance)?,
            &single(individual)?,
            objects,
        )?,
        (Data::Row { objects, row }, Solution::ExternalVector { individual }) => violation_count(
            &row_triples(row, ComparisonModel::VectorInnerProduct)?,
            &single(individual)?,
            objects,
        )?,
        (Data::Triples { triples, .. }, Solution::Embedding { items }) => violation_count(triples, items, items)?,
        (Data::Triples { triples, .. }, Solution::SphereEmbedding { items }) => {
            violation_count(triples, items.as_configuration(), items.as_configuration())?
        }
        (Data::Ranks(r), Solution::PointUnfolding { individuals, objects }) => violation_count(
            &triples_from_ranks(r, ComparisonModel::PointDistance, None, 0)?,
            individuals,
            objects,
        )?,
        (Data::Ranks(r), Solution::VectorUnfolding { individuals, objects }) => violation_count(
            &triples_from_ranks(r, ComparisonModel::VectorInnerProduct, None, 0)?,
            individuals.as_configuration(),
            objects,
        )?,
        _ => {
            return Err(HarnessError::InvalidSpec(
                "stored solution does not match the experiment variant".into(),
            ))
        }
    };
    Ok(count)
}

/// Recomputes the violation count of a stored record from its solution and
/// freshly regenerated rank data. `None` for records without a solution.
pub fn recount_violations(spec: &ExperimentSpec, record: &TrialRecord) -> Result<Option<usize>, HarnessError> {
    let Some(solution) = &record.solution else {
        return Ok(None);
    };
    let inst = sample_instance(spec, record.size, record.trial)?;
    count_violations(&inst.data, solution).map(Some)
}

/// Adds isotropic noise of size [`TIE_JITTER`] to every point.
fn jitter(c: &Configuration, rng: &mut StreamRng) -> Result<Configuration, GeometryError> {
    let dim = c.dim();
    c.map_points(|x| {
        let e = standard_normal_vec(dim, rng);
        x.iter().zip(e).map(|(a, b)| a + TIE_JITTER * b).collect()
    })
}

/// Retries `build` on jittered inputs while it reports a tie.
fn untie<T>(
    mut configs: Vec<Configuration>,
    rng: &mut StreamRng,
    spherical: &[bool],
    mut build: impl FnMut(&[Configuration]) -> Result<T, HarnessError>,
) -> Result<(Vec<Configuration>, T), HarnessError> {
    for _ in 0..MAX_TIE_RETRIES {
        match build(&configs) {
            Err(HarnessError::Rank(RankError::Tie { .. })) => {
                for (c, &sph) in configs.iter_mut().zip(spherical) {
                    let j = jitter(c, rng)?;
                    *c = if sph {
                        SphericalConfiguration::normalize(&j)?.as_configuration().clone()
                    } else {
                        j
                    };
                }
            }
            other => return other.map(|t| (configs, t)),
        }
    }
    build(&configs).map(|t| (configs, t))
}

fn shifted(c: Configuration, shift: f64) -> Result<Configuration, GeometryError> {
    if shift == 0.0 {
        return Ok(c);
    }
    c.map_points(|x| {
        let mut y = x.to_vec();
        y[0] += shift;
        y
    })
}

fn sample_instance(spec: &ExperimentSpec, size: Size, trial: usize) -> Result<Instance, HarnessError> {
    let (m, n, p) = (size.individuals(), size.objects(), spec.dim);
    let mut rng = stream_rng(spec.seed, stream_id(TRIAL_TAG, n as u64, m as u64, trial as u64));
    let solver_seed: u64 = rng.random();
    let (data, truth) = match spec.variant {
        Variant::ExternalPoint => {
            let objects = spec.design.sample(p, n, &mut rng)?;
            let center = spec.design.center(p);
            let raw = spec.design.sample(p, 1, &mut rng)?;
            let x: Vec<f64> = raw
                .point(0)
                .iter()
                .zip(&center)
                .map(|(v, c)| c + INTERIOR_SHRINK * (v - c))
                .collect();
            let viewer = Configuration::new(p, vec![x])?;
            let (cs, ranks) = untie(vec![viewer, objects], &mut rng, &[false, false], |c| {
                Ok(row_ranks_point(&c[0], &c[1])?)
            })?;
            let truth = Solution::ExternalPoint {
                individual: cs[0].point(0).to_vec(),
            };
            let row = ranks.row(0).to_vec();
            let objects = cs.into_iter().nth(1).expect("two configurations");
            (Data::Row { objects, row }, truth)
        }
        Variant::ExternalVector => {
            let objects = spec.design.sample(p, n, &mut rng)?;
            let viewer = Configuration::new(p, vec![uniform_sphere(p, &mut rng)])?;
            let (cs, ranks) = untie(vec![viewer, objects], &mut rng, &[true, false], |c| {
                Ok(row_ranks_vector(&SphericalConfiguration::new(c[0].clone())?, &c[1])?)
            })?;
            let truth = Solution::ExternalVector {
                individual: cs[0].point(0).to_vec(),
            };
            let row = ranks.row(0).to_vec();
            let objects = cs.into_iter().nth(1).expect("two configurations");
            (Data::Row { objects, row }, truth)
        }
        Variant::Mds | Variant::SphereMds => {
            let sphere = spec.variant == Variant::SphereMds;
            let items = if sphere {
                sample_sphere(p, n, &mut rng)?.as_configuration().clone()
            } else {
                spec.design.sample(p, n, &mut rng)?
            };
            let (cs, ranks) = untie(vec![items], &mut rng, &[sphere], |c| Ok(mds_row_ranks(&c[0])?))?;
            let triples = triples_from_ranks(&ranks, ComparisonModel::SelfDistance, spec.triple_sample, rng.random())?;
            let items = cs.into_iter().next().expect("one configuration");
            let truth = if sphere {
                Solution::SphereEmbedding {
                    items: SphericalConfiguration::new(items)?,
                }
            } else {
                Solution::Embedding { items }
            };
            (Data::Triples { triples, n }, truth)
        }
        Variant::InternalPoint => {
            let xs = spec.design.sample(p, m, &mut rng)?;
            let ys = shifted(spec.design.sample(p, n, &mut rng)?, spec.object_shift)?;
            let (cs, ranks) = untie(vec![xs, ys], &mut rng, &[false, false], |c| {
                Ok(row_ranks_point(&c[0], &c[1])?)
            })?;
            let mut it = cs.into_iter();
            let (individuals, objects) = (it.next().expect("individuals"), it.next().expect("objects"));
            (Data::Ranks(ranks), Solution::PointUnfolding { individuals, objects })
        }
        Variant::InternalVector => {
            let xs = sample_sphere(p, m, &mut rng)?.as_configuration().clone();
            let ys = shifted(spec.design.sample(p, n, &mut rng)?, spec.object_shift)?;
            let (cs, ranks) = untie(vec![xs, ys], &mut rng, &[true, false], |c| {
                Ok(row_ranks_vector(&SphericalConfiguration::new(c[0].clone())?, &c[1])?)
            })?;
            let mut it = cs.into_iter();
            let individuals = SphericalConfiguration::new(it.next().expect("individuals"))?;
            let objects = it.next().expect("objects");
            (Data::Ranks(ranks), Solution::VectorUnfolding { individuals, objects })
        }
    };
    Ok(Instance {
        data,
        truth,
        solver_seed,
    })
}

/// Median and quartiles by linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn median_iqr(mut values: Vec<f64>) -> (Option<f64>, Option<[f64; 2]>) {
    if values.is_empty() {
        return (None, None);
    }
    values.sort_by(f64::total_cmp);
    (
        Some(quantile(&values, 0.5)),
        Some([quantile(&values, 0.25), quantile(&values, 0.75)]),
    )
}

fn summarize(size: Size, records: &[TrialRecord]) -> SizeSummary {
    let rows: Vec<&TrialRecord> = records.iter().filter(|r| r.size == size).collect();
    let (median_recovery_error, iqr_recovery_error) =
        median_iqr(rows.iter().filter_map(|r| r.recovery_error).collect());
    let (median_aligned_residual, iqr_aligned_residual) =
        median_iqr(rows.iter().filter_map(|r| r.aligned_residual).collect());
    let (median_violation_fraction, _) = median_iqr(rows.iter().filter_map(|r| r.violation_fraction()).collect());
    SizeSummary {
        size,
        trials: rows.len(),
        failed: rows.iter().filter(|r| r.status == TrialStatus::Failed).count(),
        zero_violation: rows.iter().filter(|r| r.violations == Some(0)).count(),
        median_recovery_error,
        iqr_recovery_error,
        median_aligned_residual,
        iqr_aligned_residual,
        median_violation_fraction,
    }
}
