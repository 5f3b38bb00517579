//! Projected gradient descent on hinge surrogates for the joint problems.
//!
//! All four objectives are means of `max(0, δ + a − b)²` over the supplied
//! comparisons, where `a`, `b` are squared distances (point models) or
//! inner products (vector and spherical models); squaring the hinge makes
//! the loss continuously differentiable. After every step the
//! parameters are projected back onto the gauge slice: zero centroid and
//! unit RMS radius for Euclidean configurations (objects only, in the
//! unfolding problems), unit norm for vectors on the sphere.
//!
//! A step is accepted only if it does not increase the loss; otherwise the
//! step multiplier is halved. The recorded loss is therefore non-increasing
//! within a restart.
//!
//! Unfolding from random starts tends to collapse objects into clumps, so
//! the first restart of the unfolding solvers starts from classical scaling
//! of the objects' rank profiles; later restarts are random.

use nalgebra::DMatrix;
use rand::Rng;

use super::{Solution, SolveResult, SolverError, SolverOptions};
use crate::geometry::{sq_dist, Configuration, SphericalConfiguration};
use crate::rankings::{triples_from_ranks, violation_count, ComparisonModel, RankError, RankMatrix, Triple, TripleSet};
use crate::rng::stream_rng;
use crate::sampling::standard_normal_vec;

const PLATEAU_WINDOW: usize = 25;
const MAX_BACKTRACKS: usize = 40;
const MAX_MULTIPLIER: f64 = 1e4;

/// Degeneracy threshold: individuals' spread relative to the objects'.
pub const DEGENERACY_RATIO: f64 = 1e-6;

trait Objective {
    fn len(&self) -> usize;
    /// Mean squared-hinge loss; writes the gradient into `grad`.
    fn loss_grad(&self, params: &[f64], grad: &mut [f64]) -> f64;
    fn project(&self, params: &mut [f64]);
    /// Deterministic data-driven start used by the first restart, if any.
    fn informed_start(&self) -> Option<Vec<f64>> {
        None
    }
    fn init<R: Rng>(&self, rng: &mut R, restart: usize) -> Vec<f64> {
        let mut x = match self.informed_start() {
            Some(x) if restart == 0 => x,
            _ => standard_normal_vec(self.len(), rng),
        };
        self.project(&mut x);
        x
    }
}

struct Run {
    params: Vec<f64>,
    loss: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

fn descend<O: Objective>(obj: &O, opts: &SolverOptions, restart: usize) -> Run {
    let mut rng = stream_rng(opts.seed, restart as u64);
    let mut x = obj.init(&mut rng, restart);
    let mut grad = vec![0.0; x.len()];
    let mut loss = obj.loss_grad(&x, &mut grad);
    let mut trace = vec![loss];
    let mut cand = vec![0.0; x.len()];
    let mut cand_grad = vec![0.0; x.len()];
    let mut multiplier = 1.0;
    let mut stalled = 0;
    let mut converged = false;
    let mut iterations = 0;
    let total = opts.max_iterations as f64;
    while iterations < opts.max_iterations {
        if loss == 0.0 {
            converged = true;
            break;
        }
        let cosine = 0.5 * (1.0 + (std::f64::consts::PI * iterations as f64 / total).cos());
        let base = opts.learning_rate * cosine.max(1e-3);
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let step = base * multiplier;
            for ((c, xi), gi) in cand.iter_mut().zip(&x).zip(&grad) {
                *c = xi - step * gi;
            }
            obj.project(&mut cand);
            let l = obj.loss_grad(&cand, &mut cand_grad);
            if l <= loss {
                accepted = Some(l);
                multiplier = (multiplier * 1.2).min(MAX_MULTIPLIER);
                break;
            }
            multiplier *= 0.5;
        }
        iterations += 1;
        let Some(next) = accepted else {
            converged = true;
            break;
        };
        let improvement = (loss - next) / loss.max(f64::MIN_POSITIVE);
        std::mem::swap(&mut x, &mut cand);
        std::mem::swap(&mut grad, &mut cand_grad);
        loss = next;
        trace.push(loss);
        if improvement < opts.tolerance {
            stalled += 1;
            if stalled >= PLATEAU_WINDOW {
                converged = true;
                break;
            }
        } else {
            stalled = 0;
        }
    }
    Run {
        params: x,
        loss,
        iterations,
        converged,
        trace,
    }
}

/// Centers `block` (rows of width `dim`) and scales it to unit RMS radius;
/// the same map is applied to `companion`. Returns false if `block` has
/// collapsed to a point.
fn normalize_block(block: &mut [f64], companion: &mut [f64], dim: usize) -> bool {
    let n = block.len() / dim;
    let mut c = vec![0.0; dim];
    for p in block.chunks_exact(dim) {
        for (a, v) in c.iter_mut().zip(p) {
            *a += v;
        }
    }
    c.iter_mut().for_each(|v| *v /= n as f64);
    let spread: f64 = block.chunks_exact(dim).map(|p| sq_dist(p, &c)).sum::<f64>() / n as f64;
    let r = spread.sqrt();
    if !(r > 0.0 && r.is_finite()) {
        return false;
    }
    for p in block.chunks_exact_mut(dim).chain(companion.chunks_exact_mut(dim)) {
        for (v, cv) in p.iter_mut().zip(&c) {
            *v = (*v - cv) / r;
        }
    }
    true
}

fn normalize_rows(block: &mut [f64], dim: usize) {
    for p in block.chunks_exact_mut(dim) {
        let n = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            p.iter_mut().for_each(|v| *v /= n);
        } else {
            p[0] = 1.0;
        }
    }
}

/// Squared hinge for a positive argument, and its derivative.
#[inline]
fn hinge(h: f64) -> (f64, f64) {
    (h * h, 2.0 * h)
}

#[inline]
fn row(params: &[f64], i: usize, dim: usize) -> &[f64] {
    &params[i * dim..(i + 1) * dim]
}

#[inline]
fn add_to(grad: &mut [f64], i: usize, dim: usize, scale: f64, v: impl Iterator<Item = f64>) {
    for (g, x) in grad[i * dim..(i + 1) * dim].iter_mut().zip(v) {
        *g += scale * x;
    }
}

struct MdsObjective<'a> {
    triples: &'a [Triple],
    n: usize,
    dim: usize,
    margin: f64,
}

impl Objective for MdsObjective<'_> {
    fn len(&self) -> usize {
        self.n * self.dim
    }

    fn loss_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        if self.triples.is_empty() {
            return 0.0;
        }
        let w = 1.0 / self.triples.len() as f64;
        let d = self.dim;
        let mut loss = 0.0;
        for t in self.triples {
            let (xi, xj, xk) = (row(x, t.viewer, d), row(x, t.first, d), row(x, t.second, d));
            let h = self.margin + sq_dist(xi, xj) - sq_dist(xi, xk);
            if h > 0.0 {
                let (v, slope) = hinge(h);
                loss += v;
                let w = w * slope;
                add_to(grad, t.viewer, d, 2.0 * w, xk.iter().zip(xj).map(|(a, b)| a - b));
                add_to(grad, t.first, d, -2.0 * w, xi.iter().zip(xj).map(|(a, b)| a - b));
                add_to(grad, t.second, d, 2.0 * w, xi.iter().zip(xk).map(|(a, b)| a - b));
            }
        }
        loss * w
    }

    fn project(&self, x: &mut [f64]) {
        normalize_block(x, &mut [], self.dim);
    }
}

struct SphereObjective<'a> {
    triples: &'a [Triple],
    n: usize,
    dim: usize,
    margin: f64,
}

impl Objective for SphereObjective<'_> {
    fn len(&self) -> usize {
        self.n * self.dim
    }

    fn loss_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        if self.triples.is_empty() {
            return 0.0;
        }
        let w = 1.0 / self.triples.len() as f64;
        let d = self.dim;
        let mut loss = 0.0;
        for t in self.triples {
            let (xi, xj, xk) = (row(x, t.viewer, d), row(x, t.first, d), row(x, t.second, d));
            let h = self.margin + crate::geometry::dot(xi, xk) - crate::geometry::dot(xi, xj);
            if h > 0.0 {
                let (v, slope) = hinge(h);
                loss += v;
                let w = w * slope;
                add_to(grad, t.viewer, d, w, xk.iter().zip(xj).map(|(a, b)| a - b));
                add_to(grad, t.first, d, -w, xi.iter().copied());
                add_to(grad, t.second, d, w, xi.iter().copied());
            }
        }
        loss * w
    }

    fn project(&self, x: &mut [f64]) {
        normalize_rows(x, self.dim);
    }
}

/// Parameters are `[X (m×p) | Y (n×p)]`.
struct UnfoldingObjective<'a> {
    triples: &'a [Triple],
    ranks: &'a RankMatrix,
    m: usize,
    n: usize,
    dim: usize,
    margin: f64,
    vector: bool,
    repulsion_weight: f64,
    repulsion_radius: f64,
}

impl Objective for UnfoldingObjective<'_> {
    fn len(&self) -> usize {
        (self.m + self.n) * self.dim
    }

    fn loss_grad(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let d = self.dim;
        let off = self.m;
        let mut loss = 0.0;
        if !self.triples.is_empty() {
            let w = 1.0 / self.triples.len() as f64;
            let mut sum = 0.0;
            for t in self.triples {
                let xi = row(params, t.viewer, d);
                let yk = row(params, off + t.first, d);
                let yl = row(params, off + t.second, d);
                if self.vector {
                    let h = self.margin + crate::geometry::dot(xi, yl) - crate::geometry::dot(xi, yk);
                    if h > 0.0 {
                        let (v, slope) = hinge(h);
                        sum += v;
                        let w = w * slope;
                        add_to(grad, t.viewer, d, w, yl.iter().zip(yk).map(|(a, b)| a - b));
                        add_to(grad, off + t.first, d, -w, xi.iter().copied());
                        add_to(grad, off + t.second, d, w, xi.iter().copied());
                    }
                } else {
                    let h = self.margin + sq_dist(xi, yk) - sq_dist(xi, yl);
                    if h > 0.0 {
                        let (v, slope) = hinge(h);
                        sum += v;
                        let w = w * slope;
                        add_to(grad, t.viewer, d, 2.0 * w, yl.iter().zip(yk).map(|(a, b)| a - b));
                        add_to(grad, off + t.first, d, -2.0 * w, xi.iter().zip(yk).map(|(a, b)| a - b));
                        add_to(grad, off + t.second, d, 2.0 * w, xi.iter().zip(yl).map(|(a, b)| a - b));
                    }
                }
            }
            loss = sum * w;
        }
        if !self.vector && self.repulsion_weight > 0.0 {
            let lw = self.repulsion_weight / self.m as f64;
            for i in 0..self.m {
                let xi = row(params, i, d);
                let (k, dist) = (0..self.n)
                    .map(|k| (k, sq_dist(xi, row(params, off + k, d)).sqrt()))
                    .fold((0, f64::INFINITY), |a, c| if c.1 < a.1 { c } else { a });
                let gap = self.repulsion_radius - dist;
                if gap > 0.0 && dist > 0.0 {
                    loss += lw * gap * gap;
                    let yk = row(params, off + k, d).to_vec();
                    let coef = -2.0 * lw * gap / dist;
                    add_to(grad, i, d, coef, xi.iter().zip(&yk).map(|(a, b)| a - b));
                    let xi = xi.to_vec();
                    add_to(grad, off + k, d, -coef, xi.iter().zip(&yk).map(|(a, b)| a - b));
                }
            }
        }
        loss
    }

    fn informed_start(&self) -> Option<Vec<f64>> {
        Some(rank_profile_start(self.ranks, self.dim, self.vector))
    }

    fn project(&self, params: &mut [f64]) {
        let (x, y) = params.split_at_mut(self.m * self.dim);
        if self.vector {
            normalize_rows(x, self.dim);
            normalize_block(y, &mut [], self.dim);
        } else {
            normalize_block(y, x, self.dim);
        }
    }
}

/// Classical scaling of the objects' rank profiles (objects ranked alike by
/// everyone end up close), with each individual placed by its preferences:
/// a rank-weighted mean of the objects in the point model, the direction of
/// the centered-rank regression in the vector model.
fn rank_profile_start(ranks: &RankMatrix, dim: usize, vector: bool) -> Vec<f64> {
    let (m, n) = (ranks.rows(), ranks.cols());
    let mut d2 = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        for l in k + 1..n {
            let s: f64 = (0..m)
                .map(|i| {
                    let diff = ranks.rank(i, k) as f64 - ranks.rank(i, l) as f64;
                    diff * diff
                })
                .sum::<f64>()
                / m as f64;
            d2[(k, l)] = s;
            d2[(l, k)] = s;
        }
    }
    let centering = DMatrix::<f64>::identity(n, n) - DMatrix::<f64>::from_element(n, n, 1.0 / n as f64);
    let b = &centering * d2 * &centering * -0.5;
    let eig = b.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
    let mut y = vec![0.0; n * dim];
    for (axis, &e) in idx.iter().take(dim).enumerate() {
        let scale = eig.eigenvalues[e].max(0.0).sqrt();
        for k in 0..n {
            y[k * dim + axis] = eig.eigenvectors[(k, e)] * scale;
        }
    }
    let mut x = vec![0.0; m * dim];
    for i in 0..m {
        let xi = &mut x[i * dim..(i + 1) * dim];
        let mut total = 0.0;
        for k in 0..n {
            let r = ranks.rank(i, k) as f64;
            let w = if vector {
                (n as f64 + 1.0) / 2.0 - r
            } else {
                (-(r - 1.0) / 2.0).exp()
            };
            total += w;
            for (a, yk) in xi.iter_mut().zip(&y[k * dim..(k + 1) * dim]) {
                *a += w * yk;
            }
        }
        if !vector && total > 0.0 {
            xi.iter_mut().for_each(|v| *v /= total);
        }
    }
    x.extend(y);
    x
}

struct Best {
    run: Run,
    restart: usize,
    violations: usize,
    iterations: usize,
}

/// Runs every restart (stopping early at zero violations) and keeps the one
/// with fewest violations, then lowest loss.
fn best_of_restarts<O, F>(obj: &O, opts: &SolverOptions, mut violations: F) -> Result<Best, SolverError>
where
    O: Objective,
    F: FnMut(&[f64]) -> Result<usize, SolverError>,
{
    let mut best: Option<Best> = None;
    let mut iterations = 0;
    for restart in 0..opts.restarts {
        let run = descend(obj, opts, restart);
        iterations += run.iterations;
        let v = violations(&run.params)?;
        let better = best.as_ref().is_none_or(|b| (v, run.loss) < (b.violations, b.run.loss));
        if better {
            best = Some(Best {
                run,
                restart,
                violations: v,
                iterations: 0,
            });
        }
        if best.as_ref().is_some_and(|b| b.violations == 0) {
            break;
        }
    }
    let mut best = best.expect("restarts >= 1");
    best.iterations = iterations;
    Ok(best)
}

fn check_triples(triples: &TripleSet, model: ComparisonModel, viewers: usize, items: usize) -> Result<(), SolverError> {
    if triples.model() != model {
        return Err(SolverError::InvalidInput(format!(
            "expected {model} triples, got {}",
            triples.model()
        )));
    }
    for (index, t) in triples.triples().iter().enumerate() {
        if t.viewer >= viewers || t.first >= items || t.second >= items {
            return Err(RankError::IndexOutOfRange {
                index,
                viewer: t.viewer,
                first: t.first,
                second: t.second,
            }
            .into());
        }
    }
    Ok(())
}

fn finish(solution: Solution, best: Best, comparisons: usize) -> SolveResult {
    SolveResult {
        solution,
        violations: best.violations,
        comparisons,
        loss: best.run.loss,
        margin: None,
        iterations_used: best.iterations,
        converged: best.run.converged,
        restart: best.restart,
        loss_trace: best.run.trace,
    }
}

/// Ordinal MDS in `Rᵖ` from self-distance triples over `n` items.
pub fn solve_ordinal_mds(
    triples: &TripleSet,
    n: usize,
    p: usize,
    opts: &SolverOptions,
) -> Result<SolveResult, SolverError> {
    opts.validate()?;
    if n < 2 || p == 0 {
        return Err(SolverError::InvalidInput("need n >= 2 items and p >= 1".into()));
    }
    check_triples(triples, ComparisonModel::SelfDistance, n, n)?;
    let obj = MdsObjective {
        triples: triples.triples(),
        n,
        dim: p,
        margin: opts.margin,
    };
    let best = best_of_restarts(&obj, opts, |x| {
        let c = Configuration::from_flat(p, x.to_vec())?;
        Ok(violation_count(triples, &c, &c)?)
    })?;
    let items = Configuration::from_flat(p, best.run.params.clone())?;
    let result = finish(Solution::Embedding { items }, best, triples.len());
    if result.violations > 0 {
        return Err(SolverError::NonConverged(Box::new(result)));
    }
    Ok(result)
}

/// Ordinal MDS on the unit sphere `𝕊ᵖ⁻¹`. Triples use the self-distance
/// model; on the sphere nearer means larger inner product.
pub fn solve_sphere_mds(
    triples: &TripleSet,
    n: usize,
    p: usize,
    opts: &SolverOptions,
) -> Result<SolveResult, SolverError> {
    opts.validate()?;
    if n < 2 || p < 2 {
        return Err(SolverError::InvalidInput("need n >= 2 items and p >= 2".into()));
    }
    check_triples(triples, ComparisonModel::SelfDistance, n, n)?;
    let obj = SphereObjective {
        triples: triples.triples(),
        n,
        dim: p,
        margin: opts.margin,
    };
    let best = best_of_restarts(&obj, opts, |x| {
        let c = Configuration::from_flat(p, x.to_vec())?;
        Ok(violation_count(triples, &c, &c)?)
    })?;
    let items = SphericalConfiguration::normalize(&Configuration::from_flat(p, best.run.params.clone())?)?;
    let result = finish(Solution::SphereEmbedding { items }, best, triples.len());
    if result.violations > 0 {
        return Err(SolverError::NonConverged(Box::new(result)));
    }
    Ok(result)
}

fn unfolding(ranks: &RankMatrix, p: usize, opts: &SolverOptions, vector: bool) -> Result<SolveResult, SolverError> {
    opts.validate()?;
    let (m, n) = (ranks.rows(), ranks.cols());
    if m < 2 || n < 2 {
        return Err(SolverError::InvalidInput(
            "need at least 2 individuals and 2 objects".into(),
        ));
    }
    if p == 0 || (vector && p < 2) {
        return Err(SolverError::InvalidInput(format!(
            "dimension {p} not supported (vector model needs p >= 2)"
        )));
    }
    let model = if vector {
        ComparisonModel::VectorInnerProduct
    } else {
        ComparisonModel::PointDistance
    };
    let triples = triples_from_ranks(ranks, model, None, 0)?;
    let obj = UnfoldingObjective {
        triples: triples.triples(),
        ranks,
        m,
        n,
        dim: p,
        margin: opts.margin,
        vector,
        repulsion_weight: opts.repulsion_weight,
        repulsion_radius: opts.repulsion_radius,
    };
    let split = |x: &[f64]| -> Result<(Configuration, Configuration), SolverError> {
        let (a, b) = x.split_at(m * p);
        Ok((
            Configuration::from_flat(p, a.to_vec())?,
            Configuration::from_flat(p, b.to_vec())?,
        ))
    };
    let best = best_of_restarts(&obj, opts, |x| {
        let (xs, ys) = split(x)?;
        Ok(violation_count(&triples, &xs, &ys)?)
    })?;
    let (xs, ys) = split(&best.run.params)?;
    let degenerate = xs.rms_radius() < DEGENERACY_RATIO * ys.rms_radius();
    let solution = if vector {
        Solution::VectorUnfolding {
            individuals: SphericalConfiguration::normalize(&xs)?,
            objects: ys,
        }
    } else {
        Solution::PointUnfolding {
            individuals: xs,
            objects: ys,
        }
    };
    let result = finish(solution, best, triples.len());
    if degenerate {
        return Err(SolverError::DegenerateSolution(Box::new(result)));
    }
    if result.violations > 0 {
        return Err(SolverError::NonConverged(Box::new(result)));
    }
    Ok(result)
}

/// Internal unfolding, point model: individuals and objects in `Rᵖ`.
pub fn solve_internal_point(ranks: &RankMatrix, p: usize, opts: &SolverOptions) -> Result<SolveResult, SolverError> {
    unfolding(ranks, p, opts, false)
}

/// Internal unfolding, vector model: individuals on `𝕊ᵖ⁻¹`, objects in `Rᵖ`.
pub fn solve_internal_vector(ranks: &RankMatrix, p: usize, opts: &SolverOptions) -> Result<SolveResult, SolverError> {
    unfolding(ranks, p, opts, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rankings::{mds_row_ranks, row_ranks_point, row_ranks_vector};
    use crate::sampling::{sample_sphere, Design};

    fn cfg(dim: usize, pts: &[&[f64]]) -> Configuration {
        Configuration::new(dim, pts.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    /// Central finite differences of the loss.
    fn check_gradient<O: Objective>(obj: &O, x: &[f64]) {
        let mut g = vec![0.0; x.len()];
        obj.loss_grad(x, &mut g);
        let mut scratch = vec![0.0; x.len()];
        let h = 1e-6;
        for i in 0..x.len() {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += h;
            b[i] -= h;
            let fd = (obj.loss_grad(&a, &mut scratch) - obj.loss_grad(&b, &mut scratch)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-5, "coordinate {i}: analytic {} vs fd {fd}", g[i]);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = stream_rng(21, 0);
        let x = Design::UniformBall.sample(2, 6, &mut rng).unwrap();
        let triples = triples_from_ranks(&mds_row_ranks(&x).unwrap(), ComparisonModel::SelfDistance, None, 0).unwrap();
        let params = standard_normal_vec(12, &mut rng);
        // Large margin so most hinges are active and none sits on a kink.
        let mds = MdsObjective {
            triples: triples.triples(),
            n: 6,
            dim: 2,
            margin: 5.0,
        };
        check_gradient(&mds, &params);
        let sphere = SphereObjective {
            triples: triples.triples(),
            n: 6,
            dim: 2,
            margin: 5.0,
        };
        check_gradient(&sphere, &params);

        let ranks = RankMatrix::new(vec![vec![1, 3, 2], vec![2, 1, 3]]).unwrap();
        for vector in [false, true] {
            let model = if vector {
                ComparisonModel::VectorInnerProduct
            } else {
                ComparisonModel::PointDistance
            };
            let t = triples_from_ranks(&ranks, model, None, 0).unwrap();
            let obj = UnfoldingObjective {
                triples: t.triples(),
                ranks: &ranks,
                m: 2,
                n: 3,
                dim: 2,
                margin: 20.0,
                vector,
                repulsion_weight: if vector { 0.0 } else { 0.7 },
                repulsion_radius: 50.0,
            };
            let params = standard_normal_vec(10, &mut rng);
            check_gradient(&obj, &params);
        }
    }

    #[test]
    fn mds_collinear_three() {
        let x = cfg(1, &[&[0.0], &[1.0], &[3.0]]);
        let t = triples_from_ranks(&mds_row_ranks(&x).unwrap(), ComparisonModel::SelfDistance, None, 0).unwrap();
        let r = solve_ordinal_mds(&t, 3, 1, &SolverOptions::default()).unwrap();
        let Solution::Embedding { items } = &r.solution else {
            unreachable!()
        };
        assert_eq!(violation_count(&t, items, items).unwrap(), 0);
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn mds_two_items() {
        let t = TripleSet::new(ComparisonModel::SelfDistance, vec![]).unwrap();
        let r = solve_ordinal_mds(&t, 2, 2, &SolverOptions::default()).unwrap();
        let Solution::Embedding { items } = &r.solution else {
            unreachable!()
        };
        assert!(sq_dist(items.point(0), items.point(1)) > 0.0);
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn mds_rejects_wrong_model() {
        let t = TripleSet::new(ComparisonModel::PointDistance, vec![Triple::new(0, 1, 2)]).unwrap();
        assert!(matches!(
            solve_ordinal_mds(&t, 3, 2, &SolverOptions::default()),
            Err(SolverError::InvalidInput(_))
        ));
        let t = TripleSet::new(ComparisonModel::SelfDistance, vec![Triple::new(0, 1, 7)]).unwrap();
        assert!(matches!(
            solve_ordinal_mds(&t, 3, 2, &SolverOptions::default()),
            Err(SolverError::Rank(_))
        ));
    }

    #[test]
    fn loss_trace_non_increasing_and_deterministic() {
        let mut rng = stream_rng(22, 0);
        let x = Design::UniformCube.sample(2, 12, &mut rng).unwrap();
        let t = triples_from_ranks(&mds_row_ranks(&x).unwrap(), ComparisonModel::SelfDistance, None, 0).unwrap();
        let opts = SolverOptions {
            max_iterations: 800,
            ..SolverOptions::default()
        }
        .with_seed(5);
        let a = crate::solvers::result_or_partial(solve_ordinal_mds(&t, 12, 2, &opts)).unwrap();
        let b = crate::solvers::result_or_partial(solve_ordinal_mds(&t, 12, 2, &opts)).unwrap();
        assert_eq!(a, b);
        assert!(a.loss_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn internal_point_two_by_two() {
        let r = RankMatrix::new(vec![vec![1, 2], vec![2, 1]]).unwrap();
        let res = solve_internal_point(&r, 2, &SolverOptions::default()).unwrap();
        assert_eq!(res.violations, 0);
        assert_eq!(res.comparisons, 2);
    }

    #[test]
    fn internal_vector_two_by_two() {
        let r = RankMatrix::new(vec![vec![1, 2], vec![2, 1]]).unwrap();
        let res = solve_internal_vector(&r, 2, &SolverOptions::default()).unwrap();
        assert_eq!(res.violations, 0);
        // The antipodal configuration is feasible too.
        let x = cfg(2, &[&[1.0, 0.0], &[-1.0, 0.0]]);
        let t = triples_from_ranks(&r, ComparisonModel::VectorInnerProduct, None, 0).unwrap();
        assert_eq!(violation_count(&t, &x, &x).unwrap(), 0);
    }

    #[test]
    fn internal_vector_rejects_p1() {
        let r = RankMatrix::new(vec![vec![1, 2], vec![2, 1]]).unwrap();
        assert!(matches!(
            solve_internal_vector(&r, 1, &SolverOptions::default()),
            Err(SolverError::InvalidInput(_))
        ));
    }

    #[test]
    fn internal_point_from_ground_truth() {
        let mut rng = stream_rng(23, 0);
        let xs = Design::UniformBall.sample(2, 15, &mut rng).unwrap();
        let ys = Design::UniformBall.sample(2, 15, &mut rng).unwrap();
        let ranks = row_ranks_point(&xs, &ys).unwrap();
        let res =
            crate::solvers::result_or_partial(solve_internal_point(&ranks, 2, &SolverOptions::default().with_seed(1)))
                .unwrap();
        assert!(
            res.violation_fraction() <= 0.01,
            "fraction {}",
            res.violation_fraction()
        );
    }

    #[test]
    fn internal_vector_from_ground_truth() {
        let mut rng = stream_rng(24, 0);
        let xs = sample_sphere(2, 10, &mut rng).unwrap();
        let ys = Design::UniformBall.sample(2, 20, &mut rng).unwrap();
        let ranks = row_ranks_vector(&xs, &ys).unwrap();
        let res =
            crate::solvers::result_or_partial(solve_internal_vector(&ranks, 2, &SolverOptions::default().with_seed(1)))
                .unwrap();
        assert!(
            res.violation_fraction() <= 0.01,
            "fraction {}",
            res.violation_fraction()
        );
    }

    #[test]
    fn sphere_three_on_circle() {
        let items = cfg(2, &[&[1.0, 0.0], &[-0.5, 0.75f64.sqrt()], &[-0.5, -(0.75f64.sqrt())]]);
        // Equilateral: every row is a tie, so compare against a slightly
        // perturbed copy that breaks the symmetry.
        let perturbed = items.map_points(|p| vec![p[0] + 1e-3 * p[1], p[1]]).unwrap();
        let s = SphericalConfiguration::normalize(&perturbed).unwrap();
        let t = triples_from_ranks(
            &mds_row_ranks(s.as_configuration()).unwrap(),
            ComparisonModel::SelfDistance,
            None,
            0,
        )
        .unwrap();
        let a = solve_sphere_mds(&t, 3, 2, &SolverOptions::default()).unwrap();
        let b = solve_sphere_mds(&t, 3, 2, &SolverOptions::default()).unwrap();
        assert_eq!(a.violations, 0);
        assert_eq!(a, b);
    }
}
