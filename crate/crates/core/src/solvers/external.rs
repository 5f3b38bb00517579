//! External unfolding as max-margin halfspace feasibility.
//!
//! With the objects fixed, "object `a` preferred to object `b`" is a linear
//! constraint on the individual `x`: membership in the bisector halfspace
//! `H⁺(y_a, y_b)` for the point model, `⟨x, y_a − y_b⟩ > 0` for the vector
//! model. Consecutive pairs of the ranking imply all the others, so only
//! `n − 1` halfspaces are kept; the feasible cell is the same set.
//!
//! Each restart runs a relaxation perceptron to reach the cell, then
//! maximizes the smallest normalized slack. The minimum is smoothed by a
//! soft-min at temperature `τ`, climbed with damped Newton steps, and `τ`
//! is annealed towards zero so the iterate approaches the cell's
//! Chebyshev center. In the vector model the individual lives in the unit
//! ball, enforced with a log barrier, and is normalized at the end.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{Solution, SolveResult, SolverError, SolverOptions};
use crate::geometry::{dot, norm, Configuration};
use crate::rankings::{order_of_row, triples_from_ranks, validate_row, violation_count, ComparisonModel, RankMatrix};
use crate::rng::stream_rng;
use crate::sampling::{standard_normal_vec, uniform_sphere};

const RELAXATION: f64 = 1.5;
const INNER_NEWTON_STEPS: usize = 60;
const TAU_DECAY: f64 = 0.25;

#[derive(Clone, Copy, PartialEq)]
enum Domain {
    /// Euclidean space; the data constraints are complemented by a bounding box.
    Free,
    /// The open unit ball, via a log barrier; the answer is radially projected.
    UnitBall,
}

/// `slack_k(x) = ⟨w_k, x⟩ − c_k` with unit normals `w_k`. The first `real`
/// rows are data constraints; the rest bound the search domain.
struct Halfspaces {
    dim: usize,
    normals: Vec<f64>,
    offsets: Vec<f64>,
    real: usize,
}

impl Halfspaces {
    fn len(&self) -> usize {
        self.offsets.len()
    }

    fn normal(&self, k: usize) -> &[f64] {
        &self.normals[k * self.dim..(k + 1) * self.dim]
    }

    fn slack(&self, k: usize, x: &[f64]) -> f64 {
        dot(self.normal(k), x) - self.offsets[k]
    }

    /// Smallest data slack and its index; `+∞` without data constraints.
    fn min_real_slack(&self, x: &[f64]) -> (usize, f64) {
        (0..self.real)
            .map(|k| (k, self.slack(k, x)))
            .fold((0, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc })
    }
}

struct Smoothed {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

/// Soft-min of all slacks at temperature `tau` (plus barrier in the ball),
/// with gradient and Hessian. `None` outside the domain.
fn smoothed(hs: &Halfspaces, domain: Domain, tau: f64, x: &[f64], with_derivatives: bool) -> Option<Smoothed> {
    let p = hs.dim;
    let r2 = dot(x, x);
    if domain == Domain::UnitBall && r2 >= 1.0 {
        return None;
    }
    let slacks: Vec<f64> = (0..hs.len()).map(|k| hs.slack(k, x)).collect();
    let smin = slacks.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = slacks.iter().map(|s| (-(s - smin) / tau).exp()).collect();
    let z: f64 = weights.iter().sum();
    let mut value = smin - tau * z.ln();
    let mut grad = DVector::zeros(p);
    let mut hess = DMatrix::zeros(p, p);
    if with_derivatives {
        let mut second = DMatrix::zeros(p, p);
        for (k, w) in weights.iter().enumerate() {
            let pi = w / z;
            if pi == 0.0 {
                continue;
            }
            let n = DVector::from_column_slice(hs.normal(k));
            grad.axpy(pi, &n, 1.0);
            second.ger(pi, &n, &n, 1.0);
        }
        hess = -(second - &grad * grad.transpose()) / tau;
    }
    if domain == Domain::UnitBall {
        let gap = 1.0 - r2;
        value += tau * gap.ln();
        if with_derivatives {
            let xv = DVector::from_column_slice(x);
            grad.axpy(-2.0 * tau / gap, &xv, 1.0);
            hess -= DMatrix::identity(p, p) * (2.0 * tau / gap);
            hess -= (&xv * xv.transpose()) * (4.0 * tau / (gap * gap));
        }
    }
    value.is_finite().then_some(Smoothed { value, grad, hess })
}

/// Newton direction for maximizing a concave function: `(−H + ridge) d = g`.
fn newton_direction(s: &Smoothed) -> DVector<f64> {
    let p = s.grad.len();
    let neg = -&s.hess;
    let scale = neg.trace().abs() / p as f64 + f64::MIN_POSITIVE;
    let mut ridge = 1e-12 * scale;
    for _ in 0..8 {
        let m = &neg + DMatrix::identity(p, p) * ridge;
        if let Some(ch) = m.cholesky() {
            let d = ch.solve(&s.grad);
            if d.iter().all(|v| v.is_finite()) {
                return d;
            }
        }
        ridge *= 1e3;
    }
    s.grad.clone()
}

struct MarginRun {
    x: Vec<f64>,
    margin: f64,
    iterations: usize,
    finished: bool,
    trace: Vec<f64>,
}

/// Normalized margin of an iterate: in the ball the slack of `x/‖x‖`.
fn margin_of(hs: &Halfspaces, domain: Domain, x: &[f64]) -> f64 {
    match domain {
        Domain::Free => hs.min_real_slack(x).1,
        Domain::UnitBall => {
            let n = norm(x);
            if n == 0.0 {
                return f64::NEG_INFINITY;
            }
            let unit: Vec<f64> = x.iter().map(|v| v / n).collect();
            hs.min_real_slack(&unit).1
        }
    }
}

fn maximize_margin(hs: &Halfspaces, domain: Domain, start: Vec<f64>, scale: f64, budget: usize) -> MarginRun {
    let mut x = start;
    let mut iterations = 0;
    let mut trace = Vec::new();
    let mut best_x = x.clone();
    let mut best = margin_of(hs, domain, &x);
    let record = |x: &[f64], best_x: &mut Vec<f64>, best: &mut f64, trace: &mut Vec<f64>| {
        let m = margin_of(hs, domain, x);
        if m > *best {
            *best = m;
            best_x.clear();
            best_x.extend_from_slice(x);
        }
        trace.push((-*best).max(0.0));
    };

    // Relaxation perceptron: reflect past the most violated bisector.
    let perceptron_budget = (budget / 2).min(50 * hs.real.max(1));
    while iterations < perceptron_budget {
        let unit_x: Vec<f64>;
        let probe = match domain {
            Domain::Free => &x,
            Domain::UnitBall => {
                unit_x = x.iter().map(|v| v / norm(&x)).collect();
                &unit_x
            }
        };
        let (k, s) = hs.min_real_slack(probe);
        if s > 0.0 {
            break;
        }
        let step = -RELAXATION * s + 1e-9 * scale;
        for (xi, wi) in x.iter_mut().zip(hs.normal(k)) {
            *xi += step * wi;
        }
        if domain == Domain::UnitBall {
            let n = norm(&x);
            if n > 0.0 {
                x.iter_mut().for_each(|v| *v /= n);
            }
        }
        iterations += 1;
        record(&x, &mut best_x, &mut best, &mut trace);
    }

    // Annealed soft-min ascent.
    if domain == Domain::UnitBall {
        x.iter_mut().for_each(|v| *v *= 0.5);
    }
    let mut tau = 0.1 * scale;
    let tau_floor = 1e-13 * scale;
    let mut finished = false;
    'anneal: while iterations < budget {
        for _ in 0..INNER_NEWTON_STEPS {
            if iterations >= budget {
                break 'anneal;
            }
            let Some(cur) = smoothed(hs, domain, tau, &x, true) else {
                break;
            };
            let d = newton_direction(&cur);
            let slope = cur.grad.dot(&d);
            if !(slope > 1e-14 * tau) {
                break;
            }
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let cand: Vec<f64> = x.iter().zip(d.iter()).map(|(a, b)| a + t * b).collect();
                if let Some(next) = smoothed(hs, domain, tau, &cand, false) {
                    if next.value >= cur.value + 1e-4 * t * slope {
                        accepted = Some(cand);
                        break;
                    }
                }
                t *= 0.5;
            }
            iterations += 1;
            match accepted {
                Some(cand) => {
                    x = cand;
                    record(&x, &mut best_x, &mut best, &mut trace);
                }
                None => {
                    trace.push((-best).max(0.0));
                    break;
                }
            }
        }
        if (best > 0.0 && tau < 1e-4 * best) || tau < tau_floor {
            finished = true;
            break;
        }
        tau *= TAU_DECAY;
    }
    MarginRun {
        x: best_x,
        margin: best,
        iterations,
        finished,
        trace,
    }
}

struct Prepared {
    hs: Halfspaces,
    model: ComparisonModel,
    order: Vec<usize>,
}

fn prepare(objects: &Configuration, row: &[u32], model: ComparisonModel) -> Result<Prepared, SolverError> {
    if row.len() != objects.len() {
        return Err(SolverError::InvalidInput(format!(
            "rank row has {} entries for {} objects",
            row.len(),
            objects.len()
        )));
    }
    validate_row(row)?;
    let p = objects.dim();
    let order = order_of_row(row);
    let mut normals = Vec::with_capacity(p * order.len());
    let mut offsets = Vec::with_capacity(order.len());
    for w in order.windows(2) {
        let (a, b) = (objects.point(w[0]), objects.point(w[1]));
        let diff: Vec<f64> = a.iter().zip(b).map(|(u, v)| u - v).collect();
        let len = norm(&diff);
        if len == 0.0 {
            return Err(SolverError::InvalidInput(format!(
                "objects {} and {} coincide",
                w[0], w[1]
            )));
        }
        normals.extend(diff.iter().map(|d| d / len));
        offsets.push(match model {
            // ‖x−b‖² − ‖x−a‖² = 2⟨x, a−b⟩ − (‖a‖² − ‖b‖²), halved and normalized.
            ComparisonModel::PointDistance => (dot(a, a) - dot(b, b)) / (2.0 * len),
            _ => 0.0,
        });
    }
    let real = offsets.len();
    if model == ComparisonModel::PointDistance {
        let c = objects.centroid();
        let reach = objects
            .points()
            .map(|q| crate::geometry::sq_dist(q, &c).sqrt())
            .fold(0.0, f64::max);
        let half_width = 2.0 * reach + 1.0;
        for d in 0..p {
            for sign in [1.0, -1.0] {
                let mut e = vec![0.0; p];
                e[d] = sign;
                normals.extend(e);
                offsets.push(sign * c[d] - half_width);
            }
        }
    }
    Ok(Prepared {
        hs: Halfspaces {
            dim: p,
            normals,
            offsets,
            real,
        },
        model,
        order,
    })
}

fn count_violations(
    objects: &Configuration,
    row: &[u32],
    model: ComparisonModel,
    x: &[f64],
) -> Result<(usize, usize), SolverError> {
    let ranks = RankMatrix::new(vec![row.to_vec()])?;
    let triples = triples_from_ranks(&ranks, model, None, 0)?;
    let viewer = Configuration::from_flat(objects.dim(), x.to_vec())?;
    Ok((violation_count(&triples, &viewer, objects)?, triples.len()))
}

fn solve_external(
    objects: &Configuration,
    row: &[u32],
    opts: &SolverOptions,
    model: ComparisonModel,
) -> Result<SolveResult, SolverError> {
    opts.validate()?;
    let prep = prepare(objects, row, model)?;
    let p = objects.dim();
    let domain = match model {
        ComparisonModel::PointDistance => Domain::Free,
        _ => Domain::UnitBall,
    };
    let top = objects.point(prep.order[0]).to_vec();
    let scale = match domain {
        Domain::Free => objects.rms_radius().max(1e-3),
        Domain::UnitBall => 1.0,
    };

    let mut best: Option<MarginRun> = None;
    let mut best_restart = 0;
    let mut total_iterations = 0;
    for restart in 0..opts.restarts {
        let mut rng = stream_rng(opts.seed, restart as u64);
        let start: Vec<f64> = match domain {
            Domain::Free => {
                let noise = standard_normal_vec(p, &mut rng);
                top.iter().zip(noise).map(|(t, z)| t + 0.1 * scale * z).collect()
            }
            Domain::UnitBall => {
                let tn = norm(&top);
                let dir = if tn > 0.0 && restart == 0 {
                    top.iter().map(|v| v / tn).collect()
                } else {
                    uniform_sphere(p, &mut rng)
                };
                let jitter = 0.05 * rng.random::<f64>();
                let noisy: Vec<f64> = dir
                    .iter()
                    .zip(standard_normal_vec(p, &mut rng))
                    .map(|(d, z)| d + jitter * z)
                    .collect();
                let n = norm(&noisy);
                noisy.iter().map(|v| v / n).collect()
            }
        };
        let run = if prep.hs.real == 0 {
            MarginRun {
                x: start,
                margin: f64::INFINITY,
                iterations: 0,
                finished: true,
                trace: vec![0.0],
            }
        } else {
            maximize_margin(&prep.hs, domain, start, scale, opts.max_iterations)
        };
        total_iterations += run.iterations;
        let better = best.as_ref().is_none_or(|b| run.margin > b.margin);
        if better {
            best = Some(run);
            best_restart = restart;
        }
        if best.as_ref().is_some_and(|b| b.margin > 0.0) {
            break;
        }
    }
    let run = best.expect("at least one restart");
    let x = match domain {
        Domain::Free => run.x,
        Domain::UnitBall => {
            let n = norm(&run.x);
            if n > 0.0 {
                run.x.iter().map(|v| v / n).collect()
            } else {
                let mut e = vec![0.0; p];
                e[0] = 1.0;
                e
            }
        }
    };
    let (violations, comparisons) = count_violations(objects, row, prep.model, &x)?;
    let margin = run.margin.is_finite().then_some(run.margin);
    let result = SolveResult {
        solution: match model {
            ComparisonModel::PointDistance => Solution::ExternalPoint { individual: x },
            _ => Solution::ExternalVector { individual: x },
        },
        violations,
        comparisons,
        loss: margin.map_or(0.0, |m| (-m).max(0.0)),
        margin,
        iterations_used: total_iterations,
        converged: run.finished && violations == 0,
        restart: best_restart,
        loss_trace: run.trace,
    };
    if violations > 0 {
        return Err(SolverError::Infeasible(Box::new(result)));
    }
    Ok(result)
}

/// Locates an individual point from its ranking of known anchor points
/// (rank 1 = nearest).
pub fn solve_external_point(
    anchors: &Configuration,
    row: &[u32],
    opts: &SolverOptions,
) -> Result<SolveResult, SolverError> {
    solve_external(anchors, row, opts, ComparisonModel::PointDistance)
}

/// Finds a unit vector whose inner products with the known objects follow
/// the ranking (rank 1 = largest inner product).
pub fn solve_external_vector(
    objects: &Configuration,
    row: &[u32],
    opts: &SolverOptions,
) -> Result<SolveResult, SolverError> {
    solve_external(objects, row, opts, ComparisonModel::VectorInnerProduct)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SphericalConfiguration;
    use crate::geometry::{bisector_side, Side};
    use crate::rankings::{row_ranks_point, row_ranks_vector};
    use crate::sampling::Design;

    fn cfg(dim: usize, pts: &[&[f64]]) -> Configuration {
        Configuration::new(dim, pts.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    fn individual(r: &SolveResult) -> &[f64] {
        match &r.solution {
            Solution::ExternalPoint { individual } | Solution::ExternalVector { individual } => individual,
            _ => unreachable!(),
        }
    }

    #[test]
    fn interval_on_the_line() {
        // Nearest 0, then -1, then 2: the cell is (-0.5, 0.5).
        let anchors = cfg(1, &[&[-1.0], &[0.0], &[2.0]]);
        let r = solve_external_point(&anchors, &[2, 1, 3], &SolverOptions::default()).unwrap();
        let x = individual(&r)[0];
        assert_eq!(r.violations, 0);
        assert!(x > -0.5 && x < 0.5, "x = {x}");
        // The Chebyshev center of the interval is its midpoint.
        assert!(x.abs() < 1e-6, "x = {x}");
        assert!((r.margin.unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn single_anchor_is_unconstrained() {
        let anchors = cfg(2, &[&[0.3, 0.4]]);
        let r = solve_external_point(&anchors, &[1], &SolverOptions::default()).unwrap();
        assert_eq!(r.violations, 0);
        assert_eq!(r.comparisons, 0);
        assert_eq!(r.margin, None);
    }

    #[test]
    fn unrealizable_row_is_infeasible() {
        // On a line the middle anchor can never be ranked last.
        let anchors = cfg(1, &[&[0.0], &[1.0], &[2.0]]);
        let err = solve_external_point(&anchors, &[1, 3, 2], &SolverOptions::default()).unwrap_err();
        let r = err.partial_result().expect("carries result");
        assert!(r.violations > 0);
        assert!(matches!(err, SolverError::Infeasible(_)));
    }

    #[test]
    fn fifty_anchors_recover_cell() {
        let mut rng = stream_rng(11, 0);
        let anchors = Design::UniformBall.sample(2, 50, &mut rng).unwrap();
        let truth = cfg(2, &[&[0.12, -0.31]]);
        let ranks = row_ranks_point(&truth, &anchors).unwrap();
        let r = solve_external_point(&anchors, ranks.row(0), &SolverOptions::default()).unwrap();
        assert_eq!(r.violations, 0);
        let x = individual(&r);
        // Halfspace cross-check on every consecutive pair.
        let order = ranks.order(0);
        for w in order.windows(2) {
            assert_eq!(
                bisector_side(x, anchors.point(w[0]), anchors.point(w[1])).unwrap(),
                Side::CloserToY
            );
        }
        let err = crate::geometry::sq_dist(x, truth.point(0)).sqrt();
        assert!(err < 0.1, "err = {err}");
    }

    #[test]
    fn vector_half_plane() {
        let objects = cfg(2, &[&[1.0, 0.0], &[2.0, 0.0]]);
        let r = solve_external_vector(&objects, &[2, 1], &SolverOptions::default()).unwrap();
        let x = individual(&r);
        assert_eq!(r.violations, 0);
        assert!((norm(x) - 1.0).abs() < 1e-12);
        assert!(x[0] > 0.0);

        let objects = cfg(2, &[&[1.0, 0.0], &[-1.0, 0.0]]);
        let r = solve_external_vector(&objects, &[1, 2], &SolverOptions::default()).unwrap();
        let x = individual(&r);
        assert!(x[0] > 0.0);
        assert!((x[0] - 1.0).abs() < 1e-6, "max-margin answer is e1, got {x:?}");
    }

    #[test]
    fn vector_hundred_objects() {
        let mut rng = stream_rng(12, 0);
        let objects = Design::UniformBall.sample(2, 100, &mut rng).unwrap();
        let truth = SphericalConfiguration::normalize(&cfg(2, &[&[0.3, -0.8]])).unwrap();
        let ranks = row_ranks_vector(&truth, &objects).unwrap();
        let r = solve_external_vector(&objects, ranks.row(0), &SolverOptions::default()).unwrap();
        assert_eq!(r.violations, 0);
        let x = individual(&r);
        for w in ranks.order(0).windows(2) {
            let diff: Vec<f64> = objects
                .point(w[0])
                .iter()
                .zip(objects.point(w[1]))
                .map(|(a, b)| a - b)
                .collect();
            assert!(dot(x, &diff) > 0.0);
        }
        let angle = dot(x, truth.point(0)).clamp(-1.0, 1.0).acos();
        assert!(angle < 0.05, "angle = {angle}");
    }

    #[test]
    fn coincident_objects_rejected() {
        let objects = cfg(2, &[&[1.0, 0.0], &[1.0, 0.0]]);
        assert!(matches!(
            solve_external_point(&objects, &[1, 2], &SolverOptions::default()),
            Err(SolverError::InvalidInput(_))
        ));
        assert!(matches!(
            solve_external_point(&objects, &[1, 1], &SolverOptions::default()),
            Err(SolverError::Rank(_))
        ));
    }

    #[test]
    fn loss_trace_is_monotone() {
        let mut rng = stream_rng(13, 0);
        let anchors = Design::UniformBall.sample(2, 80, &mut rng).unwrap();
        let truth = cfg(2, &[&[-0.2, 0.25]]);
        let ranks = row_ranks_point(&truth, &anchors).unwrap();
        let r = solve_external_point(&anchors, ranks.row(0), &SolverOptions::default()).unwrap();
        assert!(r.loss_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}
