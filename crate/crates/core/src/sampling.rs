//! Sampling designs for ground-truth configurations and random elements of
//! the gauge groups.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::{Configuration, GaugePair, GeometryError, SimilarityTransform, SphericalConfiguration};

/// Continuous designs have full-dimensional support (or the whole sphere);
/// `Grid` is a deterministic lattice in `[-1, 1]ᵖ` that produces exact ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Design {
    /// Uniform in the open unit ball centered at the origin.
    UniformBall,
    /// Uniform in the unit cube `[0, 1]ᵖ`.
    UniformCube,
    /// Uniform on the unit sphere `𝕊ᵖ⁻¹`.
    UniformSphere,
    /// The first `n` nodes (lexicographic order) of a regular grid on
    /// `[-1, 1]ᵖ` with `⌈n^{1/p}⌉` nodes per axis.
    Grid,
}

impl Design {
    pub const ALL: [Design; 4] = [
        Design::UniformBall,
        Design::UniformCube,
        Design::UniformSphere,
        Design::Grid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Design::UniformBall => "uniform-ball",
            Design::UniformCube => "uniform-cube",
            Design::UniformSphere => "uniform-sphere",
            Design::Grid => "grid",
        }
    }

    /// Center of the design's support.
    pub fn center(self, dim: usize) -> Vec<f64> {
        match self {
            Design::UniformCube => vec![0.5; dim],
            _ => vec![0.0; dim],
        }
    }

    pub fn sample<R: Rng + ?Sized>(
        self,
        dim: usize,
        count: usize,
        rng: &mut R,
    ) -> Result<Configuration, GeometryError> {
        if dim == 0 {
            return Err(GeometryError::ZeroDimension);
        }
        if count == 0 {
            return Err(GeometryError::Empty);
        }
        let mut coords = Vec::with_capacity(dim * count);
        match self {
            Design::UniformBall => {
                for _ in 0..count {
                    coords.extend(uniform_ball(dim, rng));
                }
            }
            Design::UniformCube => coords.extend((0..dim * count).map(|_| rng.random::<f64>())),
            Design::UniformSphere => {
                for _ in 0..count {
                    coords.extend(uniform_sphere(dim, rng));
                }
            }
            Design::Grid => coords = grid(dim, count),
        }
        Configuration::from_flat(dim, coords)
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Design {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Design::ALL.into_iter().find(|d| d.name() == s).ok_or_else(|| {
            format!("unknown design '{s}' (expected one of uniform-ball, uniform-cube, uniform-sphere, grid)")
        })
    }
}

pub fn standard_normal_vec<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Uniform direction; rejects the (measure-zero) near-zero draws.
pub fn uniform_sphere<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v = standard_normal_vec(dim, rng);
        let n = crate::geometry::norm(&v);
        if n > 1e-8 {
            let mut u: Vec<f64> = v.iter().map(|c| c / n).collect();
            // One renormalization pass brings |‖u‖ − 1| to a couple of ulps.
            let n2 = crate::geometry::norm(&u);
            u.iter_mut().for_each(|c| *c /= n2);
            return u;
        }
    }
}

pub fn uniform_ball<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    let dir = uniform_sphere(dim, rng);
    let r = rng.random::<f64>().powf(1.0 / dim as f64);
    dir.into_iter().map(|c| c * r).collect()
}

fn grid(dim: usize, count: usize) -> Vec<f64> {
    let per_axis = if dim == 1 {
        count
    } else {
        let mut k = (count as f64).powf(1.0 / dim as f64).floor() as usize;
        while k.pow(dim as u32) < count {
            k += 1;
        }
        k
    };
    let node = |j: usize| {
        if per_axis == 1 {
            0.0
        } else {
            -1.0 + 2.0 * j as f64 / (per_axis - 1) as f64
        }
    };
    let mut coords = Vec::with_capacity(dim * count);
    for idx in 0..count {
        let mut digits = vec![0usize; dim];
        let mut rest = idx;
        for d in (0..dim).rev() {
            digits[d] = rest % per_axis;
            rest /= per_axis;
        }
        coords.extend(digits.into_iter().map(node));
    }
    coords
}

/// Samples `count` unit vectors uniformly on the sphere.
pub fn sample_sphere<R: Rng + ?Sized>(
    dim: usize,
    count: usize,
    rng: &mut R,
) -> Result<SphericalConfiguration, GeometryError> {
    let c = Design::UniformSphere.sample(dim, count, rng)?;
    SphericalConfiguration::new(c)
}

/// Haar-distributed orthogonal matrix (reflections included), via QR of a
/// Gaussian matrix with the sign correction on `R`'s diagonal.
pub fn random_orthogonal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).scale_mut(-1.0);
        }
    }
    q
}

/// Random similarity with log-uniform scale in `[0.2, 5]`, Haar orthogonal
/// part and Gaussian translation with standard deviation 2.
pub fn random_similarity<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> SimilarityTransform {
    let scale = (rng.random_range(0.2f64.ln()..5.0f64.ln())).exp();
    let q = random_orthogonal(dim, rng);
    let t = DVector::from_vec(standard_normal_vec(dim, rng)) * 2.0;
    SimilarityTransform::new(scale, q, t).expect("QR factor is orthogonal")
}

/// Random invertible `L = U·diag(σ)·Vᵀ` with singular values in `[1, max_condition]`
/// (so the condition number is at most `max_condition`), and Gaussian `τ`.
pub fn random_gauge_pair<R: Rng + ?Sized>(dim: usize, max_condition: f64, rng: &mut R) -> GaugePair {
    let u = random_orthogonal(dim, rng);
    let v = random_orthogonal(dim, rng);
    let sigma: Vec<f64> = (0..dim).map(|_| rng.random_range(1.0..=max_condition)).collect();
    let l = u * DMatrix::from_diagonal(&DVector::from_vec(sigma)) * v.transpose();
    let tau = DVector::from_vec(standard_normal_vec(dim, rng));
    GaugePair::new(l, tau).expect("singular values bounded below by 1")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{norm, orthogonality_defect};
    use crate::rng::stream_rng;

    #[test]
    fn grid_line_of_three() {
        let mut rng = stream_rng(0, 0);
        let g = Design::Grid.sample(1, 3, &mut rng).unwrap();
        assert_eq!(g.coords(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn grid_square_prefix() {
        let mut rng = stream_rng(0, 0);
        let g = Design::Grid.sample(2, 5, &mut rng).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g.point(0), &[-1.0, -1.0]);
        assert_eq!(g.point(1), &[-1.0, 0.0]);
        assert_eq!(g.point(3), &[0.0, -1.0]);
    }

    #[test]
    fn sphere_points_are_unit() {
        let mut rng = stream_rng(3, 0);
        let s = Design::UniformSphere.sample(3, 100, &mut rng).unwrap();
        for p in s.points() {
            assert!((norm(p) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn ball_and_cube_supports() {
        let mut rng = stream_rng(4, 0);
        let b = Design::UniformBall.sample(3, 500, &mut rng).unwrap();
        assert!(b.points().all(|p| norm(p) < 1.0));
        let c = Design::UniformCube.sample(2, 500, &mut rng).unwrap();
        assert!(c.coords().iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn random_group_elements_are_valid() {
        let mut rng = stream_rng(5, 0);
        for p in 1..5 {
            let q = random_orthogonal(p, &mut rng);
            assert!(orthogonality_defect(&q) < 1e-12);
            let g = random_gauge_pair(p, 10.0, &mut rng);
            let sv = g.linear().singular_values();
            assert!(sv.max() / sv.min() <= 10.0 + 1e-9);
        }
    }

    #[test]
    fn design_names_round_trip() {
        for d in Design::ALL {
            assert_eq!(d.name().parse::<Design>().unwrap(), d);
        }
        assert!("blob".parse::<Design>().is_err());
    }
}
