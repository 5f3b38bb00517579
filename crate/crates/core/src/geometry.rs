//! Configurations of points, bisector halfspaces, and alignment under the
//! gauge groups of the ordinal embedding problems.
//!
//! Three groups show up:
//!
//! * similarities `x ↦ sQx + t` (point models, ordinal MDS),
//! * orthogonal maps `x ↦ Qx` (ordinal MDS on the unit sphere),
//! * gauge pairs `(L, τ)` acting on objects by `y ↦ Ly + τ` and on unit
//!   individual vectors by `x ↦ L⁻ᵀx / ‖L⁻ᵀx‖` (vector unfolding).
//!
//! Alignment residuals are RMS point mismatches divided by the RMS radius of
//! the target, so they are scale free.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `‖QᵀQ − I‖∞` accepted by [`SimilarityTransform::new`].
pub const ORTHOGONALITY_TOL: f64 = 1e-10;
/// Minimum `|det L|` accepted by [`GaugePair::new`].
pub const INVERTIBILITY_TOL: f64 = 1e-12;
/// Tolerance on `|‖x‖ − 1|` for points of a [`SphericalConfiguration`].
pub const UNIT_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("point count mismatch: {left} vs {right}")]
    CountMismatch { left: usize, right: usize },
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("configuration must contain at least one point")]
    Empty,
    #[error("point {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("point {index} has norm {norm}, expected a unit vector")]
    NotUnit { index: usize, norm: f64 },
    #[error("matrix is not orthogonal (max |QᵀQ − I| = {0:e})")]
    NotOrthogonal(f64),
    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("linear map is singular (|det| = {0:e})")]
    Singular(f64),
    #[error("bisector undefined: reference points coincide")]
    CoincidentPoints,
    #[error("degenerate configuration: {0}")]
    Degenerate(&'static str),
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// A finite list of points in `Rᵖ`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConfigurationRepr", into = "ConfigurationRepr")]
pub struct Configuration {
    dim: usize,
    coords: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ConfigurationRepr {
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl TryFrom<ConfigurationRepr> for Configuration {
    type Error = GeometryError;
    fn try_from(repr: ConfigurationRepr) -> Result<Self> {
        Configuration::new(repr.dim, repr.points)
    }
}

impl From<Configuration> for ConfigurationRepr {
    fn from(c: Configuration) -> Self {
        ConfigurationRepr {
            dim: c.dim,
            points: c.to_rows(),
        }
    }
}

impl Configuration {
    pub fn new(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        let mut coords = Vec::with_capacity(dim * points.len());
        for p in &points {
            if p.len() != dim {
                return Err(GeometryError::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(dim, coords)
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(GeometryError::ZeroDimension);
        }
        if coords.is_empty() {
            return Err(GeometryError::Empty);
        }
        if coords.len() % dim != 0 {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                found: coords.len() % dim,
            });
        }
        if let Some(pos) = coords.iter().position(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite(pos / dim));
        }
        Ok(Self { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    /// Always false; configurations are non-empty by construction.
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.points().map(<[f64]>::to_vec).collect()
    }

    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        for p in self.points() {
            for (acc, v) in c.iter_mut().zip(p) {
                *acc += v;
            }
        }
        let n = self.len() as f64;
        c.iter_mut().for_each(|v| *v /= n);
        c
    }

    /// Root-mean-square distance of the points to their centroid.
    pub fn rms_radius(&self) -> f64 {
        let c = self.centroid();
        let total: f64 = self.points().map(|p| sq_dist(p, &c)).sum();
        (total / self.len() as f64).sqrt()
    }

    /// Root-mean-square norm of the points (distance to the origin).
    pub fn rms_norm(&self) -> f64 {
        let total: f64 = self.points().map(|p| dot(p, p)).sum();
        (total / self.len() as f64).sqrt()
    }

    /// Concatenates the points of `self` and `other` (same dimension).
    pub fn stack(&self, other: &Configuration) -> Result<Configuration> {
        check_dim(self.dim, other.dim)?;
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        Configuration::from_flat(self.dim, coords)
    }

    /// Splits off the first `at` points; both halves must be non-empty.
    pub fn split_at(&self, at: usize) -> Result<(Configuration, Configuration)> {
        let (a, b) = self.coords.split_at(at * self.dim);
        Ok((
            Configuration::from_flat(self.dim, a.to_vec())?,
            Configuration::from_flat(self.dim, b.to_vec())?,
        ))
    }

    pub fn map_points<F>(&self, mut f: F) -> Result<Configuration>
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        let mut coords = Vec::with_capacity(self.coords.len());
        for p in self.points() {
            let q = f(p);
            coords.extend_from_slice(&q);
        }
        Configuration::from_flat(self.dim, coords)
    }
}

/// Points on the unit sphere `𝕊ᵖ⁻¹`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Configuration", into = "Configuration")]
pub struct SphericalConfiguration(Configuration);

impl TryFrom<Configuration> for SphericalConfiguration {
    type Error = GeometryError;
    fn try_from(c: Configuration) -> Result<Self> {
        SphericalConfiguration::new(c)
    }
}

impl From<SphericalConfiguration> for Configuration {
    fn from(s: SphericalConfiguration) -> Self {
        s.0
    }
}

impl SphericalConfiguration {
    /// Wraps `config`, rejecting any point whose norm is not 1 within
    /// [`UNIT_NORM_TOL`].
    pub fn new(config: Configuration) -> Result<Self> {
        for (index, p) in config.points().enumerate() {
            let n = norm(p);
            if (n - 1.0).abs() > UNIT_NORM_TOL {
                return Err(GeometryError::NotUnit { index, norm: n });
            }
        }
        Ok(Self(config))
    }

    /// Radially projects every point onto the sphere.
    pub fn normalize(config: &Configuration) -> Result<Self> {
        let mut coords = config.coords().to_vec();
        for (index, p) in coords.chunks_exact_mut(config.dim()).enumerate() {
            let n = norm(p);
            if n == 0.0 {
                return Err(GeometryError::NotUnit { index, norm: 0.0 });
            }
            p.iter_mut().for_each(|v| *v /= n);
        }
        Ok(Self(Configuration::from_flat(config.dim(), coords)?))
    }

    pub fn as_configuration(&self) -> &Configuration {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.0.point(i)
    }
}

impl AsRef<Configuration> for SphericalConfiguration {
    fn as_ref(&self) -> &Configuration {
        &self.0
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(GeometryError::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn check_count(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(GeometryError::CountMismatch { left, right });
    }
    Ok(())
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let n = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != c) {
        return None;
    }
    Some(DMatrix::from_fn(n, c, |i, j| rows[i][j]))
}

/// Largest entry of `|MᵀM − I|`.
pub fn orthogonality_defect(m: &DMatrix<f64>) -> f64 {
    let p = m.nrows();
    let gram = m.transpose() * m;
    (gram - DMatrix::<f64>::identity(p, p)).amax()
}

/// `x ↦ s·Q·x + t` with `s > 0` and `Q` orthogonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SimilarityRepr", into = "SimilarityRepr")]
pub struct SimilarityTransform {
    scale: f64,
    orthogonal: DMatrix<f64>,
    translation: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct SimilarityRepr {
    scale: f64,
    orthogonal: Vec<Vec<f64>>,
    translation: Vec<f64>,
}

impl TryFrom<SimilarityRepr> for SimilarityTransform {
    type Error = GeometryError;
    fn try_from(r: SimilarityRepr) -> Result<Self> {
        let q = matrix_from_rows(&r.orthogonal).ok_or(GeometryError::DimensionMismatch {
            expected: r.translation.len(),
            found: 0,
        })?;
        SimilarityTransform::new(r.scale, q, DVector::from_vec(r.translation))
    }
}

impl From<SimilarityTransform> for SimilarityRepr {
    fn from(t: SimilarityTransform) -> Self {
        SimilarityRepr {
            scale: t.scale,
            orthogonal: matrix_to_rows(&t.orthogonal),
            translation: t.translation.iter().copied().collect(),
        }
    }
}

impl SimilarityTransform {
    pub fn new(scale: f64, orthogonal: DMatrix<f64>, translation: DVector<f64>) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(GeometryError::InvalidScale(scale));
        }
        let p = translation.len();
        if p == 0 {
            return Err(GeometryError::ZeroDimension);
        }
        check_dim(p, orthogonal.nrows())?;
        check_dim(p, orthogonal.ncols())?;
        let defect = orthogonality_defect(&orthogonal);
        if !(defect <= ORTHOGONALITY_TOL) {
            return Err(GeometryError::NotOrthogonal(defect));
        }
        Ok(Self {
            scale,
            orthogonal,
            translation,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            scale: 1.0,
            orthogonal: DMatrix::identity(dim, dim),
            translation: DVector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn orthogonal(&self) -> &DMatrix<f64> {
        &self.orthogonal
    }

    pub fn translation(&self) -> &DVector<f64> {
        &self.translation
    }

    /// True when `Q` preserves orientation.
    pub fn is_proper(&self) -> bool {
        self.orthogonal.determinant() > 0.0
    }

    pub fn apply_point(&self, x: &[f64]) -> Vec<f64> {
        let p = self.dim();
        (0..p)
            .map(|i| {
                let row: f64 = (0..p).map(|j| self.orthogonal[(i, j)] * x[j]).sum();
                self.scale * row + self.translation[i]
            })
            .collect()
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &SimilarityTransform) -> Result<SimilarityTransform> {
        check_dim(self.dim(), first.dim())?;
        let q = &self.orthogonal * &first.orthogonal;
        let t = (&self.orthogonal * &first.translation) * self.scale + &self.translation;
        SimilarityTransform::new(self.scale * first.scale, q, t)
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let qt = self.orthogonal.transpose();
        let t = -(&qt * &self.translation) / self.scale;
        SimilarityTransform {
            scale: 1.0 / self.scale,
            orthogonal: qt,
            translation: t,
        }
    }
}

/// Applies `T` to every point of `X`.
pub fn apply_similarity(t: &SimilarityTransform, x: &Configuration) -> Result<Configuration> {
    check_dim(t.dim(), x.dim())?;
    x.map_points(|p| t.apply_point(p))
}

/// Applies an orthogonal matrix to points on the sphere.
pub fn apply_orthogonal(q: &DMatrix<f64>, x: &SphericalConfiguration) -> Result<SphericalConfiguration> {
    check_dim(q.nrows(), x.dim())?;
    let c = x.as_configuration().map_points(|p| {
        let v = q * DVector::from_column_slice(p);
        v.iter().copied().collect()
    })?;
    // Orthogonal maps keep norms up to rounding.
    SphericalConfiguration::normalize(&c)
}

/// The vector-model gauge element: objects `y ↦ Ly + τ`, individuals
/// `x ↦ L⁻ᵀx / ‖L⁻ᵀx‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaugeRepr", into = "GaugeRepr")]
pub struct GaugePair {
    linear: DMatrix<f64>,
    translation: DVector<f64>,
    inverse_transpose: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct GaugeRepr {
    linear: Vec<Vec<f64>>,
    translation: Vec<f64>,
}

impl TryFrom<GaugeRepr> for GaugePair {
    type Error = GeometryError;
    fn try_from(r: GaugeRepr) -> Result<Self> {
        let l = matrix_from_rows(&r.linear).ok_or(GeometryError::DimensionMismatch {
            expected: r.translation.len(),
            found: 0,
        })?;
        GaugePair::new(l, DVector::from_vec(r.translation))
    }
}

impl From<GaugePair> for GaugeRepr {
    fn from(g: GaugePair) -> Self {
        GaugeRepr {
            linear: matrix_to_rows(&g.linear),
            translation: g.translation.iter().copied().collect(),
        }
    }
}

impl GaugePair {
    pub fn new(linear: DMatrix<f64>, translation: DVector<f64>) -> Result<Self> {
        let p = translation.len();
        if p == 0 {
            return Err(GeometryError::ZeroDimension);
        }
        check_dim(p, linear.nrows())?;
        check_dim(p, linear.ncols())?;
        let det = linear.determinant();
        if !(det.abs() > INVERTIBILITY_TOL) {
            return Err(GeometryError::Singular(det.abs()));
        }
        let inverse = linear.clone().try_inverse().ok_or(GeometryError::Singular(det.abs()))?;
        Ok(Self {
            linear,
            translation,
            inverse_transpose: inverse.transpose(),
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            linear: DMatrix::identity(dim, dim),
            translation: DVector::zeros(dim),
            inverse_transpose: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn linear(&self) -> &DMatrix<f64> {
        &self.linear
    }

    pub fn translation(&self) -> &DVector<f64> {
        &self.translation
    }

    pub fn apply_object(&self, y: &[f64]) -> Vec<f64> {
        let v = &self.linear * DVector::from_column_slice(y) + &self.translation;
        v.iter().copied().collect()
    }

    pub fn apply_individual(&self, x: &[f64]) -> Vec<f64> {
        let v = &self.inverse_transpose * DVector::from_column_slice(x);
        let n = v.norm();
        v.iter().map(|c| c / n).collect()
    }

    pub fn apply_objects(&self, y: &Configuration) -> Result<Configuration> {
        check_dim(self.dim(), y.dim())?;
        y.map_points(|p| self.apply_object(p))
    }

    pub fn apply_individuals(&self, x: &SphericalConfiguration) -> Result<SphericalConfiguration> {
        check_dim(self.dim(), x.dim())?;
        let c = x.as_configuration().map_points(|p| self.apply_individual(p))?;
        SphericalConfiguration::normalize(&c)
    }
}

/// Which side of the bisector `H(y, y′)` a point lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    CloserToY,
    CloserToYPrime,
    Equidistant,
}

/// Exact comparison of `‖x − y‖` and `‖x − y′‖`.
pub fn bisector_side(x: &[f64], y: &[f64], y_prime: &[f64]) -> Result<Side> {
    bisector_side_with_tolerance(x, y, y_prime, 0.0)
}

/// Like [`bisector_side`], treating `|‖x−y‖ − ‖x−y′‖| ≤ tol` as a tie.
/// With `tol == 0` squared distances are compared, so no square root
/// rounding enters the decision.
pub fn bisector_side_with_tolerance(x: &[f64], y: &[f64], y_prime: &[f64], tol: f64) -> Result<Side> {
    check_dim(x.len(), y.len())?;
    check_dim(x.len(), y_prime.len())?;
    if y == y_prime {
        return Err(GeometryError::CoincidentPoints);
    }
    let (a, b) = (sq_dist(x, y), sq_dist(x, y_prime));
    let diff = if tol == 0.0 { a - b } else { a.sqrt() - b.sqrt() };
    Ok(if diff.abs() <= tol {
        Side::Equidistant
    } else if diff < 0.0 {
        Side::CloserToY
    } else {
        Side::CloserToYPrime
    })
}

/// A fitted gauge-group element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "transform", rename_all = "kebab-case")]
pub enum GaugeTransform {
    Similarity(SimilarityTransform),
    Gauge(GaugePair),
    #[serde(with = "orthogonal_serde")]
    Orthogonal(DMatrix<f64>),
}

mod orthogonal_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        matrix_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        matrix_from_rows(&rows).ok_or_else(|| serde::de::Error::custom("ragged matrix"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    #[serde(flatten)]
    pub transform: GaugeTransform,
    pub residual: f64,
}

/// RMS of `‖a_i − b_i‖`.
fn rms_mismatch(a: &Configuration, b: &Configuration) -> f64 {
    let total: f64 = a.points().zip(b.points()).map(|(p, q)| sq_dist(p, q)).sum();
    (total / a.len() as f64).sqrt()
}

fn centered_matrix(c: &Configuration, centroid: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(c.dim(), c.len(), |d, i| c.point(i)[d] - centroid[d])
}

/// Index of the smallest singular value.
fn argmin(values: &DVector<f64>) -> usize {
    values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i)
}

/// Least-squares similarity `T` with `T(source) ≈ target` (Umeyama).
///
/// With `allow_reflection == false` the orthogonal part is restricted to
/// rotations. The residual is the RMS mismatch divided by the RMS radius of
/// the centered target.
pub fn similarity_procrustes(
    source: &Configuration,
    target: &Configuration,
    allow_reflection: bool,
) -> Result<AlignmentResult> {
    check_dim(source.dim(), target.dim())?;
    check_count(source.len(), target.len())?;
    let target_radius = target.rms_radius();
    if target_radius == 0.0 {
        return Err(GeometryError::Degenerate("target points all coincide"));
    }
    if source == target {
        return Ok(AlignmentResult {
            transform: GaugeTransform::Similarity(SimilarityTransform::identity(source.dim())),
            residual: 0.0,
        });
    }
    let p = source.dim();
    let sc = source.centroid();
    let tc = target.centroid();
    let s = centered_matrix(source, &sc);
    let t = centered_matrix(target, &tc);
    let source_var = s.norm_squared();
    if source_var == 0.0 {
        return Err(GeometryError::Degenerate("source points all coincide"));
    }
    let cross = &t * s.transpose();
    let svd = cross.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let mut signs = DVector::from_element(p, 1.0);
    if !allow_reflection && (&u * &v_t).determinant() < 0.0 {
        signs[argmin(&svd.singular_values)] = -1.0;
    }
    let q = &u * DMatrix::from_diagonal(&signs) * &v_t;
    let trace: f64 = svd.singular_values.iter().zip(signs.iter()).map(|(sv, d)| sv * d).sum();
    let scale = trace / source_var;
    let translation = DVector::from_vec(tc.clone()) - (&q * DVector::from_vec(sc)) * scale;
    let transform = SimilarityTransform::new(scale, q, translation)?;
    let mapped = apply_similarity(&transform, source)?;
    Ok(AlignmentResult {
        residual: rms_mismatch(&mapped, target) / target_radius,
        transform: GaugeTransform::Similarity(transform),
    })
}

/// Best orthogonal `Q` (reflections allowed) with `Q·source ≈ target`.
/// No scale or translation is fitted; the residual is normalized by the RMS
/// norm of the target, which is 1 on the sphere.
pub fn orthogonal_align(source: &SphericalConfiguration, target: &SphericalConfiguration) -> Result<AlignmentResult> {
    check_dim(source.dim(), target.dim())?;
    check_count(source.len(), target.len())?;
    let p = source.dim();
    if source == target {
        return Ok(AlignmentResult {
            transform: GaugeTransform::Orthogonal(DMatrix::identity(p, p)),
            residual: 0.0,
        });
    }
    let s = centered_matrix(source.as_configuration(), &vec![0.0; p]);
    let t = centered_matrix(target.as_configuration(), &vec![0.0; p]);
    let svd = (&t * s.transpose()).svd(true, true);
    let q = svd.u.expect("requested U") * svd.v_t.expect("requested Vᵀ");
    let mapped = source
        .as_configuration()
        .map_points(|x| (&q * DVector::from_column_slice(x)).iter().copied().collect())?;
    let target_norm = target.as_configuration().rms_norm();
    Ok(AlignmentResult {
        residual: rms_mismatch(&mapped, target.as_configuration()) / target_norm,
        transform: GaugeTransform::Orthogonal(q),
    })
}

/// Fits the vector-model gauge `(L, τ)` by least squares on the objects
/// (`tgt_y ≈ L·src_y + τ`) and carries the individuals along with the
/// induced action. The residual is the larger of the object residual
/// (normalized by the target's RMS radius) and the individual residual
/// (RMS chord mismatch on the unit sphere).
pub fn gauge_align_vector_model(
    src_x: &SphericalConfiguration,
    src_y: &Configuration,
    tgt_x: &SphericalConfiguration,
    tgt_y: &Configuration,
) -> Result<AlignmentResult> {
    let p = src_y.dim();
    for d in [src_x.dim(), tgt_x.dim(), tgt_y.dim()] {
        check_dim(p, d)?;
    }
    check_count(src_x.len(), tgt_x.len())?;
    check_count(src_y.len(), tgt_y.len())?;
    let target_radius = tgt_y.rms_radius();
    if target_radius == 0.0 {
        return Err(GeometryError::Degenerate("target objects all coincide"));
    }
    if src_x == tgt_x && src_y == tgt_y {
        return Ok(AlignmentResult {
            transform: GaugeTransform::Gauge(GaugePair::identity(p)),
            residual: 0.0,
        });
    }
    if src_y.len() <= p {
        return Err(GeometryError::Degenerate("objects do not span an affine basis"));
    }
    let sc = src_y.centroid();
    let tc = tgt_y.centroid();
    let s = centered_matrix(src_y, &sc);
    let t = centered_matrix(tgt_y, &tc);
    let gram = &s * s.transpose();
    let sv = gram.singular_values();
    let (lo, hi) = (sv.min(), sv.max());
    if !(hi > 0.0 && lo / hi > 1e-12) {
        return Err(GeometryError::Degenerate("objects are affinely degenerate"));
    }
    let gram_inv = gram
        .try_inverse()
        .ok_or(GeometryError::Degenerate("objects are affinely degenerate"))?;
    let linear = (&t * s.transpose()) * gram_inv;
    let translation = DVector::from_vec(tc) - &linear * DVector::from_vec(sc);
    let gauge = GaugePair::new(linear, translation)?;

    let mapped_y = gauge.apply_objects(src_y)?;
    let object_residual = rms_mismatch(&mapped_y, tgt_y) / target_radius;
    let mapped_x = src_x.as_configuration().map_points(|x| gauge.apply_individual(x))?;
    let individual_residual = rms_mismatch(&mapped_x, tgt_x.as_configuration()) / tgt_x.as_configuration().rms_norm();
    Ok(AlignmentResult {
        residual: object_residual.max(individual_residual),
        transform: GaugeTransform::Gauge(gauge),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(dim: usize, pts: &[&[f64]]) -> Configuration {
        Configuration::new(dim, pts.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    fn rot2(theta: f64) -> DMatrix<f64> {
        let (s, c) = theta.sin_cos();
        DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
    }

    #[test]
    fn configuration_rejects_bad_input() {
        assert_eq!(Configuration::new(0, vec![vec![]]), Err(GeometryError::ZeroDimension));
        assert_eq!(Configuration::new(2, vec![]), Err(GeometryError::Empty));
        assert!(matches!(
            Configuration::new(2, vec![vec![1.0, 2.0], vec![1.0]]),
            Err(GeometryError::DimensionMismatch { .. })
        ));
        assert_eq!(
            Configuration::new(1, vec![vec![0.0], vec![f64::NAN]]),
            Err(GeometryError::NonFinite(1))
        );
    }

    #[test]
    fn spherical_requires_unit_norm() {
        let c = cfg(2, &[&[1.0, 0.0], &[0.6, 0.8]]);
        assert!(SphericalConfiguration::new(c).is_ok());
        let c = cfg(2, &[&[1.0, 0.0], &[0.6, 0.81]]);
        assert!(matches!(
            SphericalConfiguration::new(c),
            Err(GeometryError::NotUnit { index: 1, .. })
        ));
    }

    #[test]
    fn identity_similarity_is_noop() {
        let x = cfg(2, &[&[0.3, -1.2], &[4.0, 5.5]]);
        let y = apply_similarity(&SimilarityTransform::identity(2), &x).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn scaled_quarter_turn() {
        let t = SimilarityTransform::new(2.0, rot2(std::f64::consts::FRAC_PI_2), DVector::zeros(2)).unwrap();
        let y = t.apply_point(&[1.0, 0.0]);
        assert_abs_diff_eq!(y[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y[1], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn similarity_constructor_validates() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(
            SimilarityTransform::new(1.0, bad, DVector::zeros(2)),
            Err(GeometryError::NotOrthogonal(_))
        ));
        assert!(matches!(
            SimilarityTransform::new(0.0, DMatrix::identity(2, 2), DVector::zeros(2)),
            Err(GeometryError::InvalidScale(_))
        ));
        let t = SimilarityTransform::identity(3);
        let x = cfg(2, &[&[0.0, 0.0]]);
        assert!(apply_similarity(&t, &x).is_err());
    }

    #[test]
    fn inverse_undoes_transform() {
        let t = SimilarityTransform::new(3.5, rot2(0.7), DVector::from_vec(vec![1.0, -2.0])).unwrap();
        let p = [0.25, 9.0];
        let back = t.inverse().apply_point(&t.apply_point(&p));
        assert_abs_diff_eq!(back[0], p[0], epsilon = 1e-12);
        assert_abs_diff_eq!(back[1], p[1], epsilon = 1e-12);
    }

    #[test]
    fn bisector_examples() {
        let (y, yp) = ([1.0, 0.0], [3.0, 0.0]);
        assert_eq!(bisector_side(&[0.0, 0.0], &y, &yp).unwrap(), Side::CloserToY);
        assert_eq!(bisector_side(&[2.0, 5.0], &y, &yp).unwrap(), Side::Equidistant);
        assert_eq!(bisector_side(&[2.001, 0.0], &y, &yp).unwrap(), Side::CloserToYPrime);
        assert_eq!(bisector_side(&[0.0, 0.0], &y, &y), Err(GeometryError::CoincidentPoints));
        assert_eq!(
            bisector_side_with_tolerance(&[2.001, 0.0], &y, &yp, 0.01).unwrap(),
            Side::Equidistant
        );
    }

    #[test]
    fn procrustes_identity_and_degenerate() {
        let x = cfg(2, &[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 2.0]]);
        let r = similarity_procrustes(&x, &x, true).unwrap();
        assert_eq!(r.residual, 0.0);
        assert_eq!(
            r.transform,
            GaugeTransform::Similarity(SimilarityTransform::identity(2))
        );
        let flat = cfg(2, &[&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]]);
        assert!(matches!(
            similarity_procrustes(&x, &flat, true),
            Err(GeometryError::Degenerate(_))
        ));
    }

    #[test]
    fn procrustes_proper_subgroup_cannot_undo_reflection() {
        let x = cfg(2, &[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 2.0], &[-1.0, 0.5]]);
        let mirrored = x.map_points(|p| vec![-p[0], p[1]]).unwrap();
        let with = similarity_procrustes(&x, &mirrored, true).unwrap();
        assert!(with.residual < 1e-12);
        let without = similarity_procrustes(&x, &mirrored, false).unwrap();
        assert!(without.residual > 0.1);
        match without.transform {
            GaugeTransform::Similarity(t) => assert!(t.is_proper()),
            _ => unreachable!(),
        }
    }

    #[test]
    fn orthogonal_align_antipodal() {
        let x = SphericalConfiguration::normalize(&cfg(3, &[&[1.0, 2.0, 3.0], &[-1.0, 0.5, 0.0], &[0.0, 0.0, 1.0]]))
            .unwrap();
        let neg = SphericalConfiguration::normalize(
            &x.as_configuration()
                .map_points(|p| p.iter().map(|v| -v).collect())
                .unwrap(),
        )
        .unwrap();
        let r = orthogonal_align(&x, &neg).unwrap();
        assert!(r.residual < 1e-12);
        let GaugeTransform::Orthogonal(q) = r.transform else {
            unreachable!()
        };
        assert!(orthogonality_defect(&q) < 1e-12);
    }

    #[test]
    fn gauge_pair_rejects_singular() {
        let l = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            GaugePair::new(l, DVector::zeros(2)),
            Err(GeometryError::Singular(_))
        ));
    }

    #[test]
    fn gauge_align_identity() {
        let x = SphericalConfiguration::normalize(&cfg(2, &[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        let y = cfg(2, &[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[2.0, 3.0]]);
        let r = gauge_align_vector_model(&x, &y, &x, &y).unwrap();
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.transform, GaugeTransform::Gauge(GaugePair::identity(2)));
    }

    #[test]
    fn gauge_align_rejects_collinear_objects() {
        let x = SphericalConfiguration::normalize(&cfg(2, &[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        let y = cfg(2, &[&[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0], &[3.0, 3.0]]);
        let y2 = y.map_points(|p| vec![p[0] + 1.0, p[1]]).unwrap();
        assert!(matches!(
            gauge_align_vector_model(&x, &y, &x, &y2),
            Err(GeometryError::Degenerate(_))
        ));
    }

    #[test]
    fn transform_json_shape() {
        let t = SimilarityTransform::new(2.0, DMatrix::identity(2, 2), DVector::from_vec(vec![1.0, 0.5])).unwrap();
        let v = serde_json::to_value(&t).unwrap();
        assert_eq!(v["scale"], 2.0);
        assert_eq!(v["orthogonal"][0][0], 1.0);
        assert_eq!(v["translation"][1], 0.5);
        let back: SimilarityTransform = serde_json::from_value(v).unwrap();
        assert_eq!(back, t);
    }
}
