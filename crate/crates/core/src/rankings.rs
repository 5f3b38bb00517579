//! Rank matrices and triadic comparisons.
//!
//! Rank 1 is the most preferred item. In the point and self-distance models
//! smaller distance means smaller rank; in the vector model larger inner
//! product means smaller rank. A triple `(i, j, k)` always reads "from
//! viewpoint `i`, item `j` strictly precedes item `k`", whatever the model,
//! so the convention flip happens once, when ranks are generated.
//!
//! Indices are zero-based throughout.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{dot, sq_dist, Configuration, GeometryError, SphericalConfiguration};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RankError {
    #[error("tie: viewer {viewer} cannot separate items {a} and {b}")]
    Tie { viewer: usize, a: usize, b: usize },
    #[error("rank row {row} is not a permutation of 1..={n}: {detail}")]
    NotPermutation { row: usize, n: usize, detail: String },
    #[error("rank matrix must have at least one row and one column")]
    EmptyRanks,
    #[error("triple {index} ({viewer}, {first}, {second}) is out of range")]
    IndexOutOfRange {
        index: usize,
        viewer: usize,
        first: usize,
        second: usize,
    },
    #[error("invalid triple {index}: {detail}")]
    InvalidTriple { index: usize, detail: String },
    #[error("requested {requested} triples but only {available} exist")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("{0}")]
    Mismatch(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T, E = RankError> = std::result::Result<T, E>;

/// How a viewer orders items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ComparisonModel {
    /// Individuals and objects are points; nearer is preferred.
    #[serde(rename = "point")]
    PointDistance,
    /// Individuals are unit vectors; larger inner product is preferred.
    #[serde(rename = "vector")]
    VectorInnerProduct,
    /// Items compared from each item's own position (ordinal MDS).
    #[serde(rename = "self")]
    SelfDistance,
}

impl ComparisonModel {
    pub fn name(self) -> &'static str {
        match self {
            ComparisonModel::PointDistance => "point",
            ComparisonModel::VectorInnerProduct => "vector",
            ComparisonModel::SelfDistance => "self",
        }
    }
}

impl fmt::Display for ComparisonModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ComparisonModel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "point" => Ok(ComparisonModel::PointDistance),
            "vector" => Ok(ComparisonModel::VectorInnerProduct),
            "self" => Ok(ComparisonModel::SelfDistance),
            other => Err(format!("unknown model '{other}' (expected point, vector or self)")),
        }
    }
}

/// `m × n` matrix whose rows are permutations of `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u32>>", into = "Vec<Vec<u32>>")]
pub struct RankMatrix {
    rows: usize,
    cols: usize,
    ranks: Vec<u32>,
}

impl TryFrom<Vec<Vec<u32>>> for RankMatrix {
    type Error = RankError;
    fn try_from(rows: Vec<Vec<u32>>) -> Result<Self> {
        RankMatrix::new(rows)
    }
}

impl From<RankMatrix> for Vec<Vec<u32>> {
    fn from(r: RankMatrix) -> Self {
        r.to_rows()
    }
}

fn check_permutation(row: usize, values: &[u32], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &v in values {
        if v == 0 || v as usize > n {
            return Err(RankError::NotPermutation {
                row,
                n,
                detail: format!("rank {v} out of range"),
            });
        }
        if std::mem::replace(&mut seen[v as usize - 1], true) {
            return Err(RankError::NotPermutation {
                row,
                n,
                detail: format!("rank {v} repeated"),
            });
        }
    }
    Ok(())
}

impl RankMatrix {
    pub fn new(rows: Vec<Vec<u32>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 {
            return Err(RankError::EmptyRanks);
        }
        let mut ranks = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(RankError::NotPermutation {
                    row: i,
                    n: cols,
                    detail: format!("expected {cols} entries, found {}", r.len()),
                });
            }
            check_permutation(i, r, cols)?;
            ranks.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            ranks,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.ranks[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rank(&self, i: usize, k: usize) -> u32 {
        self.ranks[i * self.cols + k]
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        self.ranks.chunks_exact(self.cols).map(<[u32]>::to_vec).collect()
    }

    /// Items of row `i` listed from most to least preferred.
    pub fn order(&self, i: usize) -> Vec<usize> {
        order_of_row(self.row(i))
    }
}

/// Items of a rank row listed from most to least preferred.
pub fn order_of_row(row: &[u32]) -> Vec<usize> {
    let mut order = vec![0usize; row.len()];
    for (k, &r) in row.iter().enumerate() {
        order[r as usize - 1] = k;
    }
    order
}

/// Validates a single rank row (a permutation of `1..=len`).
pub fn validate_row(row: &[u32]) -> Result<()> {
    if row.is_empty() {
        return Err(RankError::EmptyRanks);
    }
    check_permutation(0, row, row.len())
}

/// Ranks `scores` ascending (smallest score gets rank 1); equal scores are a
/// [`RankError::Tie`].
fn rank_row(viewer: usize, scores: &[f64]) -> Result<Vec<u32>> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    for w in order.windows(2) {
        if scores[w[0]] == scores[w[1]] {
            return Err(RankError::Tie {
                viewer,
                a: w[0].min(w[1]),
                b: w[0].max(w[1]),
            });
        }
    }
    let mut ranks = vec![0u32; scores.len()];
    for (pos, &k) in order.iter().enumerate() {
        ranks[k] = pos as u32 + 1;
    }
    Ok(ranks)
}

fn build<F>(viewers: usize, objects: usize, mut score: F) -> Result<RankMatrix>
where
    F: FnMut(usize, usize) -> f64,
{
    let mut ranks = Vec::with_capacity(viewers * objects);
    let mut scores = vec![0.0; objects];
    for i in 0..viewers {
        for (k, s) in scores.iter_mut().enumerate() {
            *s = score(i, k);
        }
        ranks.extend(rank_row(i, &scores)?);
    }
    Ok(RankMatrix {
        rows: viewers,
        cols: objects,
        ranks,
    })
}

fn same_dim(a: &Configuration, b: &Configuration) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        }
        .into());
    }
    Ok(())
}

/// Point model: rank by increasing distance from each viewer.
pub fn row_ranks_point(viewers: &Configuration, objects: &Configuration) -> Result<RankMatrix> {
    same_dim(viewers, objects)?;
    build(viewers.len(), objects.len(), |i, k| {
        sq_dist(viewers.point(i), objects.point(k))
    })
}

/// Vector model: rank by decreasing inner product with each viewer.
pub fn row_ranks_vector(viewers: &SphericalConfiguration, objects: &Configuration) -> Result<RankMatrix> {
    row_ranks_inner(viewers.as_configuration(), objects)
}

fn row_ranks_inner(viewers: &Configuration, objects: &Configuration) -> Result<RankMatrix> {
    same_dim(viewers, objects)?;
    build(viewers.len(), objects.len(), |i, k| {
        -dot(viewers.point(i), objects.point(k))
    })
}

/// Ordinal MDS ranks: row `i` orders all items by distance from item `i`;
/// the item itself always has rank 1.
pub fn mds_row_ranks(items: &Configuration) -> Result<RankMatrix> {
    build(items.len(), items.len(), |i, k| sq_dist(items.point(i), items.point(k)))
}

/// Rank matrix of a pair of configurations under `model`. For the
/// self-distance model only `objects` is used.
pub fn ranks_for_model(model: ComparisonModel, viewers: &Configuration, objects: &Configuration) -> Result<RankMatrix> {
    match model {
        ComparisonModel::PointDistance => row_ranks_point(viewers, objects),
        ComparisonModel::VectorInnerProduct => {
            let v = SphericalConfiguration::new(viewers.clone())?;
            row_ranks_vector(&v, objects)
        }
        ComparisonModel::SelfDistance => mds_row_ranks(objects),
    }
}

/// One triadic comparison: from `viewer`, `first` strictly precedes `second`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub viewer: usize,
    pub first: usize,
    pub second: usize,
}

impl Triple {
    pub fn new(viewer: usize, first: usize, second: usize) -> Self {
        Self { viewer, first, second }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleSet {
    model: ComparisonModel,
    triples: Vec<Triple>,
}

impl TripleSet {
    /// Rejects `first == second`, duplicates and contradicting pairs; in the
    /// self-distance model also triples involving the viewer itself.
    pub fn new(model: ComparisonModel, triples: Vec<Triple>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(triples.len());
        for (index, t) in triples.iter().enumerate() {
            if t.first == t.second {
                return Err(RankError::InvalidTriple {
                    index,
                    detail: "item compared with itself".into(),
                });
            }
            if model == ComparisonModel::SelfDistance && (t.first == t.viewer || t.second == t.viewer) {
                return Err(RankError::InvalidTriple {
                    index,
                    detail: "self-distance triple involves its own viewer".into(),
                });
            }
            let key = (t.viewer, t.first.min(t.second), t.first.max(t.second));
            if !seen.insert(key) {
                return Err(RankError::InvalidTriple {
                    index,
                    detail: "duplicate or contradicting comparison".into(),
                });
            }
        }
        Ok(Self { model, triples })
    }

    pub fn model(&self) -> ComparisonModel {
        self.model
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Largest viewer index + 1 and largest item index + 1.
    pub fn index_bounds(&self) -> (usize, usize) {
        self.triples.iter().fold((0, 0), |(v, o), t| {
            (v.max(t.viewer + 1), o.max(t.first.max(t.second) + 1))
        })
    }
}

/// Number of comparisons in one row of length `n` under `model`.
fn pairs_per_row(model: ComparisonModel, n: usize) -> usize {
    let usable = if model == ComparisonModel::SelfDistance {
        n.saturating_sub(1)
    } else {
        n
    };
    usable * usable.saturating_sub(1) / 2
}

/// Total number of comparisons encoded by `ranks` under `model`.
pub fn comparison_count(model: ComparisonModel, ranks: &RankMatrix) -> usize {
    ranks.rows() * pairs_per_row(model, ranks.cols())
}

fn row_items(model: ComparisonModel, ranks: &RankMatrix, i: usize) -> Vec<usize> {
    let mut order = ranks.order(i);
    if model == ComparisonModel::SelfDistance {
        order.retain(|&k| k != i);
    }
    order
}

/// Expands `ranks` into triples. With `sample_count == None` every
/// comparison is listed (row by row, in rank order); otherwise a uniform
/// sample without replacement of that size is drawn from stream `seed`
/// and returned in the same canonical order.
pub fn triples_from_ranks(
    ranks: &RankMatrix,
    model: ComparisonModel,
    sample_count: Option<usize>,
    seed: u64,
) -> Result<TripleSet> {
    if model == ComparisonModel::SelfDistance && ranks.rows() != ranks.cols() {
        return Err(RankError::Mismatch(format!(
            "self-distance ranks must be square, got {}x{}",
            ranks.rows(),
            ranks.cols()
        )));
    }
    let per_row = pairs_per_row(model, ranks.cols());
    let total = ranks.rows() * per_row;
    let mut triples = Vec::new();
    match sample_count {
        None => {
            triples.reserve(total);
            for i in 0..ranks.rows() {
                let items = row_items(model, ranks, i);
                for (a, &j) in items.iter().enumerate() {
                    for &k in &items[a + 1..] {
                        triples.push(Triple::new(i, j, k));
                    }
                }
            }
        }
        Some(count) => {
            if count > total {
                return Err(RankError::SampleTooLarge {
                    requested: count,
                    available: total,
                });
            }
            let mut rng = stream_rng(seed, 0);
            let mut picks = index::sample(&mut rng, total, count).into_vec();
            picks.sort_unstable();
            let mut cached: Option<(usize, Vec<usize>)> = None;
            for flat in picks {
                let (i, q) = (flat / per_row, flat % per_row);
                if cached.as_ref().is_none_or(|(row, _)| *row != i) {
                    cached = Some((i, row_items(model, ranks, i)));
                }
                let items = &cached.as_ref().expect("row cached").1;
                let (a, b) = unrank_pair(q, items.len());
                triples.push(Triple::new(i, items[a], items[b]));
            }
        }
    }
    TripleSet::new(model, triples)
}

/// Inverse of the lexicographic enumeration of pairs `a < b < len`.
fn unrank_pair(mut q: usize, len: usize) -> (usize, usize) {
    let mut a = 0;
    loop {
        let in_row = len - a - 1;
        if q < in_row {
            return (a, a + 1 + q);
        }
        q -= in_row;
        a += 1;
    }
}

/// Does the comparison hold strictly for these coordinates?
#[inline]
pub fn comparison_holds(model: ComparisonModel, viewer: &[f64], first: &[f64], second: &[f64]) -> bool {
    match model {
        ComparisonModel::PointDistance | ComparisonModel::SelfDistance => {
            sq_dist(viewer, first) < sq_dist(viewer, second)
        }
        ComparisonModel::VectorInnerProduct => dot(viewer, first) > dot(viewer, second),
    }
}

/// Counts the triples whose strict precedence fails (ties count as
/// failures). In the self-distance model `viewers` and `objects` must be the
/// same configuration.
pub fn violation_count(triples: &TripleSet, viewers: &Configuration, objects: &Configuration) -> Result<usize> {
    same_dim(viewers, objects)?;
    if triples.model() == ComparisonModel::SelfDistance && viewers != objects {
        return Err(RankError::Mismatch(
            "self-distance triples need viewers identical to objects".into(),
        ));
    }
    let mut violations = 0;
    for (index, t) in triples.triples().iter().enumerate() {
        if t.viewer >= viewers.len() || t.first >= objects.len() || t.second >= objects.len() {
            return Err(RankError::IndexOutOfRange {
                index,
                viewer: t.viewer,
                first: t.first,
                second: t.second,
            });
        }
        if !comparison_holds(
            triples.model(),
            viewers.point(t.viewer),
            objects.point(t.first),
            objects.point(t.second),
        ) {
            violations += 1;
        }
    }
    Ok(violations)
}

/// Whether two configuration pairs produce identical rank matrices.
pub fn rank_data_equal(
    a_viewers: &Configuration,
    a_objects: &Configuration,
    b_viewers: &Configuration,
    b_objects: &Configuration,
    model: ComparisonModel,
) -> Result<bool> {
    if a_viewers.len() != b_viewers.len() || a_objects.len() != b_objects.len() {
        return Err(RankError::Mismatch(format!(
            "configuration sizes differ: ({}, {}) vs ({}, {})",
            a_viewers.len(),
            a_objects.len(),
            b_viewers.len(),
            b_objects.len()
        )));
    }
    let a = ranks_for_model(model, a_viewers, a_objects)?;
    let b = ranks_for_model(model, b_viewers, b_objects)?;
    Ok(a == b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dim: usize, pts: &[&[f64]]) -> Configuration {
        Configuration::new(dim, pts.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    #[test]
    fn point_ranks_examples() {
        let v = cfg(2, &[&[0.0, 0.0]]);
        let o = cfg(2, &[&[1.0, 0.0], &[2.0, 0.0], &[-3.0, 0.0]]);
        assert_eq!(row_ranks_point(&v, &o).unwrap().row(0), &[1, 2, 3]);
        let o = cfg(2, &[&[-3.0, 0.0], &[1.0, 0.0], &[2.0, 0.0]]);
        assert_eq!(row_ranks_point(&v, &o).unwrap().row(0), &[3, 1, 2]);
    }

    #[test]
    fn vector_ranks_examples() {
        let e1 = SphericalConfiguration::new(cfg(2, &[&[1.0, 0.0]])).unwrap();
        let e2 = SphericalConfiguration::new(cfg(2, &[&[0.0, 1.0]])).unwrap();
        let o = cfg(2, &[&[2.0, 0.0], &[1.0, 0.0]]);
        assert_eq!(row_ranks_vector(&e1, &o).unwrap().row(0), &[1, 2]);
        assert_eq!(row_ranks_vector(&e2, &o), Err(RankError::Tie { viewer: 0, a: 0, b: 1 }));
    }

    #[test]
    fn mds_ranks_collinear() {
        let x = cfg(1, &[&[0.0], &[1.0], &[3.0]]);
        let r = mds_row_ranks(&x).unwrap();
        assert_eq!(r.row(0), &[1, 2, 3]);
        assert_eq!(r.row(2), &[3, 2, 1]);
        for i in 0..3 {
            assert_eq!(r.rank(i, i), 1);
        }
    }

    #[test]
    fn rank_matrix_validation_names_row() {
        let err = RankMatrix::new(vec![vec![1, 2, 3], vec![1, 1, 3]]).unwrap_err();
        assert!(matches!(err, RankError::NotPermutation { row: 1, .. }));
        assert!(err.to_string().contains("row 1"));
        assert!(RankMatrix::new(vec![vec![1, 2], vec![1]]).is_err());
        assert!(RankMatrix::new(vec![vec![0, 1]]).is_err());
        assert_eq!(RankMatrix::new(vec![]), Err(RankError::EmptyRanks));
    }

    #[test]
    fn full_triples_single_row() {
        let r = RankMatrix::new(vec![vec![1, 2, 3]]).unwrap();
        let t = triples_from_ranks(&r, ComparisonModel::PointDistance, None, 0).unwrap();
        assert_eq!(
            t.triples(),
            &[Triple::new(0, 0, 1), Triple::new(0, 0, 2), Triple::new(0, 1, 2)]
        );
    }

    #[test]
    fn sampled_triples() {
        let r = RankMatrix::new(vec![vec![2, 3, 1, 4], vec![4, 3, 2, 1]]).unwrap();
        let model = ComparisonModel::PointDistance;
        let none = triples_from_ranks(&r, model, Some(0), 9).unwrap();
        assert!(none.is_empty());
        let full = triples_from_ranks(&r, model, None, 0).unwrap();
        let all = triples_from_ranks(&r, model, Some(full.len()), 9).unwrap();
        let mut a = full.triples().to_vec();
        let mut b = all.triples().to_vec();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert!(matches!(
            triples_from_ranks(&r, model, Some(full.len() + 1), 9),
            Err(RankError::SampleTooLarge { .. })
        ));
        let s1 = triples_from_ranks(&r, model, Some(5), 42).unwrap();
        let s2 = triples_from_ranks(&r, model, Some(5), 42).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn self_triples_skip_viewer() {
        let x = cfg(1, &[&[0.0], &[1.0], &[3.0], &[7.0]]);
        let r = mds_row_ranks(&x).unwrap();
        let t = triples_from_ranks(&r, ComparisonModel::SelfDistance, None, 0).unwrap();
        assert_eq!(t.len(), 4 * 3);
        assert!(t.triples().iter().all(|t| t.first != t.viewer && t.second != t.viewer));
        assert_eq!(violation_count(&t, &x, &x).unwrap(), 0);
    }

    #[test]
    fn triple_set_rejects_contradictions() {
        let m = ComparisonModel::PointDistance;
        assert!(TripleSet::new(m, vec![Triple::new(0, 1, 1)]).is_err());
        assert!(TripleSet::new(m, vec![Triple::new(0, 1, 2), Triple::new(0, 2, 1)]).is_err());
        assert!(TripleSet::new(m, vec![Triple::new(0, 1, 2), Triple::new(0, 1, 2)]).is_err());
        assert!(TripleSet::new(ComparisonModel::SelfDistance, vec![Triple::new(1, 1, 2)]).is_err());
        assert!(TripleSet::new(m, vec![Triple::new(0, 1, 2), Triple::new(1, 2, 1)]).is_ok());
    }

    #[test]
    fn violation_single_swap() {
        let v = cfg(2, &[&[0.0, 0.0]]);
        let o = cfg(2, &[&[1.0, 0.0], &[2.0, 0.0]]);
        let t = TripleSet::new(ComparisonModel::PointDistance, vec![Triple::new(0, 0, 1)]).unwrap();
        assert_eq!(violation_count(&t, &v, &o).unwrap(), 0);
        let swapped = cfg(2, &[&[2.0, 0.0], &[1.0, 0.0]]);
        assert_eq!(violation_count(&t, &v, &swapped).unwrap(), 1);
        let tied = cfg(2, &[&[1.0, 0.0], &[-1.0, 0.0]]);
        assert_eq!(violation_count(&t, &v, &tied).unwrap(), 1);
        let bad = TripleSet::new(ComparisonModel::PointDistance, vec![Triple::new(0, 0, 5)]).unwrap();
        assert!(matches!(
            violation_count(&bad, &v, &o),
            Err(RankError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn vector_scaling_of_objects_preserves_ranks() {
        let x = cfg(2, &[&[0.6, 0.8], &[-1.0, 0.0]]);
        let y = cfg(2, &[&[0.1, 0.2], &[1.5, -0.3], &[-0.7, 0.9]]);
        let y2 = y.map_points(|p| p.iter().map(|c| 2.0 * c).collect()).unwrap();
        assert!(rank_data_equal(&x, &y, &x, &y2, ComparisonModel::VectorInnerProduct).unwrap());
    }

    #[test]
    fn pair_unranking_matches_enumeration() {
        for len in 2..7 {
            let mut q = 0;
            for a in 0..len {
                for b in a + 1..len {
                    assert_eq!(unrank_pair(q, len), (a, b));
                    q += 1;
                }
            }
        }
    }
}
