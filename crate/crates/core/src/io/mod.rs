//! File formats, run manifests and data generation.
//!
//! * Configuration CSV: a header line `dim=<p>`, then one point per line.
//! * Configuration JSON: `{"dim": p, "points": [[...], ...]}`.
//! * Rank CSV: one viewer per line, integer ranks, no header.
//! * Triple CSV: a header line `model=<point|vector|self>`, then `i,j,k`
//!   lines with 0-based indices.
//!
//! Floats are written in the shortest form that parses back to the same
//! `f64`, so every written file reads back bit-identically.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{Configuration, GeometryError};
use crate::rankings::{ranks_for_model, ComparisonModel, RankError, RankMatrix, Triple, TripleSet};
use crate::rng::{stream_id, stream_rng};
use crate::sampling::{sample_sphere, Design};

mod plot;

pub use plot::render_report_svg;

const GENERATE_TAG: u8 = 4;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Rank(#[from] RankError),
}

fn parse_err(line: usize, msg: impl Into<String>) -> IoError {
    IoError::Parse { line, msg: msg.into() }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

/// Non-empty CSV records with their 1-based line numbers.
fn records(text: &str) -> Result<Vec<(usize, Vec<String>)>, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let line = rec.position().map_or(0, |p| p.line() as usize);
        out.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(out)
}

fn header_value<'a>(record: Option<&'a (usize, Vec<String>)>, key: &str) -> Result<&'a str, IoError> {
    let (line, fields) = record.ok_or_else(|| parse_err(1, format!("missing '{key}=' header")))?;
    match fields.as_slice() {
        [f] => f
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix('='))
            .map(str::trim)
            .ok_or_else(|| parse_err(*line, format!("expected '{key}=<value>' header, found '{f}'"))),
        _ => Err(parse_err(*line, format!("expected '{key}=<value>' header"))),
    }
}

pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn configuration_to_csv(c: &Configuration) -> String {
    let mut out = format!("dim={}\n", c.dim());
    for p in c.points() {
        let row: Vec<String> = p.iter().map(|&v| format_f64(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn configuration_from_csv(text: &str) -> Result<Configuration, IoError> {
    let recs = records(text)?;
    let dim_text = header_value(recs.first(), "dim")?;
    let dim: usize = dim_text
        .parse()
        .map_err(|_| parse_err(recs[0].0, format!("invalid dimension '{dim_text}'")))?;
    let mut points = Vec::with_capacity(recs.len() - 1);
    for (line, fields) in &recs[1..] {
        if fields.len() != dim {
            return Err(parse_err(
                *line,
                format!("expected {dim} coordinates, found {}", fields.len()),
            ));
        }
        let p = fields
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| parse_err(*line, format!("invalid number '{f}'")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        points.push(p);
    }
    Ok(Configuration::new(dim, points)?)
}

pub fn configuration_to_json(c: &Configuration) -> Result<String, IoError> {
    Ok(serde_json::to_string_pretty(c)? + "\n")
}

pub fn configuration_from_json(text: &str) -> Result<Configuration, IoError> {
    Ok(serde_json::from_str(text)?)
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Reads a configuration, choosing JSON or CSV by file extension.
pub fn read_configuration(path: &Path) -> Result<Configuration, IoError> {
    let text = read_text(path)?;
    if is_json(path) {
        configuration_from_json(&text)
    } else {
        configuration_from_csv(&text)
    }
}

pub fn write_configuration(path: &Path, c: &Configuration) -> Result<(), IoError> {
    let text = if is_json(path) {
        configuration_to_json(c)?
    } else {
        configuration_to_csv(c)
    };
    write_text(path, &text)
}

pub fn ranks_to_csv(r: &RankMatrix) -> String {
    let mut out = String::new();
    for i in 0..r.rows() {
        let row: Vec<String> = r.row(i).iter().map(u32::to_string).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parses a rank CSV. Errors name the offending row (0-based, as in the
/// rank matrix) or line.
pub fn ranks_from_csv(text: &str) -> Result<RankMatrix, IoError> {
    let recs = records(text)?;
    let mut rows = Vec::with_capacity(recs.len());
    for (line, fields) in &recs {
        let row = fields
            .iter()
            .map(|f| {
                f.parse::<u32>()
                    .map_err(|_| parse_err(*line, format!("rank row {}: invalid rank '{f}'", rows.len())))
            })
            .collect::<Result<Vec<u32>, _>>()?;
        rows.push(row);
    }
    Ok(RankMatrix::new(rows)?)
}

pub fn triples_to_csv(t: &TripleSet) -> String {
    let mut out = format!("model={}\n", t.model());
    for tr in t.triples() {
        out.push_str(&format!("{},{},{}\n", tr.viewer, tr.first, tr.second));
    }
    out
}

pub fn triples_from_csv(text: &str) -> Result<TripleSet, IoError> {
    let recs = records(text)?;
    let name = header_value(recs.first(), "model")?;
    let model: ComparisonModel = name.parse().map_err(|e: String| parse_err(recs[0].0, e))?;
    let mut triples = Vec::with_capacity(recs.len() - 1);
    for (line, fields) in &recs[1..] {
        let idx = fields
            .iter()
            .map(|f| {
                f.parse::<usize>()
                    .map_err(|_| parse_err(*line, format!("invalid index '{f}'")))
            })
            .collect::<Result<Vec<usize>, _>>()?;
        match idx.as_slice() {
            &[i, j, k] => triples.push(Triple::new(i, j, k)),
            _ => return Err(parse_err(*line, format!("expected 3 indices, found {}", idx.len()))),
        }
    }
    Ok(TripleSet::new(model, triples)?)
}

/// Whether a text file is a triple CSV (as opposed to a rank CSV).
pub fn looks_like_triples(text: &str) -> bool {
    text.trim_start().starts_with("model=")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: String,
    /// Lowercase hex SHA-256 of the file contents.
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    /// The invocation, arguments joined by spaces.
    pub command: String,
    pub inputs: Vec<InputFile>,
    pub seed: u64,
    pub tool_version: String,
    pub timestamp: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String, IoError> {
    let mut file = fs::File::open(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let k = file.read(&mut buf).map_err(|source| IoError::File {
            path: path.to_path_buf(),
            source,
        })?;
        if k == 0 {
            break;
        }
        hasher.update(&buf[..k]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// ISO-8601 time taken from `SOURCE_DATE_EPOCH`, or the Unix epoch when it
/// is unset, so that repeated runs produce identical manifests.
pub fn manifest_timestamp() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse::<i64>().ok())
        .unwrap_or(0);
    chrono::DateTime::from_timestamp(secs, 0)
        .unwrap_or_default()
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

impl RunManifest {
    pub fn new<P: AsRef<Path>>(command: impl Into<String>, inputs: &[P], seed: u64) -> Result<Self, IoError> {
        let inputs = inputs
            .iter()
            .map(|p| {
                let p = p.as_ref();
                Ok(InputFile {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<_, IoError>>()?;
        Ok(Self {
            command: command.into(),
            inputs,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: manifest_timestamp(),
        })
    }

    /// Paths whose current contents no longer match the recorded hash.
    pub fn changed_inputs(&self) -> Result<Vec<String>, IoError> {
        let mut changed = Vec::new();
        for input in &self.inputs {
            if sha256_file(Path::new(&input.path))? != input.sha256 {
                changed.push(input.path.clone());
            }
        }
        Ok(changed)
    }
}

/// An output JSON document: the manifest next to the payload's fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document<T> {
    pub manifest: RunManifest,
    #[serde(flatten)]
    pub body: T,
}

pub fn document_to_json<T: Serialize>(manifest: &RunManifest, body: &T) -> Result<String, IoError> {
    #[derive(Serialize)]
    struct Borrowed<'a, T> {
        manifest: &'a RunManifest,
        #[serde(flatten)]
        body: &'a T,
    }
    Ok(serde_json::to_string_pretty(&Borrowed { manifest, body })? + "\n")
}

/// What [`generate`] should produce besides the object configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerateRequest {
    pub design: Design,
    pub dim: usize,
    pub count: usize,
    pub seed: u64,
    /// Individuals to sample and the model to rank them under. Vector-model
    /// individuals are uniform on the sphere; point-model individuals follow
    /// `design`. The self model ranks the objects among themselves.
    pub ranking: Option<(ComparisonModel, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub objects: Configuration,
    pub individuals: Option<Configuration>,
    pub ranks: Option<RankMatrix>,
}

pub fn generate(req: &GenerateRequest) -> Result<Generated, IoError> {
    let mut rng = stream_rng(req.seed, stream_id(GENERATE_TAG, 0, 0, 0));
    let objects = req.design.sample(req.dim, req.count, &mut rng)?;
    let Some((model, m)) = req.ranking else {
        return Ok(Generated {
            objects,
            individuals: None,
            ranks: None,
        });
    };
    let mut rng = stream_rng(req.seed, stream_id(GENERATE_TAG, 1, 0, 0));
    let individuals = match model {
        ComparisonModel::SelfDistance => None,
        ComparisonModel::PointDistance => Some(req.design.sample(req.dim, m, &mut rng)?),
        ComparisonModel::VectorInnerProduct => Some(sample_sphere(req.dim, m, &mut rng)?.as_configuration().clone()),
    };
    let ranks = ranks_for_model(model, individuals.as_ref().unwrap_or(&objects), &objects)?;
    Ok(Generated {
        objects,
        individuals,
        ranks: Some(ranks),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn configuration_csv_round_trip_is_exact() {
        let c = Configuration::new(
            2,
            vec![
                vec![0.1, -1e-300],
                vec![1.0 / 3.0, 12345.678901234567],
                vec![f64::MIN_POSITIVE, -0.0],
            ],
        )
        .unwrap();
        let text = configuration_to_csv(&c);
        assert!(text.starts_with("dim=2\n"));
        let back = configuration_from_csv(&text).unwrap();
        assert_eq!(back, c);
        for (a, b) in back.coords().iter().zip(c.coords()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(configuration_from_json(&configuration_to_json(&c).unwrap()).unwrap(), c);
    }

    #[test]
    fn bad_configuration_csv() {
        assert!(matches!(
            configuration_from_csv("1,2\n"),
            Err(IoError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            configuration_from_csv("dim=2\n1,2\n1\n"),
            Err(IoError::Parse { line: 3, .. })
        ));
        assert!(matches!(
            configuration_from_csv("dim=1\nx\n"),
            Err(IoError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn malformed_rank_row_is_named() {
        let err = ranks_from_csv("1,2,3\n1,1,3\n").unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
        let err = ranks_from_csv("1,2,3\n3,x,1\n").unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
    }

    #[test]
    fn triples_round_trip() {
        let t = TripleSet::new(
            ComparisonModel::SelfDistance,
            vec![Triple::new(0, 1, 2), Triple::new(2, 0, 1)],
        )
        .unwrap();
        let text = triples_to_csv(&t);
        assert!(text.starts_with("model=self\n"));
        assert!(looks_like_triples(&text));
        assert_eq!(triples_from_csv(&text).unwrap(), t);
        assert!(triples_from_csv("model=nope\n").is_err());
    }

    #[test]
    fn generate_is_deterministic() {
        let req = GenerateRequest {
            design: Design::UniformBall,
            dim: 2,
            count: 10,
            seed: 7,
            ranking: Some((ComparisonModel::PointDistance, 4)),
        };
        let a = generate(&req).unwrap();
        assert_eq!(a, generate(&req).unwrap());
        assert_eq!(a.ranks.unwrap().rows(), 4);
    }

    #[test]
    fn generated_designs() {
        let grid = generate(&GenerateRequest {
            design: Design::Grid,
            dim: 1,
            count: 3,
            seed: 0,
            ranking: None,
        })
        .unwrap();
        assert_eq!(grid.objects.coords(), &[-1.0, 0.0, 1.0]);
        let sphere = generate(&GenerateRequest {
            design: Design::UniformSphere,
            dim: 3,
            count: 100,
            seed: 1,
            ranking: None,
        })
        .unwrap();
        for p in sphere.objects.points() {
            assert!((crate::geometry::norm(p) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn manifest_hashes_inputs() {
        let dir = std::env::temp_dir().join(format!("oe-manifest-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let f = dir.join("in.txt");
        fs::write(&f, b"abc").unwrap();
        let m = RunManifest::new("test", &[&f], 3).unwrap();
        assert_eq!(
            m.inputs[0].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert!(m.changed_inputs().unwrap().is_empty());
        fs::write(&f, b"abd").unwrap();
        assert_eq!(m.changed_inputs().unwrap().len(), 1);
        fs::remove_dir_all(&dir).unwrap();
    }
}
