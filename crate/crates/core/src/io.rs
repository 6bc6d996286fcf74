//! CSV and JSON files read and written by the command-line tools.
//!
//! * patterns: `x,y` with an optional `magnitude` column,
//! * curves: `r,value`,
//! * intensity fields: `x,y,value` at pixel centres, row-major,
//! * scores: `obs_id,score_name,value,n,seed`.
//!
//! Every table can carry a `<file>.meta.json` sidecar with the hash of the
//! configuration that produced it, the root seed and the Monte-Carlo size.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimate::{Curve, IntensityField};
use crate::geometry::{Point, PointPattern, Window};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct PointRow {
    x: f64,
    y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    magnitude: Option<f64>,
}

/// Events read from a CSV file; magnitudes are present when the file has a
/// `magnitude` column.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub pattern: PointPattern,
    pub magnitudes: Option<Vec<f64>>,
}

fn open_csv(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Reads a catalog; every point must lie in `window` (boundary included).
pub fn read_catalog_csv(path: &Path, window: &Window) -> Result<Catalog> {
    let mut rdr = open_csv(path)?;
    let headers = rdr.headers()?.clone();
    for need in ["x", "y"] {
        if !headers.iter().any(|h| h == need) {
            return Err(Error::Config(format!("{}: missing column '{need}'", path.display())));
        }
    }
    let has_mag = headers.iter().any(|h| h == "magnitude");
    let mut points = Vec::new();
    let mut mags = Vec::new();
    for row in rdr.deserialize() {
        let row: PointRow = row?;
        points.push(Point::new(row.x, row.y));
        if has_mag {
            mags.push(row.magnitude.ok_or_else(|| {
                Error::Config(format!("{}: missing magnitude in row {}", path.display(), points.len()))
            })?);
        }
    }
    let pattern = PointPattern::new(points, *window)?;
    Ok(Catalog {
        pattern,
        magnitudes: has_mag.then_some(mags),
    })
}

pub fn read_pattern_csv(path: &Path, window: &Window) -> Result<PointPattern> {
    Ok(read_catalog_csv(path, window)?.pattern)
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(())
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    create_parent(path)?;
    Ok(csv::Writer::from_path(path)?)
}

pub fn write_pattern_csv(path: &Path, p: &PointPattern) -> Result<()> {
    write_catalog_csv(path, p, None)
}

pub fn write_catalog_csv(path: &Path, p: &PointPattern, magnitudes: Option<&[f64]>) -> Result<()> {
    if let Some(m) = magnitudes {
        if m.len() != p.len() {
            return Err(Error::GridMismatch(format!("{} magnitudes for {} points", m.len(), p.len())));
        }
    }
    let mut w = writer(path)?;
    if p.is_empty() {
        let header: &[&str] = if magnitudes.is_some() { &["x", "y", "magnitude"] } else { &["x", "y"] };
        w.write_record(header)?;
    }
    for (i, pt) in p.points().iter().enumerate() {
        w.serialize(PointRow {
            x: pt.x,
            y: pt.y,
            magnitude: magnitudes.map(|m| m[i]),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads every `*.csv` file of `dir` in file-name order; the identifier of
/// each pattern is its file stem.
pub fn read_pattern_dir(dir: &Path, window: &Window) -> Result<Vec<(String, PointPattern)>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Empty(format!("no CSV patterns in {}", dir.display())));
    }
    files
        .iter()
        .map(|f| {
            let id = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((id, read_pattern_csv(f, window)?))
        })
        .collect()
}

/// Writes `patterns` as `<prefix>_<index>.csv` files and returns their paths.
pub fn write_pattern_dir(dir: &Path, prefix: &str, patterns: &[PointPattern]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let width = patterns.len().saturating_sub(1).to_string().len().max(4);
    patterns
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let path = dir.join(format!("{prefix}_{i:0width$}.csv"));
            write_pattern_csv(&path, p)?;
            Ok(path)
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct CurveRow {
    r: f64,
    value: f64,
}

pub fn write_curve_csv(path: &Path, curve: &Curve) -> Result<()> {
    let mut w = writer(path)?;
    for (r, value) in curve.r().iter().zip(curve.values()) {
        w.serialize(CurveRow { r: *r, value: *value })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct FieldRow {
    x: f64,
    y: f64,
    value: f64,
}

pub fn write_field_csv(path: &Path, field: &IntensityField) -> Result<()> {
    let mut w = writer(path)?;
    for (k, value) in field.values().iter().enumerate() {
        let (x, y) = field.grid().centre(k);
        w.serialize(FieldRow { x, y, value: *value })?;
    }
    w.flush()?;
    Ok(())
}

/// One row of a score table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub obs_id: String,
    pub score_name: String,
    pub value: f64,
    pub n: usize,
    pub seed: u64,
}

pub fn write_scores_csv(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    write_rows(path, rows)
}

pub fn read_scores_csv(path: &Path) -> Result<Vec<ScoreRow>> {
    let mut rdr = open_csv(path)?;
    let rows = rdr.deserialize().collect::<std::result::Result<Vec<ScoreRow>, _>>()?;
    Ok(rows)
}

/// Serialises any row type with a header line.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = writer(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Values of two score tables joined on `obs_id`, in the order of `a`.
/// Identifiers present in only one table are returned separately.
pub fn join_scores(a: &[ScoreRow], b: &[ScoreRow]) -> Result<(Vec<String>, Vec<f64>, Vec<f64>, Vec<String>)> {
    let index: BTreeMap<&str, f64> = b.iter().map(|r| (r.obs_id.as_str(), r.value)).collect();
    if index.len() != b.len() {
        return Err(Error::Config("duplicate obs_id in score table".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    let (mut ids, mut va, mut vb, mut unmatched) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for r in a {
        if !seen.insert(r.obs_id.as_str()) {
            return Err(Error::Config(format!("duplicate obs_id '{}' in score table", r.obs_id)));
        }
        match index.get(r.obs_id.as_str()) {
            Some(v) => {
                ids.push(r.obs_id.clone());
                va.push(r.value);
                vb.push(*v);
            }
            None => unmatched.push(r.obs_id.clone()),
        }
    }
    unmatched.extend(b.iter().filter(|r| !seen.contains(r.obs_id.as_str())).map(|r| r.obs_id.clone()));
    Ok((ids, va, vb, unmatched))
}

/// Reproducibility record stored next to every emitted table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    /// Monte-Carlo draws per forecast.
    pub n: usize,
    pub version: String,
}

impl Meta {
    pub fn new(command: &str, config: &impl Serialize, seed: u64, n: usize) -> Result<Meta> {
        Ok(Meta {
            command: command.to_string(),
            config_hash: config_hash(config)?,
            seed,
            n,
            version: env!("CARGO_PKG_VERSION").to_string(),
        })
    }
}

/// SHA-256 of the JSON serialisation, in hex.
pub fn config_hash(config: &impl Serialize) -> Result<String> {
    let text = serde_json::to_string(config)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    path.with_file_name(name)
}

pub fn write_meta(path: &Path, meta: &Meta) -> Result<()> {
    write_json(&meta_path(path), meta)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    create_parent(path)?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RGrid;

    fn sq10() -> Window {
        Window::square(10.0).unwrap()
    }

    #[test]
    fn pattern_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = crate::simulate::sample_hom_poisson(0.5, &sq10(), 4).unwrap();
        let path = dir.path().join("p.csv");
        write_pattern_csv(&path, &p).unwrap();
        assert_eq!(read_pattern_csv(&path, &sq10()).unwrap(), p);
        let empty = PointPattern::empty(sq10());
        write_pattern_csv(&path, &empty).unwrap();
        assert_eq!(read_pattern_csv(&path, &sq10()).unwrap(), empty);
    }

    #[test]
    fn magnitudes_and_boundary_points() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        fs::write(&path, "x, y, magnitude\n0,0,3.5\n10,10,4.1\n5,2.5,3.0\n").unwrap();
        let c = read_catalog_csv(&path, &sq10()).unwrap();
        assert_eq!(c.pattern.len(), 3);
        assert_eq!(c.magnitudes, Some(vec![3.5, 4.1, 3.0]));
        fs::write(&path, "x,y\n11,0\n").unwrap();
        assert!(read_pattern_csv(&path, &sq10()).is_err());
        fs::write(&path, "a,b\n1,1\n").unwrap();
        assert!(read_pattern_csv(&path, &sq10()).is_err());
    }

    #[test]
    fn pattern_dir_keeps_file_order() {
        let dir = tempfile::tempdir().unwrap();
        let pats: Vec<_> = (0..3)
            .map(|s| crate::simulate::sample_hom_poisson(0.1, &sq10(), s).unwrap())
            .collect();
        write_pattern_dir(dir.path(), "obs", &pats).unwrap();
        let back = read_pattern_dir(dir.path(), &sq10()).unwrap();
        assert_eq!(back.iter().map(|(i, _)| i.as_str()).collect::<Vec<_>>(), ["obs_0000", "obs_0001", "obs_0002"]);
        assert_eq!(back.into_iter().map(|(_, p)| p).collect::<Vec<_>>(), pats);
    }

    #[test]
    fn curve_and_score_tables() {
        let dir = tempfile::tempdir().unwrap();
        let curve = Curve::new(RGrid::uniform(1.0, 2).unwrap(), vec![0.25, 1.5]).unwrap();
        let path = dir.path().join("k.csv");
        write_curve_csv(&path, &curve).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "r,value\n0.5,0.25\n1.0,1.5\n");
        let rows = vec![ScoreRow {
            obs_id: "a".into(),
            score_name: "log".into(),
            value: 1.25,
            n: 0,
            seed: 7,
        }];
        let path = dir.path().join("s.csv");
        write_scores_csv(&path, &rows).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "obs_id,score_name,value,n,seed\na,log,1.25,0,7\n");
        assert_eq!(read_scores_csv(&path).unwrap(), rows);
    }

    #[test]
    fn join_on_obs_id() {
        let row = |id: &str, v: f64| ScoreRow {
            obs_id: id.into(),
            score_name: "s".into(),
            value: v,
            n: 2,
            seed: 0,
        };
        let a = vec![row("x", 1.0), row("y", 2.0), row("z", 3.0)];
        let b = vec![row("z", 30.0), row("x", 10.0), row("w", 0.0)];
        let (ids, va, vb, un) = join_scores(&a, &b).unwrap();
        assert_eq!(ids, ["x", "z"]);
        assert_eq!((va, vb), (vec![1.0, 3.0], vec![10.0, 30.0]));
        assert_eq!(un, ["y", "w"]);
        assert!(join_scores(&[row("x", 1.0), row("x", 2.0)], &b).is_err());
    }

    #[test]
    fn meta_sidecar_and_hash() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let meta = Meta::new("study1", &("cfg", 1), 42, 100).unwrap();
        write_meta(&path, &meta).unwrap();
        assert!(dir.path().join("t.csv.meta.json").exists());
        assert_eq!(meta.config_hash, config_hash(&("cfg", 1)).unwrap());
        assert_ne!(meta.config_hash, config_hash(&("cfg", 2)).unwrap());
        assert_eq!(meta.config_hash.len(), 64);
    }
}
