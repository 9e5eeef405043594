//! On-disk formats.
//!
//! # Instance manifest (`format = "hpr-wbp-instance"`, `version = 1`)
//!
//! ```json
//! {
//!   "format": "hpr-wbp-instance",
//!   "version": 1,
//!   "T": 2, "m": 4, "d": 3,
//!   "omega": [0.4, 0.6],
//!   "samples": ["sample_000.csv", "sample_001.csv"],
//!   "barycenter_supports": "barycenter_supports.csv",
//!   "costs": { "kind": "weighted", "files": ["cost_000.bin", "cost_001.bin"] }
//! }
//! ```
//!
//! Paths are relative to the manifest's directory. Sample CSVs have one row
//! per atom, `weight,coord_1,...,coord_d`; the barycenter support CSV has
//! `coord_1,...,coord_d`. Both may start with a header row.
//!
//! `costs` is optional. Without it the costs are the squared Euclidean
//! distances between supports, jointly normalized to a maximum entry of one.
//! With `kind = "ground"` the files hold unweighted distances (multiplied by
//! `omega_t` on load); with `kind = "weighted"` they hold the LP costs `D^t`
//! as is. Instances given by costs alone use `d = 0` and omit
//! `barycenter_supports`.
//!
//! # Cost matrix files
//!
//! An 8-byte header (`u32` rows, `u32` cols, little endian) followed by
//! `rows * cols` little-endian `f64` values in row-major order. Row `i`,
//! column `j` is the cost between barycenter atom `i` and sample atom `j`.
//!
//! # Images
//!
//! Binary (`P5`) and plain (`P2`) PGM files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datagen::build_cost;
use crate::error::{Error, Result};
use crate::problem::{DiscreteDistribution, WbpInstance};
use crate::solvers::{ConvergenceRecord, Metrics};

pub const MANIFEST_FORMAT: &str = "hpr-wbp-instance";
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    /// Unweighted distances; the LP cost is `omega_t` times the file.
    Ground,
    /// LP costs `D^t`, used verbatim.
    Weighted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostFiles {
    pub kind: CostKind,
    pub files: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    #[serde(rename = "T")]
    pub num_samples: usize,
    pub m: usize,
    pub d: usize,
    pub omega: Vec<f64>,
    pub samples: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barycenter_supports: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<CostFiles>,
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => rows.push(v),
            // A non-numeric first row is a header.
            Err(_) if line == 0 => continue,
            Err(e) => return Err(Error::parse(path, format!("row {}: {e}", line + 1))),
        }
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn write_csv_rows(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn coord_header(d: usize) -> impl Iterator<Item = String> {
    (1..=d).map(|k| format!("coord_{k}"))
}

/// Reads a sample CSV (`weight,coord_1..coord_d` per row).
pub fn read_distribution_csv(path: &Path) -> Result<DiscreteDistribution> {
    let rows = read_rows(path)?;
    if rows.is_empty() {
        return Err(Error::parse(path, "no atoms"));
    }
    let weights = rows.iter().map(|r| r[0]).collect();
    let supports = rows.into_iter().map(|r| r[1..].to_vec()).collect();
    DiscreteDistribution::new(supports, weights).map_err(|e| Error::parse(path, e.to_string()))
}

pub fn write_distribution_csv(path: &Path, dist: &DiscreteDistribution) -> Result<()> {
    write_weighted_points_csv(path, dist.supports(), dist.weights())
}

/// `weight,coord_1..coord_d` rows for arbitrary weights (e.g. a computed
/// barycenter).
pub fn write_weighted_points_csv(path: &Path, supports: &[Vec<f64>], weights: &[f64]) -> Result<()> {
    let d = supports.first().map_or(0, Vec::len);
    let header: Vec<String> = std::iter::once("weight".to_string()).chain(coord_header(d)).collect();
    let rows = weights.iter().enumerate().map(|(i, w)| {
        let mut row = vec![*w];
        if let Some(p) = supports.get(i) {
            row.extend_from_slice(p);
        }
        row
    });
    write_csv_rows(path, &header, rows)
}

pub fn read_points_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    read_rows(path)
}

pub fn write_points_csv(path: &Path, points: &[Vec<f64>]) -> Result<()> {
    let d = points.first().map_or(0, Vec::len);
    write_csv_rows(path, &coord_header(d).collect::<Vec<_>>(), points.iter().cloned())
}

/// Reads a binary cost file; returns `(rows, cols, row-major values)`.
pub fn read_cost_matrix(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 {
        return Err(Error::parse(path, "cost file shorter than its 8-byte header"));
    }
    let rows = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = &bytes[8..];
    if body.len() != rows * cols * 8 {
        return Err(Error::parse(
            path,
            format!("header says {rows} x {cols} but body holds {} bytes", body.len()),
        ));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((rows, cols, data))
}

pub fn write_cost_matrix(path: &Path, rows: usize, cols: usize, row_major: &[f64]) -> Result<()> {
    if row_major.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            what: "cost matrix",
            expected: rows * cols,
            got: row_major.len(),
        });
    }
    let dims = |n: usize| u32::try_from(n).map_err(|_| Error::parse(path, format!("dimension {n} exceeds u32")));
    let mut buf = Vec::with_capacity(8 + 8 * row_major.len());
    buf.extend_from_slice(&dims(rows)?.to_le_bytes());
    buf.extend_from_slice(&dims(cols)?.to_le_bytes());
    for v in row_major {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn col_to_row_major(m: usize, n: usize, col: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for j in 0..n {
        for i in 0..m {
            out[i * n + j] = col[j * m + i];
        }
    }
    out
}

fn row_to_col_major(m: usize, n: usize, row: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = row[i * n + j];
        }
    }
    out
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(Error::parse(path, format!("unknown format {:?}", manifest.format)));
    }
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::parse(path, format!("unsupported version {}", manifest.version)));
    }
    Ok(manifest)
}

/// Loads an instance from a manifest file or from a directory containing
/// `manifest.json`.
pub fn read_instance(path: &Path) -> Result<WbpInstance> {
    let manifest_path = if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    };
    let manifest = read_manifest(&manifest_path)?;
    let base = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let bad = |msg: String| Error::parse(&manifest_path, msg);

    if manifest.samples.len() != manifest.num_samples || manifest.omega.len() != manifest.num_samples {
        return Err(bad(format!(
            "T = {} but {} sample files and {} omega entries",
            manifest.num_samples,
            manifest.samples.len(),
            manifest.omega.len()
        )));
    }
    let samples: Vec<DiscreteDistribution> = manifest
        .samples
        .iter()
        .map(|p| read_distribution_csv(&base.join(p)))
        .collect::<Result<_>>()?;
    if let Some((t, s)) = samples.iter().enumerate().find(|(_, s)| s.dim() != manifest.d) {
        return Err(bad(format!("sample {t} has dimension {}, manifest says d = {}", s.dim(), manifest.d)));
    }
    let bary = match &manifest.barycenter_supports {
        Some(p) => read_points_csv(&base.join(p))?,
        None if manifest.d == 0 => vec![Vec::new(); manifest.m],
        None => return Err(bad("barycenter_supports is required when d > 0".into())),
    };
    if bary.len() != manifest.m || bary.iter().any(|p| p.len() != manifest.d) {
        return Err(bad(format!("expected {} barycenter supports of dimension {}", manifest.m, manifest.d)));
    }

    let result = match &manifest.costs {
        None => {
            if manifest.d == 0 {
                return Err(bad("costs are required when d = 0".into()));
            }
            let sup: Vec<&[Vec<f64>]> = samples.iter().map(|s| s.supports()).collect();
            let costs = build_cost(&bary, &sup)?;
            WbpInstance::with_ground_costs(samples, bary, manifest.omega.clone(), costs)
        }
        Some(files) => {
            if files.files.len() != manifest.num_samples {
                return Err(bad(format!("{} cost files for T = {}", files.files.len(), manifest.num_samples)));
            }
            let mut costs = Vec::with_capacity(files.files.len());
            for (t, f) in files.files.iter().enumerate() {
                let p = base.join(f);
                let (rows, cols, data) = read_cost_matrix(&p)?;
                if rows != manifest.m || cols != samples[t].len() {
                    return Err(Error::parse(
                        &p,
                        format!("cost is {rows} x {cols}, expected {} x {}", manifest.m, samples[t].len()),
                    ));
                }
                costs.push(row_to_col_major(rows, cols, &data));
            }
            match files.kind {
                CostKind::Ground => WbpInstance::with_ground_costs(samples, bary, manifest.omega.clone(), costs),
                CostKind::Weighted => WbpInstance::new(samples, bary, manifest.omega.clone(), costs),
            }
        }
    };
    result.map_err(|e| bad(e.to_string()))
}

/// Writes `instance` into `dir` (created if missing) with its LP costs as
/// binary files, so that reading it back reproduces the instance bitwise.
/// Returns the manifest path.
pub fn write_instance(instance: &WbpInstance, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let t_count = instance.num_samples();
    let m = instance.m();
    let d = instance.barycenter_supports().first().map_or(0, Vec::len);
    let mut samples = Vec::with_capacity(t_count);
    let mut costs = Vec::with_capacity(t_count);
    for (t, s) in instance.samples().iter().enumerate() {
        let name = format!("sample_{t:03}.csv");
        write_distribution_csv(&dir.join(&name), s)?;
        samples.push(name);
        let name = format!("cost_{t:03}.bin");
        let n = s.len();
        write_cost_matrix(&dir.join(&name), m, n, &col_to_row_major(m, n, instance.cost(t)))?;
        costs.push(name);
    }
    let barycenter_supports = if d > 0 {
        let name = "barycenter_supports.csv".to_string();
        write_points_csv(&dir.join(&name), instance.barycenter_supports())?;
        Some(name)
    } else {
        None
    };
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        num_samples: t_count,
        m,
        d,
        omega: instance.omega().to_vec(),
        samples,
        barycenter_supports,
        costs: Some(CostFiles {
            kind: CostKind::Weighted,
            files: costs,
        }),
    };
    let path = dir.join(MANIFEST_FILE);
    write_json(&path, &manifest)?;
    Ok(path)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::parse(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub const LP_HISTORY_HEADER: [&str; 11] = [
    "iter",
    "kkt_primal",
    "kkt_nonneg",
    "kkt_dual",
    "kkt_compl",
    "kkt_max",
    "primal_obj",
    "dual_obj",
    "elapsed_secs",
    "restarted",
    "method",
];

pub const IBP_HISTORY_HEADER: [&str; 6] = ["iter", "marginal_err", "weight_change", "primal_obj", "elapsed_secs", "method"];

/// Writes a convergence history. LP records use [`LP_HISTORY_HEADER`]; if
/// the first record carries IBP metrics, [`IBP_HISTORY_HEADER`] is used.
pub fn write_history_csv(path: &Path, records: &[ConvergenceRecord]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let ibp = matches!(records.first().map(|r| &r.metrics), Some(Metrics::Marginal { .. }));
    let header = if ibp {
        IBP_HISTORY_HEADER.join(",")
    } else {
        LP_HISTORY_HEADER.join(",")
    };
    let io = |e| Error::io(path, e);
    writeln!(w, "{header}").map_err(io)?;
    for r in records {
        match &r.metrics {
            Metrics::Kkt(k) => writeln!(
                w,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:.6},{},{}",
                r.iter,
                k.primal_infeas,
                k.nonneg_violation,
                k.dual_infeas,
                k.complementarity,
                k.max_relative,
                r.primal_obj,
                r.dual_obj,
                r.elapsed_secs,
                u8::from(r.restarted),
                r.method
            ),
            Metrics::Marginal {
                marginal_err,
                weight_change,
            } => writeln!(
                w,
                "{},{:e},{:e},{:e},{:.6},{}",
                r.iter, marginal_err, weight_change, r.primal_obj, r.elapsed_secs, r.method
            ),
        }
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// A grayscale image with intensities as `f64`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInstance("image must be at least 1 x 1".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                what: "image pixels",
                expected: width * height,
                got: pixels.len(),
            });
        }
        if pixels.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidInstance("pixel intensities must be finite and nonnegative".into()));
        }
        Ok(Self { width, height, pixels })
    }
}

/// Splits the PGM header into tokens, skipping `#` comments; returns the
/// tokens and the offset just past the single whitespace byte that ends the
/// header.
fn pgm_header(bytes: &[u8], count: usize) -> Option<(Vec<String>, usize)> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'#' {
            i += 1;
        }
        if start == i {
            return None;
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    Some((tokens, i + 1))
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::parse(path, msg.to_string());
    let (head, offset) = pgm_header(&bytes, 4).ok_or_else(|| bad("truncated PGM header"))?;
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("malformed PGM header"));
    let (width, height, maxval) = (num(&head[1])?, num(&head[2])?, num(&head[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(bad("PGM maxval must be in 1..=65535"));
    }
    let n = width * height;
    let pixels: Vec<f64> = match head[0].as_str() {
        "P5" => {
            let body = bytes.get(offset..).unwrap_or(&[]);
            if maxval < 256 {
                if body.len() < n {
                    return Err(bad("truncated P5 pixel data"));
                }
                body[..n].iter().map(|&b| b as f64).collect()
            } else {
                if body.len() < 2 * n {
                    return Err(bad("truncated P5 pixel data"));
                }
                body[..2 * n]
                    .chunks_exact(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64)
                    .collect()
            }
        }
        "P2" => {
            let (tokens, _) = pgm_header(&bytes, 4 + n).ok_or_else(|| bad("truncated P2 pixel data"))?;
            tokens[4..]
                .iter()
                .map(|t| t.parse::<u32>().map(f64::from).map_err(|_| bad("malformed P2 pixel")))
                .collect::<Result<_>>()?
        }
        _ => return Err(bad("not a PGM file (expected P2 or P5)")),
    };
    if pixels.iter().any(|&p| p > maxval as f64) {
        return Err(bad("pixel value exceeds maxval"));
    }
    GrayImage::new(width, height, pixels).map_err(|e| Error::parse(path, e.to_string()))
}

/// Writes an 8-bit binary PGM, scaling intensities so the maximum maps to
/// 255 (all-zero images stay black).
pub fn write_pgm(path: &Path, image: &GrayImage) -> Result<()> {
    let max = image.pixels.iter().fold(0.0_f64, |a, &b| a.max(b));
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let mut buf = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    buf.extend(image.pixels.iter().map(|p| (p * scale).round().clamp(0.0, 255.0) as u8));
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_conversions_invert() {
        let col: Vec<f64> = (0..6).map(f64::from).collect();
        let row = col_to_row_major(2, 3, &col);
        assert_eq!(row, vec![0.0, 2.0, 4.0, 1.0, 3.0, 5.0]);
        assert_eq!(row_to_col_major(2, 3, &row), col);
    }

    #[test]
    fn pgm_header_skips_comments() {
        let (tokens, off) = pgm_header(b"P5\n# hi\n2 1 # x\n255\nab", 4).unwrap();
        assert_eq!(tokens, ["P5", "2", "1", "255"]);
        assert_eq!(&b"P5\n# hi\n2 1 # x\n255\nab"[off..], b"ab");
    }

    #[test]
    fn image_validation() {
        assert!(GrayImage::new(0, 1, vec![]).is_err());
        assert!(GrayImage::new(2, 2, vec![1.0; 3]).is_err());
        assert!(GrayImage::new(1, 1, vec![-1.0]).is_err());
    }
}
