//! Parameter JSON, data CSV and atomic file output.

use std::io::Write;
use std::path::Path;

use fbnorm::{from_mean_covariance, CanonicalParams, FullParams};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

/// Rows closer than this to unit norm are used as given.
pub const UNIT_TOL: f64 = 1e-6;
/// Rows within this of unit norm are rescaled with a warning; beyond it they are rejected.
pub const RENORMALIZE_TOL: f64 = 1e-3;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ParamFile {
    Canonical {
        theta: Vec<f64>,
        #[serde(default)]
        gamma: Option<Vec<f64>>,
    },
    Full {
        mu: Vec<f64>,
        sigma: Vec<Vec<f64>>,
    },
}

/// Parameters read from JSON. `frame` is set for the `{mu, sigma}` form, where
/// canonical coordinates are `y = frame · x`.
#[derive(Debug, Clone)]
pub struct LoadedParams {
    pub canonical: CanonicalParams,
    pub frame: Option<DMatrix<f64>>,
    /// Constant added to the canonical exponent; zero for the canonical form.
    pub log_scale: f64,
}

pub fn parse_params(text: &str) -> CliResult<LoadedParams> {
    let file: ParamFile = serde_json::from_str(text).map_err(|e| {
        CliError::Usage(format!(
            "parameter JSON must be {{\"theta\": [...], \"gamma\": [...]}} or {{\"mu\": [...], \"sigma\": [[...]]}}: {e}"
        ))
    })?;
    match file {
        ParamFile::Canonical { theta, gamma } => {
            let gamma = gamma.unwrap_or_else(|| vec![0.0; theta.len()]);
            Ok(LoadedParams {
                canonical: CanonicalParams::new(theta, gamma)?,
                frame: None,
                log_scale: 0.0,
            })
        }
        ParamFile::Full { mu, sigma } => {
            let p = mu.len();
            if sigma.len() != p || sigma.iter().any(|r| r.len() != p) {
                return Err(CliError::Usage(format!("sigma must be a {p} x {p} matrix")));
            }
            let full = FullParams::new(
                DVector::from_vec(mu),
                DMatrix::from_row_iterator(p, p, sigma.into_iter().flatten()),
            )?;
            let decomposition = from_mean_covariance(&full)?;
            Ok(LoadedParams {
                canonical: decomposition.canonical,
                frame: Some(decomposition.orthogonal),
                log_scale: decomposition.log_scale,
            })
        }
    }
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn load_params(path: &Path) -> CliResult<LoadedParams> {
    parse_params(&read_text(path)?)
}

/// Row-major data with its column count and any renormalization warnings.
#[derive(Debug, Clone)]
pub struct DataMatrix {
    pub p: usize,
    pub values: Vec<f64>,
    pub warnings: Vec<String>,
}

impl DataMatrix {
    pub fn n(&self) -> usize {
        self.values.len() / self.p
    }
}

/// Parse numeric CSV with an optional header row; every row is checked to lie
/// on the unit sphere.
pub fn parse_data<R: std::io::Read>(reader: R) -> CliResult<DataMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut values = Vec::new();
    let mut p = 0;
    let mut off_sphere = Vec::new();
    let mut rescaled = Vec::new();
    let mut row_index = 0usize;
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(format!("CSV line {}: {e}", line + 1)))?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if line == 0 => continue,
            Err(e) => return Err(CliError::Data(format!("CSV line {}: {e}", line + 1))),
        };
        if p == 0 {
            p = row.len();
        } else if row.len() != p {
            return Err(CliError::Data(format!(
                "CSV line {}: expected {p} columns, found {}",
                line + 1,
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Data(format!(
                "data row {row_index} has a non-finite entry"
            )));
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dev = (norm - 1.0).abs();
        if dev <= UNIT_TOL {
            values.extend_from_slice(&row);
        } else if dev <= RENORMALIZE_TOL {
            rescaled.push(row_index);
            values.extend(row.iter().map(|v| v / norm));
        } else {
            off_sphere.push((row_index, norm));
        }
        row_index += 1;
    }
    if !off_sphere.is_empty() {
        let listed: Vec<String> = off_sphere
            .iter()
            .take(20)
            .map(|(i, n)| format!("{i} (norm {n:.6})"))
            .collect();
        let more = off_sphere.len().saturating_sub(20);
        return Err(CliError::Data(format!(
            "{} row(s) are not on the unit sphere: {}{}",
            off_sphere.len(),
            listed.join(", "),
            if more > 0 {
                format!(" and {more} more")
            } else {
                String::new()
            }
        )));
    }
    if p < 2 || values.is_empty() {
        return Err(CliError::Data(
            "data must have at least one row and two columns".into(),
        ));
    }
    let mut warnings = Vec::new();
    if !rescaled.is_empty() {
        warnings.push(format!(
            "renormalized {} row(s) whose norm was off by more than {UNIT_TOL:e}",
            rescaled.len()
        ));
    }
    Ok(DataMatrix {
        p,
        values,
        warnings,
    })
}

pub fn load_data(path: &Path) -> CliResult<DataMatrix> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_data(std::io::BufReader::new(file))
}

/// Rows as decimal text, one row per line, dot decimal separator.
pub fn format_csv(p: usize, values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 22);
    for row in values.chunks_exact(p) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}
