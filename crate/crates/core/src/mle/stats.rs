use nalgebra::{DMatrix, DVector};

use crate::error::{FbError, Result};

/// Unit-norm tolerance for observations.
pub const UNIT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    /// Mean of `x xᵀ`.
    pub a: DMatrix<f64>,
    /// Mean of `x`.
    pub b: DVector<f64>,
    pub n: usize,
}

impl SufficientStats {
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// `(O A Oᵀ, O B)`: the statistics expressed in the frame `y = O x`.
    pub fn rotated(&self, o: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
        (o * &self.a * o.transpose(), o * &self.b)
    }
}

/// Sufficient statistics of row-major `n × p` data whose rows lie on the sphere.
pub fn sufficient_stats(data: &[f64], p: usize) -> Result<SufficientStats> {
    if p == 0 || data.is_empty() || !data.len().is_multiple_of(p) {
        return Err(FbError::Data {
            row: None,
            message: format!(
                "expected a non-empty n x {p} matrix, got {} values",
                data.len()
            ),
        });
    }
    let n = data.len() / p;
    let mut a = DMatrix::zeros(p, p);
    let mut b = DVector::zeros(p);
    for (i, row) in data.chunks_exact(p).enumerate() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !((norm - 1.0).abs() <= UNIT_TOL) {
            return Err(FbError::Data {
                row: Some(i),
                message: format!("row {i} has norm {norm}, not 1"),
            });
        }
        let x = DVector::from_column_slice(row);
        a.syger(1.0, &x, &x, 1.0);
        b += &x;
    }
    let inv = 1.0 / n as f64;
    a *= inv;
    b *= inv;
    a.fill_upper_triangle_with_lower_triangle();
    Ok(SufficientStats { a, b, n })
}
