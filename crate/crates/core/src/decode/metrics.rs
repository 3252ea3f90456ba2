use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RSquared {
    pub per_dim: Vec<f64>,
    /// Arithmetic mean over dimensions.
    pub mean: f64,
}

/// Coefficient of determination `1 − Σ(y−ŷ)²/Σ(y−ȳ)²` per column.
pub fn r_squared(y_true: ArrayView2<f64>, y_pred: ArrayView2<f64>) -> Result<RSquared> {
    if y_true.dim() != y_pred.dim() {
        return Err(shape_err(format!("{:?}", y_true.dim()), format!("{:?}", y_pred.dim())));
    }
    let t = y_true.nrows();
    if t < 2 {
        return Err(Error::Config(format!("R² needs at least 2 rows, got {t}")));
    }
    let mut per_dim = Vec::with_capacity(y_true.ncols());
    for (dim, (yt, yp)) in y_true.columns().into_iter().zip(y_pred.columns()).enumerate() {
        let mean = yt.sum() / t as f64;
        let ss_tot: f64 = yt.iter().map(|v| (v - mean) * (v - mean)).sum();
        if ss_tot == 0.0 {
            return Err(Error::UndefinedMetric { dim });
        }
        let ss_res: f64 = yt.iter().zip(yp.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        per_dim.push(1.0 - ss_res / ss_tot);
    }
    let mean = per_dim.iter().sum::<f64>() / per_dim.len() as f64;
    Ok(RSquared { per_dim, mean })
}
