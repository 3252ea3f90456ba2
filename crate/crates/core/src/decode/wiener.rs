//! Linear (Wiener filter) and linear-nonlinear (Wiener cascade) baselines.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::linalg::{lstsq, Cholesky};
use crate::serde_matrix;

/// Ridge used when the unregularized normal equations are singular.
pub const SINGULAR_RETRY_RIDGE: f64 = 1e-8;

/// Static polynomial on a standardized linear output: `Σ_j coef_j·u^j`,
/// `u = (z − z_mean)/z_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputPolynomial {
    pub coefficients: Vec<f64>,
    pub z_mean: f64,
    pub z_scale: f64,
}

impl OutputPolynomial {
    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval(&self, z: f64) -> f64 {
        let u = (z - self.z_mean) / self.z_scale;
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WienerModel {
    /// K×(D+1); the last column is the intercept.
    #[serde(with = "serde_matrix")]
    pub weights: Array2<f64>,
    pub ridge: f64,
    /// Set when the system was singular and refitted with [`SINGULAR_RETRY_RIDGE`].
    pub regularized_retry: bool,
    /// Per-output nonlinearity of the cascade variant.
    #[serde(default)]
    pub polynomials: Option<Vec<OutputPolynomial>>,
}

impl WienerModel {
    pub fn n_features(&self) -> usize {
        self.weights.ncols() - 1
    }

    pub fn n_outputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len()
            + self
                .polynomials
                .as_ref()
                .map_or(0, |p| p.iter().map(|q| q.coefficients.len() + 2).sum())
    }

    /// Output of the affine stage alone.
    pub fn predict_linear(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let d = self.n_features();
        if x.ncols() != d {
            return Err(shape_err(format!("{d} features"), format!("{}", x.ncols())));
        }
        let w = self.weights.slice(s![.., ..d]);
        let b = self.weights.column(d);
        Ok(x.dot(&w.t()) + &b)
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut z = self.predict_linear(x)?;
        if let Some(polys) = &self.polynomials {
            for (mut col, p) in z.columns_mut().into_iter().zip(polys) {
                col.mapv_inplace(|v| p.eval(v));
            }
        }
        Ok(z)
    }
}

/// Affine ridge regression with an unpenalized intercept, solved through
/// the centered normal equations `(XcᵀXc + λI)W = Xcᵀyc` by Cholesky.
pub fn wiener_fit(x: ArrayView2<f64>, y: ArrayView2<f64>, ridge: f64) -> Result<WienerModel> {
    let (t, d) = x.dim();
    if y.nrows() != t {
        return Err(shape_err(format!("{t} target rows"), format!("{}", y.nrows())));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Config(format!("ridge must be nonnegative, got {ridge}")));
    }
    if t < 2 {
        return Err(Error::Fit(format!("Wiener filter needs at least 2 rows, got {t}")));
    }
    let x_mean = x.mean_axis(Axis(0)).expect("t >= 2");
    let y_mean = y.mean_axis(Axis(0)).expect("t >= 2");
    let xc = &x - &x_mean;
    let yc = &y - &y_mean;
    let gram = xc.t().dot(&xc);
    let rhs = xc.t().dot(&yc);

    let solve = |lambda: f64| {
        let mut a = gram.clone();
        for i in 0..d {
            a[[i, i]] += lambda;
        }
        Cholesky::factor(a.view()).map(|ch| ch.solve(rhs.view()))
    };
    let (coef, used_ridge, retried) = match solve(ridge) {
        Some(c) => (c, ridge, false),
        None if ridge < SINGULAR_RETRY_RIDGE => {
            let c = solve(SINGULAR_RETRY_RIDGE)
                .ok_or_else(|| Error::Fit("normal equations singular even with retry ridge".into()))?;
            (c, SINGULAR_RETRY_RIDGE, true)
        }
        None => return Err(Error::Fit("normal equations are not positive definite".into())),
    };

    // coef is D×K
    let k = y.ncols();
    let mut weights = Array2::zeros((k, d + 1));
    weights.slice_mut(s![.., ..d]).assign(&coef.t());
    let intercept: Array1<f64> = &y_mean - &x_mean.dot(&coef);
    weights.column_mut(d).assign(&intercept);
    Ok(WienerModel {
        weights,
        ridge: used_ridge,
        regularized_retry: retried,
        polynomials: None,
    })
}

/// Wiener filter followed by a per-output least-squares polynomial of
/// degree `degree` on the linear output.
pub fn wiener_cascade_fit(x: ArrayView2<f64>, y: ArrayView2<f64>, ridge: f64, degree: usize) -> Result<WienerModel> {
    if degree < 1 {
        return Err(Error::Config(format!("polynomial degree must be >= 1, got {degree}")));
    }
    let mut model = wiener_fit(x, y, ridge)?;
    let z = model.predict_linear(x)?;
    let t = z.nrows();
    let mut polys = Vec::with_capacity(y.ncols());
    for (zc, yc) in z.columns().into_iter().zip(y.columns()) {
        let mean = zc.sum() / t as f64;
        let sd = (zc.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / t as f64).sqrt();
        let scale = if sd > 0.0 { sd } else { 1.0 };
        let mut vander = Array2::<f64>::zeros((t, degree + 1));
        for (i, &v) in zc.iter().enumerate() {
            let u = (v - mean) / scale;
            let mut p = 1.0;
            for j in 0..=degree {
                vander[[i, j]] = p;
                p *= u;
            }
        }
        let coefficients = match lstsq(vander.view(), yc) {
            Ok(c) => c.to_vec(),
            // constant linear output: fall back to the target mean
            Err(_) => {
                let mut c = vec![0.0; degree + 1];
                c[0] = yc.sum() / t as f64;
                c
            }
        };
        polys.push(OutputPolynomial {
            coefficients,
            z_mean: mean,
            z_scale: scale,
        });
    }
    model.polynomials = Some(polys);
    Ok(model)
}

pub fn wiener_predict(model: &WienerModel, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    model.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn exact_affine_recovery() {
        let x = Array2::from_shape_fn((20, 1), |(i, _)| i as f64 * 0.37 - 2.0);
        let y = x.mapv(|v| 2.0 * v + 1.0);
        let m = wiener_fit(x.view(), y.view(), 0.0).unwrap();
        assert!((m.weights[[0, 0]] - 2.0).abs() < 1e-9);
        assert!((m.weights[[0, 1]] - 1.0).abs() < 1e-9);
        assert!(!m.regularized_retry);
    }

    #[test]
    fn singular_system_retries_with_ridge() {
        let x = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [4.0, 8.0]];
        let y = array![[1.0], [2.0], [3.0], [4.0]];
        let m = wiener_fit(x.view(), y.view(), 0.0).unwrap();
        assert!(m.regularized_retry);
        assert_eq!(m.ridge, SINGULAR_RETRY_RIDGE);
        let p = m.predict(x.view()).unwrap();
        for (a, b) in p.iter().zip(y.iter()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn cubic_cascade() {
        let x = Array2::from_shape_fn((50, 1), |(i, _)| i as f64 / 25.0 - 1.0);
        let y = x.mapv(|v| (2.0 * v).powi(3));
        let m = wiener_cascade_fit(x.view(), y.view(), 0.0, 3).unwrap();
        let p = m.predict(x.view()).unwrap();
        let r = crate::decode::r_squared(y.view(), p.view()).unwrap();
        assert!(r.mean >= 0.999);
        assert!(wiener_cascade_fit(x.view(), y.view(), 0.0, 0).is_err());
    }

    #[test]
    fn shape_checks() {
        let x = array![[1.0], [2.0], [3.0]];
        assert!(wiener_fit(x.view(), array![[1.0], [2.0]].view(), 0.0).is_err());
        let m = wiener_fit(x.view(), array![[1.0], [2.0], [2.5]].view(), 0.1).unwrap();
        assert!(m.predict(array![[1.0, 2.0]].view()).is_err());
    }
}
