mod common;

use approx::assert_abs_diff_eq;
use ccbr_core::decode::{wiener_fit, wiener_predict};
use ccbr_core::linalg::{symmetric_eigen, symmetric_eigen_leading};
use ccbr_core::reduce::{pca_fit, pca_transform, PcSelector};
use common::{covariance, gaussian};
use nalgebra::DMatrix;
use ndarray::Array2;

fn to_na(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Eigenpairs from nalgebra, sorted descending.
fn reference_eigen(a: &Array2<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let e = nalgebra::SymmetricEigen::new(to_na(a));
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| e.eigenvalues[j].total_cmp(&e.eigenvalues[i]));
    let values = order.iter().map(|&i| e.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.nrows(), a.nrows(), |r, c| e.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn assert_same_direction(u: ndarray::ArrayView1<f64>, v: nalgebra::DVectorView<f64>, tol: f64) {
    let dot: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
    let s = dot.signum();
    for (a, b) in u.iter().zip(v.iter()) {
        assert_abs_diff_eq!(*a, s * b, epsilon = tol);
    }
}

/// Rows with a planted, well-separated spectrum.
fn planted(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let z = gaussian(rows, cols, seed);
    let q = nalgebra::linalg::QR::new(to_na(&gaussian(cols, cols, seed + 1))).q();
    let scales: Vec<f64> = (0..cols).map(|j| 10.0 * 0.93f64.powi(j as i32)).collect();
    Array2::from_shape_fn((rows, cols), |(i, j)| (0..cols).map(|k| z[[i, k]] * scales[k] * q[(j, k)]).sum())
}

#[test]
fn pca_matches_dense_eigendecomposition() {
    let x = gaussian(200, 10, 11);
    let model = pca_fit(x.view(), PcSelector::Fixed(10)).unwrap();
    let (values, vectors) = reference_eigen(&covariance(&x));
    for k in 0..10 {
        assert_abs_diff_eq!(model.explained_variance[k], values[k], epsilon = 1e-6);
        assert_same_direction(model.components.column(k), vectors.column(k), 1e-6);
    }
}

#[test]
fn leading_eigenpairs_of_large_matrix_match_dense_solver() {
    let x = planted(400, 120, 3);
    let cov = covariance(&x);
    let eig = symmetric_eigen_leading(cov.view(), |_| 8).unwrap();
    let (values, vectors) = reference_eigen(&cov);
    let scale = values[0];
    for k in 0..8 {
        assert_abs_diff_eq!(eig.values[k] / scale, values[k] / scale, epsilon = 1e-10);
        assert_same_direction(eig.vectors.column(k), vectors.column(k), 1e-6);
    }
}

#[test]
fn leading_path_agrees_with_full_jacobi() {
    let x = planted(300, 70, 5);
    let cov = covariance(&x);
    let full = symmetric_eigen(cov.view()).unwrap();
    let lead = symmetric_eigen_leading(cov.view(), |_| 70).unwrap();
    for k in 0..70 {
        assert_abs_diff_eq!(full.values[k], lead.values[k], epsilon = 1e-9 * full.values[0]);
    }
    let gram = lead.vectors.t().dot(&lead.vectors);
    for ((i, j), v) in gram.indexed_iter() {
        assert_abs_diff_eq!(*v, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-9);
    }
}

#[test]
fn training_scores_have_diagonal_covariance() {
    let x = planted(250, 12, 9);
    let model = pca_fit(x.view(), PcSelector::Fixed(12)).unwrap();
    let scores = pca_transform(&model, x.view()).unwrap();
    let c = covariance(&scores);
    let max_var = model.explained_variance[0];
    for i in 0..12 {
        assert_abs_diff_eq!(c[[i, i]], model.explained_variance[i], epsilon = 1e-6);
        for j in 0..12 {
            if i != j {
                assert!(c[[i, j]].abs() <= 1e-6 * max_var);
            }
        }
    }
}

#[test]
fn wiener_matches_pseudo_inverse() {
    let x = gaussian(20, 3, 21);
    let y = gaussian(20, 2, 22);
    let model = wiener_fit(x.view(), y.view(), 0.0).unwrap();
    let design = DMatrix::from_fn(20, 4, |i, j| if j < 3 { x[[i, j]] } else { 1.0 });
    let pinv = design.clone().pseudo_inverse(1e-14).unwrap();
    let coef = pinv * to_na(&y);
    for k in 0..2 {
        for j in 0..4 {
            assert_abs_diff_eq!(model.weights[[k, j]], coef[(j, k)], epsilon = 1e-8);
        }
    }
}

#[test]
fn wiener_solution_satisfies_normal_equations() {
    let x = gaussian(60, 5, 31);
    let y = gaussian(60, 2, 32);
    let ridge = 0.3;
    let model = wiener_fit(x.view(), y.view(), ridge).unwrap();
    let residual = &y - &wiener_predict(&model, x.view()).unwrap();
    // ∂/∂w: Xᵀr = λw for weights, Σr = 0 for the unpenalized intercept
    for k in 0..2 {
        for j in 0..5 {
            let g: f64 = x.column(j).dot(&residual.column(k));
            assert_abs_diff_eq!(g, ridge * model.weights[[k, j]], epsilon = 1e-8);
        }
        assert_abs_diff_eq!(residual.column(k).sum(), 0.0, epsilon = 1e-8);
    }
}

#[test]
fn noise_targets_are_not_decodable() {
    let x = gaussian(4000, 5, 41);
    let y = gaussian(4000, 1, 42);
    let model = wiener_fit(x.view(), y.view(), 0.0).unwrap();
    let xt = gaussian(4000, 5, 43);
    let yt = gaussian(4000, 1, 44);
    let pred = wiener_predict(&model, xt.view()).unwrap();
    let r2 = ccbr_core::decode::r_squared(yt.view(), pred.view()).unwrap();
    assert!(r2.mean <= 0.05, "R² {}", r2.mean);
}
