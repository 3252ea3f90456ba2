//! Small dense linear-algebra kernels: symmetric eigendecomposition (cyclic
//! Jacobi for small matrices, Householder tridiagonalization for large ones),
//! Cholesky solves and Householder least squares.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Eigenpairs of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues, sorted descending.
    pub values: Array1<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: Array2<f64>,
    pub sweeps: usize,
}

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Rotations are applied row-wise on a dense row-major copy and the transposed
/// eigenvector matrix, so every inner loop runs over contiguous memory. The
/// iteration stops once the off-diagonal Frobenius norm falls below
/// `1e-12 × ‖A‖_F` or after 100 sweeps.
pub fn symmetric_eigen(a: ArrayView2<f64>) -> Result<SymmetricEigen> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(crate::error::shape_err(
            "square matrix",
            format!("{}x{}", a.nrows(), a.ncols()),
        ));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("matrix has non-finite entries".into()));
    }
    let mut m: Vec<f64> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            // symmetrize to guard against round-off asymmetry in the input
            m.push(0.5 * (a[[i, j]] + a[[j, i]]));
        }
    }
    // rows of `vt` are eigenvectors
    let mut vt = vec![0.0; n * n];
    for i in 0..n {
        vt[i * n + i] = 1.0;
    }

    let total: f64 = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut sweeps = 0;
    while sweeps < JACOBI_MAX_SWEEPS {
        let off = off_diagonal_norm(&m, n);
        if off <= JACOBI_TOL * total || off == 0.0 {
            break;
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                rotate_rows(&mut m, n, p, q, c, s);
                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        m[k * n + p] = m[p * n + k];
                        m[k * n + q] = m[q * n + k];
                    }
                }
                rotate_rows(&mut vt, n, p, q, c, s);
            }
        }
    }
    if sweeps == JACOBI_MAX_SWEEPS && off_diagonal_norm(&m, n) > JACOBI_TOL * total {
        return Err(Error::Fit(format!(
            "Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]).then(i.cmp(&j)));
    let values = Array1::from_iter(order.iter().map(|&i| m[i * n + i]));
    let mut vectors = Array2::zeros((n, n));
    for (col, &i) in order.iter().enumerate() {
        for r in 0..n {
            vectors[[r, col]] = vt[i * n + r];
        }
    }
    Ok(SymmetricEigen {
        values,
        vectors,
        sweeps,
    })
}

fn off_diagonal_norm(m: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            s += 2.0 * m[p * n + q] * m[p * n + q];
        }
    }
    s.sqrt()
}

/// Applies `row_p ← c·row_p − s·row_q`, `row_q ← s·row_p + c·row_q`.
fn rotate_rows(m: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    debug_assert!(p < q);
    let (head, tail) = m.split_at_mut(q * n);
    let rp = &mut head[p * n..p * n + n];
    let rq = &mut tail[..n];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Largest dimension decomposed by Jacobi in [`symmetric_eigen_leading`].
pub const JACOBI_MAX_DIM: usize = 64;

/// All eigenvalues (descending) and the leading eigenvectors of a symmetric
/// matrix. `select` receives the sorted eigenvalues and returns how many
/// eigenvectors to compute.
///
/// Matrices up to [`JACOBI_MAX_DIM`] go through [`symmetric_eigen`]. Larger
/// ones are reduced to tridiagonal form by Householder reflections; the
/// eigenvalues come from implicit QL iterations and the requested vectors
/// from inverse iteration, reorthogonalized within eigenvalue clusters.
pub fn symmetric_eigen_leading(a: ArrayView2<f64>, select: impl FnOnce(&[f64]) -> usize) -> Result<SymmetricEigen> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(crate::error::shape_err(
            "square matrix",
            format!("{}x{}", a.nrows(), a.ncols()),
        ));
    }
    if n <= JACOBI_MAX_DIM {
        let full = symmetric_eigen(a)?;
        let k = select(full.values.as_slice().expect("owned")).min(n);
        return Ok(SymmetricEigen {
            vectors: full.vectors.slice(ndarray::s![.., ..k]).to_owned(),
            ..full
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("matrix has non-finite entries".into()));
    }
    let tri = Tridiagonal::reduce(a);
    let mut values = tri.eigenvalues()?;
    values.sort_by(|x, y| y.total_cmp(x));
    let k = select(&values).min(n);
    let norm = tri.norm();
    let ortol = 1e-3 * norm;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut vectors = Array2::zeros((n, k));
    let mut cluster_start = 0;
    for (j, &lambda) in values.iter().take(k).enumerate() {
        if j > 0 && values[j - 1] - lambda > ortol {
            cluster_start = j;
        }
        let z = tri.inverse_iteration(lambda, &basis[cluster_start..j], j as u64);
        let u = tri.back_transform(&z);
        vectors.column_mut(j).assign(&ArrayView1::from(&u[..]));
        basis.push(z);
    }
    Ok(SymmetricEigen {
        values: Array1::from(values),
        vectors,
        sweeps: 0,
    })
}

/// `Qᵀ A Q = T` with `T` tridiagonal and `Q` a product of Householder reflectors.
/// Reflectors per blocked update in the tridiagonal reduction.
const PANEL: usize = 32;

struct Tridiagonal {
    diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    off: Vec<f64>,
    /// Unit reflector acting on indices `k + 1..n`, if any.
    reflectors: Vec<Option<Vec<f64>>>,
}

impl Tridiagonal {
    /// Householder reduction in panels of [`PANEL`] reflectors. Within a
    /// panel the trailing block is left stale and corrected on the fly; the
    /// accumulated rank-2·`PANEL` update is applied with one matrix product.
    fn reduce(a: ArrayView2<f64>) -> Self {
        let n = a.nrows();
        let mut m = Array2::from_shape_fn((n, n), |(i, j)| 0.5 * (a[[i, j]] + a[[j, i]]));
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n];
        let steps = n.saturating_sub(2);
        let mut reflectors = Vec::with_capacity(steps);
        let mut vt = Array2::<f64>::zeros((PANEL, n));
        let mut wt = Array2::<f64>::zeros((PANEL, n));
        let mut bv = vec![0.0; n];
        let mut j0 = 0;
        while j0 < steps {
            let nb = PANEL.min(steps - j0);
            vt.fill(0.0);
            wt.fill(0.0);
            for i in 0..nb {
                let k = j0 + i;
                {
                    let mut row = m.row_mut(k);
                    let row = row.as_slice_mut().expect("standard layout");
                    for r in 0..i {
                        let (vk, wk) = (vt[[r, k]], wt[[r, k]]);
                        let (vr, wr) = (vt.row(r), wt.row(r));
                        let (vr, wr) = (vr.as_slice().expect("row"), wr.as_slice().expect("row"));
                        for j in k..n {
                            row[j] -= vk * wr[j] + wk * vr[j];
                        }
                    }
                }
                diag[k] = m[[k, k]];
                let x = m.row(k);
                let x = &x.as_slice().expect("standard layout")[k + 1..];
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    off[k] = 0.0;
                    reflectors.push(None);
                    continue;
                }
                let alpha = if x[0] > 0.0 { -norm } else { norm };
                let mut v = x.to_vec();
                v[0] -= alpha;
                let vn = v.iter().map(|t| t * t).sum::<f64>().sqrt();
                v.iter_mut().for_each(|t| *t /= vn);
                off[k] = alpha;

                // B·v on the stale trailing block, read from its lower triangle
                let s = k + 1;
                let len = n - s;
                let y = &mut bv[..len];
                y.iter_mut().for_each(|t| *t = 0.0);
                for r in 0..len {
                    let row = m.row(s + r);
                    let row = &row.as_slice().expect("standard layout")[s..s + r + 1];
                    let vr = v[r];
                    let mut acc = 0.0;
                    for ((yc, a), vc) in y[..r].iter_mut().zip(&row[..r]).zip(&v[..r]) {
                        acc += a * vc;
                        *yc += a * vr;
                    }
                    y[r] += acc + row[r] * vr;
                }
                for r in 0..i {
                    let (vr, wr) = (vt.row(r), wt.row(r));
                    let (vr, wr) = (&vr.as_slice().expect("row")[s..], &wr.as_slice().expect("row")[s..]);
                    let (dw, dv) = dot2(wr, vr, &v);
                    for ((yc, a), b) in y.iter_mut().zip(vr).zip(wr) {
                        *yc -= dw * a + dv * b;
                    }
                }
                // w = 2Bv − 2(vᵀBv)v, so that H B H = B − v wᵀ − w vᵀ
                let vbv: f64 = y.iter().zip(&v).map(|(a, b)| a * b).sum();
                for ((w, yc), vc) in wt.row_mut(i).iter_mut().skip(s).zip(y.iter()).zip(&v) {
                    *w = 2.0 * (yc - vbv * vc);
                }
                for (dst, vc) in vt.row_mut(i).iter_mut().skip(s).zip(&v) {
                    *dst = *vc;
                }
                reflectors.push(Some(v));
            }
            let s = j0 + nb;
            let (vs, ws) = (vt.slice(s![..nb, s..]), wt.slice(s![..nb, s..]));
            let mut block = m.slice_mut(s![s.., s..]);
            general_mat_mul(-1.0, &vs.t(), &ws, 1.0, &mut block);
            general_mat_mul(-1.0, &ws.t(), &vs, 1.0, &mut block);
            j0 += nb;
        }
        if n >= 2 {
            diag[n - 2] = m[[n - 2, n - 2]];
            off[n - 2] = m[[n - 2, n - 1]];
        }
        diag[n - 1] = m[[n - 1, n - 1]];
        off[n - 1] = 0.0;
        Self { diag, off, reflectors }
    }

    fn norm(&self) -> f64 {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                self.diag[i].abs()
                    + self.off[i].abs()
                    + if i > 0 { self.off[i - 1].abs() } else { 0.0 }
            })
            .fold(0.0, f64::max)
    }

    /// Implicit QL with Wilkinson-style shifts; eigenvalues in no particular order.
    fn eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.diag.len();
        let mut d = self.diag.clone();
        let mut e = self.off.clone();
        for l in 0..n {
            let mut iter = 0;
            loop {
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= f64::EPSILON * dd {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                iter += 1;
                if iter > 60 {
                    return Err(Error::Fit("tridiagonal QL iteration did not converge".into()));
                }
                let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                let mut r = g.hypot(1.0);
                g = d[m] - d[l] + e[l] / (g + r.copysign(g));
                let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
                let mut underflow = false;
                for i in (l..m).rev() {
                    let f = s * e[i];
                    let b = c * e[i];
                    r = f.hypot(g);
                    e[i + 1] = r;
                    if r == 0.0 {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        underflow = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                }
                if underflow {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        }
        Ok(d)
    }

    /// Unit eigenvector of the tridiagonal matrix for `lambda`, orthogonal
    /// to `cluster`.
    fn inverse_iteration(&self, lambda: f64, cluster: &[Vec<f64>], seed: u64) -> Vec<f64> {
        let n = self.diag.len();
        let tiny = f64::EPSILON * self.norm().max(f64::MIN_POSITIVE);
        // LU of T − λI with partial pivoting: U has two superdiagonals
        let mut u0: Vec<f64> = self.diag.iter().map(|d| d - lambda).collect();
        let mut u1: Vec<f64> = self.off.clone();
        let mut u2 = vec![0.0; n];
        let mut mult = vec![0.0; n];
        let mut swapped = vec![false; n];
        for i in 0..n - 1 {
            let sub = self.off[i];
            if u0[i].abs() >= sub.abs() {
                if u0[i] == 0.0 {
                    u0[i] = tiny;
                }
                mult[i] = sub / u0[i];
                u0[i + 1] -= mult[i] * u1[i];
            } else {
                swapped[i] = true;
                mult[i] = u0[i] / sub;
                let (d1, c1) = (u0[i + 1], if i + 1 < n - 1 { u1[i + 1] } else { 0.0 });
                u0[i + 1] = u1[i] - mult[i] * d1;
                if i + 1 < n - 1 {
                    u1[i + 1] = -mult[i] * c1;
                }
                u0[i] = sub;
                u1[i] = d1;
                u2[i] = c1;
            }
        }
        if u0[n - 1] == 0.0 {
            u0[n - 1] = tiny;
        }

        let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xD1B5_4A32_D192_ED03;
        let mut x: Vec<f64> = (0..n)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        for _ in 0..3 {
            orthogonalize(&mut x, cluster);
            for i in 0..n - 1 {
                if swapped[i] {
                    x.swap(i, i + 1);
                }
                x[i + 1] -= mult[i] * x[i];
            }
            for i in (0..n).rev() {
                let mut v = x[i];
                if i + 1 < n {
                    v -= u1[i] * x[i + 1];
                }
                if i + 2 < n {
                    v -= u2[i] * x[i + 2];
                }
                x[i] = v / u0[i];
            }
            orthogonalize(&mut x, cluster);
            let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= nrm);
        }
        x
    }

    fn back_transform(&self, z: &[f64]) -> Vec<f64> {
        let mut u = z.to_vec();
        for (k, v) in self.reflectors.iter().enumerate().rev() {
            if let Some(v) = v {
                let tail = &mut u[k + 1..];
                let dot: f64 = tail.iter().zip(v).map(|(a, b)| a * b).sum();
                for (t, vi) in tail.iter_mut().zip(v) {
                    *t -= 2.0 * dot * vi;
                }
            }
        }
        u
    }
}

/// `(a·c, b·c)`.
fn dot2(a: &[f64], b: &[f64], c: &[f64]) -> (f64, f64) {
    a.iter().zip(b).zip(c).fold((0.0, 0.0), |(p, q), ((x, y), z)| (p + x * z, q + y * z))
}

fn orthogonalize(x: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let dot: f64 = x.iter().zip(b).map(|(p, q)| p * q).sum();
        for (p, q) in x.iter_mut().zip(b) {
            *p -= dot * q;
        }
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Array2<f64>,
}

impl Cholesky {
    /// Returns `None` when a pivot is not strictly positive.
    pub fn factor(a: ArrayView2<f64>) -> Option<Self> {
        let n = a.nrows();
        let mut l = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let mut d = a[[j, j]];
            for k in 0..j {
                d -= l[[j, k]] * l[[j, k]];
            }
            // relative pivot floor: treats numerically rank-deficient systems as singular
            if !(d > 1e-13 * a[[j, j]].abs().max(f64::MIN_POSITIVE)) {
                return None;
            }
            let d = d.sqrt();
            l[[j, j]] = d;
            for i in (j + 1)..n {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = s / d;
            }
        }
        Some(Self { l })
    }

    pub fn solve_vec(&self, b: ArrayView1<f64>) -> Array1<f64> {
        let n = self.l.nrows();
        let mut y = b.to_owned();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[[i, k]] * y[k];
            }
            y[i] = s / self.l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[[k, i]] * y[k];
            }
            y[i] = s / self.l[[i, i]];
        }
        y
    }

    /// Solves `A X = B` column by column.
    pub fn solve(&self, b: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(b.raw_dim());
        for (j, col) in b.columns().into_iter().enumerate() {
            out.column_mut(j).assign(&self.solve_vec(col));
        }
        out
    }
}

/// Least-squares solution of `A x ≈ b` by Householder QR. `A` must have full
/// column rank and at least as many rows as columns.
pub fn lstsq(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<Array1<f64>> {
    let (m, n) = a.dim();
    if m < n {
        return Err(Error::Fit(format!(
            "least squares needs rows >= cols, got {m}x{n}"
        )));
    }
    let mut r = a.to_owned();
    let mut y = b.to_owned();
    for k in 0..n {
        let norm = r.column(k).slice(ndarray::s![k..]).dot(&r.column(k).slice(ndarray::s![k..])).sqrt();
        if norm == 0.0 {
            return Err(Error::Fit("rank-deficient least-squares system".into()));
        }
        let alpha = if r[[k, k]] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|i| r[[i, k]]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for j in k..n {
                let dot: f64 = (k..m).map(|i| v[i - k] * r[[i, j]]).sum();
                let f = 2.0 * dot / vnorm2;
                for i in k..m {
                    r[[i, j]] -= f * v[i - k];
                }
            }
            let dot: f64 = (k..m).map(|i| v[i - k] * y[i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                y[i] -= f * v[i - k];
            }
        }
    }
    let scale = (0..n).map(|k| r[[k, k]].abs()).fold(0.0, f64::max);
    let mut x = Array1::zeros(n);
    for k in (0..n).rev() {
        if r[[k, k]].abs() <= 1e-14 * scale {
            return Err(Error::Fit("rank-deficient least-squares system".into()));
        }
        let mut s = y[k];
        for j in (k + 1)..n {
            s -= r[[k, j]] * x[j];
        }
        x[k] = s / r[[k, k]];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn jacobi_diagonalizes_2x2() {
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let e = symmetric_eigen(a.view()).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-12);
        assert!((e.values[1] - 1.0).abs() < 1e-12);
        let v0 = e.vectors.column(0);
        assert!((v0[0].abs() - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        let a = array![[4.0, 1.0, -2.0], [1.0, 2.0, 0.5], [-2.0, 0.5, 3.0]];
        let e = symmetric_eigen(a.view()).unwrap();
        let lam = Array2::from_diag(&e.values);
        let back = e.vectors.dot(&lam).dot(&e.vectors.t());
        for (x, y) in back.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    fn test_matrix(n: usize) -> Array2<f64> {
        let b = Array2::from_shape_fn((n, n), |(i, j)| ((i * 31 + j * 17) % 23) as f64 / 23.0 - 0.5);
        b.t().dot(&b)
    }

    #[test]
    fn tridiagonal_path_matches_jacobi() {
        let a = test_matrix(80);
        let j = symmetric_eigen(a.view()).unwrap();
        let t = symmetric_eigen_leading(a.view(), |_| 80).unwrap();
        for (x, y) in j.values.iter().zip(t.values.iter()) {
            assert!((x - y).abs() < 1e-10 * j.values[0], "{x} {y}");
        }
        let back = t.vectors.dot(&Array2::from_diag(&t.values)).dot(&t.vectors.t());
        for (x, y) in back.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-9 * j.values[0]);
        }
        let gram = t.vectors.t().dot(&t.vectors);
        for ((i, k), v) in gram.indexed_iter() {
            let want = if i == k { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-10);
        }
    }

    #[test]
    fn repeated_eigenvalues_get_orthonormal_vectors() {
        let mut a = Array2::<f64>::eye(70) * 2.0;
        a[[0, 0]] = 5.0;
        let e = symmetric_eigen_leading(a.view(), |_| 10).unwrap();
        assert_eq!(e.vectors.ncols(), 10);
        assert!((e.values[0] - 5.0).abs() < 1e-12 && (e.values[1] - 2.0).abs() < 1e-12);
        let gram = e.vectors.t().dot(&e.vectors);
        for ((i, k), v) in gram.indexed_iter() {
            let want = if i == k { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-12);
        }
        assert!((e.vectors[[0, 0]].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a = array![[4.0, 2.0], [2.0, 3.0]];
        let ch = Cholesky::factor(a.view()).unwrap();
        let x = ch.solve_vec(array![2.0, 1.0].view());
        let r = a.dot(&x) - array![2.0, 1.0];
        assert!(r.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn cholesky_rejects_singular() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        assert!(Cholesky::factor(a.view()).is_none());
    }

    #[test]
    fn lstsq_fits_line() {
        let a = array![[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0]];
        let b = array![1.0, 3.0, 5.0, 7.0];
        let x = lstsq(a.view(), b.view()).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }
}
