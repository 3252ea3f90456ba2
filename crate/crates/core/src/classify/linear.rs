use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_features, class_counts, softmax_inplace, ProbClassifier};
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::optim::{self, Options, SmoothProblem};
use crate::serde_matrix;

/// How affine class scores become probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Calibration {
    Softmax,
    /// Per-class sigmoid `1 / (1 + exp(a·f + b))`, then renormalized.
    PlattPerClass { a: Vec<f64>, b: Vec<f64> },
}

/// Affine multi-class model: `scores = W·x + biases`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProbModel {
    /// n_classes × n_features.
    #[serde(with = "serde_matrix")]
    pub weights: Array2<f64>,
    pub biases: Vec<f64>,
    /// Regularization factor (inverse penalty strength).
    pub c: f64,
    pub calibration: Calibration,
}

impl LinearProbModel {
    pub fn decision_function(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_features(self.n_features(), x)?;
        let b = ArrayView1::from(&self.biases[..]);
        let z = x.dot(&self.weights.t()) + &b;
        Ok(z.as_standard_layout().into_owned())
    }

    fn calibrate_row(&self, z: &mut [f64]) {
        match &self.calibration {
            Calibration::Softmax => softmax_inplace(z),
            Calibration::PlattPerClass { a, b } => {
                let mut sum = 0.0;
                for (k, v) in z.iter_mut().enumerate() {
                    *v = sigmoid(-(a[k] * *v + b[k]));
                    sum += *v;
                }
                if sum > 0.0 && sum.is_finite() {
                    for v in z.iter_mut() {
                        *v /= sum;
                    }
                } else {
                    let u = 1.0 / z.len() as f64;
                    z.fill(u);
                }
            }
        }
    }
}

impl ProbClassifier for LinearProbModel {
    fn n_classes(&self) -> usize {
        self.weights.nrows()
    }

    fn n_features(&self) -> usize {
        self.weights.ncols()
    }

    fn proba_row(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.biases[k] + self.weights.row(k).iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        self.calibrate_row(out);
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut z = self.decision_function(x)?;
        for mut row in z.rows_mut() {
            self.calibrate_row(row.as_slice_mut().expect("standard layout"));
        }
        Ok(z)
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn validate_fit_inputs(x: ArrayView2<f64>, labels: &[usize], n_classes: usize, c: f64) -> Result<Vec<usize>> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Config(format!("regularization C must be positive, got {c}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("inputs contain non-finite values".into()));
    }
    let counts = class_counts(labels, n_classes, x.nrows())?;
    let distinct = counts.iter().filter(|&&n| n > 0).count();
    if distinct < 2 {
        return Err(Error::DegenerateLabels(format!(
            "need at least 2 distinct labels, found {distinct}"
        )));
    }
    if x.nrows() < n_classes {
        return Err(Error::DegenerateLabels(format!(
            "{} rows cannot support {n_classes} classes",
            x.nrows()
        )));
    }
    Ok(counts)
}

/// Mean multinomial cross-entropy plus `‖W‖²/(2·C·T)` at parameters
/// `theta = [W row-major, biases]`; writes the gradient into `grad`.
pub fn logistic_objective(
    x: ArrayView2<f64>,
    labels: &[usize],
    n_classes: usize,
    c: f64,
    theta: &[f64],
    grad: &mut [f64],
) -> f64 {
    objective(x, labels, n_classes, c, None, theta, grad).0
}

/// Logits below the row maximum by more than this contribute less than
/// `e^-40 ≈ 4e-18` relative to the partition sum and are treated as zero.
const LOGIT_CUTOFF: f64 = 40.0;

/// `out (p×k) = Wᵀ` for `theta = [W (k×p) row-major, …]`.
fn transpose_weights(theta: &[f64], k: usize, p: usize) -> Vec<f64> {
    let mut wt = vec![0.0; p * k];
    for c in 0..k {
        for j in 0..p {
            wt[j * k + c] = theta[c * p + j];
        }
    }
    wt
}

/// Same as [`logistic_objective`] with the penalty `Σ pen_j·W_kj²` when
/// per-feature weights are given. Also returns the T×K class probabilities.
///
/// Rows are processed one at a time against the transposed weights so the
/// inner loops run over classes in contiguous memory.
fn objective(
    x: ArrayView2<f64>,
    labels: &[usize],
    n_classes: usize,
    c: f64,
    pen: Option<&[f64]>,
    theta: &[f64],
    grad: &mut [f64],
) -> (f64, Array2<f64>) {
    let (t, p) = x.dim();
    let k = n_classes;
    let wt = transpose_weights(theta, k, p);
    let b = &theta[k * p..];
    let mut probs = Array2::<f64>::zeros((t, k));
    let mut gwt = vec![0.0; p * k];
    let mut gb = vec![0.0; k];
    let mut loss = 0.0;
    for ((xrow, mut prow), &y) in x.rows().into_iter().zip(probs.rows_mut()).zip(labels) {
        let z = prow.as_slice_mut().expect("standard layout");
        z.copy_from_slice(b);
        for (j, &xj) in xrow.iter().enumerate() {
            for (zc, w) in z.iter_mut().zip(&wt[j * k..(j + 1) * k]) {
                *zc += xj * w;
            }
        }
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let zy = z[y];
        let mut sum = 0.0;
        for v in z.iter_mut() {
            let d = *v - m;
            *v = if d < -LOGIT_CUTOFF { 0.0 } else { d.exp() };
            sum += *v;
        }
        loss += sum.ln() + m - zy;
        let inv = 1.0 / sum;
        z.iter_mut().for_each(|v| *v *= inv);
        // gradient rows use P − Y
        z[y] -= 1.0;
        for (j, &xj) in xrow.iter().enumerate() {
            for (g, r) in gwt[j * k..(j + 1) * k].iter_mut().zip(z.iter()) {
                *g += xj * r;
            }
        }
        for (g, r) in gb.iter_mut().zip(z.iter()) {
            *g += r;
        }
        z[y] += 1.0;
    }
    let inv_t = 1.0 / t as f64;
    let mut penalty = 0.0;
    for cl in 0..k {
        for j in 0..p {
            let i = cl * p + j;
            let wgt = pen.map_or(1.0, |pw| pw[j]);
            penalty += wgt * theta[i] * theta[i];
            grad[i] = (gwt[j * k + cl] + wgt * theta[i] / c) * inv_t;
        }
    }
    for cl in 0..k {
        grad[k * p + cl] = gb[cl] * inv_t;
    }
    ((loss + 0.5 * penalty / c) * inv_t, probs)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Class probabilities below this are left out of the Hessian products.
const ACTIVE_PROB: f64 = 1e-10;

/// Penalized multinomial logistic loss on column-scaled features, with the
/// Hessian products needed by Newton-CG.
struct LogisticProblem<'a> {
    x: ArrayView2<'a, f64>,
    labels: &'a [usize],
    k: usize,
    c: f64,
    pen: Vec<f64>,
    /// Per-row classes with non-negligible probability at the last evaluated
    /// point, in CSR form.
    row_start: Vec<usize>,
    active: Vec<(usize, f64)>,
    /// Cholesky factors of the per-class diagonal Hessian blocks.
    blocks: Vec<Cholesky>,
}

impl SmoothProblem for LogisticProblem<'_> {
    fn value_grad(&mut self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let (f, probs) = objective(self.x, self.labels, self.k, self.c, Some(&self.pen), theta, grad);
        self.row_start.clear();
        self.active.clear();
        for prow in probs.rows() {
            self.row_start.push(self.active.len());
            self.active
                .extend(prow.iter().enumerate().filter(|(_, &q)| q > ACTIVE_PROB).map(|(c, &q)| (c, q)));
        }
        self.row_start.push(self.active.len());
        f
    }

    /// `H v` with `H = (1/T)·Σ_t (diag p_t − p_t p_tᵀ) ⊗ [x_t,1][x_t,1]ᵀ` plus
    /// the penalty, summed over each row's active classes.
    fn hess_vec(&self, v: &[f64], out: &mut [f64]) {
        let (t, p) = self.x.dim();
        let k = self.k;
        let vb = &v[k * p..];
        let mut hw = vec![0.0; k * p];
        let mut hb = vec![0.0; k];
        let mut a = vec![0.0; k];
        for (i, xrow) in self.x.rows().into_iter().enumerate() {
            let xs = xrow.to_slice().expect("standard layout");
            let act = &self.active[self.row_start[i]..self.row_start[i + 1]];
            let mut mean = 0.0;
            for (n, &(c, q)) in act.iter().enumerate() {
                let z = vb[c] + dot(xs, &v[c * p..(c + 1) * p]);
                a[n] = z;
                mean += q * z;
            }
            for (n, &(c, q)) in act.iter().enumerate() {
                let r = q * (a[n] - mean);
                for (h, xj) in hw[c * p..(c + 1) * p].iter_mut().zip(xs) {
                    *h += r * xj;
                }
                hb[c] += r;
            }
        }
        let inv_t = 1.0 / t as f64;
        for (i, o) in out[..k * p].iter_mut().enumerate() {
            *o = (hw[i] + self.pen[i % p] * v[i] / self.c) * inv_t;
        }
        for cl in 0..k {
            out[k * p + cl] = hb[cl] * inv_t;
        }
    }

    /// Block-Jacobi over classes: block `k` couples the weights and bias of
    /// class `k`, `(1/T)·Σ_t p_tk(1 − p_tk)·[x_t,1][x_t,1]ᵀ` plus the penalty.
    fn update_preconditioner(&mut self) {
        let (t, p) = self.x.dim();
        let k = self.k;
        let q = p + 1;
        let mut acc = vec![0.0; k * q * q];
        let mut xa = vec![1.0; q];
        for (row, xrow) in self.x.rows().into_iter().enumerate() {
            for (dst, v) in xa.iter_mut().zip(xrow) {
                *dst = *v;
            }
            for &(c, pc) in &self.active[self.row_start[row]..self.row_start[row + 1]] {
                let wgt = pc * (1.0 - pc);
                if wgt < 1e-14 {
                    continue;
                }
                let block = &mut acc[c * q * q..(c + 1) * q * q];
                for i in 0..q {
                    let wi = wgt * xa[i];
                    let row = &mut block[i * q..i * q + i + 1];
                    for (h, xj) in row.iter_mut().zip(&xa[..=i]) {
                        *h += wi * xj;
                    }
                }
            }
        }
        let inv_t = 1.0 / t as f64;
        self.blocks = (0..k)
            .map(|c| {
                let block = &acc[c * q * q..(c + 1) * q * q];
                let mut h = Array2::from_shape_fn((q, q), |(i, j)| {
                    let (i, j) = if j > i { (j, i) } else { (i, j) };
                    block[i * q + j] * inv_t
                });
                for j in 0..p {
                    h[[j, j]] += self.pen[j] / self.c * inv_t;
                }
                // floor keeps the block invertible when a class is saturated
                let floor = 1e-10 * (0..q).map(|j| h[[j, j]]).fold(0.0, f64::max).max(1e-300);
                for j in 0..q {
                    h[[j, j]] += floor;
                }
                Cholesky::factor(h.view())
                    .unwrap_or_else(|| Cholesky::factor(Array2::<f64>::eye(q).view()).expect("identity"))
            })
            .collect();
    }

    fn precondition(&self, r: &[f64], out: &mut [f64]) {
        let p = self.x.ncols();
        let k = self.k;
        if self.blocks.len() != k {
            out.copy_from_slice(r);
            return;
        }
        let mut rhs = Array1::<f64>::zeros(p + 1);
        for (c, block) in self.blocks.iter().enumerate() {
            for j in 0..p {
                rhs[j] = r[c * p + j];
            }
            rhs[p] = r[k * p + c];
            let z = block.solve_vec(rhs.view());
            for j in 0..p {
                out[c * p + j] = z[j];
            }
            out[k * p + c] = z[p];
        }
        // the loss is invariant to shifting every class by the same vector;
        // iterates stay in the zero-sum subspace where the optimum lies
        for j in (0..p).chain(k * p..k * p + 1) {
            let stride = if j < p { p } else { 1 };
            let mean = (0..k).map(|c| out[j + c * stride]).sum::<f64>() / k as f64;
            for c in 0..k {
                out[j + c * stride] -= mean;
            }
        }
    }
}

/// Multinomial logistic regression, zero-initialized, minimized to a gradient
/// max-norm of 1e-5.
///
/// Solved by truncated Newton on column-scaled features with correspondingly
/// scaled weights, which leaves the objective unchanged but evens out its
/// curvature.
pub fn logistic_fit(x: ArrayView2<f64>, labels: &[usize], n_classes: usize, c: f64) -> Result<LinearProbModel> {
    validate_fit_inputs(x, labels, n_classes, c)?;
    let (t, p) = x.dim();
    let k = n_classes;
    let sd: Vec<f64> = x
        .columns()
        .into_iter()
        .map(|col| {
            let mean = col.sum() / t as f64;
            let v = (col.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / t as f64).sqrt();
            if v > 0.0 && v.is_finite() { v } else { 1.0 }
        })
        .collect();
    let mut xs = x.to_owned();
    for (mut col, s) in xs.columns_mut().into_iter().zip(&sd) {
        col.mapv_inplace(|a| a / s);
    }
    let pen: Vec<f64> = sd.iter().map(|s| 1.0 / (s * s)).collect();
    let mut scale = vec![1.0; k * (p + 1)];
    for (i, sc) in scale[..k * p].iter_mut().enumerate() {
        *sc = sd[i % p];
    }
    let mut problem = LogisticProblem {
        x: xs.view(),
        labels,
        k,
        c,
        pen,
        row_start: Vec::new(),
        active: Vec::new(),
        blocks: Vec::new(),
    };
    let out = optim::newton_cg(&mut problem, vec![0.0; k * (p + 1)], &scale, Options::default());
    if out.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("logistic regression diverged".into()));
    }
    let weights = Array2::from_shape_fn((k, p), |(r, j)| out.x[r * p + j] / sd[j]);
    Ok(LinearProbModel {
        weights,
        biases: out.x[k * p..].to_vec(),
        c,
        calibration: Calibration::Softmax,
    })
}

const SVM_EPS: f64 = 1e-3;
const SVM_MAX_EPOCHS: usize = 1000;

/// Binary L1-loss linear SVM, `½‖w̃‖² + C·Σ max(0, 1 − yᵢ w̃·x̃ᵢ)` with
/// `x̃ = [x, 1]`, solved by dual coordinate descent. Returns `(w, bias)`.
fn svm_binary(x: ArrayView2<f64>, y: &[f64], c: f64) -> (Array1<f64>, f64) {
    let (t, p) = x.dim();
    let mut w = Array1::<f64>::zeros(p);
    let mut bias = 0.0;
    let mut alpha = vec![0.0; t];
    let qii: Vec<f64> = x.rows().into_iter().map(|r| r.dot(&r) + 1.0).collect();
    let mut order: Vec<usize> = (0..t).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..SVM_MAX_EPOCHS {
        order.shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            let xi = x.row(i);
            let g = y[i] * (w.dot(&xi) + bias) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / qii[i]).clamp(0.0, c);
                let d = (alpha[i] - old) * y[i];
                if d != 0.0 {
                    w.scaled_add(d, &xi);
                    bias += d;
                }
            }
        }
        if pg_max - pg_min <= SVM_EPS {
            break;
        }
    }
    (w, bias)
}

fn ovr_svms(x: ArrayView2<f64>, labels: &[usize], n_classes: usize, c: f64) -> (Array2<f64>, Vec<f64>) {
    let mut weights = Array2::zeros((n_classes, x.ncols()));
    let mut biases = vec![0.0; n_classes];
    for k in 0..n_classes {
        let y: Vec<f64> = labels.iter().map(|&l| if l == k { 1.0 } else { -1.0 }).collect();
        let (w, b) = svm_binary(x, &y, c);
        weights.row_mut(k).assign(&w);
        biases[k] = b;
    }
    (weights, biases)
}

/// Sigmoid fit `P(y=1|f) = 1/(1+exp(a·f+b))` by Newton's method with
/// backtracking, on smoothed targets.
fn platt_fit(dec: &[f64], positive: &[bool]) -> (f64, f64) {
    let n1 = positive.iter().filter(|&&p| p).count() as f64;
    let n0 = positive.len() as f64 - n1;
    let hi = (n1 + 1.0) / (n1 + 2.0);
    let lo = 1.0 / (n0 + 2.0);
    let target: Vec<f64> = positive.iter().map(|&p| if p { hi } else { lo }).collect();
    let objective = |a: f64, b: f64| -> f64 {
        dec.iter()
            .zip(&target)
            .map(|(&f, &t)| {
                let z = f * a + b;
                if z >= 0.0 {
                    t * z + (-z).exp().ln_1p()
                } else {
                    (t - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };
    let (mut a, mut b) = (0.0, ((n0 + 1.0) / (n1 + 1.0)).ln());
    let mut fval = objective(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (1e-12, 1e-12, 0.0, 0.0, 0.0);
        for (&f, &t) in dec.iter().zip(&target) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = t - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < 1e-10 {
            break;
        }
    }
    (a, b)
}

/// One-vs-rest linear hinge-loss classifiers with per-class Platt calibration.
///
/// Calibration uses decision values on every fifth training row from SVMs
/// fitted on the remaining rows; the returned SVMs are refitted on all rows.
pub fn svm_platt_fit(x: ArrayView2<f64>, labels: &[usize], n_classes: usize, c: f64) -> Result<LinearProbModel> {
    validate_fit_inputs(x, labels, n_classes, c)?;
    let t = x.nrows();
    let holdout: Vec<usize> = (0..t).filter(|i| i % 5 == 4).collect();
    let fitting: Vec<usize> = (0..t).filter(|i| i % 5 != 4).collect();
    let fit_labels: Vec<usize> = fitting.iter().map(|&i| labels[i]).collect();
    let fit_distinct = {
        let mut seen = vec![false; n_classes];
        fit_labels.iter().for_each(|&l| seen[l] = true);
        seen.iter().filter(|&&s| s).count()
    };

    let (weights, biases) = ovr_svms(x, labels, n_classes, c);
    let (cal_dec, cal_labels) = if t >= 10 && fit_distinct >= 2 {
        let xf = x.select(Axis(0), &fitting);
        let (w, b) = ovr_svms(xf.view(), &fit_labels, n_classes, c);
        let xh = x.select(Axis(0), &holdout);
        let dec = xh.dot(&w.t()) + &ArrayView1::from(&b[..]);
        (dec, holdout.iter().map(|&i| labels[i]).collect::<Vec<_>>())
    } else {
        let dec = x.dot(&weights.t()) + &ArrayView1::from(&biases[..]);
        (dec, labels.to_vec())
    };

    let mut a = vec![0.0; n_classes];
    let mut b = vec![0.0; n_classes];
    for k in 0..n_classes {
        let f: Vec<f64> = cal_dec.column(k).to_vec();
        let pos: Vec<bool> = cal_labels.iter().map(|&l| l == k).collect();
        let (ak, bk) = platt_fit(&f, &pos);
        a[k] = ak;
        b[k] = bk;
    }
    Ok(LinearProbModel {
        weights,
        biases,
        c,
        calibration: Calibration::PlattPerClass { a, b },
    })
}
