//! Deterministic smooth minimization: limited-memory BFGS and truncated
//! Newton-CG, both with an Armijo backtracking line search.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy)]
pub struct Options {
    /// Stop once `max |∇f| ≤ grad_tol`.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub memory: usize,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            grad_tol: 1e-5,
            max_iter: 2000,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm_inf: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f` from `x0`. `f` returns the objective and writes the gradient
/// into its second argument.
pub fn minimize<F>(f: F, x0: Vec<f64>, opts: Options) -> Outcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let ones = vec![1.0; x0.len()];
    minimize_scaled(f, x0, &ones, opts)
}

/// Like [`minimize`], but convergence is judged on `max |∇f_i · scale_i|`.
/// Useful when `x` are rescaled coordinates and the tolerance refers to the
/// gradient in the original ones.
pub fn minimize_scaled<F>(mut f: F, x0: Vec<f64>, scale: &[f64], opts: Options) -> Outcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(scale.len(), n, "one scale per coordinate");
    let norm_inf = |g: &[f64]| g.iter().zip(scale).fold(0.0f64, |m, (v, s)| m.max((v * s).abs()));
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut alpha = vec![0.0; opts.memory];

    let mut iter = 0;
    loop {
        let gnorm = norm_inf(&g);
        if gnorm <= opts.grad_tol {
            return Outcome { x, value: fx, grad_norm_inf: gnorm, iterations: iter, converged: true };
        }
        if iter >= opts.max_iter {
            return Outcome { x, value: fx, grad_norm_inf: gnorm, iterations: iter, converged: false };
        }
        iter += 1;

        // two-loop recursion
        dir.copy_from_slice(&g);
        for (k, (s, y, rho)) in history.iter().enumerate().rev() {
            alpha[k] = rho * dot(s, &dir);
            for (d, yi) in dir.iter_mut().zip(y) {
                *d -= alpha[k] * yi;
            }
        }
        let gamma = history
            .back()
            .map(|(s, y, _)| dot(s, y) / dot(y, y))
            .unwrap_or_else(|| 1.0 / dot(&g, &g).sqrt().max(1.0));
        for d in dir.iter_mut() {
            *d *= gamma;
        }
        for (k, (s, y, rho)) in history.iter().enumerate() {
            let beta = rho * dot(y, &dir);
            for (d, si) in dir.iter_mut().zip(s) {
                *d += (alpha[k] - beta) * si;
            }
        }
        for d in dir.iter_mut() {
            *d = -*d;
        }
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            // curvature information went stale: restart from steepest descent
            history.clear();
            let scale = 1.0 / dot(&g, &g).sqrt().max(1.0);
            for (d, gi) in dir.iter_mut().zip(&g) {
                *d = -gi * scale;
            }
            slope = dot(&g, &dir);
        }

        let mut step = 1.0;
        let mut accepted = false;
        let mut f_new = fx;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + step * dir[i];
            }
            f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || f_new >= fx && norm_inf(&g_new) >= norm_inf(&g) {
            let gnorm = norm_inf(&g);
            return Outcome { x, value: fx, grad_norm_inf: gnorm, iterations: iter, converged: gnorm <= opts.grad_tol };
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_new;
    }
}

/// Twice-differentiable objective for [`newton_cg`].
pub trait SmoothProblem {
    /// Objective at `x`, gradient into `grad`. Implementations may cache
    /// whatever [`SmoothProblem::hess_vec`] needs at the last evaluated point.
    fn value_grad(&mut self, x: &[f64], grad: &mut [f64]) -> f64;

    /// Hessian at the last point passed to `value_grad`, applied to `v`.
    fn hess_vec(&self, v: &[f64], out: &mut [f64]);

    /// Refreshes the CG preconditioner at the current point.
    fn update_preconditioner(&mut self) {}

    /// Applies an approximation of the inverse Hessian.
    fn precondition(&self, r: &[f64], out: &mut [f64]) {
        out.copy_from_slice(r);
    }
}

const CG_MAX_ITER: usize = 250;

/// Truncated Newton: each step solves `H d = −g` by preconditioned conjugate
/// gradients to a relative residual of `min(0.5, √‖g‖)`, then backtracks
/// along `d`.
/// Convergence is judged on `max |∇f_i · scale_i|` as in [`minimize_scaled`].
pub fn newton_cg<P: SmoothProblem>(problem: &mut P, x0: Vec<f64>, scale: &[f64], opts: Options) -> Outcome {
    let n = x0.len();
    assert_eq!(scale.len(), n, "one scale per coordinate");
    let norm_inf = |g: &[f64]| g.iter().zip(scale).fold(0.0f64, |m, (v, s)| m.max((v * s).abs()));
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = problem.value_grad(&x, &mut g);
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let (mut d, mut r, mut p, mut hp, mut zr) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);

    let mut iter = 0;
    loop {
        let gnorm = norm_inf(&g);
        if gnorm <= opts.grad_tol || iter >= opts.max_iter {
            return Outcome { x, value: fx, grad_norm_inf: gnorm, iterations: iter, converged: gnorm <= opts.grad_tol };
        }
        iter += 1;

        let g2 = dot(&g, &g).sqrt();
        let target = g2.sqrt().min(0.5) * g2;
        problem.update_preconditioner();
        d.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            r[i] = -g[i];
        }
        problem.precondition(&r, &mut zr);
        p.copy_from_slice(&zr);
        let mut rz = dot(&r, &zr);
        for _ in 0..CG_MAX_ITER {
            problem.hess_vec(&p, &mut hp);
            let php = dot(&p, &hp);
            if !(php > 0.0) {
                break;
            }
            let a = rz / php;
            for i in 0..n {
                d[i] += a * p[i];
                r[i] -= a * hp[i];
            }
            if dot(&r, &r).sqrt() <= target {
                break;
            }
            problem.precondition(&r, &mut zr);
            let rz_new = dot(&r, &zr);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = zr[i] + beta * p[i];
            }
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            for i in 0..n {
                d[i] = -g[i];
            }
            slope = -dot(&g, &g);
        }

        let mut step = 1.0;
        let mut accepted = false;
        let mut f_new = fx;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + step * d[i];
            }
            f_new = problem.value_grad(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // restore the cached state of the current point
            fx = problem.value_grad(&x, &mut g);
            let gnorm = norm_inf(&g);
            return Outcome { x, value: fx, grad_norm_inf: gnorm, iterations: iter, converged: gnorm <= opts.grad_tol };
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_new;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let out = minimize(
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
            },
            vec![-1.2, 1.0],
            Options { grad_tol: 1e-8, ..Options::default() },
        );
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
    }

    fn quartic(x: &[f64], g: &mut [f64]) -> f64 {
        let mut f = 0.0;
        for (i, (xi, gi)) in x.iter().zip(g.iter_mut()).enumerate() {
            let w = (i + 1) as f64;
            let u = xi - 1.0;
            f += 0.5 * w * u * u + 0.25 * u.powi(4);
            *gi = w * u + u.powi(3);
        }
        f
    }

    struct QuarticWithHessian {
        at: Vec<f64>,
    }

    impl SmoothProblem for QuarticWithHessian {
        fn value_grad(&mut self, x: &[f64], g: &mut [f64]) -> f64 {
            self.at = x.to_vec();
            quartic(x, g)
        }

        fn hess_vec(&self, v: &[f64], out: &mut [f64]) {
            for (i, o) in out.iter_mut().enumerate() {
                let u = self.at[i] - 1.0;
                *o = ((i + 1) as f64 + 3.0 * u * u) * v[i];
            }
        }
    }

    #[test]
    fn newton_cg_converges_in_few_steps() {
        let mut prob = QuarticWithHessian { at: Vec::new() };
        let out = newton_cg(&mut prob, vec![-3.0; 15], &[1.0; 15], Options { grad_tol: 1e-10, ..Options::default() });
        assert!(out.converged && out.iterations < 20, "{}", out.iterations);
        assert!(out.x.iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn quadratic_converges_quickly() {
        let out = minimize(
            |x, g| {
                let mut f = 0.0;
                for i in 0..x.len() {
                    let w = (i + 1) as f64;
                    g[i] = w * (x[i] - 1.0);
                    f += 0.5 * w * (x[i] - 1.0).powi(2);
                }
                f
            },
            vec![0.0; 20],
            Options::default(),
        );
        assert!(out.converged && out.iterations < 100);
    }
}
