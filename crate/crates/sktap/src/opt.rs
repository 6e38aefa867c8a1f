//! Minimal dense quasi-Newton machinery shared by the dual solvers and the
//! variational principle: BFGS with Armijo backtracking plus a pattern-search
//! polish for objectives with directional kinks at cone boundaries.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct BfgsOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub f_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            max_iters: 400,
            grad_tol: 1e-10,
            f_tol: 1e-14,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iters: usize,
    pub converged: bool,
}

/// BFGS minimization with backtracking line search. The objective may return
/// `+inf` outside its domain; the line search treats that as a rejected step.
pub fn bfgs_minimize(
    x0: &[f64],
    mut f: impl FnMut(&[f64]) -> f64,
    mut grad: impl FnMut(&[f64]) -> Vec<f64>,
    opts: &BfgsOptions,
) -> BfgsOutcome {
    let n = x0.len();
    let mut x = DVector::from_row_slice(x0);
    let mut fx = f(x.as_slice());
    let mut g = DVector::from_row_slice(&grad(x.as_slice()));
    let mut h = DMatrix::<f64>::identity(n, n);
    let c1 = 1e-4;
    let mut iters = 0;
    let mut converged = false;

    while iters < opts.max_iters {
        iters += 1;
        if g.norm() <= opts.grad_tol {
            converged = true;
            break;
        }
        let mut dir = -(&h * &g);
        if dir.dot(&g) >= 0.0 {
            h = DMatrix::identity(n, n);
            dir = -g.clone();
        }
        // Backtracking Armijo search; steps producing inf/NaN are rejected.
        let slope = dir.dot(&g);
        let mut t = 1.0;
        let mut accepted = false;
        let mut x_new = x.clone();
        let mut f_new = fx;
        for _ in 0..60 {
            x_new = &x + &dir * t;
            f_new = f(x_new.as_slice());
            if f_new.is_finite() && f_new <= fx + c1 * t * slope {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // try steepest descent once before giving up
            let sd = -g.clone();
            let mut t2 = 1.0;
            for _ in 0..60 {
                x_new = &x + &sd * t2;
                f_new = f(x_new.as_slice());
                if f_new.is_finite() && f_new < fx {
                    accepted = true;
                    h = DMatrix::identity(n, n);
                    break;
                }
                t2 *= 0.5;
            }
            if !accepted {
                converged = true;
                break;
            }
        }
        let g_new = DVector::from_row_slice(&grad(x_new.as_slice()));
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let i_mat = DMatrix::<f64>::identity(n, n);
            let left = &i_mat - (&s * y.transpose()) * rho;
            let right = &i_mat - (&y * s.transpose()) * rho;
            h = &left * h * &right + (&s * s.transpose()) * rho;
        }
        let df = fx - f_new;
        x = x_new;
        g = g_new;
        fx = f_new;
        if df.abs() <= opts.f_tol * (1.0 + fx.abs()) && g.norm() <= 1e3 * opts.grad_tol {
            converged = true;
            break;
        }
    }
    BfgsOutcome {
        x: x.as_slice().to_vec(),
        value: fx,
        iters,
        converged,
    }
}

/// Deterministic pattern-search polish over the coordinate directions,
/// halving the radius whenever no axis move improves the value. Handles the
/// `|x|`-type kinks that the cone-boundary parameterizations produce.
pub fn pattern_search_polish(
    x0: &[f64],
    mut f: impl FnMut(&[f64]) -> f64,
    radius0: f64,
    min_radius: f64,
    max_rounds: usize,
) -> (Vec<f64>, f64) {
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut radius = radius0;
    let mut rounds = 0;
    while radius > min_radius && rounds < max_rounds {
        rounds += 1;
        let mut improved = false;
        for i in 0..x.len() {
            for sgn in [1.0, -1.0] {
                let mut cand = x.clone();
                cand[i] += sgn * radius;
                let fc = f(&cand);
                if fc.is_finite() && fc < fx {
                    x = cand;
                    fx = fc;
                    improved = true;
                }
            }
        }
        if !improved {
            radius *= 0.5;
        }
    }
    (x, fx)
}

/// Central finite-difference gradient.
pub fn fd_gradient(x: &[f64], mut f: impl FnMut(&[f64]) -> f64, h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let xi = x[i];
        xp[i] = xi + h;
        let fp = f(&xp);
        xp[i] = xi - h;
        let fm = f(&xp);
        xp[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}
