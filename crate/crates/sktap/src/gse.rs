//! Ground-state energy of the field-plus-disorder functional at fixed
//! overlap: closed form, constructive solution of the matrix variational
//! problem, the limiting convex dual, and the finite-size Lagrange dual.
//!
//! Closed form: `sqrt(2) Tr sqrt(M^{1/2} Qt M^{1/2})` with
//! `M = h h^T / 2 + beta Qt beta`, equivalently `sqrt(2)` times the sum of
//! singular values of `M^{1/2} Qt^{1/2}`. The dual evaluates
//! `inf over Lambda >= sqrt(2) I` of
//! `h^T beta^{-1/2} (Lambda - sqrt(Lambda^2 - 2I)) beta^{-1/2} h / 4
//!  + Tr(Lambda beta^{1/2} Qt beta^{1/2})`,
//! and the two must agree; the pair is kept as a cross-check throughout the
//! test suite.

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::mcsim::split_seed;
use crate::opt::{bfgs_minimize, pattern_search_polish, BfgsOptions};
use crate::spectrum::SQRT2;
use crate::symmat::SymMatrix;

/// Arguments `(beta, h, Qt)` of the ground-state functional.
#[derive(Debug, Clone)]
pub struct GseInstance {
    beta: Vec<f64>,
    hmag: Vec<f64>,
    qt: SymMatrix,
}

impl GseInstance {
    pub fn new(beta: Vec<f64>, hmag: Vec<f64>, qt: SymMatrix) -> Result<Self> {
        let n = qt.dim();
        if beta.len() != n || hmag.len() != n {
            return Err(Error::invalid(format!(
                "expected {n} temperatures and field magnitudes, got {} and {}",
                beta.len(),
                hmag.len()
            )));
        }
        if beta.iter().any(|b| !b.is_finite() || *b < 0.0)
            || hmag.iter().any(|h| !h.is_finite() || *h < 0.0)
        {
            return Err(Error::invalid("beta and h must be finite and >= 0"));
        }
        if !qt.is_positive_definite() {
            return Err(Error::domain(format!(
                "Qt must be positive definite (min eigenvalue {:.3e})",
                qt.min_eig()
            )));
        }
        Ok(GseInstance { beta, hmag, qt })
    }

    pub fn dim(&self) -> usize {
        self.qt.dim()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn hmag(&self) -> &[f64] {
        &self.hmag
    }

    pub fn qt(&self) -> &SymMatrix {
        &self.qt
    }
}

fn frob_inner(a: &SymMatrix, b: &SymMatrix) -> f64 {
    let (ma, mb) = (a.as_dmatrix(), b.as_dmatrix());
    let mut acc = 0.0;
    for i in 0..a.dim() {
        for j in 0..a.dim() {
            acc += ma[(i, j)] * mb[(i, j)];
        }
    }
    acc
}

/// Closed-form ground-state value from raw parts. Accepts any positive
/// semi-definite `qt` (the formula is continuous there), which the
/// variational principle needs at the `Qt = 0` corner.
pub fn gse_value(beta: &[f64], hmag: &[f64], qt: &SymMatrix) -> Result<f64> {
    let n = qt.dim();
    if beta.len() != n || hmag.len() != n {
        return Err(Error::invalid("dimension mismatch in GSE arguments"));
    }
    // M = h h^T / 2 + beta Qt beta
    let m = SymMatrix::from_fn(n, |i, j| {
        0.5 * hmag[i] * hmag[j] + beta[i] * qt.get(i, j) * beta[j]
    })?;
    let m_half = m.sqrt_psd();
    let inner = qt.conjugate(&m_half);
    Ok(SQRT2 * inner.sqrt_psd().trace())
}

/// Closed-form ground-state energy
/// `sqrt(2) Tr sqrt(M^{1/2} Qt M^{1/2})`, `M = h h^T/2 + beta Qt beta`.
pub fn gse_closed(inst: &GseInstance) -> Result<f64> {
    gse_value(&inst.beta, &inst.hmag, &inst.qt)
}

/// Scalar case: `sqrt(2 beta^2 qt^2 + h^2 qt)`.
pub fn gse_1d(beta: f64, h: f64, qt: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&qt) {
        return Err(Error::invalid(format!("qt must lie in [0, 1], got {qt}")));
    }
    Ok((2.0 * beta * beta * qt * qt + h * h * qt).sqrt())
}

/// Shared pieces of the limiting dual: `A = beta^{-1/2} h h^T beta^{-1/2}/4`
/// and `B = beta^{1/2} Qt beta^{1/2}`.
fn dual_parts(inst: &GseInstance) -> Result<(SymMatrix, SymMatrix)> {
    let n = inst.dim();
    if inst.beta.iter().any(|&b| b <= 0.0) {
        return Err(Error::invalid(
            "the dual requires strictly positive beta (beta^{-1/2} is needed); \
             route zero-beta instances through gse_closed",
        ));
    }
    let a = SymMatrix::from_fn(n, |i, j| {
        0.25 * inst.hmag[i] * inst.hmag[j] / (inst.beta[i] * inst.beta[j]).sqrt()
    })?;
    let b = SymMatrix::from_fn(n, |i, j| {
        (inst.beta[i] * inst.beta[j]).sqrt() * inst.qt.get(i, j)
    })?;
    Ok((a, b))
}

fn sqrt_lambda_sq_minus_2(l: f64) -> f64 {
    (l * l - 2.0).max(0.0).sqrt()
}

/// Dual objective at `Lambda = sqrt(2) I + L^T L`.
fn dual_objective(l_flat: &[f64], a: &SymMatrix, b: &SymMatrix) -> f64 {
    let n = a.dim();
    let l = DMatrix::from_row_slice(n, n, l_flat);
    let lam_m = l.transpose() * &l + DMatrix::identity(n, n) * SQRT2;
    let lam = SymMatrix::from_dmatrix(lam_m).expect("Lambda is a valid symmetric matrix");
    let root = lam
        .matrix_function(sqrt_lambda_sq_minus_2)
        .expect("clamped sqrt is total");
    frob_inner(&lam.sub(&root), a) + frob_inner(&lam, b)
}

fn dual_gradient(l_flat: &[f64], a: &SymMatrix, b: &SymMatrix) -> Vec<f64> {
    let n = a.dim();
    let l = DMatrix::from_row_slice(n, n, l_flat);
    let lam_m = l.transpose() * &l + DMatrix::identity(n, n) * SQRT2;
    let lam = SymMatrix::from_dmatrix(lam_m).expect("Lambda is valid");
    // grad wrt Lambda: A + B - L_f(Lambda)[A] with f = sqrt(l^2 - 2); the
    // derivative is clamped near the branch point, the line search absorbs
    // the resulting inexactness there.
    let fprime = |x: f64| x / sqrt_lambda_sq_minus_2(x).max(1e-8);
    let frechet = lam
        .matrix_function_frechet(a, sqrt_lambda_sq_minus_2, fprime)
        .expect("clamped divided differences are total");
    let g_lam = a.add(b).sub(&frechet);
    // chain rule through Lambda = sqrt(2) I + L^T L
    let gl = &l * g_lam.as_dmatrix() * 2.0;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(gl[(i, j)]);
        }
    }
    out
}

/// Numerical minimization of the limiting dual over `Lambda >= sqrt(2) I`,
/// parameterized as `Lambda = sqrt(2) I + L^T L` with quasi-Newton descent
/// and deterministic random restarts. Returns a value within `tol` of the
/// infimum for well-scaled instances (the objective is convex in `Lambda`).
pub fn gse_dual_numeric(inst: &GseInstance, tol: f64, seed: u64) -> Result<f64> {
    let (a, b) = dual_parts(inst)?;
    let n = inst.dim();
    let opts = BfgsOptions {
        max_iters: 600,
        grad_tol: (tol * 1e-3).max(1e-12),
        f_tol: 1e-15,
    };
    let mut best = f64::INFINITY;
    for restart in 0..8u64 {
        let mut l0 = vec![0.0; n * n];
        if restart == 0 {
            for i in 0..n {
                l0[i * n + i] = 0.7;
            }
        } else {
            let mut rng = ChaCha12Rng::seed_from_u64(split_seed(seed, restart));
            for v in l0.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        let out = bfgs_minimize(
            &l0,
            |x| dual_objective(x, &a, &b),
            |x| dual_gradient(x, &a, &b),
            &opts,
        );
        let (_, polished) = pattern_search_polish(
            &out.x,
            |x| dual_objective(x, &a, &b),
            0.05,
            1e-11,
            400,
        );
        if polished < best {
            best = polished;
        }
    }
    if !best.is_finite() {
        return Err(Error::numerical(format!(
            "dual minimization stalled; best value {best}"
        )));
    }
    Ok(best)
}

/// Constructive solution of the variational problem in the `X` variables:
/// `X* = (2A + B)^{-1/2} U B^{1/2}` with `U = T S^T` from the SVD
/// `B^{1/2} (2A + B)^{1/2} = S Sigma T^T`. Plugging `X*` into
/// `sqrt(2) Tr(XA) + Tr((X + X^{-1}) B)/sqrt(2)` reproduces the closed form.
pub fn gse_critical_x(inst: &GseInstance) -> Result<SymMatrix> {
    let (a, b) = dual_parts(inst)?;
    if !b.is_positive_definite() {
        return Err(Error::domain(format!(
            "beta^{{1/2}} Qt beta^{{1/2}} is singular (min eigenvalue {:.3e})",
            b.min_eig()
        )));
    }
    let two_a_b = a.scale(2.0).add(&b);
    let b_half = b.sqrt_psd();
    let tab_half = two_a_b.sqrt_psd();
    let tab_invhalf = two_a_b.invsqrt_pd()?;
    let product = b_half.as_dmatrix() * tab_half.as_dmatrix();
    let svd = product.svd(true, true);
    let s = svd.u.as_ref().expect("svd with u");
    let t_t = svd.v_t.as_ref().expect("svd with v_t");
    let u = t_t.transpose() * s.transpose();
    let x = tab_invhalf.as_dmatrix() * u * b_half.as_dmatrix();
    let asym = (&x - x.transpose()).abs().max();
    if asym > 1e-10 * (1.0 + x.abs().max()) {
        return Err(Error::numerical(format!(
            "critical point lost symmetry: asymmetry {asym:.3e}"
        )));
    }
    SymMatrix::from_dmatrix(x)
}

/// Value of the `X`-form objective `sqrt(2) Tr(XA) + Tr((X + X^{-1})B)/sqrt(2)`.
pub fn gse_x_objective(inst: &GseInstance, x: &SymMatrix) -> Result<f64> {
    let (a, b) = dual_parts(inst)?;
    let x_inv = x.inverse_pd()?;
    Ok(SQRT2 * frob_inner(x, &a) + frob_inner(&x.add(&x_inv), &b) / SQRT2)
}

/// Diagnostics of the finite-size dual minimization.
#[derive(Debug, Clone)]
pub struct FiniteDualReport {
    pub value: f64,
    /// Pole location: the dual is minimized over `Lambda > barrier * I`.
    pub barrier: f64,
    /// Whether the top pole exceeded `sqrt(2)`, forcing a barrier larger
    /// than the limiting cone would use.
    pub barrier_above_sqrt2: bool,
}

/// Finite-size Lagrange dual
/// `inf_Lambda sum_i h~_i^T beta^{-1/2} (Lambda - theta_i I)^{-1} beta^{-1/2} h~_i / 4
///  + Tr(Lambda beta^{1/2} Qt beta^{1/2})`
/// over `Lambda > (max_i theta_i) I`.
///
/// This upper-bounds the finite-size constrained ground state by weak
/// duality and converges to `gse_closed` as `N` grows.
pub fn finite_n_gs_dual(
    thetas: &[f64],
    hdirs: &DMatrix<f64>,
    beta: &[f64],
    qt: &SymMatrix,
    tol: f64,
    seed: u64,
) -> Result<f64> {
    finite_n_gs_dual_detailed(thetas, hdirs, beta, qt, tol, seed).map(|r| r.value)
}

pub fn finite_n_gs_dual_detailed(
    thetas: &[f64],
    hdirs: &DMatrix<f64>,
    beta: &[f64],
    qt: &SymMatrix,
    tol: f64,
    seed: u64,
) -> Result<FiniteDualReport> {
    let n = qt.dim();
    let sites = thetas.len();
    if sites == 0 {
        return Err(Error::invalid("need at least one energy level"));
    }
    if hdirs.nrows() != n || hdirs.ncols() != sites || beta.len() != n {
        return Err(Error::invalid(
            "field matrix must be n x N with matching beta and Qt dimensions",
        ));
    }
    if beta.iter().any(|&b| b <= 0.0) {
        return Err(Error::invalid("the finite-size dual requires beta > 0 entrywise"));
    }
    if !qt.is_positive_definite() {
        return Err(Error::domain("Qt must be positive definite"));
    }
    let field_norm = hdirs.norm();
    if field_norm == 0.0 {
        return Err(Error::Domain(
            "all external fields vanish: the finite-size dual is degenerate at h = 0; \
             evaluate gse_closed with h = 0 instead"
                .into(),
        ));
    }
    let barrier = thetas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let b = SymMatrix::from_fn(n, |i, j| (beta[i] * beta[j]).sqrt() * qt.get(i, j))?;
    // W = beta^{-1/2} hdirs, columns w_i
    let w = {
        let mut w = hdirs.clone();
        for k in 0..n {
            let s = 1.0 / beta[k].sqrt();
            for i in 0..sites {
                w[(k, i)] *= s;
            }
        }
        w
    };

    let objective = |l_flat: &[f64]| -> f64 {
        let l = DMatrix::from_row_slice(n, n, l_flat);
        let lam_m = l.transpose() * &l + DMatrix::identity(n, n) * barrier;
        let lam = SymMatrix::from_dmatrix(lam_m).expect("Lambda valid");
        let e = lam.eigen();
        let wt = e.vectors().transpose() * &w;
        let mut acc = 0.0;
        for a_idx in 0..n {
            let d = e.values()[a_idx];
            for i in 0..sites {
                let num = wt[(a_idx, i)] * wt[(a_idx, i)];
                let den = d - thetas[i];
                if den <= 0.0 {
                    if num > 1e-300 {
                        return f64::INFINITY;
                    }
                } else {
                    acc += num / den;
                }
            }
        }
        0.25 * acc + frob_inner(&lam, &b)
    };
    let gradient = |l_flat: &[f64]| -> Vec<f64> {
        let l = DMatrix::from_row_slice(n, n, l_flat);
        let lam_m = l.transpose() * &l + DMatrix::identity(n, n) * barrier;
        let lam = SymMatrix::from_dmatrix(lam_m).expect("Lambda valid");
        let e = lam.eigen();
        let wt = e.vectors().transpose() * &w;
        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in 0..sites {
            let mut r = vec![0.0; n];
            for a_idx in 0..n {
                let den = (e.values()[a_idx] - thetas[i]).max(1e-12);
                r[a_idx] = wt[(a_idx, i)] / den;
            }
            for a_idx in 0..n {
                for b_idx in 0..n {
                    m[(a_idx, b_idx)] += r[a_idx] * r[b_idx];
                }
            }
        }
        let g_lam_rot = e.vectors() * m * e.vectors().transpose();
        let g_lam = b.as_dmatrix() - g_lam_rot * 0.25;
        let gl = &l * (&g_lam + g_lam.transpose());
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(gl[(i, j)]);
            }
        }
        out
    };

    let opts = BfgsOptions {
        max_iters: 800,
        grad_tol: (tol * 1e-3).max(1e-12),
        f_tol: 1e-15,
    };
    let mut best = f64::INFINITY;
    for restart in 0..6u64 {
        let mut l0 = vec![0.0; n * n];
        if restart == 0 {
            for i in 0..n {
                l0[i * n + i] = 0.5;
            }
        } else {
            let mut rng = ChaCha12Rng::seed_from_u64(split_seed(seed, 1000 + restart));
            for v in l0.iter_mut() {
                *v = rng.gen_range(-0.8..0.8);
            }
        }
        let out = bfgs_minimize(&l0, objective, gradient, &opts);
        let (_, polished) = pattern_search_polish(&out.x, objective, 0.02, 1e-11, 400);
        if polished < best {
            best = polished;
        }
    }
    if !best.is_finite() {
        return Err(Error::numerical(
            "finite-size dual minimization failed to find a finite value",
        ));
    }
    Ok(FiniteDualReport {
        value: best,
        barrier,
        barrier_above_sqrt2: barrier > SQRT2 + 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::deterministic_spectrum;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn random_pd_qt(n: usize, rng: &mut impl Rng) -> SymMatrix {
        let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.6..0.6f64));
        let gram = &g * g.transpose() + DMatrix::identity(n, n) * 0.4;
        let d: Vec<f64> = (0..n).map(|i| gram[(i, i)].sqrt()).collect();
        let scale = rng.gen_range(0.3..1.0);
        SymMatrix::from_fn(n, |i, j| scale * gram[(i, j)] / (d[i] * d[j])).unwrap()
    }

    #[test]
    fn closed_form_scalar_cases() {
        let inst = GseInstance::new(vec![1.0], vec![0.0], SymMatrix::identity(1)).unwrap();
        assert_abs_diff_eq!(gse_closed(&inst).unwrap(), SQRT2, epsilon = 1e-12);

        // decoupled replicas
        let b = 0.37;
        let inst = GseInstance::new(vec![b, b], vec![0.0, 0.0], SymMatrix::identity(2)).unwrap();
        assert_abs_diff_eq!(gse_closed(&inst).unwrap(), 2.0 * SQRT2 * b, epsilon = 1e-12);
    }

    #[test]
    fn scalar_reduction_matches_gse_1d() {
        for &beta in &[0.0, 0.4, 1.0, 1.7] {
            for &h in &[0.0, 0.3, 1.2] {
                for &qt in &[0.2, 0.5, 1.0] {
                    let inst = GseInstance::new(
                        vec![beta],
                        vec![h],
                        SymMatrix::from_rows(1, &[qt]).unwrap(),
                    )
                    .unwrap();
                    assert_abs_diff_eq!(
                        gse_closed(&inst).unwrap(),
                        gse_1d(beta, h, qt).unwrap(),
                        epsilon = 1e-12
                    );
                }
            }
        }
        assert_abs_diff_eq!(gse_1d(1.0, 0.0, 1.0).unwrap(), SQRT2, epsilon = 1e-15);
        assert_abs_diff_eq!(gse_1d(0.0, 1.0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert!(gse_1d(1.0, 0.0, 1.2).is_err());
    }

    #[test]
    fn gse_1d_matches_golden_section_dual() {
        // 1-D dual inf over lambda >= sqrt(2) of
        //   h^2/(4 beta) (lambda - sqrt(lambda^2-2)) + lambda beta qt
        let (beta, h, qt) = (0.7, 0.3, 0.5);
        let obj = |lam: f64| {
            0.25 * h * h / beta * (lam - (lam * lam - 2.0).max(0.0).sqrt()) + lam * beta * qt
        };
        let (mut lo, mut hi) = (SQRT2, SQRT2 + 50.0);
        let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
        for _ in 0..300 {
            let d = (hi - lo) / phi;
            let (x1, x2) = (hi - d, lo + d);
            if obj(x1) < obj(x2) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        let oracle = obj(0.5 * (lo + hi));
        assert_abs_diff_eq!(gse_1d(beta, h, qt).unwrap(), oracle, epsilon = 1e-9);
    }

    #[test]
    fn dual_trivial_h_zero() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for n in 1..=3usize {
            let qt = random_pd_qt(n, &mut rng);
            let beta: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.2)).collect();
            let inst = GseInstance::new(beta.clone(), vec![0.0; n], qt.clone()).unwrap();
            let b = SymMatrix::from_fn(n, |i, j| (beta[i] * beta[j]).sqrt() * qt.get(i, j)).unwrap();
            let expect = SQRT2 * b.trace();
            assert_abs_diff_eq!(gse_closed(&inst).unwrap(), expect, epsilon = 1e-10);
            let dual = gse_dual_numeric(&inst, 1e-8, 3).unwrap();
            assert!((dual - expect).abs() <= 1e-6 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn dual_matches_1d_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..10 {
            let beta = rng.gen_range(0.1..1.5);
            let h = rng.gen_range(0.0..1.5);
            let qt = rng.gen_range(0.1..1.0);
            let inst =
                GseInstance::new(vec![beta], vec![h], SymMatrix::from_rows(1, &[qt]).unwrap())
                    .unwrap();
            let dual = gse_dual_numeric(&inst, 1e-8, 11).unwrap();
            let exact = gse_1d(beta, h, qt).unwrap();
            assert!(
                (dual - exact).abs() <= 1e-6 * (1.0 + exact),
                "dual {dual} vs closed {exact} at beta={beta}, h={h}, qt={qt}"
            );
        }
    }

    #[test]
    fn dual_matches_closed_form_n3() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for trial in 0..5 {
            let qt = random_pd_qt(3, &mut rng);
            let beta: Vec<f64> = (0..3).map(|_| rng.gen_range(0.1..1.5)).collect();
            let h: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.5)).collect();
            let inst = GseInstance::new(beta, h, qt).unwrap();
            let closed = gse_closed(&inst).unwrap();
            let dual = gse_dual_numeric(&inst, 1e-8, 17).unwrap();
            assert!(
                (closed - dual).abs() <= 1e-5 * (1.0 + closed.abs()),
                "trial {trial}: closed {closed} vs dual {dual}"
            );
        }
    }

    #[test]
    fn critical_x_properties() {
        // h = 0: X* = I
        let inst =
            GseInstance::new(vec![0.5, 0.8], vec![0.0, 0.0], SymMatrix::identity(2)).unwrap();
        let x = gse_critical_x(&inst).unwrap();
        assert!(x.sub(&SymMatrix::identity(2)).max_abs() <= 1e-10);

        // n=1 scalar: X = sqrt(B/(2A+B))
        let (beta, h, qt) = (0.9, 0.6, 0.7);
        let inst =
            GseInstance::new(vec![beta], vec![h], SymMatrix::from_rows(1, &[qt]).unwrap()).unwrap();
        let a = 0.25 * h * h / beta;
        let b = beta * qt;
        let x = gse_critical_x(&inst).unwrap();
        assert_abs_diff_eq!(x.get(0, 0), (b / (2.0 * a + b)).sqrt(), epsilon = 1e-10);

        // random n=2: objective at X* equals the closed form; X* feasible
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for _ in 0..10 {
            let qt = random_pd_qt(2, &mut rng);
            let beta: Vec<f64> = (0..2).map(|_| rng.gen_range(0.1..1.4)).collect();
            let h: Vec<f64> = (0..2).map(|_| rng.gen_range(0.0..1.4)).collect();
            let inst = GseInstance::new(beta, h, qt).unwrap();
            let x = gse_critical_x(&inst).unwrap();
            assert!(x.min_eig() > 0.0);
            assert!(x.max_eig() <= 1.0 + 1e-10, "max eig {}", x.max_eig());
            let obj = gse_x_objective(&inst, &x).unwrap();
            let closed = gse_closed(&inst).unwrap();
            assert!(
                (obj - closed).abs() <= 1e-9 * (1.0 + closed.abs()),
                "objective {obj} vs closed {closed}"
            );
        }
    }

    #[test]
    fn lipschitz_and_monotone() {
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        for _ in 0..40 {
            let n = rng.gen_range(1..4);
            let qt = random_pd_qt(n, &mut rng);
            let beta1: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.5)).collect();
            let h1: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.5)).collect();
            let beta2: Vec<f64> = beta1
                .iter()
                .map(|b| (b + rng.gen_range(-0.2..0.2f64)).max(0.0))
                .collect();
            let h2: Vec<f64> = h1
                .iter()
                .map(|h| (h + rng.gen_range(-0.2..0.2f64)).max(0.0))
                .collect();
            let v1 = gse_value(&beta1, &h1, &qt).unwrap();
            let v2 = gse_value(&beta2, &h2, &qt).unwrap();
            let db = beta1
                .iter()
                .zip(&beta2)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let dh = h1
                .iter()
                .zip(&h2)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(
                (v1 - v2).abs() <= SQRT2 * db + dh + 1e-9,
                "Lipschitz violated: |{v1} - {v2}| > sqrt2*{db} + {dh}"
            );

            // monotone in each h_k and beta_k
            let k = rng.gen_range(0..n);
            let mut h_up = h1.clone();
            h_up[k] += 0.3;
            assert!(gse_value(&beta1, &h_up, &qt).unwrap() >= v1 - 1e-10);
            let mut b_up = beta1.clone();
            b_up[k] += 0.3;
            assert!(gse_value(&b_up, &h1, &qt).unwrap() >= v1 - 1e-10);
        }
    }

    #[test]
    fn finite_dual_one_mode() {
        // single level at sqrt(2) with a small field: value ~ sqrt(2) beta qt
        let thetas = [SQRT2];
        let h_small = 1e-4;
        let hdirs = DMatrix::from_row_slice(1, 1, &[h_small]);
        let qt = SymMatrix::from_rows(1, &[0.6]).unwrap();
        let v = finite_n_gs_dual(&thetas, &hdirs, &[0.8], &qt, 1e-9, 1).unwrap();
        let base = SQRT2 * 0.8 * 0.6;
        assert!(v >= base - 1e-12);
        assert!(v - base <= 0.01, "one-mode value {v} vs base {base}");
    }

    #[test]
    fn finite_dual_degenerate_field() {
        let thetas = deterministic_spectrum(10);
        let hdirs = DMatrix::zeros(1, 10);
        let qt = SymMatrix::from_rows(1, &[0.5]).unwrap();
        let err = finite_n_gs_dual(&thetas, &hdirs, &[0.7], &qt, 1e-8, 1);
        match err {
            Err(Error::Domain(msg)) => assert!(msg.contains("gse_closed")),
            other => panic!("expected degenerate-dual domain error, got {other:?}"),
        }
    }

    #[test]
    fn finite_dual_approaches_limit() {
        // moderate size, one sampled direction: the dual should already be
        // within a few percent of the closed form
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let n_sites = 600;
        let thetas = deterministic_spectrum(n_sites);
        let mut u: Vec<f64> = (0..n_sites).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        u.iter_mut().for_each(|x| *x /= norm);
        let h = [0.9, 0.5];
        let hdirs = DMatrix::from_fn(2, n_sites, |k, i| h[k] * u[i]);
        let qt = SymMatrix::from_rows(2, &[1.0, 0.4, 0.4, 1.0]).unwrap();
        let beta = [0.7, 1.1];
        let dual = finite_n_gs_dual(&thetas, &hdirs, &beta, &qt, 1e-9, 7).unwrap();
        let inst = GseInstance::new(beta.to_vec(), h.to_vec(), qt).unwrap();
        let closed = gse_closed(&inst).unwrap();
        assert!(
            (dual - closed).abs() <= 0.1,
            "finite dual {dual} vs limit {closed}"
        );
    }
}
