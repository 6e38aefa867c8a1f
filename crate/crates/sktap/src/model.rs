//! Model parameters and the TAP-side functionals: Plefka and
//! high-temperature set membership, annealed free energy, Onsager and
//! entropy terms, the second-moment functional `V(A)`, and the effective
//! constraint/temperature identities that connect them.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mcsim::DisorderSample;
use crate::spectrum::BinnedSpectrum;
use crate::symmat::{SymMatrix, PD_REL_TOL};

pub const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Scale-aware PSD tolerance: eigenvalues above `-tol` count as nonnegative.
fn psd_tol(norm: f64) -> f64 {
    PD_REL_TOL * 1.0f64.max(norm)
}

/// Parameters `(beta, h, Q)` of the replica-constrained model: `n` replicas,
/// constraint matrix `Q` (unit diagonal, positive definite), inverse
/// temperatures `beta_k >= 0` and external-field magnitudes `h_k >= 0` with
/// the fields sharing one unit direction.
#[derive(Debug, Clone)]
pub struct ModelParams {
    n: usize,
    q: SymMatrix,
    beta: Vec<f64>,
    hmag: Vec<f64>,
}

impl ModelParams {
    pub fn new(q: SymMatrix, beta: Vec<f64>, hmag: Vec<f64>) -> Result<Self> {
        let n = q.dim();
        if beta.len() != n || hmag.len() != n {
            return Err(Error::invalid(format!(
                "expected {n} inverse temperatures and field magnitudes, got {} and {}",
                beta.len(),
                hmag.len()
            )));
        }
        for k in 0..n {
            if (q.get(k, k) - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!(
                    "constraint matrix must have unit diagonal; Q[{k}][{k}] = {}",
                    q.get(k, k)
                )));
            }
        }
        if !q.is_positive_definite() {
            // Without positive definiteness the constrained free energy is
            // degenerate (-inf), so the parameters are rejected outright.
            return Err(Error::invalid(format!(
                "constraint matrix must be positive definite (min eigenvalue {:.3e}); \
                 the constrained free energy is -inf otherwise",
                q.min_eig()
            )));
        }
        if beta.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::invalid("inverse temperatures must be finite and >= 0"));
        }
        if hmag.iter().any(|h| !h.is_finite() || *h < 0.0) {
            return Err(Error::invalid("field magnitudes must be finite and >= 0"));
        }
        Ok(ModelParams { n, q, beta, hmag })
    }

    pub fn replicas(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> &SymMatrix {
        &self.q
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn hmag(&self) -> &[f64] {
        &self.hmag
    }

    /// `diag(sqrt(beta)) A diag(sqrt(beta))`.
    pub fn beta_sandwich(&self, a: &SymMatrix) -> SymMatrix {
        let sqrt_beta: Vec<f64> = self.beta.iter().map(|b| b.sqrt()).collect();
        SymMatrix::from_fn(self.n, |i, j| sqrt_beta[i] * a.get(i, j) * sqrt_beta[j])
            .expect("sandwich of valid matrix is valid")
    }
}

/// Candidate overlap matrix for the low-dimensional variational principle.
/// The Loewner bounds `0 <= Qt <= Q` are checked by each consumer.
#[derive(Debug, Clone)]
pub struct OverlapMatrix(pub SymMatrix);

impl OverlapMatrix {
    pub fn inner(&self) -> &SymMatrix {
        &self.0
    }
}

/// A set of `n` magnetization row vectors of length `N`.
#[derive(Debug, Clone)]
pub struct Magnetization {
    rows: DMatrix<f64>,
}

impl Magnetization {
    pub fn new(rows: DMatrix<f64>) -> Result<Self> {
        if rows.nrows() == 0 || rows.ncols() == 0 {
            return Err(Error::invalid("magnetization must be a nonempty n x N matrix"));
        }
        for k in 0..rows.nrows() {
            let norm = rows.row(k).norm();
            if norm > 1.0 + 1e-10 {
                return Err(Error::invalid(format!(
                    "magnetization row {k} has norm {norm} > 1"
                )));
            }
        }
        Ok(Magnetization { rows })
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn replicas(&self) -> usize {
        self.rows.nrows()
    }

    pub fn sites(&self) -> usize {
        self.rows.ncols()
    }

    pub fn row_norm_sq(&self, k: usize) -> f64 {
        self.rows.row(k).norm_squared()
    }

    /// Overlap matrix `m m^T`.
    pub fn overlap(&self) -> SymMatrix {
        SymMatrix::from_dmatrix(&self.rows * self.rows.transpose())
            .expect("overlap of valid magnetization is valid")
    }
}

/// Spectral norm of `beta^{1/2} (Q - Qt) beta^{1/2}`, the quantity bounded by
/// `1/sqrt(2)` in the Plefka condition.
pub fn plefka_norm(p: &ModelParams, qt: &SymMatrix) -> Result<f64> {
    if qt.dim() != p.n {
        return Err(Error::invalid(format!(
            "overlap matrix dim {} does not match replica count {}",
            qt.dim(),
            p.n
        )));
    }
    Ok(p.beta_sandwich(&p.q.sub(qt)).spectral_norm())
}

/// Membership in the (delta-strengthened) Plefka set: `Qt >= 0`, `Qt < Q`
/// and `|beta^{1/2} (Q - Qt) beta^{1/2}|_2 <= 1/sqrt(2) - delta`. The norm
/// comparison carries the same `1e-12` band as the Loewner tests so exact
/// boundary members survive round-off.
pub fn plefka_member(p: &ModelParams, qt: &SymMatrix, delta: f64) -> Result<bool> {
    let norm = plefka_norm(p, qt)?;
    let psd = qt.min_eig() >= -psd_tol(qt.spectral_norm());
    let below_q = p.q.sub(qt).is_positive_definite();
    Ok(psd && below_q && norm <= INV_SQRT2 - delta + psd_tol(norm))
}

/// `|beta^{1/2} Q beta^{1/2}|_2`, cross-checked against the eigenvalues of
/// `Q^{1/2} beta Q^{1/2}` which must agree.
pub fn ht_norm(p: &ModelParams) -> f64 {
    let bqb = p.beta_sandwich(&p.q);
    let norm = bqb.spectral_norm();

    let qsqrt = p.q.sqrt_psd();
    let beta_diag = SymMatrix::from_diagonal(p.beta()).expect("diagonal");
    let qbq = beta_diag.conjugate(&qsqrt);
    let evals_a = bqb.eigenvalues();
    let evals_b = qbq.eigenvalues();
    let max_dev = evals_a
        .iter()
        .zip(evals_b)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(
        max_dev <= 1e-10 * 1.0f64.max(norm),
        "eigenvalue sets of the two high-temperature forms diverged: {max_dev:.3e}"
    );
    norm
}

/// High-temperature membership: `ht_norm <= 1/sqrt(2)` (with the `1e-12`
/// boundary band).
pub fn ht_member(p: &ModelParams) -> bool {
    let norm = ht_norm(p);
    norm <= INV_SQRT2 + psd_tol(norm)
}

/// Annealed free energy without external field:
/// `beta^T Q^{⊙2} beta / 2 + log|Q| / 2`.
pub fn annealed_fe(p: &ModelParams) -> Result<f64> {
    let qsq = p.q.hadamard_square();
    Ok(0.5 * qsq.quad_form(&p.beta) + 0.5 * p.q.logdet()?)
}

/// Onsager correction `beta^T (Q - Qt)^{⊙2} beta / 2`.
pub fn onsager(p: &ModelParams, qt: &SymMatrix) -> f64 {
    0.5 * p.q.sub(qt).hadamard_square().quad_form(&p.beta)
}

/// Entropy term `log|Q - Qt| / 2`; requires `Qt < Q`.
pub fn entropy(p: &ModelParams, qt: &SymMatrix) -> Result<f64> {
    let diff = p.q.sub(qt);
    if !diff.is_positive_definite() {
        return Err(Error::domain(format!(
            "entropy requires Qt strictly below Q (min eigenvalue of Q - Qt is {:.3e})",
            diff.min_eig()
        )));
    }
    Ok(0.5 * diff.logdet()?)
}

/// Second-moment functional
/// `V(A) = beta^T A^{⊙2} beta + log det [[Q, A], [A^T, Q]] / 2`.
///
/// Fails with a domain error (the value would be `-inf`) when the block
/// matrix has an eigenvalue at or below the PSD tolerance.
pub fn v_func(p: &ModelParams, a: &SymMatrix) -> Result<f64> {
    let n = p.n;
    if a.dim() != n {
        return Err(Error::invalid(format!(
            "overlap block dim {} does not match replica count {}",
            a.dim(),
            n
        )));
    }
    let block = SymMatrix::from_fn(2 * n, |i, j| {
        let (bi, ii) = (i / n, i % n);
        let (bj, jj) = (j / n, j % n);
        if bi == bj {
            p.q.get(ii, jj)
        } else {
            a.get(ii, jj)
        }
    })?;
    if !block.is_positive_definite() {
        return Err(Error::domain(format!(
            "second-moment block matrix is not positive definite \
             (min eigenvalue {:.3e}); V(A) = -inf",
            block.min_eig()
        )));
    }
    Ok(a.hadamard_square().quad_form(&p.beta) + 0.5 * block.logdet()?)
}

/// Effective constraint matrix
/// `Qhat_{kl} = (Q_{kl} - m^k . m^l) / sqrt((1-|m^k|^2)(1-|m^l|^2))`.
pub fn effective_constraint(m: &Magnetization, p: &ModelParams) -> Result<SymMatrix> {
    check_submagnetized(m, p)?;
    let overlap = m.overlap();
    let scale: Vec<f64> = (0..p.n)
        .map(|k| (1.0 - m.row_norm_sq(k)).sqrt())
        .collect();
    SymMatrix::from_fn(p.n, |k, l| {
        (p.q.get(k, l) - overlap.get(k, l)) / (scale[k] * scale[l])
    })
}

/// Effective inverse temperatures `beta_k (1 - |m^k|^2)`.
pub fn effective_beta(m: &Magnetization, p: &ModelParams) -> Result<Vec<f64>> {
    check_submagnetized(m, p)?;
    Ok((0..p.n)
        .map(|k| p.beta[k] * (1.0 - m.row_norm_sq(k)))
        .collect())
}

fn check_submagnetized(m: &Magnetization, p: &ModelParams) -> Result<()> {
    if m.replicas() != p.n {
        return Err(Error::invalid(format!(
            "magnetization has {} rows for {} replicas",
            m.replicas(),
            p.n
        )));
    }
    for k in 0..p.n {
        if m.row_norm_sq(k) >= 1.0 {
            return Err(Error::domain(format!(
                "effective quantities require |m^{k}| < 1, got |m|^2 = {}",
                m.row_norm_sq(k)
            )));
        }
    }
    Ok(())
}

/// Per-site TAP free energy
/// `log|Q - m m^T|/2 + sum_k beta_k H_N(m^k)/N + sum_k h_k (u . m^k)
///  + beta^T (Q - m m^T)^{⊙2} beta / 2`.
pub fn tap_free_energy(
    d: &DisorderSample,
    p: &ModelParams,
    u: &[f64],
    m: &Magnetization,
) -> Result<f64> {
    if m.sites() != d.sites() || u.len() != d.sites() {
        return Err(Error::invalid(
            "magnetization, field direction and disorder must share N",
        ));
    }
    let unorm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (unorm - 1.0).abs() > 1e-8 {
        return Err(Error::invalid(format!(
            "field direction must be a unit vector, |u| = {unorm}"
        )));
    }
    let overlap = m.overlap();
    let diff = p.q.sub(&overlap);
    if !diff.is_positive_definite() {
        return Err(Error::domain(format!(
            "TAP free energy requires m m^T strictly below Q \
             (min eigenvalue of Q - m m^T is {:.3e})",
            diff.min_eig()
        )));
    }
    let n_sites = d.sites() as f64;
    let mut energy = 0.0;
    let mut field = 0.0;
    for k in 0..p.n {
        let row: Vec<f64> = m.rows().row(k).iter().copied().collect();
        energy += p.beta[k] * d.hamiltonian(&row) / n_sites;
        field += p.hmag[k] * row.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
    }
    Ok(0.5 * diff.logdet()? + energy + field + 0.5 * diff.hadamard_square().quad_form(&p.beta))
}

/// Eigenvalues of `beta^{1/2} (Q - Qt) beta^{1/2}` (the effective
/// temperatures after recentering), clamped at zero; a negative eigenvalue
/// beyond tolerance is a domain error.
pub fn beta_tilde(p: &ModelParams, qt: &SymMatrix) -> Result<Vec<f64>> {
    if qt.dim() != p.n {
        return Err(Error::invalid("dimension mismatch"));
    }
    let s = p.beta_sandwich(&p.q.sub(qt));
    let tol = psd_tol(s.spectral_norm());
    let mut out = Vec::with_capacity(p.n);
    for &l in s.eigenvalues() {
        if l < -tol {
            return Err(Error::domain(format!(
                "effective temperature eigenvalue {l:.3e} is negative; Qt exceeds Q"
            )));
        }
        out.push(l.max(0.0));
    }
    Ok(out)
}

/// Modified Onsager term `sum_k F_K(beta~_k)` with `beta~` the effective
/// temperatures of `Qt`.
pub fn modified_onsager(p: &ModelParams, qt: &SymMatrix, spec: &BinnedSpectrum) -> Result<f64> {
    let tilde = beta_tilde(p, qt)?;
    let mut acc = 0.0;
    for b in tilde {
        acc += spec.fk(b)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmat::SymMatrix;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn params(n: usize, q_offdiag: f64, beta: &[f64], h: &[f64]) -> ModelParams {
        let q = SymMatrix::from_fn(n, |i, j| if i == j { 1.0 } else { q_offdiag }).unwrap();
        ModelParams::new(q, beta.to_vec(), h.to_vec()).unwrap()
    }

    fn random_unit_diag_pd(n: usize, rng: &mut impl Rng) -> SymMatrix {
        // random correlation-like matrix: normalize a Gram matrix
        loop {
            let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0f64));
            let gram = &g * g.transpose() + DMatrix::identity(n, n) * 0.3;
            let d: Vec<f64> = (0..n).map(|i| gram[(i, i)].sqrt()).collect();
            let q = SymMatrix::from_fn(n, |i, j| gram[(i, j)] / (d[i] * d[j])).unwrap();
            if q.is_positive_definite() {
                return q;
            }
        }
    }

    /// Random magnetization with m m^T = t * Q and orthonormal frame rows.
    fn random_feasible_m(p: &ModelParams, sites: usize, t: f64, rng: &mut impl Rng) -> Magnetization {
        let n = p.replicas();
        let raw = DMatrix::from_fn(sites, n, |_, _| rng.gen_range(-1.0..1.0));
        let qr = raw.qr();
        let frame = qr.q().columns(0, n).transpose().into_owned();
        let qt_sqrt = p.q().scale(t).sqrt_psd();
        Magnetization::new(qt_sqrt.as_dmatrix() * frame).unwrap()
    }

    #[test]
    fn params_validation() {
        let q = SymMatrix::from_rows(2, &[1.0, 0.5, 0.5, 1.0]).unwrap();
        assert!(ModelParams::new(q.clone(), vec![0.5, 0.5], vec![0.0, 0.0]).is_ok());
        assert!(ModelParams::new(q.clone(), vec![0.5], vec![0.0, 0.0]).is_err());
        assert!(ModelParams::new(q.clone(), vec![-0.5, 0.5], vec![0.0, 0.0]).is_err());
        let bad_diag = SymMatrix::from_rows(2, &[1.0, 0.5, 0.5, 0.9]).unwrap();
        assert!(ModelParams::new(bad_diag, vec![0.5, 0.5], vec![0.0, 0.0]).is_err());
        let singular = SymMatrix::from_rows(2, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(ModelParams::new(singular, vec![0.5, 0.5], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn plefka_examples() {
        // n=1, beta=1: q~ = 1 - 1/sqrt(2) sits exactly on the boundary
        let p = params(1, 0.0, &[1.0], &[0.0]);
        let qt = SymMatrix::from_rows(1, &[1.0 - INV_SQRT2]).unwrap();
        assert!(plefka_member(&p, &qt, 0.0).unwrap());
        assert_abs_diff_eq!(plefka_norm(&p, &qt).unwrap(), INV_SQRT2, epsilon = 1e-12);

        // n=1, beta=0.5, qt=0: 0.5 <= 1/sqrt(2)
        let p = params(1, 0.0, &[0.5], &[0.0]);
        let qt = SymMatrix::zeros(1);
        assert!(plefka_member(&p, &qt, 0.0).unwrap());

        // Qt = Q - tiny*I with huge beta: norm condition fails (50 * 0.05 = 2.5)
        let p = params(2, 0.3, &[50.0, 50.0], &[0.0, 0.0]);
        let qt = p.q().sub(&SymMatrix::identity(2).scale(0.05));
        assert!(!plefka_member(&p, &qt, 0.0).unwrap());

        assert!(plefka_member(&p, &SymMatrix::zeros(3), 0.0).is_err());
    }

    #[test]
    fn ht_examples() {
        // n=1, Q=1: member iff beta <= 1/sqrt(2)
        assert!(ht_member(&params(1, 0.0, &[INV_SQRT2], &[0.0])));
        assert!(!ht_member(&params(1, 0.0, &[INV_SQRT2 + 1e-6], &[0.0])));
        // beta = 0
        let p = params(2, 0.4, &[0.0, 0.0], &[0.0, 0.0]);
        assert_eq!(ht_norm(&p), 0.0);
        assert!(ht_member(&p));
        // hand eigenvalue computation: 0.4 * (1 + 0.5) = 0.6
        let p = params(2, 0.5, &[0.4, 0.4], &[0.0, 0.0]);
        assert_abs_diff_eq!(ht_norm(&p), 0.6, epsilon = 1e-12);
        assert!(ht_member(&p));
    }

    #[test]
    fn annealed_examples() {
        // decoupled replicas
        let p = params(2, 0.0, &[0.5, 0.5], &[0.0, 0.0]);
        assert_abs_diff_eq!(annealed_fe(&p).unwrap(), 0.25, epsilon = 1e-12);
        // beta = 0
        let p = params(2, 0.3, &[0.0, 0.0], &[0.0, 0.0]);
        assert_abs_diff_eq!(
            annealed_fe(&p).unwrap(),
            0.5 * (1.0f64 - 0.09).ln(),
            epsilon = 1e-12
        );
        // scalar arithmetic oracle
        let p = params(2, 0.3, &[0.4, 0.6], &[0.0, 0.0]);
        let byhand = 0.5 * (0.16 + 0.36 + 2.0 * 0.24 * 0.09) + 0.5 * (0.91f64).ln();
        assert_abs_diff_eq!(annealed_fe(&p).unwrap(), byhand, epsilon = 1e-12);
    }

    #[test]
    fn onsager_entropy_examples() {
        let p = params(2, 0.3, &[0.4, 0.6], &[0.0, 0.0]);
        assert_eq!(onsager(&p, p.q()), 0.0);
        let p1 = params(1, 0.0, &[0.8], &[0.0]);
        let zero1 = SymMatrix::zeros(1);
        assert_abs_diff_eq!(onsager(&p1, &zero1), 0.32, epsilon = 1e-12);
        assert_abs_diff_eq!(entropy(&p1, &zero1).unwrap(), 0.0, epsilon = 1e-15);
        assert!(entropy(&p1, &SymMatrix::identity(1)).is_err());

        // entrywise loop oracle on a random instance
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let q = random_unit_diag_pd(3, &mut rng);
        let beta = vec![0.3, 0.7, 1.1];
        let p = ModelParams::new(q.clone(), beta.clone(), vec![0.0; 3]).unwrap();
        let qt = q.scale(0.4);
        let mut acc = 0.0;
        for k in 0..3 {
            for l in 0..3 {
                let d = q.get(k, l) - qt.get(k, l);
                acc += beta[k] * d * d * beta[l];
            }
        }
        assert_abs_diff_eq!(onsager(&p, &qt), 0.5 * acc, epsilon = 1e-12);
    }

    #[test]
    fn v_func_examples() {
        let p = params(2, 0.3, &[0.4, 0.4], &[0.0, 0.0]);
        // A = 0: Schur complement gives log|Q|
        assert_abs_diff_eq!(
            v_func(&p, &SymMatrix::zeros(2)).unwrap(),
            p.q().logdet().unwrap(),
            epsilon = 1e-12
        );
        // n=1 closed form V(a) = beta^2 a^2 + log(1-a^2)/2
        let p1 = params(1, 0.0, &[0.6], &[0.0]);
        for &a in &[0.0, 0.3, -0.8] {
            let am = SymMatrix::from_rows(1, &[a]).unwrap();
            let expect = 0.36 * a * a + 0.5 * (1.0 - a * a).ln();
            assert_abs_diff_eq!(v_func(&p1, &am).unwrap(), expect, epsilon = 1e-12);
        }
        // singular block -> domain error
        let am = SymMatrix::from_rows(1, &[1.0]).unwrap();
        assert!(v_func(&p1, &am).is_err());
    }

    #[test]
    fn effective_quantities_trivial() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let p = params(2, 0.4, &[0.7, 0.9], &[0.0, 0.0]);
        let zero_m = Magnetization::new(DMatrix::zeros(2, 16)).unwrap();
        let qhat = effective_constraint(&zero_m, &p).unwrap();
        assert!(qhat.sub(p.q()).max_abs() <= 1e-14);
        assert_eq!(effective_beta(&zero_m, &p).unwrap(), p.beta());

        // n=1: Qhat = 1 always
        let p1 = params(1, 0.0, &[0.7], &[0.0]);
        for _ in 0..5 {
            let m = random_feasible_m(&p1, 12, rng.gen_range(0.05..0.9), &mut rng);
            let qhat = effective_constraint(&m, &p1).unwrap();
            assert_abs_diff_eq!(qhat.get(0, 0), 1.0, epsilon = 1e-10);
        }

        // |m| >= 1 -> domain error
        let mut big = DMatrix::zeros(1, 4);
        big[(0, 0)] = 1.0;
        let m = Magnetization::new(big).unwrap();
        assert!(effective_constraint(&m, &p1).is_err());
    }

    #[test]
    fn determinant_and_onsager_identities() {
        // log|Qhat| + sum log(1-|m^k|^2) = log|Q - m m^T| and
        // beta_m^T Qhat^{⊙2} beta_m = beta^T (Q - m m^T)^{⊙2} beta
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        for trial in 0..50 {
            let n = rng.gen_range(1..4);
            let q = random_unit_diag_pd(n, &mut rng);
            let beta: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.5)).collect();
            let p = ModelParams::new(q, beta, vec![0.0; n]).unwrap();
            let m = random_feasible_m(&p, 24, rng.gen_range(0.05..0.95), &mut rng);

            let qhat = effective_constraint(&m, &p).unwrap();
            let bm = effective_beta(&m, &p).unwrap();
            let diff = p.q().sub(&m.overlap());

            let lhs_det = qhat.logdet().unwrap()
                + (0..n).map(|k| (1.0 - m.row_norm_sq(k)).ln()).sum::<f64>();
            let rhs_det = diff.logdet().unwrap();
            assert!(
                (lhs_det - rhs_det).abs() <= 1e-10,
                "determinant identity failed on trial {trial}: {lhs_det} vs {rhs_det}"
            );

            let lhs_ons = qhat.hadamard_square().quad_form(&bm);
            let rhs_ons = diff.hadamard_square().quad_form(p.beta());
            assert!(
                (lhs_ons - rhs_ons).abs() <= 1e-10,
                "Onsager identity failed on trial {trial}: {lhs_ons} vs {rhs_ons}"
            );
        }
    }

    #[test]
    fn plefka_threeway_equivalence() {
        // m in Plef <=> effective temperatures in HT(Qhat)
        let mut rng = ChaCha12Rng::seed_from_u64(33);
        let mut checked = 0;
        for _ in 0..60 {
            let n = rng.gen_range(1..4);
            let q = random_unit_diag_pd(n, &mut rng);
            let beta: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.4)).collect();
            let p = ModelParams::new(q, beta, vec![0.0; n]).unwrap();
            let m = random_feasible_m(&p, 20, rng.gen_range(0.05..0.95), &mut rng);

            let overlap = m.overlap();
            let lhs_norm = plefka_norm(&p, &overlap).unwrap();
            let qhat = effective_constraint(&m, &p).unwrap();
            let bm = effective_beta(&m, &p).unwrap();
            if !qhat.is_positive_definite() {
                continue;
            }
            let p_eff = ModelParams::new(qhat, bm, vec![0.0; n]).unwrap();
            let rhs_norm = ht_norm(&p_eff);
            assert!(
                (lhs_norm - rhs_norm).abs() <= 1e-10 * (1.0 + lhs_norm),
                "Plefka and HT norms differ: {lhs_norm} vs {rhs_norm}"
            );
            // membership agrees away from the 1/sqrt(2) boundary
            if (lhs_norm - INV_SQRT2).abs() > 1e-9 {
                assert_eq!(
                    plefka_member(&p, &overlap, 0.0).unwrap(),
                    ht_member(&p_eff)
                );
            }
            checked += 1;
        }
        assert!(checked >= 40);
    }

    #[test]
    fn tap_free_energy_cases() {
        use crate::mcsim::sample_goe;
        let mut rng = ChaCha12Rng::seed_from_u64(55);
        let n_sites = 24;
        let d = sample_goe(n_sites, 7).unwrap();
        let mut u = vec![0.0; n_sites];
        u[0] = 1.0;

        let p = params(2, 0.3, &[0.4, 0.6], &[0.2, 0.1]);
        // m = 0 reduces to the annealed free energy
        let zero_m = Magnetization::new(DMatrix::zeros(2, n_sites)).unwrap();
        assert_abs_diff_eq!(
            tap_free_energy(&d, &p, &u, &zero_m).unwrap(),
            annealed_fe(&p).unwrap(),
            epsilon = 1e-12
        );

        // beta = 0, h = 0: pure entropy
        let p0 = params(2, 0.3, &[0.0, 0.0], &[0.0, 0.0]);
        let m = random_feasible_m(&p0, n_sites, 0.4, &mut rng);
        assert_abs_diff_eq!(
            tap_free_energy(&d, &p0, &u, &m).unwrap(),
            0.5 * p0.q().sub(&m.overlap()).logdet().unwrap(),
            epsilon = 1e-12
        );

        // independent term-by-term loop oracle
        let p = params(2, 0.3, &[0.4, 0.6], &[0.2, 0.1]);
        let m = random_feasible_m(&p, n_sites, 0.5, &mut rng);
        let diff = p.q().sub(&m.overlap());
        let mut oracle = 0.5 * diff.logdet().unwrap();
        for k in 0..2 {
            let row: Vec<f64> = m.rows().row(k).iter().copied().collect();
            oracle += p.beta()[k] * d.hamiltonian(&row) / n_sites as f64;
            oracle += p.hmag()[k] * row[0]; // u = e_1
        }
        let mut ons = 0.0;
        for k in 0..2 {
            for l in 0..2 {
                ons += p.beta()[k] * diff.get(k, l) * diff.get(k, l) * p.beta()[l];
            }
        }
        oracle += 0.5 * ons;
        assert_abs_diff_eq!(
            tap_free_energy(&d, &p, &u, &m).unwrap(),
            oracle,
            epsilon = 1e-10
        );

        // m m^T = Q exactly: not strictly below Q -> domain error
        let m_bad = random_feasible_m(&params(2, 0.3, &[0.4, 0.6], &[0.2, 0.1]), n_sites, 1.0, &mut rng);
        assert!(tap_free_energy(&d, &p, &u, &m_bad).is_err());
    }

    #[test]
    fn modified_onsager_cases() {
        let spec = BinnedSpectrum::new(4096).unwrap();
        let p = params(2, 0.4, &[0.5, 0.7], &[0.0, 0.0]);
        // Qt = Q: all effective temperatures vanish
        assert_eq!(modified_onsager(&p, p.q(), &spec).unwrap(), 0.0);

        // n=1 reduction to fk(beta (1 - qt))
        let p1 = params(1, 0.0, &[0.9], &[0.0]);
        let qt = SymMatrix::from_rows(1, &[0.3]).unwrap();
        assert_abs_diff_eq!(
            modified_onsager(&p1, &qt, &spec).unwrap(),
            spec.fk(0.9 * 0.7).unwrap(),
            epsilon = 1e-12
        );

        // Plefka-feasible Qt: close to the exact Onsager term at K = 4096
        let p = params(2, 0.4, &[0.5, 0.5], &[0.0, 0.0]);
        let qt = p.q().scale(0.3);
        if plefka_member(&p, &qt, 0.0).unwrap() {
            let approx_ons = modified_onsager(&p, &qt, &spec).unwrap();
            assert!((approx_ons - onsager(&p, &qt)).abs() <= 0.03);
        }

        // Qt above Q -> negative effective temperature -> domain error
        let qt_bad = p.q().scale(1.5);
        assert!(modified_onsager(&p, &qt_bad, &spec).is_err());
    }
}
