//! Symmetric-matrix toolkit: eigendecomposition, Loewner-order tests,
//! primary matrix functions and the trace-derivative calculus used by the
//! TAP functionals.
//!
//! All values are dense `n x n` real symmetric matrices. Construction
//! symmetrizes the input as `(A + A^T)/2`, so round-off asymmetry from
//! upstream matrix products is repaired silently. The spectral
//! factorization is computed once on demand and cached; `SymMatrix` is
//! immutable afterwards and safe to share across threads.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative eigenvalue tolerance used by the positive-definiteness test:
/// `min_eig > PD_REL_TOL * max(1, max_eig)`.
pub const PD_REL_TOL: f64 = 1e-12;

/// Spectral factorization `A = U D U^T` with ascending eigenvalues and
/// orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenDecomp {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl EigenDecomp {
    /// Eigenvalues in ascending order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Orthonormal eigenvectors, one per column, matching `values` order.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Reassembles `U f(D) U^T` for the scalar map `f` applied entrywise to
    /// the eigenvalues.
    fn assemble(&self, fvals: &[f64]) -> DMatrix<f64> {
        let u = &self.vectors;
        let d = DMatrix::from_diagonal(&DVector::from_row_slice(fvals));
        u * d * u.transpose()
    }
}

/// Dense real symmetric matrix with a lazily cached eigendecomposition.
#[derive(Debug)]
pub struct SymMatrix {
    dim: usize,
    entries: DMatrix<f64>,
    eigen: OnceLock<EigenDecomp>,
}

impl Clone for SymMatrix {
    fn clone(&self) -> Self {
        // The cached factorization is cloned along so repeated decompositions
        // are not recomputed after a clone.
        let eigen = OnceLock::new();
        if let Some(e) = self.eigen.get() {
            let _ = eigen.set(e.clone());
        }
        SymMatrix {
            dim: self.dim,
            entries: self.entries.clone(),
            eigen,
        }
    }
}

impl PartialEq for SymMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl SymMatrix {
    /// Builds a symmetric matrix from a square `nalgebra` matrix,
    /// symmetrizing as `(A + A^T)/2`.
    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if n == 0 || m.ncols() != n {
            return Err(Error::invalid(format!(
                "symmetric matrix must be square with dim >= 1, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(SymMatrix {
            dim: n,
            entries: sym,
            eigen: OnceLock::new(),
        })
    }

    /// Builds from row-major entries.
    pub fn from_rows(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::invalid(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                entries.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(n, n, entries))
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::from_dmatrix(DMatrix::from_fn(n, n, f))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_dmatrix(DMatrix::identity(n, n)).expect("identity is valid")
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_dmatrix(DMatrix::zeros(n, n)).expect("zeros is valid")
    }

    /// Diagonal matrix from a vector.
    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        Self::from_dmatrix(DMatrix::from_diagonal(&DVector::from_row_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Max absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
    }

    /// Eigendecomposition with ascending eigenvalues, computed once and
    /// cached for reuse by matrix functions, norms and PD tests.
    pub fn eigen(&self) -> &EigenDecomp {
        self.eigen.get_or_init(|| {
            let se = nalgebra::SymmetricEigen::try_new(self.entries.clone(), PD_REL_TOL, 0)
                .unwrap_or_else(|| nalgebra::SymmetricEigen::new(self.entries.clone()));
            let n = self.dim;
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
            let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
            let mut vectors = DMatrix::zeros(n, n);
            for (dst, &src) in order.iter().enumerate() {
                vectors.set_column(dst, &se.eigenvectors.column(src));
            }
            EigenDecomp { values, vectors }
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.eigen().values()
    }

    pub fn min_eig(&self) -> f64 {
        self.eigen().min()
    }

    pub fn max_eig(&self) -> f64 {
        self.eigen().max()
    }

    /// Scale-aware positive definiteness: `min_eig > 1e-12 * max(1, max_eig)`.
    pub fn is_positive_definite(&self) -> bool {
        self.min_eig() > PD_REL_TOL * 1.0f64.max(self.max_eig())
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        let e = self.eigen();
        e.min().abs().max(e.max().abs())
    }

    /// Sum of log eigenvalues. Fails on matrices that are not positive
    /// definite under the scale-aware threshold.
    pub fn logdet(&self) -> Result<f64> {
        if !self.is_positive_definite() {
            return Err(Error::domain(format!(
                "logdet requires a positive definite matrix (min eigenvalue {:.3e})",
                self.min_eig()
            )));
        }
        Ok(self.eigenvalues().iter().map(|&l| l.ln()).sum())
    }

    /// Primary matrix function `U f(D) U^T`. Fails with the offending
    /// eigenvalue named if `f` is undefined (non-finite) there.
    pub fn matrix_function(&self, f: impl Fn(f64) -> f64) -> Result<SymMatrix> {
        let e = self.eigen();
        let mut fvals = Vec::with_capacity(self.dim);
        for &l in e.values() {
            let y = f(l);
            if !y.is_finite() {
                return Err(Error::domain(format!(
                    "scalar function undefined at eigenvalue {l:.6e}"
                )));
            }
            fvals.push(y);
        }
        SymMatrix::from_dmatrix(e.assemble(&fvals))
    }

    /// `Tr(f'(A) Adot)`, the derivative of `Tr f(A(alpha))` along a path with
    /// `A(0) = A`, `A'(0) = Adot`.
    pub fn trace_function_derivative(
        &self,
        adot: &SymMatrix,
        fprime: impl Fn(f64) -> f64,
    ) -> Result<f64> {
        if adot.dim != self.dim {
            return Err(Error::invalid(format!(
                "dimension mismatch: {} vs {}",
                self.dim, adot.dim
            )));
        }
        let e = self.eigen();
        let u = e.vectors();
        // Tr(U f'(D) U^T Adot) = sum_a f'(lambda_a) (U^T Adot U)_aa
        let rotated = u.transpose() * adot.as_dmatrix() * u;
        let mut acc = 0.0;
        for (a, &l) in e.values().iter().enumerate() {
            let d = fprime(l);
            if !d.is_finite() {
                return Err(Error::domain(format!(
                    "derivative undefined at eigenvalue {l:.6e}"
                )));
            }
            acc += d * rotated[(a, a)];
        }
        Ok(acc)
    }

    /// Frechet derivative of the primary matrix function `f` at `self` in
    /// direction `dir`: `U (Delta ⊙ U^T dir U) U^T` with `Delta` the
    /// divided-difference matrix of `f` on the eigenvalues.
    pub fn matrix_function_frechet(
        &self,
        dir: &SymMatrix,
        f: impl Fn(f64) -> f64,
        fprime: impl Fn(f64) -> f64,
    ) -> Result<SymMatrix> {
        if dir.dim != self.dim {
            return Err(Error::invalid(format!(
                "dimension mismatch: {} vs {}",
                self.dim, dir.dim
            )));
        }
        let e = self.eigen();
        let u = e.vectors();
        let lam = e.values();
        let n = self.dim;
        let mut delta = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                // Divided differences degrade for nearly equal eigenvalues;
                // switch to the derivative below a spacing cutoff.
                let v = if (lam[i] - lam[j]).abs() > 1e-9 * (1.0 + lam[i].abs().max(lam[j].abs())) {
                    (f(lam[i]) - f(lam[j])) / (lam[i] - lam[j])
                } else {
                    fprime(0.5 * (lam[i] + lam[j]))
                };
                if !v.is_finite() {
                    return Err(Error::domain(format!(
                        "divided difference undefined at eigenvalues ({:.6e}, {:.6e})",
                        lam[i], lam[j]
                    )));
                }
                delta[(i, j)] = v;
            }
        }
        let rotated = u.transpose() * dir.as_dmatrix() * u;
        let had = rotated.component_mul(&delta);
        SymMatrix::from_dmatrix(u * had * u.transpose())
    }

    /// Loewner comparison `self >= other - tol` on the smallest eigenvalue of
    /// the difference.
    pub fn loewner_geq(&self, other: &SymMatrix, tol: f64) -> Result<bool> {
        if other.dim != self.dim {
            return Err(Error::invalid(format!(
                "dimension mismatch: {} vs {}",
                self.dim, other.dim
            )));
        }
        let diff = self.sub(other);
        Ok(diff.min_eig() >= -tol)
    }

    /// Entrywise square. Symmetric PSD whenever the input is symmetric.
    pub fn hadamard_square(&self) -> SymMatrix {
        let m = self.entries.map(|x| x * x);
        SymMatrix::from_dmatrix(m).expect("hadamard square of valid matrix is valid")
    }

    /// PSD square root with eigenvalues clamped at zero before the root, so
    /// round-off `-1e-15` eigenvalues of nominally PSD products do not poison
    /// the result.
    pub fn sqrt_psd(&self) -> SymMatrix {
        self.matrix_function(|l| l.max(0.0).sqrt())
            .expect("clamped sqrt is defined everywhere")
    }

    /// Inverse square root; requires positive definiteness.
    pub fn invsqrt_pd(&self) -> Result<SymMatrix> {
        if !self.is_positive_definite() {
            return Err(Error::domain(format!(
                "inverse square root requires a positive definite matrix (min eigenvalue {:.3e})",
                self.min_eig()
            )));
        }
        self.matrix_function(|l| 1.0 / l.sqrt())
    }

    /// Matrix inverse via the spectral factorization; requires PD.
    pub fn inverse_pd(&self) -> Result<SymMatrix> {
        if !self.is_positive_definite() {
            return Err(Error::domain(format!(
                "inverse requires a positive definite matrix (min eigenvalue {:.3e})",
                self.min_eig()
            )));
        }
        self.matrix_function(|l| 1.0 / l)
    }

    /// Projection onto the PSD cone (negative eigenvalues clipped to zero).
    pub fn psd_projection(&self) -> SymMatrix {
        self.matrix_function(|l| l.max(0.0))
            .expect("clipping is defined everywhere")
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix::from_dmatrix(&self.entries + &other.entries).expect("sum of valid is valid")
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix::from_dmatrix(&self.entries - &other.entries).expect("diff of valid is valid")
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix::from_dmatrix(&self.entries * c).expect("scaled valid is valid")
    }

    /// Symmetrized conjugation `(B A B^T + (B A B^T)^T)/2` for symmetric `B`.
    pub fn conjugate(&self, by: &SymMatrix) -> SymMatrix {
        let m = by.as_dmatrix() * &self.entries * by.as_dmatrix();
        SymMatrix::from_dmatrix(m).expect("conjugation of valid is valid")
    }

    /// Quadratic form `v^T A v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.dim);
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += v[i] * self.entries[(i, j)] * v[j];
            }
        }
        acc
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.norm()
    }
}
