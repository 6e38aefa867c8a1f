//! Finite-size stochastic verification: GOE disorder samples, the
//! deterministic diagonal Hamiltonian, importance-sampled constrained
//! volumes and free energies, and Riemannian ground-state ascent on the
//! fixed-overlap manifold.
//!
//! Sampling conventions: the disorder matrix is `G = sqrt(N) (J + J^T)/2`
//! with `J` i.i.d. standard normal, so `H(m) = m^T G m` and
//! `E[H(s) H(s')] = N (s . s')^2`. Eigenvalues of `G` are written `N l_i`
//! with `l_i` ascending and approaching the semicircle on
//! `[-sqrt(2), sqrt(2)]`.
//!
//! Monte Carlo chains draw from per-chain substreams derived from the master
//! seed by a 64-bit mix (`split_seed`) and are merged in chain-index order,
//! so results are bit-identical for a fixed `(seed, n_samples, chain count)`
//! regardless of thread scheduling.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::symmat::SymMatrix;

/// Number of independent chains; also the number of batches used for the
/// batch-means standard error.
pub const CHAINS: usize = 16;

/// SplitMix64 step: the documented mixing function deriving per-chain
/// substream seeds from a master seed.
pub fn split_seed(master: u64, stream: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E3779B97F4A7C15u64.wrapping_mul(stream.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// One GOE draw at size `N` with its eigenvalue representation.
#[derive(Debug)]
pub struct DisorderSample {
    sites: usize,
    seed: u64,
    g: DMatrix<f64>,
    lambdas: OnceLock<Vec<f64>>,
}

/// Draws the disorder matrix `G = sqrt(N) (J + J^T)/2`, `J_ij` i.i.d.
/// standard normal; deterministic in the seed.
pub fn sample_goe(sites: usize, seed: u64) -> Result<DisorderSample> {
    if sites < 2 {
        return Err(Error::invalid(format!("need N >= 2 sites, got {sites}")));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(split_seed(seed, 0));
    let half_sqrt_n = 0.5 * (sites as f64).sqrt();
    let mut g = DMatrix::zeros(sites, sites);
    // fill J row-major, accumulate the symmetrization in place
    for i in 0..sites {
        for j in 0..sites {
            let x: f64 = rng.sample(StandardNormal);
            g[(i, j)] += x * half_sqrt_n;
            g[(j, i)] += x * half_sqrt_n;
        }
    }
    Ok(DisorderSample {
        sites,
        seed,
        g,
        lambdas: OnceLock::new(),
    })
}

impl DisorderSample {
    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// `H(m) = m^T G m`.
    pub fn hamiltonian(&self, m: &[f64]) -> f64 {
        debug_assert_eq!(m.len(), self.sites);
        let v = DVector::from_row_slice(m);
        (&self.g * &v).dot(&v)
    }

    /// `grad H(m) = 2 G m`.
    pub fn grad_hamiltonian(&self, m: &[f64]) -> Vec<f64> {
        let v = DVector::from_row_slice(m);
        ((&self.g * &v) * 2.0).iter().copied().collect()
    }

    /// Normalized eigenvalues `l_i` (so that `G` has eigenvalues `N l_i`),
    /// ascending; computed lazily and cached.
    pub fn lambdas(&self) -> &[f64] {
        self.lambdas.get_or_init(|| {
            let mut evs: Vec<f64> = self
                .g
                .symmetric_eigenvalues()
                .iter()
                .map(|l| l / self.sites as f64)
                .collect();
            evs.sort_by(f64::total_cmp);
            evs
        })
    }

    /// Writes the eigenvalue cache (versioned header, little-endian f64).
    pub fn write_eigencache(&self, dir: &Path) -> Result<PathBuf> {
        let path = cache_path(dir, self.sites, self.seed);
        let lambdas = self.lambdas();
        let mut buf = Vec::with_capacity(16 + 8 + lambdas.len() * 8);
        buf.extend_from_slice(CACHE_MAGIC);
        buf.extend_from_slice(&(self.sites as u64).to_le_bytes());
        buf.extend_from_slice(&self.seed.to_le_bytes());
        for l in lambdas {
            buf.extend_from_slice(&l.to_le_bytes());
        }
        std::fs::File::create(&path)
            .and_then(|mut f| f.write_all(&buf))
            .map_err(|e| Error::invalid(format!("cannot write eigenvalue cache: {e}")))?;
        Ok(path)
    }
}

const CACHE_MAGIC: &[u8; 8] = b"SKGOEV01";

fn cache_path(dir: &Path, sites: usize, seed: u64) -> PathBuf {
    dir.join(format!("goe_{sites}_{seed}.evals"))
}

/// Reads a cached eigenvalue vector for `(N, seed)` if present and valid.
pub fn read_eigencache(dir: &Path, sites: usize, seed: u64) -> Result<Option<Vec<f64>>> {
    let path = cache_path(dir, sites, seed);
    if !path.exists() {
        return Ok(None);
    }
    let mut buf = Vec::new();
    std::fs::File::open(&path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::invalid(format!("cannot read eigenvalue cache: {e}")))?;
    if buf.len() < 24 || &buf[0..8] != CACHE_MAGIC {
        return Err(Error::invalid("eigenvalue cache has a bad header"));
    }
    let n = u64::from_le_bytes(buf[8..16].try_into().unwrap()) as usize;
    let s = u64::from_le_bytes(buf[16..24].try_into().unwrap());
    if n != sites || s != seed || buf.len() != 24 + 8 * n {
        return Err(Error::invalid("eigenvalue cache does not match (N, seed)"));
    }
    let lambdas = buf[24..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Some(lambdas))
}

/// Classical locations `theta_{i/N}`, `i = 1..N`: the deterministic
/// counterpart of the disorder eigenvalues.
pub fn deterministic_spectrum(n: usize) -> Vec<f64> {
    crate::spectrum::deterministic_spectrum(n)
}

/// Result of a stochastic free-energy or volume estimate, on the per-site
/// log scale. `value` is `-inf` when no sample hit the overlap window.
#[derive(Debug, Clone)]
pub struct FEEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub eps: f64,
    /// Scale of the systematic window bias, `(1 + |Q^{-1}|_2) * eps`;
    /// budgeted alongside `stderr` by the acceptance checks.
    pub eps_bias: f64,
}

impl FEEstimate {
    pub fn is_miss(&self) -> bool {
        self.value == f64::NEG_INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeMethod {
    Direct,
    Tilted,
}

/// Streaming log-sum-exp accumulator.
#[derive(Debug, Clone)]
struct LogSumExp {
    max: f64,
    sum: f64,
}

impl LogSumExp {
    fn new() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    fn push(&mut self, lw: f64) {
        if lw == f64::NEG_INFINITY {
            return;
        }
        if lw <= self.max {
            self.sum += (lw - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - lw).exp() + 1.0;
            self.max = lw;
        }
    }

    fn merge(&mut self, other: &LogSumExp) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if other.max <= self.max {
            self.sum += other.sum * (other.max - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - other.max).exp() + other.sum;
            self.max = other.max;
        }
    }

    fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

struct ChainResult {
    lse: LogSumExp,
    hits: u64,
    count: u64,
}

/// Splits `total` samples over chains, remainder to the leading chains.
fn chain_counts(total: u64) -> Vec<u64> {
    let base = total / CHAINS as u64;
    let rem = total % CHAINS as u64;
    (0..CHAINS as u64)
        .map(|c| base + u64::from(c < rem))
        .collect()
}

fn batch_stderr(values: &[f64]) -> f64 {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.len() < 2 {
        return f64::INFINITY;
    }
    let n = finite.len() as f64;
    let mean = finite.iter().sum::<f64>() / n;
    let var = finite.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

/// The tilted sampler shared by the volume and free-energy estimators:
/// coordinates `u_i` i.i.d. Gaussian with covariance `Q`, spins
/// `s^k = u^k/|u^k|`, change-of-measure weight
/// `log w = (N/2) log|Q| - sum_i u_i^T L u_i` with `L = (I - Q^{-1})/2`.
/// With `integrand` present the exponent gains
/// `sum_k beta_k H(s^k) + N fields_k . s^k`.
#[allow(clippy::too_many_arguments)]
fn tilted_engine(
    q: &SymMatrix,
    eps: f64,
    n_sites: usize,
    n_samples: u64,
    seed: u64,
    disorder: Option<&DisorderSample>,
    beta: Option<&[f64]>,
    fields: Option<&DMatrix<f64>>,
) -> Result<FEEstimate> {
    let n = q.dim();
    let q_sqrt = q.sqrt_psd();
    let q_inv = q.inverse_pd()?;
    let lambda = SymMatrix::from_fn(n, |i, j| {
        0.5 * (f64::from(i == j) - q_inv.get(i, j))
    })?;
    let half_n_logdet = 0.5 * n_sites as f64 * q.logdet()?;
    let eps_bias = (1.0 + q_inv.spectral_norm()) * eps;

    let counts = chain_counts(n_samples);
    let chains: Vec<ChainResult> = (0..CHAINS)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha12Rng::seed_from_u64(split_seed(seed, c as u64));
            let mut lse = LogSumExp::new();
            let mut hits = 0u64;
            let mut u = DMatrix::<f64>::zeros(n, n_sites);
            let mut sigma = DMatrix::<f64>::zeros(n, n_sites);
            for _ in 0..counts[c] {
                // u_i = Q^{1/2} z_i, column by column
                for i in 0..n_sites {
                    for k in 0..n {
                        sigma[(k, i)] = rng.sample(StandardNormal);
                    }
                }
                u.gemm(1.0, q_sqrt.as_dmatrix(), &sigma, 0.0);
                // normalize rows
                let mut ok = true;
                for k in 0..n {
                    let norm = u.row(k).norm();
                    if norm == 0.0 {
                        ok = false;
                        break;
                    }
                    for i in 0..n_sites {
                        sigma[(k, i)] = u[(k, i)] / norm;
                    }
                }
                if !ok {
                    continue;
                }
                // off-diagonal overlap window
                let mut hit = true;
                'window: for k in 0..n {
                    for l in (k + 1)..n {
                        let dot = sigma.row(k).dot(&sigma.row(l));
                        if (dot - q.get(k, l)).abs() > eps {
                            hit = false;
                            break 'window;
                        }
                    }
                }
                if !hit {
                    continue;
                }
                hits += 1;
                // tilt weight: (N/2) log|Q| - Tr(Lambda u u^T)
                let uut = &u * u.transpose();
                let mut quad = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        quad += lambda.get(a, b) * uut[(a, b)];
                    }
                }
                let mut lw = half_n_logdet - quad;
                if let (Some(d), Some(beta), Some(fields)) = (disorder, beta, fields) {
                    for k in 0..n {
                        let row: Vec<f64> = sigma.row(k).iter().copied().collect();
                        lw += beta[k] * d.hamiltonian(&row);
                        lw += n_sites as f64 * sigma.row(k).dot(&fields.row(k));
                    }
                }
                lse.push(lw);
            }
            ChainResult {
                lse,
                hits,
                count: counts[c],
            }
        })
        .collect();

    // merge in chain-index order
    let mut total = LogSumExp::new();
    let mut hits = 0u64;
    for c in &chains {
        total.merge(&c.lse);
        hits += c.hits;
    }
    let inv_n = 1.0 / n_sites as f64;
    let value = if hits == 0 {
        f64::NEG_INFINITY
    } else {
        inv_n * (total.value() - (n_samples as f64).ln())
    };
    let batch_values: Vec<f64> = chains
        .iter()
        .map(|c| {
            if c.hits == 0 {
                f64::NEG_INFINITY
            } else {
                inv_n * (c.lse.value() - (c.count as f64).ln())
            }
        })
        .collect();
    Ok(FEEstimate {
        value,
        stderr: batch_stderr(&batch_values),
        n_samples,
        eps,
        eps_bias,
    })
}

/// Estimates the per-site log volume of the overlap window
/// `(1/N) log integral of 1_{Q_eps}`, by direct uniform sphere sampling or
/// by the tilted (covariance-`Q`) importance sampler. For `n = 1` the
/// constraint is vacuous and the result is exactly zero.
pub fn estimate_volume(
    q: &SymMatrix,
    eps: f64,
    n_sites: usize,
    n_samples: u64,
    seed: u64,
    method: VolumeMethod,
) -> Result<FEEstimate> {
    validate_mc_args(q, eps, n_sites, n_samples)?;
    if q.dim() == 1 {
        return Ok(FEEstimate {
            value: 0.0,
            stderr: 0.0,
            n_samples: 0,
            eps,
            eps_bias: 0.0,
        });
    }
    match method {
        VolumeMethod::Tilted => tilted_engine(q, eps, n_sites, n_samples, seed, None, None, None),
        VolumeMethod::Direct => direct_volume(q, eps, n_sites, n_samples, seed),
    }
}

fn direct_volume(
    q: &SymMatrix,
    eps: f64,
    n_sites: usize,
    n_samples: u64,
    seed: u64,
) -> Result<FEEstimate> {
    let n = q.dim();
    let q_inv = q.inverse_pd()?;
    let eps_bias = (1.0 + q_inv.spectral_norm()) * eps;
    let counts = chain_counts(n_samples);
    let chain_hits: Vec<(u64, u64)> = (0..CHAINS)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha12Rng::seed_from_u64(split_seed(seed, c as u64));
            let mut sigma = DMatrix::<f64>::zeros(n, n_sites);
            let mut hits = 0u64;
            for _ in 0..counts[c] {
                for k in 0..n {
                    for i in 0..n_sites {
                        sigma[(k, i)] = rng.sample(StandardNormal);
                    }
                    let norm = sigma.row(k).norm();
                    for i in 0..n_sites {
                        sigma[(k, i)] /= norm;
                    }
                }
                let mut hit = true;
                'w: for k in 0..n {
                    for l in (k + 1)..n {
                        if (sigma.row(k).dot(&sigma.row(l)) - q.get(k, l)).abs() > eps {
                            hit = false;
                            break 'w;
                        }
                    }
                }
                hits += u64::from(hit);
            }
            (hits, counts[c])
        })
        .collect();
    let hits: u64 = chain_hits.iter().map(|(h, _)| h).sum();
    if hits == 0 {
        return Err(Error::numerical(
            "no direct sample hit the overlap window (estimate -inf); \
             use the tilted method for this constraint",
        ));
    }
    let inv_n = 1.0 / n_sites as f64;
    let value = inv_n * ((hits as f64).ln() - (n_samples as f64).ln());
    let batch_values: Vec<f64> = chain_hits
        .iter()
        .map(|&(h, c)| {
            if h == 0 {
                f64::NEG_INFINITY
            } else {
                inv_n * ((h as f64).ln() - (c as f64).ln())
            }
        })
        .collect();
    Ok(FEEstimate {
        value,
        stderr: batch_stderr(&batch_values),
        n_samples,
        eps,
        eps_bias,
    })
}

/// Importance-sampled estimate of the constrained free energy
/// `(1/N) log integral over Q_eps of exp(sum_k beta_k H(s^k) + N h^k . s^k)`
/// for one disorder draw, under the covariance-`Q` coordinate sampler.
/// `fields` rows are the full field vectors `h^k`.
pub fn estimate_fe(
    d: &DisorderSample,
    p: &ModelParams,
    fields: &DMatrix<f64>,
    eps: f64,
    n_samples: u64,
    seed: u64,
) -> Result<FEEstimate> {
    validate_mc_args(p.q(), eps, d.sites(), n_samples)?;
    if fields.nrows() != p.replicas() || fields.ncols() != d.sites() {
        return Err(Error::invalid(format!(
            "fields must be {} x {}, got {} x {}",
            p.replicas(),
            d.sites(),
            fields.nrows(),
            fields.ncols()
        )));
    }
    for k in 0..p.replicas() {
        let norm = fields.row(k).norm();
        if (norm - p.hmag()[k]).abs() > 1e-8 * (1.0 + p.hmag()[k]) {
            return Err(Error::invalid(format!(
                "field row {k} has norm {norm}, expected h_{k} = {}",
                p.hmag()[k]
            )));
        }
    }
    tilted_engine(
        p.q(),
        eps,
        d.sites(),
        n_samples,
        seed,
        Some(d),
        Some(p.beta()),
        Some(fields),
    )
}

fn validate_mc_args(q: &SymMatrix, eps: f64, n_sites: usize, n_samples: u64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("window eps must be > 0, got {eps}")));
    }
    if n_sites < 2 {
        return Err(Error::invalid("need N >= 2 sites"));
    }
    if n_samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    for k in 0..q.dim() {
        if (q.get(k, k) - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("constraint matrix must have unit diagonal"));
        }
    }
    if !q.is_positive_definite() {
        return Err(Error::invalid("constraint matrix must be positive definite"));
    }
    Ok(())
}

/// Energy landscape for the ground-state ascent: either one GOE draw or the
/// deterministic classical-location Hamiltonian.
#[derive(Debug)]
pub enum EnergySource<'a> {
    /// Diagonal Hamiltonian with the given per-site levels (ascending
    /// classical locations; per-site normalized).
    Deterministic(Vec<f64>),
    Disorder(&'a DisorderSample),
}

impl EnergySource<'_> {
    pub fn sites(&self) -> usize {
        match self {
            EnergySource::Deterministic(t) => t.len(),
            EnergySource::Disorder(d) => d.sites(),
        }
    }

    /// Per-site energy levels: `theta_{i/N}` or the normalized disorder
    /// eigenvalues `l_i`.
    pub fn thetas(&self) -> Vec<f64> {
        match self {
            EnergySource::Deterministic(t) => t.clone(),
            EnergySource::Disorder(d) => d.lambdas().to_vec(),
        }
    }

    /// Per-site normalized quadratic energy `(1/N) H(m)` of one row.
    fn row_energy(&self, row: &[f64]) -> f64 {
        match self {
            EnergySource::Deterministic(t) => t
                .iter()
                .zip(row)
                .map(|(&th, &x)| th * x * x)
                .sum(),
            EnergySource::Disorder(d) => d.hamiltonian(row) / d.sites() as f64,
        }
    }

    /// `m X` with `X` the per-site normalized coupling matrix.
    fn apply(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            EnergySource::Deterministic(t) => {
                let mut out = m.clone();
                for i in 0..t.len() {
                    for k in 0..m.nrows() {
                        out[(k, i)] *= t[i];
                    }
                }
                out
            }
            EnergySource::Disorder(d) => m * (&d.g / d.sites() as f64),
        }
    }
}

/// Maximizes `(1/N) sum_k beta_k H(m^k) + sum_k m^k . h^k` over
/// `m m^T = Qt` by Riemannian gradient ascent with polar retraction on the
/// orthonormal-row frame `V` of `m = Qt^{1/2} V`. Returns the best
/// magnetization and value over restarts; weak duality bounds the value by
/// the finite-size dual from above.
pub fn ground_state_ascent(
    source: &EnergySource<'_>,
    beta: &[f64],
    hdirs: &DMatrix<f64>,
    qt: &SymMatrix,
    iters: usize,
    restarts: usize,
    seed: u64,
) -> Result<(DMatrix<f64>, f64)> {
    let n = qt.dim();
    let n_sites = source.sites();
    if n_sites < n {
        return Err(Error::invalid("need N >= n sites"));
    }
    if beta.len() != n || hdirs.nrows() != n || hdirs.ncols() != n_sites {
        return Err(Error::invalid("beta / field dimensions must match Qt and N"));
    }
    if !qt.is_positive_definite() {
        return Err(Error::domain("Qt must be positive definite"));
    }
    let qt_sqrt = qt.sqrt_psd();
    let beta_diag = DMatrix::from_diagonal(&DVector::from_row_slice(beta));

    let objective = |m: &DMatrix<f64>| -> f64 {
        let mut acc = 0.0;
        for k in 0..n {
            let row: Vec<f64> = m.row(k).iter().copied().collect();
            acc += beta[k] * source.row_energy(&row);
            acc += m.row(k).dot(&hdirs.row(k));
        }
        acc
    };
    // euclidean gradient in m: 2 diag(beta) (m X) + hdirs
    let euclid_grad = |m: &DMatrix<f64>| -> DMatrix<f64> {
        &beta_diag * source.apply(m) * 2.0 + hdirs
    };

    let outcomes: Vec<Option<(DMatrix<f64>, f64)>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha12Rng::seed_from_u64(split_seed(seed, r as u64));
            // random orthonormal-row frame via QR
            let raw = DMatrix::from_fn(n_sites, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let qr = raw.qr();
            let mut v = qr.q().columns(0, n).transpose().into_owned();
            let mut m = qt_sqrt.as_dmatrix() * &v;
            let mut val = objective(&m);
            let mut t_init = 0.1;
            for _ in 0..iters {
                let g_m = euclid_grad(&m);
                let g_v = qt_sqrt.as_dmatrix() * g_m;
                // project onto the tangent space of the row-Stiefel manifold
                let vg = &g_v * v.transpose();
                let sym = (&vg + vg.transpose()) * 0.5;
                let xi = &g_v - sym * &v;
                let xi_norm = xi.norm();
                if xi_norm <= 1e-12 {
                    break;
                }
                // backtracking ascent step with polar retraction; the
                // accepted step seeds the next search so flat directions
                // near the top of the spectrum are still traversed quickly
                let mut t = t_init;
                let mut moved = false;
                for _ in 0..60 {
                    let w = &v + &xi * t;
                    let c = &w * w.transpose();
                    let c_sym = SymMatrix::from_dmatrix(c).expect("frame gram is valid");
                    if c_sym.min_eig() <= 1e-12 {
                        t *= 0.5;
                        continue;
                    }
                    let v_new = c_sym.invsqrt_pd().expect("frame gram is PD").as_dmatrix() * &w;
                    let m_new = qt_sqrt.as_dmatrix() * &v_new;
                    let val_new = objective(&m_new);
                    if val_new > val + 1e-4 * t * xi_norm * xi_norm {
                        v = v_new;
                        m = m_new;
                        val = val_new;
                        moved = true;
                        t_init = (t * 2.0).min(64.0);
                        break;
                    }
                    t *= 0.5;
                }
                if !moved {
                    break;
                }
            }
            if val.is_finite() {
                Some((m, val))
            } else {
                None
            }
        })
        .collect();

    let mut best: Option<(DMatrix<f64>, f64)> = None;
    for out in outcomes.into_iter().flatten() {
        best = match best {
            None => Some(out),
            Some(b) if out.1 > b.1 => Some(out),
            Some(b) => Some(b),
        };
    }
    best.ok_or_else(|| Error::numerical("all ground-state ascent restarts failed"))
}
