//! Semicircle law on `[-sqrt(2), sqrt(2)]`, classical locations, binned
//! spectral measures and the spherical-integral functionals `G`, `v`, `F_K`.
//!
//! The binned measure puts weight `rho_k` on `K` equally spaced atoms `x_k`
//! covering the semicircle support, with each weight the semicircle mass of
//! the bin `[x_k, x_{k+1})`. `F_K` is the rank-one spherical-integral rate
//! function of that discrete measure; on the high-temperature range
//! `[0, 1/sqrt(2)]` it converges uniformly to `beta^2/2` as `K` grows.

use crate::error::{Error, Result};

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Semicircle density `sqrt(2 - x^2)/pi` on `[-sqrt(2), sqrt(2)]`.
pub fn semicircle_density(x: f64) -> f64 {
    if x.abs() >= SQRT2 {
        0.0
    } else {
        (2.0 - x * x).sqrt() / std::f64::consts::PI
    }
}

/// Closed-form semicircle CDF, clamped outside the support.
///
/// `F(t) = 1/2 + t sqrt(2-t^2)/(2 pi) + asin(t/sqrt(2))/pi` on the support.
pub fn semicircle_cdf(theta: f64) -> f64 {
    if theta <= -SQRT2 {
        return 0.0;
    }
    if theta >= SQRT2 {
        return 1.0;
    }
    let pi = std::f64::consts::PI;
    0.5 + theta * (2.0 - theta * theta).sqrt() / (2.0 * pi) + (theta / SQRT2).asin() / pi
}

/// Classical location `theta_q = inf { theta : F(theta) = q }` for
/// `q` in `(0, 1]`.
pub fn classical_location(q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::invalid(format!(
            "classical location requires q in (0, 1], got {q}"
        )));
    }
    if q == 1.0 {
        return Ok(SQRT2);
    }
    // Bisection on the closed-form CDF. The density vanishes like a square
    // root at the edges, so Newton is unreliable there; plain bisection to
    // f64 resolution keeps the CDF residual comfortably below 1e-10.
    let (mut lo, mut hi) = (-SQRT2, SQRT2);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if semicircle_cdf(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Compensated (Kahan) summation.
fn kahan_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for t in terms {
        let y = t - c;
        let s = sum + y;
        c = (s - sum) - y;
        sum = s;
    }
    sum
}

/// Discrete spectral measure `mu_K` on `K` equally spaced atoms.
#[derive(Debug, Clone)]
pub struct BinnedSpectrum {
    bins: usize,
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl BinnedSpectrum {
    /// Builds `mu_K`: atoms `x_k = -sqrt(2) + (k-1) * 2 sqrt(2)/K` with the
    /// semicircle mass of each bin as weight; the last bin takes the whole
    /// right tail.
    pub fn new(bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::invalid(format!("need at least 2 bins, got {bins}")));
        }
        let step = 2.0 * SQRT2 / bins as f64;
        let atoms: Vec<f64> = (0..bins).map(|k| -SQRT2 + k as f64 * step).collect();
        let mut weights = Vec::with_capacity(bins);
        for k in 0..bins {
            let w = if k + 1 < bins {
                semicircle_cdf(atoms[k + 1]) - semicircle_cdf(atoms[k])
            } else {
                1.0 - semicircle_cdf(atoms[k])
            };
            weights.push(w.max(0.0));
        }
        Ok(BinnedSpectrum {
            bins,
            atoms,
            weights,
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Rightmost atom `x_K = sqrt(2) - 2 sqrt(2)/K`.
    pub fn rightmost_atom(&self) -> f64 {
        *self.atoms.last().unwrap()
    }

    /// Stieltjes transform `G(z) = sum_k rho_k / (z - x_k)` for `z` strictly
    /// right of the support.
    pub fn stieltjes(&self, z: f64) -> Result<f64> {
        let edge = self.rightmost_atom();
        if !(z > edge) {
            return Err(Error::domain(format!(
                "Stieltjes transform needs z > {edge:.6} (rightmost atom), got {z}"
            )));
        }
        Ok(self.stieltjes_unchecked(z))
    }

    fn stieltjes_unchecked(&self, z: f64) -> f64 {
        kahan_sum(
            self.weights
                .iter()
                .zip(&self.atoms)
                .map(|(&w, &x)| w / (z - x)),
        )
    }

    /// Distances from the rightmost atom to every atom, exact multiples of
    /// the grid step; working in this offset coordinate avoids the
    /// catastrophic cancellation of `v - x_k` right at the support edge.
    fn edge_distances(&self) -> Vec<f64> {
        let step = 2.0 * SQRT2 / self.bins as f64;
        (0..self.bins)
            .map(|k| (self.bins - 1 - k) as f64 * step)
            .collect()
    }

    fn stieltjes_at_offset(&self, dist: &[f64], d: f64) -> f64 {
        kahan_sum(self.weights.iter().zip(dist).map(|(&w, &r)| w / (r + d)))
    }

    fn stieltjes_derivative_at_offset(&self, dist: &[f64], d: f64) -> f64 {
        -kahan_sum(
            self.weights
                .iter()
                .zip(dist)
                .map(|(&w, &r)| w / ((r + d) * (r + d))),
        )
    }

    /// Inverse Stieltjes transform: the unique `v > x_K` with `G(v) = z`,
    /// for `z > 0`. `G` diverges at the rightmost atom, so the inverse
    /// branch always exists for the discrete measure.
    pub fn v_of(&self, z: f64) -> Result<f64> {
        Ok(self.rightmost_atom() + self.v_offset(z)?)
    }

    /// `v(z) - x_K`, the solver's native output.
    fn v_offset(&self, z: f64) -> Result<f64> {
        if !(z > 0.0) {
            return Err(Error::invalid(format!("v(z) requires z > 0, got {z}")));
        }
        let dist = self.edge_distances();
        // Guaranteed bracket: G -> +inf at the edge and
        // G(x_K + 1/z + 2 sqrt 2) < 1/(1/z) = z.
        let mut lo = 1e-300;
        let mut hi = 1.0 / z + 2.0 * SQRT2;
        // Bisection to a narrow interval, then Newton polish.
        for _ in 0..200 {
            if hi - lo <= 1e-8 * hi.max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.stieltjes_at_offset(&dist, mid) > z {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut d = 0.5 * (lo + hi);
        let mut best = d;
        let mut best_resid = (self.stieltjes_at_offset(&dist, d) - z).abs();
        for _ in 0..60 {
            let g = self.stieltjes_at_offset(&dist, d);
            let resid = (g - z).abs();
            if resid < best_resid {
                best_resid = resid;
                best = d;
            }
            if resid <= 1e-13 * z.max(1.0) {
                return Ok(d);
            }
            let gp = self.stieltjes_derivative_at_offset(&dist, d);
            let step = (g - z) / gp;
            let mut next = d - step;
            if !(next > 0.0) {
                next = 0.5 * d;
            }
            if next == d {
                break;
            }
            d = next;
        }
        if best_resid <= 1e-12 * z.max(1.0) {
            Ok(best)
        } else {
            Err(Error::numerical(format!(
                "v(z) did not converge for z={z}: residual {best_resid:.3e}"
            )))
        }
    }

    /// Spherical-integral rate function
    /// `F_K(beta) = (2 beta v - log(2 beta) - sum_k rho_k log(v - x_k) - 1)/2`
    /// with `v = v(2 beta)`, extended continuously by `F_K(0) = 0`.
    ///
    /// The general rate function carries terms in the support edge
    /// `lambda*`; they cancel algebraically whenever `v` is the inverse
    /// transform branch, which for the discrete measure is always the case,
    /// so the simplified expression above is exact.
    pub fn fk(&self, beta: f64) -> Result<f64> {
        if beta < 0.0 {
            return Err(Error::invalid(format!("F_K requires beta >= 0, got {beta}")));
        }
        if beta < 1e-8 {
            return Ok(0.0);
        }
        let z = 2.0 * beta;
        let d = self.v_offset(z)?;
        let v = self.rightmost_atom() + d;
        let dist = self.edge_distances();
        let log_moment = kahan_sum(
            self.weights
                .iter()
                .zip(&dist)
                .map(|(&w, &r)| w * (r + d).ln()),
        );
        Ok(0.5 * (z * v - z.ln() - log_moment - 1.0))
    }

    /// `F_K'(beta) = v(2 beta) - 1/(2 beta)` for `beta > 0`.
    pub fn fk_prime(&self, beta: f64) -> Result<f64> {
        if !(beta > 0.0) {
            return Err(Error::invalid(format!(
                "F_K' requires beta > 0, got {beta}"
            )));
        }
        let z = 2.0 * beta;
        Ok(self.v_of(z)? - 1.0 / z)
    }
}

/// Classical locations `theta_{i/N}` for `i = 1..N`; ascending, last entry
/// `sqrt(2)`.
pub fn deterministic_spectrum(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| classical_location(i as f64 / n as f64).expect("i/N lies in (0,1]"))
        .collect()
}
