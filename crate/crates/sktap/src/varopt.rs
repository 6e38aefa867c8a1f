//! The low-dimensional variational principle: maximize
//! `Phi(Qt) = GSE(beta, h, Qt) + log|Q - Qt|/2 + beta^T (Q - Qt)^{⊙2} beta/2`
//! over the Plefka region `{0 <= Qt < Q, |beta^{1/2}(Q - Qt)beta^{1/2}|_2 <= 1/sqrt(2)}`,
//! plus the dense n=1 scan oracle and the finite-size TAP supremum built on
//! the finite-size ground-state dual.
//!
//! Optimization runs over `S = beta^{1/2} (Q - Qt) beta^{1/2}` factored as
//! `R^T R` with `R` upper triangular; `S` is spectrally clipped to the
//! Plefka ball and the resulting `Qt` is projected onto the PSD cone, so
//! every parameter vector maps to a feasible point. Replicas with zero
//! temperature fall out of the sandwich, and their rows of `Qt` are
//! optimized directly.

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gse::{finite_n_gs_dual, gse_value};
use crate::mcsim::split_seed;
use crate::model::{entropy, onsager, plefka_member, plefka_norm, ModelParams, OverlapMatrix};
use crate::opt::{bfgs_minimize, fd_gradient, pattern_search_polish, BfgsOptions};
use crate::symmat::SymMatrix;

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Options for the variational maximization.
#[derive(Debug, Clone)]
pub struct VarOpts {
    pub seed: u64,
    pub restarts: usize,
    pub tol: f64,
    pub max_iters: usize,
    /// Random feasible points checked against the returned maximum.
    pub lattice_points: usize,
}

impl Default for VarOpts {
    fn default() -> Self {
        VarOpts {
            seed: 0,
            restarts: 16,
            tol: 1e-7,
            max_iters: 400,
            lattice_points: 1000,
        }
    }
}

/// Constraints active at the returned maximizer (within tolerance).
#[derive(Debug, Clone, Copy, Default)]
pub struct BoundaryFlags {
    /// `|beta^{1/2}(Q - Qt)beta^{1/2}|_2 = 1/sqrt(2)`.
    pub plefka_norm: bool,
    /// `Qt` touches the PSD cone boundary.
    pub psd_lower: bool,
    /// `Qt` touches `Q` (entropy boundary).
    pub upper: bool,
}

/// Result of the variational maximization.
#[derive(Debug, Clone)]
pub struct VarSolution {
    pub qstar: OverlapMatrix,
    pub value: f64,
    pub boundary_flags: BoundaryFlags,
    pub restarts_used: usize,
}

/// Index split by temperature sign: the sandwich parameterization only sees
/// replicas with `beta_k > 0`.
struct ParamLayout {
    n: usize,
    positive: Vec<usize>,
    /// pairs (k, l), k <= l, with at least one zero-temperature index
    direct_pairs: Vec<(usize, usize)>,
}

impl ParamLayout {
    fn new(p: &ModelParams) -> Self {
        let n = p.replicas();
        let positive: Vec<usize> = (0..n).filter(|&k| p.beta()[k] > 0.0).collect();
        let mut direct_pairs = Vec::new();
        for k in 0..n {
            for l in k..n {
                if p.beta()[k] == 0.0 || p.beta()[l] == 0.0 {
                    direct_pairs.push((k, l));
                }
            }
        }
        ParamLayout {
            n,
            positive,
            direct_pairs,
        }
    }

    fn np(&self) -> usize {
        self.positive.len()
    }

    fn dim(&self) -> usize {
        self.np() * (self.np() + 1) / 2 + self.direct_pairs.len()
    }

    /// Builds the feasible overlap matrix from a parameter vector:
    /// `S = R^T R` clipped to the Plefka ball, `Qt` assembled and projected
    /// onto the PSD cone. Returns `None` when `Q - Qt` fails to stay
    /// positive definite.
    fn feasible_qt(&self, p: &ModelParams, x: &[f64]) -> Option<SymMatrix> {
        let np = self.np();
        let mut r = DMatrix::<f64>::zeros(np, np);
        let mut idx = 0;
        for i in 0..np {
            for j in i..np {
                r[(i, j)] = x[idx];
                idx += 1;
            }
        }
        let s_raw = SymMatrix::from_dmatrix(r.transpose() * &r).expect("R^T R is symmetric");
        // spectral clip of the sandwich onto the Plefka ball
        let s = s_raw
            .matrix_function(|l| l.clamp(0.0, INV_SQRT2))
            .expect("clip is total");

        let mut qt = DMatrix::<f64>::zeros(self.n, self.n);
        for (a, &k) in self.positive.iter().enumerate() {
            for (b, &l) in self.positive.iter().enumerate() {
                let denom = (p.beta()[k] * p.beta()[l]).sqrt();
                qt[(k, l)] = p.q().get(k, l) - s.get(a, b) / denom;
            }
        }
        for (pair_idx, &(k, l)) in self.direct_pairs.iter().enumerate() {
            let v = x[idx + pair_idx];
            qt[(k, l)] = v;
            qt[(l, k)] = v;
        }
        let qt = SymMatrix::from_dmatrix(qt).expect("assembled Qt is symmetric");
        let projected = qt.psd_projection();
        if !p.q().sub(&projected).is_positive_definite() {
            return None;
        }
        // the PSD projection can only move Qt up, which shrinks the
        // sandwich, so the Plefka norm bound survives; the zero-beta rows
        // never enter the sandwich at all
        Some(projected)
    }

    /// Parameter vector whose feasible image is (approximately) `qt0`.
    fn encode(&self, p: &ModelParams, qt0: &SymMatrix) -> Vec<f64> {
        let np = self.np();
        let mut s = DMatrix::<f64>::zeros(np, np);
        for (a, &k) in self.positive.iter().enumerate() {
            for (b, &l) in self.positive.iter().enumerate() {
                s[(a, b)] = (p.beta()[k] * p.beta()[l]).sqrt() * (p.q().get(k, l) - qt0.get(k, l));
            }
        }
        let s_sym = SymMatrix::from_dmatrix(s).expect("sandwich is symmetric");
        let clipped = s_sym
            .matrix_function(|l| l.clamp(0.0, INV_SQRT2 * (1.0 - 1e-12)))
            .expect("clip is total");
        let r = upper_cholesky(&clipped);
        let mut x = Vec::with_capacity(self.dim());
        for i in 0..np {
            for j in i..np {
                x.push(r[(i, j)]);
            }
        }
        for &(k, l) in &self.direct_pairs {
            x.push(qt0.get(k, l));
        }
        x
    }
}

/// Upper-triangular factor with `R^T R = S` for PSD `S` (tiny diagonal
/// regularization absorbs semidefinite cases).
fn upper_cholesky(s: &SymMatrix) -> DMatrix<f64> {
    let n = s.dim();
    let shifted = s.add(&SymMatrix::identity(n).scale(1e-14));
    let chol = shifted
        .as_dmatrix()
        .clone()
        .cholesky()
        .unwrap_or_else(|| {
            s.add(&SymMatrix::identity(n).scale(1e-9))
                .as_dmatrix()
                .clone()
                .cholesky()
                .expect("regularized matrix is PD")
        });
    chol.l().transpose()
}

/// The variational objective `Phi(Qt)`; `-inf` when the entropy term is
/// undefined.
pub fn lowdim_objective(p: &ModelParams, qt: &SymMatrix) -> f64 {
    let ent = match entropy(p, qt) {
        Ok(e) => e,
        Err(_) => return f64::NEG_INFINITY,
    };
    let gse = match gse_value(p.beta(), p.hmag(), qt) {
        Ok(g) => g,
        Err(_) => return f64::NEG_INFINITY,
    };
    gse + ent + onsager(p, qt)
}

/// Gradient of `Phi` with respect to the overlap entries: analytic for the
/// entropy and Onsager terms, central finite differences (step `1e-6`) for
/// the ground-state term.
fn phi_gradient_qt(p: &ModelParams, qt: &SymMatrix) -> Option<DMatrix<f64>> {
    let n = p.replicas();
    let diff = p.q().sub(qt);
    if !diff.is_positive_definite() {
        return None;
    }
    let inv = diff.inverse_pd().ok()?;
    let mut grad = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            grad[(i, j)] =
                -0.5 * inv.get(i, j) - p.beta()[i] * diff.get(i, j) * p.beta()[j];
        }
    }
    let h = 1e-6;
    for i in 0..n {
        for j in i..n {
            let bump = |delta: f64| -> Option<f64> {
                let mut m = qt.as_dmatrix().clone();
                m[(i, j)] += delta;
                if i != j {
                    m[(j, i)] += delta;
                }
                let qt_b = SymMatrix::from_dmatrix(m).ok()?;
                gse_value(p.beta(), p.hmag(), &qt_b).ok()
            };
            let (fp, fm) = (bump(h)?, bump(-h)?);
            let d = (fp - fm) / (2.0 * h);
            // the symmetric bump moved both entries for i != j, so the
            // per-entry derivative is half of the measured slope
            let per_entry = if i == j { d } else { 0.5 * d };
            grad[(i, j)] += per_entry;
            if i != j {
                grad[(j, i)] += per_entry;
            }
        }
    }
    Some(grad)
}

fn run_one_restart(
    p: &ModelParams,
    layout: &ParamLayout,
    x0: &[f64],
    opts: &VarOpts,
) -> Option<(SymMatrix, f64)> {
    let neg_phi = |x: &[f64]| -> f64 {
        match layout.feasible_qt(p, x) {
            Some(qt) => -lowdim_objective(p, &qt),
            None => f64::INFINITY,
        }
    };
    // chain the Qt-space gradient through the parameterization by finite
    // differences of the map itself; where the clip or projection is active
    // this is only a descent estimate and the polish stage finishes the job
    let grad = |x: &[f64]| -> Vec<f64> {
        let qt = match layout.feasible_qt(p, x) {
            Some(qt) => qt,
            None => return vec![0.0; x.len()],
        };
        let g_qt = match phi_gradient_qt(p, &qt) {
            Some(g) => g,
            None => return fd_gradient(x, neg_phi, 1e-6),
        };
        let h = 1e-6;
        let mut out = vec![0.0; x.len()];
        let mut xp = x.to_vec();
        for i in 0..x.len() {
            let xi = xp[i];
            xp[i] = xi + h;
            let qp = layout.feasible_qt(p, &xp);
            xp[i] = xi - h;
            let qm = layout.feasible_qt(p, &xp);
            xp[i] = xi;
            match (qp, qm) {
                (Some(qp), Some(qm)) => {
                    let dq = qp.sub(&qm).scale(1.0 / (2.0 * h));
                    let mut acc = 0.0;
                    for a in 0..layout.n {
                        for b in 0..layout.n {
                            acc += g_qt[(a, b)] * dq.get(a, b);
                        }
                    }
                    out[i] = -acc;
                }
                _ => {
                    out[i] = 0.0;
                }
            }
        }
        out
    };

    let bfgs_opts = BfgsOptions {
        max_iters: opts.max_iters,
        grad_tol: (opts.tol * 1e-2).max(1e-12),
        f_tol: 1e-15,
    };
    let out = bfgs_minimize(x0, neg_phi, grad, &bfgs_opts);
    let (x_fin, val) = pattern_search_polish(&out.x, neg_phi, 0.05, 1e-10, 400);
    let qt = layout.feasible_qt(p, &x_fin)?;
    if !val.is_finite() {
        return None;
    }
    Some((qt, -val))
}

/// Maximizes the low-dimensional TAP functional over the Plefka region.
/// Deterministic in `opts.seed`; multistart with the documented seeds plus
/// random feasible points, best value kept with smallest-Frobenius
/// tie-breaking.
pub fn maximize_lowdim(p: &ModelParams, opts: &VarOpts) -> Result<VarSolution> {
    let layout = ParamLayout::new(p);
    let n = p.replicas();

    // multistart pool: Qt = 0, (1 - eta) Q, then random parameter vectors
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(opts.restarts.max(4));
    starts.push(layout.encode(p, &SymMatrix::zeros(n)));
    for eta in [0.1, 0.3, 0.5] {
        starts.push(layout.encode(p, &p.q().scale(1.0 - eta)));
    }
    while starts.len() < opts.restarts.max(4) {
        let mut rng = ChaCha12Rng::seed_from_u64(split_seed(opts.seed, starts.len() as u64));
        let x: Vec<f64> = (0..layout.dim()).map(|_| rng.gen_range(-0.9..0.9)).collect();
        starts.push(x);
    }

    let candidates: Vec<Option<(SymMatrix, f64)>> = starts
        .par_iter()
        .map(|x0| run_one_restart(p, &layout, x0, opts))
        .collect();

    let mut pool: Vec<(SymMatrix, f64)> = candidates.into_iter().flatten().collect();
    if pool.is_empty() {
        return Err(Error::numerical(
            "all variational restarts failed to produce a feasible point",
        ));
    }
    let restarts_used = pool.len();

    // validation lattice: random feasible points must not beat the incumbent
    let mut best = select_best(&pool);
    for round in 0..3 {
        let mut challengers = Vec::new();
        let mut rng = ChaCha12Rng::seed_from_u64(split_seed(opts.seed, 7_000 + round));
        for i in 0..opts.lattice_points {
            let x: Vec<f64> = (0..layout.dim())
                .map(|_| rng.gen_range(-1.2..1.2))
                .collect();
            if let Some(qt) = layout.feasible_qt(p, &x) {
                let v = lowdim_objective(p, &qt);
                if v > best.1 + opts.tol {
                    challengers.push((x, i));
                }
            }
        }
        // neighborhood of the incumbent
        let x_best = layout.encode(p, &best.0);
        for j in 0..64 {
            let mut x = x_best.clone();
            for v in x.iter_mut() {
                *v += rng.gen_range(-0.02..0.02);
            }
            if let Some(qt) = layout.feasible_qt(p, &x) {
                if lowdim_objective(p, &qt) > best.1 + opts.tol {
                    challengers.push((x, opts.lattice_points + j));
                }
            }
        }
        if challengers.is_empty() {
            break;
        }
        for (x, _) in challengers.into_iter().take(8) {
            if let Some(res) = run_one_restart(p, &layout, &x, opts) {
                pool.push(res);
            }
        }
        best = select_best(&pool);
    }

    let (qstar, value) = best;
    let norm = plefka_norm(p, &qstar)?;
    let scale = 1.0f64.max(qstar.spectral_norm());
    let flags = BoundaryFlags {
        plefka_norm: (norm - INV_SQRT2).abs() <= 1e-7,
        psd_lower: qstar.min_eig() <= 1e-9 * scale,
        upper: p.q().sub(&qstar).min_eig() <= 1e-9 * scale,
    };
    debug_assert!(plefka_member(p, &qstar, 0.0)?);
    Ok(VarSolution {
        qstar: OverlapMatrix(qstar),
        value,
        boundary_flags: flags,
        restarts_used,
    })
}

fn select_best(pool: &[(SymMatrix, f64)]) -> (SymMatrix, f64) {
    let best_val = pool.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    // ties within 1e-9 resolved toward the smallest Frobenius norm
    let mut best: Option<&(SymMatrix, f64)> = None;
    for cand in pool {
        if cand.1 >= best_val - 1e-9 {
            best = match best {
                None => Some(cand),
                Some(b) if cand.0.frobenius_norm() < b.0.frobenius_norm() => Some(cand),
                Some(b) => Some(b),
            };
        }
    }
    let chosen = best.expect("pool is nonempty");
    (chosen.0.clone(), best_val)
}

/// Dense scan + golden-section refinement of the scalar functional
/// `sqrt(2 b^2 q^2 + h^2 q) + (b^2/2)(1-q)^2 + log(1-q)/2` over the Plefka
/// interval `[max(0, 1 - 1/(sqrt(2) b)), 1)`.
pub fn solve_n1(beta: f64, h: f64, grid_points: usize) -> (f64, f64) {
    let q_lo = if beta > 0.0 {
        (1.0 - 1.0 / (std::f64::consts::SQRT_2 * beta)).max(0.0)
    } else {
        0.0
    };
    let q_hi = 1.0 - 1e-12;
    let phi = |q: f64| -> f64 {
        (2.0 * beta * beta * q * q + h * h * q).sqrt()
            + 0.5 * beta * beta * (1.0 - q) * (1.0 - q)
            + 0.5 * (1.0 - q).ln()
    };
    let pts = grid_points.max(8);
    let mut best_q = q_lo;
    let mut best_v = phi(q_lo);
    for i in 0..=pts {
        let q = q_lo + (q_hi - q_lo) * i as f64 / pts as f64;
        let v = phi(q);
        if v > best_v {
            best_v = v;
            best_q = q;
        }
    }
    // golden-section refinement inside the bracketing cells
    let step = (q_hi - q_lo) / pts as f64;
    let (mut lo, mut hi) = ((best_q - step).max(q_lo), (best_q + step).min(q_hi));
    let gr = (5.0f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let d = gr * (hi - lo);
        let (x1, x2) = (hi - d, lo + d);
        if phi(x1) > phi(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    let q_star = 0.5 * (lo + hi);
    let v_star = phi(q_star);
    if v_star >= best_v {
        (q_star, v_star)
    } else {
        (best_q, best_v)
    }
}

/// Finite-size TAP supremum: the outer maximization of `maximize_lowdim`
/// with the finite-size ground-state dual in place of the closed form.
/// Fields with all-zero rows propagate the dual degeneracy by substituting
/// the closed form.
pub fn tap_sup_finiten(
    p: &ModelParams,
    thetas: &[f64],
    hdirs: &DMatrix<f64>,
    opts: &VarOpts,
) -> Result<f64> {
    let n = p.replicas();
    if thetas.len() < n {
        return Err(Error::invalid("need N >= n energy levels"));
    }
    let zero_field = hdirs.norm() == 0.0;
    let zero_beta = p.beta().iter().any(|&b| b == 0.0);
    if zero_field || zero_beta {
        // dual degenerate: fall back to the limiting closed form
        return Ok(maximize_lowdim(p, opts)?.value);
    }
    let layout = ParamLayout::new(p);

    let gse_finite = |qt: &SymMatrix| -> f64 {
        // the dual needs Qt strictly PD; a microscopic ridge regularizes the
        // cone boundary that the outer search may probe
        let qt_reg = if qt.min_eig() <= 1e-10 {
            qt.add(&SymMatrix::identity(n).scale(1e-8))
        } else {
            qt.clone()
        };
        match finite_n_gs_dual(thetas, hdirs, p.beta(), &qt_reg, 1e-7, split_seed(opts.seed, 42)) {
            Ok(v) => v,
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let neg_phi = |x: &[f64]| -> f64 {
        match layout.feasible_qt(p, x) {
            Some(qt) => {
                let ent = match entropy(p, &qt) {
                    Ok(e) => e,
                    Err(_) => return f64::INFINITY,
                };
                let g = gse_finite(&qt);
                if !g.is_finite() {
                    return f64::INFINITY;
                }
                -(g + ent + onsager(p, &qt))
            }
            None => f64::INFINITY,
        }
    };

    // derivative-free outer search: the inner dual solves carry optimizer
    // noise that finite-difference gradients would amplify
    let restarts = opts.restarts.min(8).max(2);
    let mut starts: Vec<Vec<f64>> = vec![layout.encode(p, &SymMatrix::zeros(n))];
    starts.push(layout.encode(p, &p.q().scale(0.7)));
    // seed the search at the limiting maximizer
    if let Ok(limit_sol) = maximize_lowdim(p, opts) {
        starts.push(layout.encode(p, limit_sol.qstar.inner()));
    }
    while starts.len() < restarts {
        let mut rng = ChaCha12Rng::seed_from_u64(split_seed(opts.seed, 300 + starts.len() as u64));
        starts.push((0..layout.dim()).map(|_| rng.gen_range(-0.8..0.8)).collect());
    }
    let results: Vec<f64> = starts
        .par_iter()
        .map(|x0| {
            let (_, v) = pattern_search_polish(x0, neg_phi, 0.15, 1e-7, 200);
            -v
        })
        .collect();
    let best = results.into_iter().fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return Err(Error::numerical("finite-size TAP supremum failed"));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::annealed_fe;
    use crate::spectrum::deterministic_spectrum;
    use approx::assert_abs_diff_eq;

    fn params(n: usize, q_offdiag: f64, beta: &[f64], h: &[f64]) -> ModelParams {
        let q = SymMatrix::from_fn(n, |i, j| if i == j { 1.0 } else { q_offdiag }).unwrap();
        ModelParams::new(q, beta.to_vec(), h.to_vec()).unwrap()
    }

    #[test]
    fn solve_n1_closed_forms() {
        // HT with no field: q* = 0 and value beta^2/2
        let (q, v) = solve_n1(0.5, 0.0, 4000);
        assert!(q.abs() <= 1e-8);
        assert_abs_diff_eq!(v, 0.125, epsilon = 1e-10);

        // beta = 1, h = 0: stationarity gives q* = 1 - 1/sqrt(2) and
        // value sqrt(2) - 3/4 - log(2)/4
        let (q, v) = solve_n1(1.0, 0.0, 4000);
        assert_abs_diff_eq!(q, 1.0 - INV_SQRT2, epsilon = 1e-7);
        let exact = std::f64::consts::SQRT_2 - 0.75 - 0.25 * std::f64::consts::LN_2;
        assert_abs_diff_eq!(v, exact, epsilon = 1e-9);

        // beta = 0, h = 1: maximize sqrt(q) + log(1-q)/2;
        // stationarity 1/(2 sqrt q) = 1/(2(1-q)) gives q* = (3 - sqrt 5)/2
        let (q, v) = solve_n1(0.0, 1.0, 4000);
        let q_exact = (3.0 - 5.0f64.sqrt()) / 2.0;
        assert_abs_diff_eq!(q, q_exact, epsilon = 1e-7);
        assert_abs_diff_eq!(
            v,
            q_exact.sqrt() + 0.5 * (1.0 - q_exact).ln(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn maximize_matches_scan_n1() {
        let opts = VarOpts {
            restarts: 8,
            lattice_points: 200,
            ..Default::default()
        };
        for &beta in &[0.2, 1.0] {
            for &h in &[0.0, 0.5] {
                let p = params(1, 0.0, &[beta], &[h]);
                let sol = maximize_lowdim(&p, &opts).unwrap();
                let (q_scan, v_scan) = solve_n1(beta, h, 20_000);
                assert!(
                    (sol.value - v_scan).abs() <= 1e-6,
                    "beta={beta}, h={h}: engine {} vs scan {v_scan}",
                    sol.value
                );
                assert!(
                    (sol.qstar.inner().get(0, 0) - q_scan).abs() <= 1e-3,
                    "beta={beta}, h={h}: q {} vs {q_scan}",
                    sol.qstar.inner().get(0, 0)
                );
            }
        }
    }

    #[test]
    fn ht_collapse_no_field() {
        // h = 0 in the high-temperature region: Qt* = 0, value = annealed
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let opts = VarOpts {
            restarts: 8,
            lattice_points: 200,
            ..Default::default()
        };
        for _ in 0..15 {
            let n = rng.gen_range(1..4);
            let off = rng.gen_range(-0.3..0.6f64);
            let q = SymMatrix::from_fn(n, |i, j| if i == j { 1.0 } else { off }).unwrap();
            if !q.is_positive_definite() {
                continue;
            }
            let p = match ModelParams::new(q, vec![rng.gen_range(0.05..0.4); n], vec![0.0; n]) {
                Ok(p) => p,
                Err(_) => continue,
            };
            if !crate::model::ht_member(&p) {
                continue;
            }
            let sol = maximize_lowdim(&p, &opts).unwrap();
            assert!(
                sol.qstar.inner().max_abs() <= 1e-4,
                "HT maximizer not at 0: {:?}",
                sol.qstar.inner().max_abs()
            );
            assert!(
                (sol.value - annealed_fe(&p).unwrap()).abs() <= 1e-6,
                "HT value {} vs annealed {}",
                sol.value,
                annealed_fe(&p).unwrap()
            );
        }
    }

    #[test]
    fn beta_zero_collapses_to_entropy_plus_field() {
        // beta = 0, h = 0: GSE vanishes, entropy is maximal at Qt = 0
        let p = params(2, 0.3, &[0.0, 0.0], &[0.0, 0.0]);
        let opts = VarOpts {
            restarts: 8,
            lattice_points: 300,
            ..Default::default()
        };
        let sol = maximize_lowdim(&p, &opts).unwrap();
        assert!(sol.qstar.inner().max_abs() <= 1e-5);
        assert_abs_diff_eq!(
            sol.value,
            0.5 * p.q().logdet().unwrap(),
            epsilon = 1e-6
        );
    }

    #[test]
    fn value_recomputes_and_is_feasible() {
        let p = params(2, 0.4, &[0.9, 1.2], &[0.5, 0.2]);
        let opts = VarOpts::default();
        let sol = maximize_lowdim(&p, &opts).unwrap();
        let recomputed = lowdim_objective(&p, sol.qstar.inner());
        assert!(
            (recomputed - sol.value).abs() <= 1e-9,
            "stored {} vs recomputed {recomputed}",
            sol.value
        );
        assert!(plefka_member(&p, sol.qstar.inner(), 0.0).unwrap());
        assert!(sol.restarts_used > 0);
    }

    #[test]
    fn monotone_in_field() {
        let opts = VarOpts {
            restarts: 8,
            lattice_points: 200,
            ..Default::default()
        };
        let mut prev = f64::NEG_INFINITY;
        for &h in &[0.0, 0.3, 0.8, 1.2] {
            let p = params(2, 0.3, &[0.8, 0.8], &[h, h]);
            let sol = maximize_lowdim(&p, &opts).unwrap();
            assert!(
                sol.value >= prev - 1e-8,
                "value decreased in h: {} after {prev}",
                sol.value
            );
            prev = sol.value;
        }
    }

    #[test]
    fn finite_tap_ht_no_field_equals_annealed() {
        let p = params(2, 0.3, &[0.4, 0.4], &[0.0, 0.0]);
        let thetas = deterministic_spectrum(200);
        let hdirs = DMatrix::zeros(2, 200);
        let opts = VarOpts {
            restarts: 6,
            lattice_points: 150,
            ..Default::default()
        };
        let v = tap_sup_finiten(&p, &thetas, &hdirs, &opts).unwrap();
        assert!(
            (v - annealed_fe(&p).unwrap()).abs() <= 1e-6,
            "finite TAP {v} vs annealed"
        );
    }

    #[test]
    fn finite_tap_gap_shrinks_with_n() {
        let p = params(1, 0.0, &[1.0], &[0.5]);
        let opts = VarOpts {
            restarts: 4,
            lattice_points: 100,
            ..Default::default()
        };
        let limit = maximize_lowdim(&p, &opts).unwrap().value;
        let mut gaps = Vec::new();
        for &n_sites in &[500usize, 2000] {
            let thetas = deterministic_spectrum(n_sites);
            let mut rng = ChaCha12Rng::seed_from_u64(77);
            let mut u: Vec<f64> = (0..n_sites)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            u.iter_mut().for_each(|x| *x /= norm);
            let hdirs = DMatrix::from_fn(1, n_sites, |_, i| 0.5 * u[i]);
            let v = tap_sup_finiten(&p, &thetas, &hdirs, &opts).unwrap();
            gaps.push((v - limit).abs());
        }
        assert!(
            gaps[1] <= gaps[0] + 1e-3,
            "finite-size gap did not shrink: {gaps:?}"
        );
        assert!(gaps[1] <= 0.05, "gap at N=2000 is {}", gaps[1]);
    }
}
