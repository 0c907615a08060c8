//! Directed kernels: polar decomposition, measure-weighted SVD pairs and the
//! filtered reconstruction / dyadic pyramid built on them.

use crate::error::{check_index, check_len, Error, Result};
use crate::filters::LowPassFilter;
use crate::system::{weighted_coefficients, AdmissibleSystem, FunctionSamples, Metric, Provenance};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

pub use crate::system::lp_norm;

/// Relative slack used by [`frame_check`].
pub const FRAME_SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct PolarDecomposition {
    /// `sqrt(W W*)`.
    pub p: DMatrix<Complex64>,
    /// Unitary factor with `P U = W`.
    pub u: DMatrix<Complex64>,
    pub rank: usize,
    /// `W` is rank-deficient, so `U` depends on the null-space completion.
    pub non_unique: bool,
}

pub fn to_complex(w: &DMatrix<f64>) -> DMatrix<Complex64> {
    w.map(|v| Complex64::new(v, 0.0))
}

fn check_square(w: &DMatrix<Complex64>) -> Result<()> {
    if w.nrows() != w.ncols() || w.nrows() == 0 {
        return Err(Error::InvalidArgument(format!(
            "matrix must be square and nonempty, got {}x{}",
            w.nrows(),
            w.ncols()
        )));
    }
    if w.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    Ok(())
}

struct Svd {
    x: DMatrix<Complex64>,
    s: DVector<f64>,
    y: DMatrix<Complex64>,
}

fn reconstruction_residual(f: &Svd, m: &DMatrix<Complex64>) -> f64 {
    let mut xs = f.x.clone();
    for (c, sv) in f.s.iter().enumerate() {
        xs.column_mut(c).scale_mut(*sv);
    }
    (xs * f.y.adjoint() - m).norm()
}

/// nalgebra first; its complex SVD occasionally returns a wrong factorization
/// on rank-deficient input, so a one-sided Jacobi SVD backs it up.
fn svd(m: DMatrix<Complex64>) -> Result<Svd> {
    let bound = 1e-10 * m.norm();
    let fast = m.clone().try_svd(true, true, f64::EPSILON, 0).and_then(|d| {
        let f = Svd { x: d.u?, s: d.singular_values, y: d.v_t?.adjoint() };
        (reconstruction_residual(&f, &m) <= bound).then_some(f)
    });
    if let Some(f) = fast {
        return Ok(f);
    }
    let f = jacobi_svd(&m)?;
    let resid = reconstruction_residual(&f, &m);
    if resid > bound {
        return Err(Error::Numeric(format!("SVD reconstruction residual {resid:e} too large")));
    }
    Ok(f)
}

/// One-sided (Hestenes) Jacobi SVD of a square matrix.
fn jacobi_svd(m: &DMatrix<Complex64>) -> Result<Svd> {
    let n = m.ncols();
    let mut a = m.clone();
    let mut v = DMatrix::<Complex64>::identity(n, n);
    let mut converged = false;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dotc(&a.column(q));
                let g = gamma.norm();
                if g <= f64::EPSILON * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for i in 0..mat.nrows() {
                        let (xp, xq) = (mat[(i, p)], mat[(i, q)]);
                        mat[(i, p)] = xp * c - xq * phase.conj() * s;
                        mat[(i, q)] = xp * phase * s + xq * c;
                    }
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numeric("Jacobi SVD did not converge".into()));
    }
    let s = DVector::from_fn(n, |c, _| a.column(c).norm());
    let smax = s.max();
    let mut x = DMatrix::<Complex64>::zeros(n, n);
    let mut missing = Vec::new();
    for c in 0..n {
        if s[c] > n as f64 * f64::EPSILON * smax && s[c] > 0.0 {
            x.set_column(c, &(a.column(c) / Complex64::new(s[c], 0.0)));
        } else {
            missing.push(c);
        }
    }
    // complete the left vectors of (numerically) zero singular values to a unitary basis
    let mut e = 0;
    for c in missing {
        loop {
            if e >= n {
                return Err(Error::Numeric("could not complete the left singular basis".into()));
            }
            let mut cand = DVector::<Complex64>::zeros(n);
            cand[e] = Complex64::new(1.0, 0.0);
            e += 1;
            for _ in 0..2 {
                for k in 0..n {
                    if k == c || x.column(k).norm_squared() == 0.0 {
                        continue;
                    }
                    let proj = x.column(k).dotc(&cand);
                    cand -= x.column(k) * proj;
                }
            }
            let nrm = cand.norm();
            if nrm > 0.5 {
                x.set_column(c, &(cand / Complex64::new(nrm, 0.0)));
                break;
            }
        }
    }
    Ok(Svd { x, s, y: v })
}

fn numeric_rank(s: &DVector<f64>) -> usize {
    let n = s.len();
    let smax = s.max();
    let tol = n as f64 * f64::EPSILON * smax;
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|v| **v > tol).count()
}

/// `W = P U` with `P = X S X*`, `U = X Y*` from `W = X S Y*`.
pub fn polar_decompose(w: &DMatrix<Complex64>) -> Result<PolarDecomposition> {
    check_square(w)?;
    let n = w.nrows();
    let Svd { x, s, y } = svd(w.clone())?;
    let mut xs = x.clone();
    for (c, sv) in s.iter().enumerate() {
        xs.column_mut(c).scale_mut(*sv);
    }
    let p = xs * x.adjoint();
    // symmetrize away round-off
    let p = (&p + p.adjoint()) * Complex64::new(0.5, 0.0);
    let u = &x * y.adjoint();
    let rank = numeric_rank(&s);
    Ok(PolarDecomposition { p, u, rank, non_unique: rank < n })
}

/// Two systems on the same points: `phi_k` (left) and `psi_k = U* phi_k` (right),
/// sharing the singular values as eigenvalues.
#[derive(Debug, Clone)]
pub struct DirectedPair {
    pub base: AdmissibleSystem,
    pub dual: AdmissibleSystem,
    /// `D^{-1/2} X Y* D^{1/2}` on all `N` modes.
    pub isometry: DMatrix<Complex64>,
    pub non_unique_isometry: bool,
    /// All `N` singular values, ascending.
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct PairOptions {
    /// Measure weights; uniform `1/N` when absent.
    pub weights: Option<Vec<f64>>,
    pub points: Option<Vec<Vec<f64>>>,
    /// Defaults to [`Metric::Discrete`] without points, [`Metric::Euclidean`] with them.
    pub metric: Option<Metric>,
}

pub fn build_directed_pair(w: &DMatrix<Complex64>, k: usize) -> Result<DirectedPair> {
    build_directed_pair_with(w, k, &PairOptions::default())
}

/// SVD of `D^{1/2} W D^{-1/2}`, keeping the `K` smallest singular triples.
pub fn build_directed_pair_with(w: &DMatrix<Complex64>, k: usize, opts: &PairOptions) -> Result<DirectedPair> {
    check_square(w)?;
    let n = w.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("need 1 <= K <= N, got K = {k}, N = {n}")));
    }
    let weights = match &opts.weights {
        Some(v) => {
            check_len(n, v.len())?;
            v.clone()
        }
        None => vec![1.0 / n as f64; n],
    };
    if weights.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument("measure weights must be positive".into()));
    }
    let sq: Vec<f64> = weights.iter().map(|v| v.sqrt()).collect();
    let m = DMatrix::from_fn(n, n, |i, j| w[(i, j)] * (sq[i] / sq[j]));
    let Svd { x, s, y } = svd(m)?;
    let rank = numeric_rank(&s);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]).then(a.cmp(&b)));

    let singular_values: Vec<f64> = order.iter().map(|&c| s[c]).collect();
    let phi = DMatrix::from_fn(n, k, |i, c| x[(i, order[c])] / sq[i]);
    let psi = DMatrix::from_fn(n, k, |i, c| y[(i, order[c])] / sq[i]);
    let isometry = DMatrix::from_fn(n, n, |i, j| {
        let mut acc = Complex64::default();
        for c in 0..n {
            acc += x[(i, c)] * y[(j, c)].conj();
        }
        acc * (sq[j] / sq[i])
    });

    let points = opts.points.clone().unwrap_or_else(|| (0..n).map(|i| vec![i as f64]).collect());
    let metric =
        opts.metric.clone().unwrap_or(if opts.points.is_some() { Metric::Euclidean } else { Metric::Discrete });
    let lambdas = singular_values[..k].to_vec();
    let base = AdmissibleSystem::new(
        points.clone(),
        metric.clone(),
        weights.clone(),
        lambdas.clone(),
        phi,
        Provenance::SvdLeft,
    )?;
    let dual = AdmissibleSystem::new(points, metric, weights, lambdas, psi, Provenance::SvdRight)?;
    Ok(DirectedPair { base, dual, isometry, non_unique_isometry: rank < n, singular_values })
}

impl DirectedPair {
    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.base.eigenvalues()
    }

    /// `phi = psi` up to round-off, as for a symmetric PSD kernel.
    pub fn is_degenerate(&self, tol: f64) -> bool {
        (self.base.eigenfunctions() - self.dual.eigenfunctions()).iter().all(|z| z.norm() < tol)
    }

    /// `f_hat(Xi'; k) = <f, psi_k>`.
    pub fn transformed_coefficients(&self, f: &FunctionSamples) -> Result<DVector<Complex64>> {
        self.dual.coefficients(f)
    }

    /// `U f` through the stored isometry.
    pub fn apply_isometry(&self, f: &FunctionSamples) -> Result<FunctionSamples> {
        check_len(self.len(), f.len())?;
        Ok(&self.isometry * f)
    }

    /// `Phi_n(x_i, x_j) = sum_k h(lambda_k/n) phi_k(x_i) conj(psi_k(x_j))`.
    pub fn kernel(&self, h: &LowPassFilter, n: f64, i: usize, j: usize) -> Result<Complex64> {
        check_index(i, self.len())?;
        check_index(j, self.len())?;
        Ok(self
            .eigenvalues()
            .iter()
            .enumerate()
            .map(|(k, l)| h.value(l / n) * self.base.phi(i, k) * self.dual.phi(j, k).conj())
            .sum())
    }

    /// Reconstructs `W` from the stored triples; exact only when `K = N`.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let n = self.len();
        let w = self.base.weights();
        DMatrix::from_fn(n, n, |i, j| {
            let mut acc = Complex64::default();
            for (k, l) in self.eigenvalues().iter().enumerate() {
                acc += self.base.phi(i, k) * self.dual.phi(j, k).conj() * *l;
            }
            acc * w[j]
        })
    }
}

fn filtered(base: &AdmissibleSystem, h: &LowPassFilter, n: f64, coeffs: &DVector<Complex64>) -> FunctionSamples {
    let g = DVector::from_fn(coeffs.len(), |k, _| coeffs[k] * h.value(base.eigenvalues()[k] / n));
    base.eigenfunctions() * g
}

fn check_scale(n: f64) -> Result<()> {
    if n > 0.0 && n.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("scale n = {n} must be positive")))
    }
}

/// `sigma_n f = sum_k h(lambda_k/n) <f, psi_k> phi_k`.
pub fn sigma(pair: &DirectedPair, h: &LowPassFilter, n: f64, f: &FunctionSamples) -> Result<FunctionSamples> {
    check_scale(n)?;
    let c = pair.transformed_coefficients(f)?;
    Ok(filtered(&pair.base, h, n, &c))
}

/// Dyadic pyramid from expansion coefficients against `base`.
pub fn tau_from_coefficients(
    base: &AdmissibleSystem,
    h: &LowPassFilter,
    max_level: u32,
    coeffs: &DVector<Complex64>,
) -> Vec<FunctionSamples> {
    let mut out = Vec::with_capacity(max_level as usize + 1);
    let mut prev = filtered(base, h, 1.0, coeffs);
    out.push(prev.clone());
    for j in 1..=max_level {
        let cur = filtered(base, h, 2f64.powi(j as i32), coeffs);
        out.push(&cur - &prev);
        prev = cur;
    }
    out
}

/// `tau_0 = sigma_1 f`, `tau_j = sigma_{2^j} f - sigma_{2^{j-1}} f`.
pub fn tau_pyramid(
    pair: &DirectedPair,
    h: &LowPassFilter,
    max_level: u32,
    f: &FunctionSamples,
) -> Result<Vec<FunctionSamples>> {
    let c = pair.transformed_coefficients(f)?;
    Ok(tau_from_coefficients(&pair.base, h, max_level, &c))
}

/// Smallest `J` with `h(lambda_max / 2^J) = 1` for every filter.
pub fn levels_to_cover(lambda_max: f64) -> u32 {
    let mut j = 0u32;
    while lambda_max / 2f64.powi(j as i32) >= 0.5 {
        j += 1;
    }
    j
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameCheck {
    pub sum_sq: f64,
    /// `||P_K U f||^2` over the stored modes.
    pub energy: f64,
    /// `||U f||^2` with the full isometry.
    pub full_energy: f64,
    pub levels: u32,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

/// Checks `sum ||tau_j||^2 <= ||Uf||^2 <= 5 sum ||tau_j||^2`.
pub fn frame_check(pair: &DirectedPair, h: &LowPassFilter, f: &FunctionSamples) -> Result<FrameCheck> {
    let c = pair.transformed_coefficients(f)?;
    let lmax = pair.eigenvalues().iter().copied().fold(0.0, f64::max);
    let levels = levels_to_cover(lmax);
    let taus = tau_from_coefficients(&pair.base, h, levels, &c);
    let w = pair.base.weights();
    let mut sum_sq = 0.0;
    for t in &taus {
        sum_sq += lp_norm(w, t, 2.0)?.powi(2);
    }
    let energy: f64 = c.iter().map(|z| z.norm_sqr()).sum();
    let full_energy = lp_norm(w, &pair.apply_isometry(f)?, 2.0)?.powi(2);
    let lower_ok = sum_sq <= energy * (1.0 + FRAME_SLACK);
    let upper_ok = energy <= 5.0 * sum_sq * (1.0 + FRAME_SLACK);
    Ok(FrameCheck { sum_sq, energy, full_energy, levels, lower_ok, upper_ok })
}

/// `W[i][j] = (2 pi t)^{-1/2} exp(-|x_i - x_j - z|^2 / t) w_j`.
pub fn shifted_gaussian_kernel(
    points: &[Vec<f64>],
    t: f64,
    z_star: &[f64],
    weights: Option<&[f64]>,
) -> Result<DMatrix<f64>> {
    let n = points.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no points".into()));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t = {t} must be positive")));
    }
    let dim = z_star.len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::InvalidArgument(format!("shift has dimension {dim} but a point has dimension {}", p.len())));
    }
    let w: Vec<f64> = match weights {
        Some(v) => {
            check_len(n, v.len())?;
            v.to_vec()
        }
        None => vec![1.0 / n as f64; n],
    };
    let c = (2.0 * std::f64::consts::PI * t).powf(-0.5);
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let d2: f64 = (0..dim).map(|a| (points[i][a] - points[j][a] - z_star[a]).powi(2)).sum();
        c * (-d2 / t).exp() * w[j]
    }))
}

#[derive(Debug, Clone)]
pub struct ChungCheck {
    pub lhs: DMatrix<Complex64>,
    pub rhs: DMatrix<Complex64>,
    pub max_abs_diff: f64,
}

/// Evaluates `I - (W+W*)/2` and `2(I - ((W+I)/2)((W+I)*/2)) - (I - W W*)/2`.
pub fn chung_symmetrization_identity_check(w: &DMatrix<Complex64>) -> Result<ChungCheck> {
    check_square(w)?;
    let n = w.nrows();
    let id = DMatrix::<Complex64>::identity(n, n);
    let half = Complex64::new(0.5, 0.0);
    let wa = w.adjoint();
    let lhs = &id - (w + &wa) * half;
    let b = (w + &id) * half;
    let rhs = (&id - &b * b.adjoint()) * Complex64::new(2.0, 0.0) - (&id - w * &wa) * half;
    let max_abs_diff = (&lhs - &rhs).iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(ChungCheck { lhs, rhs, max_abs_diff })
}

/// Coefficients of `f` in an arbitrary basis under `weights`.
pub fn coefficients_in(basis: &DMatrix<Complex64>, weights: &[f64], f: &FunctionSamples) -> Result<DVector<Complex64>> {
    check_len(weights.len(), f.len())?;
    check_len(basis.nrows(), f.len())?;
    Ok(weighted_coefficients(basis, weights, f))
}
