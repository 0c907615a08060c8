//! Two coupled systems: landmark connections, tensor and joint filtered
//! operators, lifting from system 2 to system 1, and joint kernels/distances.

use crate::error::{check_index, check_len, Error, Result};
use crate::filters::LowPassFilter;
use crate::regress::fit_line;
use crate::system::{AdmissibleSystem, FunctionSamples};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Entries below this magnitude are not stored.
pub const SPARSITY_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectionEntry {
    /// Mode index in system 1.
    pub j: usize,
    /// Mode index in system 2.
    pub k: usize,
    pub value: Complex64,
    /// Joint eigenvalue `ell_{j,k}`.
    pub ell: Option<f64>,
}

/// Sparse coupling `A_{j,k}` between the modes of two systems.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<ConnectionEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JointEigenRule {
    /// `max(lambda_1j, lambda_2k)`; keeps the output band-limited with `alpha = 1`.
    #[default]
    Max,
    /// `sqrt(lambda_1j^2 + lambda_2k^2)`.
    Quadratic,
    /// `lambda_1j`.
    First,
}

impl JointEigenRule {
    pub fn apply(self, l1: f64, l2: f64) -> f64 {
        match self {
            JointEigenRule::Max => l1.max(l2),
            JointEigenRule::Quadratic => l1.hypot(l2),
            JointEigenRule::First => l1,
        }
    }
}

impl ConnectionMatrix {
    /// Validates indices, drops negligible entries and sorts by `(j, k)`.
    pub fn new(rows: usize, cols: usize, entries: Vec<ConnectionEntry>) -> Result<Self> {
        let mut kept = Vec::with_capacity(entries.len());
        for e in entries {
            check_index(e.j, rows)?;
            check_index(e.k, cols)?;
            if !(e.value.re.is_finite() && e.value.im.is_finite()) {
                return Err(Error::InvalidArgument(format!("entry ({}, {}) is not finite", e.j, e.k)));
            }
            if let Some(l) = e.ell {
                if !(l >= 0.0 && l.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "joint eigenvalue {l} at ({}, {}) must be nonnegative",
                        e.j, e.k
                    )));
                }
            }
            if e.value.norm() >= SPARSITY_THRESHOLD {
                kept.push(e);
            }
        }
        kept.sort_by_key(|e| (e.j, e.k));
        if kept.windows(2).any(|w| (w[0].j, w[0].k) == (w[1].j, w[1].k)) {
            return Err(Error::InvalidArgument("duplicate connection entry".into()));
        }
        Ok(Self { rows, cols, entries: kept })
    }

    pub fn from_dense(dense: &DMatrix<Complex64>, ell: impl Fn(usize, usize) -> Option<f64>) -> Result<Self> {
        let mut entries = Vec::new();
        for j in 0..dense.nrows() {
            for k in 0..dense.ncols() {
                entries.push(ConnectionEntry { j, k, value: dense[(j, k)], ell: ell(j, k) });
            }
        }
        Self::new(dense.nrows(), dense.ncols(), entries)
    }

    /// Identity coupling with `ell_{k,k} = ell[k]`.
    pub fn identity(ell: &[f64]) -> Result<Self> {
        let n = ell.len();
        let entries = ell
            .iter()
            .enumerate()
            .map(|(k, l)| ConnectionEntry { j: k, k, value: Complex64::new(1.0, 0.0), ell: Some(*l) })
            .collect();
        Self::new(n, n, entries)
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: Vec::new() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[ConnectionEntry] {
        &self.entries
    }

    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.entries.binary_search_by_key(&(j, k), |e| (e.j, e.k)).map(|i| self.entries[i].value).unwrap_or_default()
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut d = DMatrix::zeros(self.rows, self.cols);
        for e in &self.entries {
            d[(e.j, e.k)] = e.value;
        }
        d
    }

    /// Replaces every joint eigenvalue using `rule`.
    pub fn with_joint_eigenvalues(
        mut self,
        sys1: &AdmissibleSystem,
        sys2: &AdmissibleSystem,
        rule: JointEigenRule,
    ) -> Result<Self> {
        self.check_shape(sys1, sys2)?;
        for e in &mut self.entries {
            e.ell = Some(rule.apply(sys1.eigenvalues()[e.j], sys2.eigenvalues()[e.k]));
        }
        Ok(self)
    }

    /// Smallest `alpha` with `alpha * ell_{j,k} >= lambda_{1,j}` over stored entries,
    /// or `None` when some entry has `ell = 0 < lambda_{1,j}` or lacks `ell`.
    pub fn band_factor(&self, sys1: &AdmissibleSystem) -> Option<f64> {
        let mut alpha: f64 = 0.0;
        for e in &self.entries {
            let l1 = sys1.eigenvalues()[e.j];
            let ell = e.ell?;
            if ell > 0.0 {
                alpha = alpha.max(l1 / ell);
            } else if l1 > 0.0 {
                return None;
            }
        }
        Some(alpha)
    }

    pub(crate) fn check_shape(&self, sys1: &AdmissibleSystem, sys2: &AdmissibleSystem) -> Result<()> {
        check_len(sys1.num_modes(), self.rows)?;
        check_len(sys2.num_modes(), self.cols)
    }

    fn require_ell(&self) -> Result<()> {
        match self.entries.iter().find(|e| e.ell.is_none()) {
            Some(e) => {
                Err(Error::InvalidArgument(format!("connection entry ({}, {}) has no joint eigenvalue", e.j, e.k)))
            }
            None => Ok(()),
        }
    }
}

/// Landmarks `Y` with probability weights `nu`.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    indices_in_1: Vec<usize>,
    indices_in_2: Vec<usize>,
    nu_weights: Vec<f64>,
}

impl LandmarkSet {
    pub fn new(indices_in_1: Vec<usize>, indices_in_2: Vec<usize>, nu_weights: Vec<f64>) -> Result<Self> {
        check_len(indices_in_1.len(), indices_in_2.len())?;
        check_len(indices_in_1.len(), nu_weights.len())?;
        if nu_weights.is_empty() {
            return Err(Error::InvalidArgument("landmark set is empty".into()));
        }
        if nu_weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument("landmark weights must be positive".into()));
        }
        let total: f64 = nu_weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("landmark weights sum to {total}, not 1")));
        }
        Ok(Self { indices_in_1, indices_in_2, nu_weights })
    }

    /// Like [`LandmarkSet::new`] but rescales the weights to sum to one.
    pub fn normalized(indices_in_1: Vec<usize>, indices_in_2: Vec<usize>, nu_weights: Vec<f64>) -> Result<Self> {
        let total: f64 = nu_weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("landmark weights must be positive".into()));
        }
        Self::new(indices_in_1, indices_in_2, nu_weights.iter().map(|w| w / total).collect())
    }

    pub fn len(&self) -> usize {
        self.nu_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu_weights.is_empty()
    }

    pub fn indices_in_1(&self) -> &[usize] {
        &self.indices_in_1
    }

    pub fn indices_in_2(&self) -> &[usize] {
        &self.indices_in_2
    }

    pub fn nu_weights(&self) -> &[f64] {
        &self.nu_weights
    }

    fn check(&self, sys1: &AdmissibleSystem, sys2: &AdmissibleSystem) -> Result<()> {
        for (&a, &b) in self.indices_in_1.iter().zip(&self.indices_in_2) {
            check_index(a, sys1.len())?;
            check_index(b, sys2.len())?;
        }
        Ok(())
    }
}

/// Distance between a point of system 1 and a point of system 2.
#[derive(Debug, Clone, PartialEq)]
pub enum JointDistance {
    /// `inf_y d_1(x_1, y) + d_2(y, x_2)`.
    LandmarkInfimum(LandmarkSet),
    /// `|X_1| x |X_2|` table.
    ExplicitTable(DMatrix<f64>),
    /// `d_1(x_1, pi(x_2))` for an index map `pi: X_2 -> X_1`.
    Correspondence(Vec<usize>),
}

impl JointDistance {
    pub fn eval(&self, sys1: &AdmissibleSystem, sys2: &AdmissibleSystem, i1: usize, i2: usize) -> Result<f64> {
        check_index(i1, sys1.len())?;
        check_index(i2, sys2.len())?;
        match self {
            JointDistance::LandmarkInfimum(l) => joint_distance(sys1, sys2, l, i1, i2),
            JointDistance::ExplicitTable(t) => {
                if t.nrows() != sys1.len() || t.ncols() != sys2.len() {
                    return Err(Error::InvalidArgument("joint distance table has the wrong shape".into()));
                }
                Ok(t[(i1, i2)])
            }
            JointDistance::Correspondence(map) => {
                check_len(sys2.len(), map.len())?;
                let j = map[i2];
                check_index(j, sys1.len())?;
                Ok(sys1.distance(i1, j))
            }
        }
    }
}

/// `Gamma_{j,k} = sum_y nu_y conj(phi_1j(y)) phi_2k(y)`.
pub fn landmark_connection(
    sys1: &AdmissibleSystem,
    sys2: &AdmissibleSystem,
    landmarks: &LandmarkSet,
    rule: JointEigenRule,
) -> Result<ConnectionMatrix> {
    landmarks.check(sys1, sys2)?;
    let m = landmarks.len();
    let (k1, k2) = (sys1.num_modes(), sys2.num_modes());
    let a = DMatrix::from_fn(m, k1, |y, j| sys1.phi(landmarks.indices_in_1[y], j) * landmarks.nu_weights[y]);
    let b = DMatrix::from_fn(m, k2, |y, k| sys2.phi(landmarks.indices_in_2[y], k));
    let gamma = a.ad_mul(&b);
    let l1 = sys1.eigenvalues();
    let l2 = sys2.eigenvalues();
    ConnectionMatrix::from_dense(&gamma, |j, k| Some(rule.apply(l1[j], l2[k])))
}

fn check_f(sys2: &AdmissibleSystem, f: &FunctionSamples) -> Result<()> {
    check_len(sys2.len(), f.len())
}

fn check_n(n: f64) -> Result<()> {
    if n > 0.0 && n.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("scale n = {n} must be positive")))
    }
}

fn tensor_coeffs(
    sys1: &AdmissibleSystem,
    sys2: &AdmissibleSystem,
    gamma: &ConnectionMatrix,
    h: &LowPassFilter,
    n: f64,
    fhat: &DVector<Complex64>,
) -> DVector<Complex64> {
    let mut g = DVector::zeros(sys1.num_modes());
    for e in gamma.entries() {
        let w = h.value(sys1.eigenvalues()[e.j] / n) * h.value(sys2.eigenvalues()[e.k] / n);
        if w != 0.0 {
            g[e.j] += e.value * fhat[e.k] * w;
        }
    }
    g
}

fn joint_coeffs(
    gamma: &ConnectionMatrix,
    h: &LowPassFilter,
    n: f64,
    fhat: &DVector<Complex64>,
    k1: usize,
) -> DVector<Complex64> {
    let mut g = DVector::zeros(k1);
    for e in gamma.entries() {
        let w = h.value(e.ell.unwrap_or(f64::INFINITY) / n);
        if w != 0.0 {
            g[e.j] += e.value * fhat[e.k] * w;
        }
    }
    g
}

/// `sum_{j,k} h(lambda_1j/n) h(lambda_2k/n) Gamma_jk f_hat(k) phi_1j`.
pub fn tensor_sigma(
    sys1: &AdmissibleSystem,
    sys2: &AdmissibleSystem,
    gamma: &ConnectionMatrix,
    h: &LowPassFilter,
    n: f64,
    f: &FunctionSamples,
) -> Result<FunctionSamples> {
    gamma.check_shape(sys1, sys2)?;
    check_f(sys2, f)?;
    check_n(n)?;
    let fhat = sys2.coefficients(f)?;
    Ok(sys1.eigenfunctions() * tensor_coeffs(sys1, sys2, gamma, h, n, &fhat))
}

#[derive(Debug, Clone)]
pub struct JointSigma {
    pub samples: FunctionSamples,
    /// See [`ConnectionMatrix::band_factor`].
    pub alpha: Option<f64>,
    /// `alpha * n`: the output lies in the span of modes with `lambda_1 < alpha n`.
    pub band_limit: Option<f64>,
}

/// `sum_{j,k} h(ell_jk/n) A_jk f_hat(k) phi_1j`.
pub fn joint_sigma(
    sys1: &AdmissibleSystem,
    sys2: &AdmissibleSystem,
    a: &ConnectionMatrix,
    h: &LowPassFilter,
    n: f64,
    f: &FunctionSamples,
) -> Result<JointSigma> {
    a.check_shape(sys1, sys2)?;
    a.require_ell()?;
    check_f(sys2, f)?;
    check_n(n)?;
    let fhat = sys2.coefficients(f)?;
    let samples = sys1.eigenfunctions() * joint_coeffs(a, h, n, &fhat, sys1.num_modes());
    let alpha = a.band_factor(sys1);
    Ok(JointSigma { samples, alpha, band_limit: alpha.map(|v| v * n) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftOptions {
    /// Norm used for increments and approximation errors.
    pub p: f64,
    /// Exponent `r` in the partial sums `sum_m 2^{m r} E_{2^m,p}(f)`.
    pub rate_exponent: f64,
}

impl Default for LiftOptions {
    fn default() -> Self {
        Self { p: 2.0, rate_exponent: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LiftReport {
    #[serde(skip)]
    pub lift: FunctionSamples,
    /// `||sigma_{2^{m+1}} f - sigma_{2^m} f||_p` for `m = 0..J-1`.
    pub level_increments: Vec<f64>,
    pub converged: bool,
    /// Running sums `sum_{m' <= m} 2^{m' r} E_{2^{m'},p}(Xi_2; f)` with the near-best surrogate.
    pub sufficient_condition: Vec<f64>,
    /// Fitted decay rate of the increments, `-log2` slope.
    pub beta_hat: Option<f64>,
    pub p: f64,
    pub tol: f64,
}

#[allow(clippy::too_many_arguments)]
fn lift_driver(
    sys1: &AdmissibleSystem,
    sys2: &AdmissibleSystem,
    h: &LowPassFilter,
    f: &FunctionSamples,
    max_level: u32,
    tol: f64,
    opts: &LiftOptions,
    coeffs_at: &dyn Fn(f64, &DVector<Complex64>) -> DVector<Complex64>,
) -> Result<LiftReport> {
    if max_level < 1 {
        return Err(Error::InvalidArgument("lift needs at least one dyadic level".into()));
    }
    check_f(sys2, f)?;
    let fhat = sys2.coefficients(f)?;
    let mut iterates = Vec::with_capacity(max_level as usize + 1);
    for m in 0..=max_level {
        let g = coeffs_at(2f64.powi(m as i32), &fhat);
        iterates.push(sys1.eigenfunctions() * g);
    }
    let mut inc = Vec::with_capacity(max_level as usize);
    for m in 0..max_level as usize {
        inc.push(sys1.lp_norm(&(&iterates[m + 1] - &iterates[m]), opts.p)?);
    }
    let converged = *inc.last().expect("max_level >= 1") < tol;

    let mut partial = Vec::with_capacity(max_level as usize + 1);
    let mut acc = 0.0;
    for m in 0..=max_level {
        let n = 2f64.powi(m as i32);
        let approx = crate::approx::sigma_single(sys2, h, n, &fhat);
        let e = sys2.lp_norm(&(f - approx), opts.p)?;
        acc += 2f64.powf(f64::from(m) * opts.rate_exponent) * e;
        partial.push(acc);
    }

    let pts: (Vec<f64>, Vec<f64>) =
        inc.iter().enumerate().filter(|(_, v)| **v > 1e-13).map(|(m, v)| (m as f64, v.log2())).unzip();
    let beta_hat = if pts.0.len() >= 2 { fit_line(&pts.0, &pts.1).ok().map(|l| -l.slope) } else { None };

    Ok(LiftReport {
        lift: iterates.pop().expect("nonempty"),
        level_increments: inc,
        converged,
        sufficient_condition: partial,
        beta_hat,
        p: opts.p,
        tol,
    })
}

/// Dyadic iterates of [`tensor_sigma`] up to `2^J`.
#[allow(clippy::too_many_arguments)]
pub fn tensor_lift(
    sys1: &AdmissibleSystem,
    sys2: &AdmissibleSystem,
    gamma: &ConnectionMatrix,
    h: &LowPassFilter,
    f: &FunctionSamples,
    max_level: u32,
    tol: f64,
    opts: &LiftOptions,
) -> Result<LiftReport> {
    gamma.check_shape(sys1, sys2)?;
    lift_driver(sys1, sys2, h, f, max_level, tol, opts, &|n, fhat| tensor_coeffs(sys1, sys2, gamma, h, n, fhat))
}

/// Dyadic iterates of [`joint_sigma`] up to `2^J`.
#[allow(clippy::too_many_arguments)]
pub fn joint_lift(
    sys1: &AdmissibleSystem,
    sys2: &AdmissibleSystem,
    a: &ConnectionMatrix,
    h: &LowPassFilter,
    f: &FunctionSamples,
    max_level: u32,
    tol: f64,
    opts: &LiftOptions,
) -> Result<LiftReport> {
    a.check_shape(sys1, sys2)?;
    a.require_ell()?;
    let k1 = sys1.num_modes();
    lift_driver(sys1, sys2, h, f, max_level, tol, opts, &|n, fhat| joint_coeffs(a, h, n, fhat, k1))
}

/// `min_y d_1(x_1, y) + d_2(y, x_2)`.
pub fn joint_distance(
    sys1: &AdmissibleSystem,
    sys2: &AdmissibleSystem,
    landmarks: &LandmarkSet,
    i1: usize,
    i2: usize,
) -> Result<f64> {
    if landmarks.is_empty() {
        return Err(Error::InvalidArgument("landmark set is empty".into()));
    }
    landmarks.check(sys1, sys2)?;
    check_index(i1, sys1.len())?;
    check_index(i2, sys2.len())?;
    Ok(landmarks
        .indices_in_1
        .iter()
        .zip(&landmarks.indices_in_2)
        .map(|(&y1, &y2)| sys1.distance(i1, y1) + sys2.distance(y2, i2))
        .fold(f64::INFINITY, f64::min))
}

/// Tolerated negative radicand before the diffusion distance is declared inconsistent.
pub const RADICAND_TOL: f64 = 1e-10;

/// Diffusion distance between `x_1` in system 1 and `x_2` in system 2.
pub fn diffusion_distance(
    sys1: &AdmissibleSystem,
    sys2: &AdmissibleSystem,
    gamma: &ConnectionMatrix,
    t: f64,
    i1: usize,
    i2: usize,
) -> Result<f64> {
    gamma.check_shape(sys1, sys2)?;
    let k11 = sys1.heat_kernel(2.0 * t, i1, i1)?;
    let k22 = sys2.heat_kernel(2.0 * t, i2, i2)?;
    let l1 = sys1.eigenvalues();
    let l2 = sys2.eigenvalues();
    let cross: Complex64 = gamma
        .entries()
        .iter()
        .map(|e| {
            (-t * (l1[e.j] * l1[e.j] + l2[e.k] * l2[e.k])).exp()
                * e.value
                * sys1.phi(i1, e.j)
                * sys2.phi(i2, e.k).conj()
        })
        .sum();
    let r = k11.re + k22.re - 2.0 * cross.re;
    if r < -RADICAND_TOL {
        return Err(Error::Numeric(format!("diffusion distance radicand {r:e} is negative")));
    }
    Ok(r.max(0.0).sqrt())
}

/// `sum exp(-ell^2 t) A_jk phi_1j(x_1) conj(phi_2k(x_2))`.
pub fn joint_heat_kernel(
    sys1: &AdmissibleSystem,
    sys2: &AdmissibleSystem,
    a: &ConnectionMatrix,
    t: f64,
    i1: usize,
    i2: usize,
) -> Result<Complex64> {
    a.check_shape(sys1, sys2)?;
    a.require_ell()?;
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("heat time {t} must be positive")));
    }
    check_index(i1, sys1.len())?;
    check_index(i2, sys2.len())?;
    Ok(joint_heat_unchecked(sys1, sys2, a, t, i1, i2))
}

fn joint_heat_unchecked(
    sys1: &AdmissibleSystem,
    sys2: &AdmissibleSystem,
    a: &ConnectionMatrix,
    t: f64,
    i1: usize,
    i2: usize,
) -> Complex64 {
    a.entries()
        .iter()
        .map(|e| {
            let l = e.ell.unwrap_or(f64::INFINITY);
            (-l * l * t).exp() * e.value * sys1.phi(i1, e.j) * sys2.phi(i2, e.k).conj()
        })
        .sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct JointGaussianDiagnostics {
    /// Growth exponent of `sup sum_{ell < n} |A phi_1 phi_2|` in `n`.
    pub q_hat: Option<f64>,
    pub ondiag_c: Option<f64>,
    /// Exponent `C` in the prefactor `t^{-C}`.
    pub t_exponent_hat: Option<f64>,
    pub c1_hat: Option<f64>,
    pub c2_hat: Option<f64>,
    /// Largest relative excess over the fitted off-diagonal bound.
    pub max_violation: f64,
    pub partial_sums: Vec<f64>,
    pub sup_kernel: Vec<f64>,
}

fn sample_indices(n: usize, cap: usize) -> Vec<usize> {
    let stride = n.div_ceil(cap.max(1)).max(1);
    (0..n).step_by(stride).collect()
}

/// Fits both parts of the joint Gaussian upper bound on sampled point pairs.
pub fn verify_joint_gaussian(
    sys1: &AdmissibleSystem,
    sys2: &AdmissibleSystem,
    a: &ConnectionMatrix,
    d12: &JointDistance,
    t_grid: &[f64],
    n_grid: &[f64],
) -> Result<JointGaussianDiagnostics> {
    if t_grid.is_empty() || n_grid.is_empty() {
        return Err(Error::InvalidArgument("grids must be nonempty".into()));
    }
    a.check_shape(sys1, sys2)?;
    a.require_ell()?;
    let s1 = sample_indices(sys1.len(), 48);
    let s2 = sample_indices(sys2.len(), 48);

    let partial_sums: Vec<f64> = n_grid
        .iter()
        .map(|&n| {
            let mut best: f64 = 0.0;
            for &x1 in &s1 {
                for &x2 in &s2 {
                    let s: f64 = a
                        .entries()
                        .iter()
                        .filter(|e| e.ell.unwrap_or(f64::INFINITY) < n)
                        .map(|e| (e.value * sys1.phi(x1, e.j) * sys2.phi(x2, e.k)).norm())
                        .sum();
                    best = best.max(s);
                }
            }
            best
        })
        .collect();
    let (q_hat, ondiag_c) = log_log_fit(n_grid, &partial_sums)
        .map(|(slope, _)| {
            let c = n_grid.iter().zip(&partial_sums).map(|(n, s)| s / n.powf(slope)).fold(0.0, f64::max);
            (Some(slope), Some(c))
        })
        .unwrap_or((None, None));

    let mut samples = Vec::new();
    let mut sup_kernel = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("heat time {t} must be positive")));
        }
        let mut sup: f64 = 0.0;
        for &x1 in &s1 {
            for &x2 in &s2 {
                let k = joint_heat_unchecked(sys1, sys2, a, t, x1, x2).norm();
                let d = d12.eval(sys1, sys2, x1, x2)?;
                sup = sup.max(k);
                samples.push((t, d, k));
            }
        }
        sup_kernel.push(sup);
    }
    let mut t_exponent_hat = None;
    let mut c1_hat = None;
    let mut c2_hat = None;
    let mut max_violation: f64 = 0.0;
    if let Some((slope, _)) = log_log_fit(t_grid, &sup_kernel) {
        let cexp = -slope;
        let c1 = t_grid.iter().zip(&sup_kernel).map(|(t, s)| s * t.powf(cexp)).fold(0.0, f64::max);
        let mut c2 = f64::INFINITY;
        for &(t, d, k) in &samples {
            if d > 0.0 && k > 0.0 {
                c2 = c2.min((c1.ln() - k.ln() - cexp * t.ln()) * t / (d * d));
            }
        }
        let c2 = if c2.is_finite() { c2.max(0.0) } else { 0.0 };
        for &(t, d, k) in &samples {
            let bound = c1 * t.powf(-cexp) * (-c2 * d * d / t).exp();
            if bound > 0.0 {
                max_violation = max_violation.max(k / bound - 1.0);
            }
        }
        t_exponent_hat = Some(cexp);
        c1_hat = Some(c1);
        c2_hat = Some(c2);
    }
    Ok(JointGaussianDiagnostics {
        q_hat,
        ondiag_c,
        t_exponent_hat,
        c1_hat,
        c2_hat,
        max_violation,
        partial_sums,
        sup_kernel,
    })
}

/// Slope and intercept of `log y` vs `log x` over positive `y`; `None` if fewer than two.
fn log_log_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let (lx, ly): (Vec<f64>, Vec<f64>) =
        x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 1e-300).map(|(a, b)| (a.ln(), b.ln())).unzip();
    if lx.len() < 2 {
        return None;
    }
    fit_line(&lx, &ly).ok().map(|f| (f.slope, f.intercept))
}
