//! Degrees of approximation, Besov sequence norms and smoothness estimates
//! from the decay of dyadic pyramid norms.

use crate::digraph::tau_from_coefficients;
use crate::error::{check_len, Error, Result};
use crate::filters::{LowPassFilter, Profile};
use crate::regress::fit_line;
use crate::system::{AdmissibleSystem, FunctionSamples};
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Pyramid norms at or below this are treated as numerical zero.
pub const NOISE_FLOOR: f64 = 1e-12;

/// Largest system accepted by [`best_uniform_approx`].
pub const LP_MAX_POINTS: usize = 64;

/// `sum_k h(lambda_k/n) c_k phi_k`.
pub(crate) fn sigma_single(
    sys: &AdmissibleSystem,
    h: &LowPassFilter,
    n: f64,
    coeffs: &DVector<Complex64>,
) -> FunctionSamples {
    let g = DVector::from_fn(coeffs.len(), |k, _| coeffs[k] * h.value(sys.eigenvalues()[k] / n));
    sys.eigenfunctions() * g
}

fn check_scale(n: f64) -> Result<()> {
    if n > 0.0 && n.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("scale n = {n} must be positive")))
    }
}

/// `sigma_n f` on a single system, `f_hat` taken against the same basis.
pub fn sigma_on(sys: &AdmissibleSystem, h: &LowPassFilter, n: f64, f: &FunctionSamples) -> Result<FunctionSamples> {
    check_scale(n)?;
    let c = sys.coefficients(f)?;
    Ok(sigma_single(sys, h, n, &c))
}

/// Parseval tail `sqrt(sum_{lambda_k >= n} |f_hat(k)|^2)` over the stored modes.
pub fn degree_of_approx_l2(sys: &AdmissibleSystem, f: &FunctionSamples, n: f64) -> Result<f64> {
    let c = sys.coefficients(f)?;
    Ok(tail_l2(sys.eigenvalues(), &c, n))
}

pub(crate) fn tail_l2(lambdas: &[f64], c: &DVector<Complex64>, n: f64) -> f64 {
    lambdas.iter().zip(c.iter()).filter(|(l, _)| **l >= n).map(|(_, z)| z.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApproxEstimate {
    pub value: f64,
    /// The value is `||f - sigma_n f||_p`, within a constant factor of the true
    /// `E_{n,p}` but not equal to it. False only for the exact `p = 2` cutoff case.
    pub surrogate: bool,
}

/// Near-best estimate `||f - sigma_n f||_p` of `E_{n,p}(f)`.
pub fn degree_of_approx_lp(
    sys: &AdmissibleSystem,
    f: &FunctionSamples,
    n: f64,
    p: f64,
    h: &LowPassFilter,
) -> Result<ApproxEstimate> {
    let s = sigma_on(sys, h, n, f)?;
    let value = sys.lp_norm(&(f - s), p)?;
    Ok(ApproxEstimate { value, surrogate: !(p == 2.0 && h.profile() == Profile::Cutoff) })
}

/// `max_i |f_i - P(x_i)|` minimized over `P` in the span of `phi_k` with
/// `lambda_k < n`. Linear program; real data and `N <= 64` only.
pub fn best_uniform_approx(sys: &AdmissibleSystem, f: &FunctionSamples, n: f64) -> Result<f64> {
    check_len(sys.len(), f.len())?;
    check_scale(n)?;
    if sys.len() > LP_MAX_POINTS {
        return Err(Error::InvalidArgument(format!(
            "uniform best approximation is limited to {LP_MAX_POINTS} points, got {}",
            sys.len()
        )));
    }
    let real = |z: &Complex64| z.im.abs() <= 1e-12 * (1.0 + z.re.abs());
    if !f.iter().all(real) || !sys.eigenfunctions().iter().all(real) {
        return Err(Error::InvalidArgument("uniform best approximation needs real-valued data".into()));
    }
    let modes: Vec<usize> = (0..sys.num_modes()).filter(|&k| sys.eigenvalues()[k] < n).collect();

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let t = lp.add_var(1.0, (0.0, f64::INFINITY));
    let a: Vec<_> = modes.iter().map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    for i in 0..sys.len() {
        let mut expr: Vec<_> = modes.iter().zip(&a).map(|(&k, &v)| (v, sys.phi(i, k).re)).collect();
        expr.push((t, 1.0));
        lp.add_constraint(expr.as_slice(), ComparisonOp::Ge, f[i].re);
        let last = expr.len() - 1;
        expr[last].1 = -1.0;
        lp.add_constraint(expr.as_slice(), ComparisonOp::Le, f[i].re);
    }
    let sol = lp.solve().map_err(|e| Error::Numeric(format!("linear program failed: {e}")))?;
    Ok(sol.objective())
}

/// Whether every coefficient at `lambda_k >= n` is below `tol`.
pub fn is_band_limited(sys: &AdmissibleSystem, f: &FunctionSamples, n: f64, tol: f64) -> Result<bool> {
    Ok(degree_of_approx_l2(sys, f, n)? <= tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovParams {
    pub p: f64,
    pub rho: f64,
    pub gamma: f64,
}

impl BesovParams {
    pub fn new(p: f64, rho: f64, gamma: f64) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(Error::InvalidArgument(format!("p = {p} must lie in [1, inf]")));
        }
        check_rho_gamma(rho, gamma)?;
        Ok(Self { p, rho, gamma })
    }
}

fn check_rho_gamma(rho: f64, gamma: f64) -> Result<()> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("rho = {rho} must be positive")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("gamma = {gamma} must be positive")));
    }
    Ok(())
}

/// Nonnegative finite values indexed by dyadic level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySequence(Vec<f64>);

impl DecaySequence {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some((j, v)) = entries.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!("entry {j} = {v} must be finite and nonnegative")));
        }
        Ok(Self(entries))
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `(sum_j (2^{j gamma} a_j)^rho)^{1/rho}`, or `sup_j 2^{j gamma} a_j` for `rho = inf`.
pub fn besov_seq_norm(seq: &DecaySequence, rho: f64, gamma: f64) -> Result<f64> {
    check_rho_gamma(rho, gamma)?;
    let scaled = seq.entries().iter().enumerate().map(|(j, a)| 2f64.powf(j as f64 * gamma) * a);
    if rho.is_infinite() {
        return Ok(scaled.fold(0.0, f64::max));
    }
    Ok(scaled.map(|v| v.powf(rho)).sum::<f64>().powf(1.0 / rho))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ClassifyOptions {
    /// Skip level 0 in the fit; it mixes the constant mode with the first band.
    pub skip_first: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothnessReport {
    pub gamma_hat: f64,
    pub residual: f64,
    pub levels_used: Vec<usize>,
    pub per_level_norms: Vec<f64>,
    pub p: f64,
    /// Trailing levels vanish: the input lives in a finite band and `gamma_hat`
    /// is the steepest decay the level grid can resolve against the noise floor.
    pub band_limited: bool,
}

/// Least-squares fit of `log2 ||tau_j||` against `j`; `gamma_hat = -slope`.
pub fn classify_smoothness(norms: &DecaySequence, p: f64, opts: &ClassifyOptions) -> Result<SmoothnessReport> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} must lie in [1, inf]")));
    }
    let a = norms.entries();
    let start = usize::from(opts.skip_first);
    let used: Vec<usize> = (start..a.len()).filter(|&j| a[j] > NOISE_FLOOR).collect();
    let last_nonzero = used.last().copied();
    let band_limited = matches!(last_nonzero, Some(j) if j + 1 < a.len());

    if band_limited {
        let top = used.iter().map(|&j| a[j]).fold(0.0, f64::max);
        let span = (a.len() - 1) as f64;
        let gamma_hat = (top / NOISE_FLOOR).log2() / span;
        let residual = if used.len() >= 2 { fit(a, &used)?.1 } else { 0.0 };
        return Ok(SmoothnessReport {
            gamma_hat,
            residual,
            levels_used: used,
            per_level_norms: a.to_vec(),
            p,
            band_limited,
        });
    }
    if used.len() < 3 {
        return Err(Error::InsufficientLevels { usable: used.len() });
    }
    let (gamma_hat, residual) = fit(a, &used)?;
    Ok(SmoothnessReport { gamma_hat, residual, levels_used: used, per_level_norms: a.to_vec(), p, band_limited })
}

fn fit(a: &[f64], used: &[usize]) -> Result<(f64, f64)> {
    let x: Vec<f64> = used.iter().map(|&j| j as f64).collect();
    let y: Vec<f64> = used.iter().map(|&j| a[j].log2()).collect();
    let line = fit_line(&x, &y)?;
    Ok((-line.slope, line.residual))
}

/// `tau_j` pyramid of `f` on one system, `j = 0..=max_level`.
pub fn single_pyramid(
    sys: &AdmissibleSystem,
    h: &LowPassFilter,
    max_level: u32,
    f: &FunctionSamples,
) -> Result<Vec<FunctionSamples>> {
    let c = sys.coefficients(f)?;
    Ok(tau_from_coefficients(sys, h, max_level, &c))
}

pub fn pyramid_norms(sys: &AdmissibleSystem, taus: &[FunctionSamples], p: f64) -> Result<DecaySequence> {
    let v = taus.iter().map(|t| sys.lp_norm(t, p)).collect::<Result<Vec<_>>>()?;
    DecaySequence::new(v)
}
