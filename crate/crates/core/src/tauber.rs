//! Atomic spectral measures on `[0, inf)` and the quantities used to check
//! kernel localization: growth functional, heat, filter and Bochner-Riesz
//! transforms.

use crate::digraph::DirectedPair;
use crate::error::{check_index, Error, Result};
use crate::filters::LowPassFilter;
use crate::regress::fit_line;
use crate::system::AdmissibleSystem;
use crate::twosys::ConnectionMatrix;
use num_complex::Complex64;
use serde::Serialize;

/// Transform magnitudes at or below this are left out of slope fits.
pub const LOG_FLOOR: f64 = 1e-13;

/// `sum_m c_m delta_{u_m}` with `0 < u_0 < u_1 < ...`, plus a separate mass at
/// the origin.
///
/// The localization estimates are stated for measures without an atom at 0;
/// spectral measures of real systems do carry one (the constant mode). It is
/// kept apart so callers can drop it, and every transform includes it.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct DiscreteMeasure {
    atoms: Vec<(f64, Complex64)>,
    origin_mass: Complex64,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<(f64, Complex64)>, origin_mass: Complex64) -> Result<Self> {
        for (m, (u, c)) in atoms.iter().enumerate() {
            if !(u.is_finite() && *u > 0.0) {
                return Err(Error::InvalidArgument(format!("atom {m} at u = {u} must be positive and finite")));
            }
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::InvalidArgument(format!("atom {m} has a non-finite mass")));
            }
            if m > 0 && atoms[m - 1].0 >= *u {
                return Err(Error::InvalidArgument("atom locations must be strictly increasing".into()));
            }
        }
        Ok(Self { atoms, origin_mass })
    }

    /// Sorts, merges equal locations and moves mass at `u = 0` to the origin.
    pub fn from_unsorted(mut atoms: Vec<(f64, Complex64)>) -> Result<Self> {
        if atoms.iter().any(|(u, _)| !(u.is_finite() && *u >= 0.0)) {
            return Err(Error::InvalidArgument("atom locations must be finite and nonnegative".into()));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut origin = Complex64::default();
        let mut merged: Vec<(f64, Complex64)> = Vec::new();
        for (u, c) in atoms {
            if u == 0.0 {
                origin += c;
            } else if let Some(last) = merged.last_mut().filter(|l| l.0 == u) {
                last.1 += c;
            } else {
                merged.push((u, c));
            }
        }
        Self::new(merged, origin)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn atoms(&self) -> &[(f64, Complex64)] {
        &self.atoms
    }

    pub fn origin_mass(&self) -> Complex64 {
        self.origin_mass
    }

    /// The same measure with the origin atom removed.
    pub fn without_origin(&self) -> Self {
        Self { atoms: self.atoms.clone(), origin_mass: Complex64::default() }
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.origin_mass == Complex64::default()
    }

    pub fn total_mass(&self) -> Complex64 {
        self.origin_mass + self.atoms.iter().map(|a| a.1).sum::<Complex64>()
    }

    /// `integral g(u) d mu(u)`.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> Complex64 {
        let mut acc = self.origin_mass * g(0.0);
        for (u, c) in &self.atoms {
            let w = g(*u);
            if w != 0.0 {
                acc += c * w;
            }
        }
        acc
    }

    /// `mu([0, u))`.
    pub fn partial_mass(&self, u: f64) -> Complex64 {
        self.integrate(|v| if v < u { 1.0 } else { 0.0 })
    }
}

/// Atoms at `lambda_k` with mass `phi_k(x_i) conj(psi_k(x_j))`.
pub fn measure_from_pair(pair: &DirectedPair, i: usize, j: usize) -> Result<DiscreteMeasure> {
    check_index(i, pair.len())?;
    check_index(j, pair.len())?;
    let atoms = pair
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(k, l)| (*l, pair.base.phi(i, k) * pair.dual.phi(j, k).conj()))
        .collect();
    DiscreteMeasure::from_unsorted(atoms)
}

/// Spectral measure of a single system at `(x_i, x_j)`: atoms at `lambda_k` with
/// mass `phi_k(x_i) conj(phi_k(x_j))`.
pub fn measure_from_system(sys: &AdmissibleSystem, i: usize, j: usize) -> Result<DiscreteMeasure> {
    check_index(i, sys.len())?;
    check_index(j, sys.len())?;
    let atoms = sys.eigenvalues().iter().enumerate().map(|(k, l)| (*l, sys.phi(i, k) * sys.phi(j, k).conj())).collect();
    DiscreteMeasure::from_unsorted(atoms)
}

/// Atoms at `ell_{j,k}` with mass `A_{j,k} phi_1j(x_1) conj(phi_2k(x_2))`.
pub fn measure_from_connection(
    sys1: &AdmissibleSystem,
    sys2: &AdmissibleSystem,
    a: &ConnectionMatrix,
    i1: usize,
    i2: usize,
) -> Result<DiscreteMeasure> {
    a.check_shape(sys1, sys2)?;
    check_index(i1, sys1.len())?;
    check_index(i2, sys2.len())?;
    let mut atoms = Vec::with_capacity(a.entries().len());
    for e in a.entries() {
        let ell =
            e.ell.ok_or_else(|| Error::InvalidArgument(format!("entry ({}, {}) has no joint eigenvalue", e.j, e.k)))?;
        atoms.push((ell, e.value * sys1.phi(i1, e.j) * sys2.phi(i2, e.k).conj()));
    }
    DiscreteMeasure::from_unsorted(atoms)
}

/// `sup_u |mu|([0, u)) / (u + 2)^Q`, attained just past an atom.
pub fn christoffel_sup(mu: &DiscreteMeasure, q: f64) -> Result<f64> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::InvalidArgument(format!("Q = {q} must be positive")));
    }
    let mut tv = mu.origin_mass.norm();
    let mut best = tv / 2f64.powf(q);
    for (u, c) in &mu.atoms {
        tv += c.norm();
        best = best.max(tv / (u + 2.0).powf(q));
    }
    Ok(best)
}

/// `sum_m c_m exp(-u_m^2 t)`.
pub fn heat_transform(mu: &DiscreteMeasure, t: f64) -> Result<Complex64> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t = {t} must be positive")));
    }
    Ok(mu.integrate(|u| (-u * u * t).exp()))
}

/// `sum_m c_m h(u_m / n)`.
pub fn filter_transform(mu: &DiscreteMeasure, h: &LowPassFilter, n: f64) -> Result<Complex64> {
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::InvalidArgument(format!("n = {n} must be positive")));
    }
    Ok(mu.integrate(|u| h.value(u / n)))
}

/// `sum_m c_m (1 - u_m^2/n^2)_+^S`, with `x_+^0` the indicator of `x > 0`.
pub fn bochner_riesz(mu: &DiscreteMeasure, s: u32, n: f64) -> Result<Complex64> {
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::InvalidArgument(format!("n = {n} must be positive")));
    }
    Ok(mu.integrate(|u| {
        let x = 1.0 - (u / n).powi(2);
        if x > 0.0 {
            x.powi(s as i32)
        } else {
            0.0
        }
    }))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalizationStatus {
    Pass,
    Fail,
    /// The cutoff filter does not satisfy the smoothness hypothesis.
    NonSmoothFilter,
    /// Too few usable grid points for a slope.
    Undetermined,
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalizationReport {
    pub n_grid: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub christoffel: f64,
    /// `max_n |transform| max(1, (n r)^S) / (n^Q |||mu|||_Q)`.
    pub empirical_c: Option<f64>,
    /// Slope of `log |transform|` against `log n` where `n r > 1` (all points when `r = 0`).
    pub slope_hat: Option<f64>,
    /// `Q - S` off the diagonal, `Q` on it.
    pub expected_slope: f64,
    pub slope_tol: f64,
    /// Every grid point obeys the bound with `empirical_c` and the constant is finite.
    pub bound_holds_with_c: bool,
    pub status: LocalizationStatus,
}

/// Measures the decay of `|integral h(u/n) d mu|` over `n_grid` against the
/// rate `n^Q / max(1, (n r)^S)`.
///
/// With `r > 0` the slope on the far range is compared to `Q - S` within
/// `slope_tol`; with `r = 0` the slope must not exceed `Q + slope_tol`.
pub fn verify_localization(
    mu: &DiscreteMeasure,
    h: &LowPassFilter,
    q: f64,
    s: u32,
    r: f64,
    n_grid: &[f64],
    slope_tol: f64,
) -> Result<LocalizationReport> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("r = {r} must be nonnegative")));
    }
    if n_grid.iter().any(|n| !(*n >= 1.0 && n.is_finite())) {
        return Err(Error::InvalidArgument("grid values must be >= 1".into()));
    }
    let christoffel = christoffel_sup(mu, q)?;
    let expected_slope = if r > 0.0 { q - f64::from(s) } else { q };
    let mut report = LocalizationReport {
        n_grid: n_grid.to_vec(),
        magnitudes: Vec::new(),
        christoffel,
        empirical_c: None,
        slope_hat: None,
        expected_slope,
        slope_tol,
        bound_holds_with_c: false,
        status: LocalizationStatus::NonSmoothFilter,
    };
    if !h.is_smooth() {
        return Ok(report);
    }
    report.magnitudes = n_grid.iter().map(|n| filter_transform(mu, h, *n).map(|z| z.norm())).collect::<Result<_>>()?;

    let rate = |n: f64| n.powf(q) / (n * r).powi(s as i32).max(1.0);
    if christoffel > 0.0 {
        let c = n_grid.iter().zip(&report.magnitudes).map(|(n, m)| m / (rate(*n) * christoffel)).fold(0.0, f64::max);
        report.empirical_c = Some(c);
        report.bound_holds_with_c = c.is_finite();
    }

    let (x, y): (Vec<f64>, Vec<f64>) = n_grid
        .iter()
        .zip(&report.magnitudes)
        .filter(|(n, m)| (r == 0.0 || **n * r > 1.0) && **m > LOG_FLOOR)
        .map(|(n, m)| (n.ln(), m.ln()))
        .unzip();
    if x.len() < 2 {
        report.status = LocalizationStatus::Undetermined;
        return Ok(report);
    }
    let slope = fit_line(&x, &y)?.slope;
    report.slope_hat = Some(slope);
    let ok = if r > 0.0 { (slope - expected_slope).abs() <= slope_tol } else { slope <= expected_slope + slope_tol };
    report.status = if ok && report.bound_holds_with_c { LocalizationStatus::Pass } else { LocalizationStatus::Fail };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digraph::{build_directed_pair, to_complex};
    use crate::filters::{make_cutoff_filter, make_filter};
    use crate::jacobi::build_circle_system;
    use crate::twosys::ConnectionMatrix;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    fn atom(u: f64, m: f64) -> DiscreteMeasure {
        DiscreteMeasure::new(vec![(u, c(m))], c(0.0)).unwrap()
    }

    #[test]
    fn construction_rules() {
        assert!(DiscreteMeasure::new(vec![(0.0, c(1.0))], c(0.0)).is_err());
        assert!(DiscreteMeasure::new(vec![(2.0, c(1.0)), (1.0, c(1.0))], c(0.0)).is_err());
        assert!(DiscreteMeasure::new(vec![(1.0, c(1.0)), (1.0, c(1.0))], c(0.0)).is_err());
        let m =
            DiscreteMeasure::from_unsorted(vec![(2.0, c(1.0)), (0.0, c(0.5)), (2.0, c(-3.0)), (1.0, c(1.0))]).unwrap();
        assert_eq!(m.atoms(), &[(1.0, c(1.0)), (2.0, c(-2.0))]);
        assert_eq!(m.origin_mass(), c(0.5));
        assert!(m.without_origin().origin_mass() == c(0.0));
    }

    #[test]
    fn christoffel_examples() {
        assert!((christoffel_sup(&atom(0.5, 1.0), 1.0).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(christoffel_sup(&DiscreteMeasure::empty(), 1.0).unwrap(), 0.0);
        let m = DiscreteMeasure::new(vec![(1.0, c(1.0)), (2.0, c(-1.0))], c(0.0)).unwrap();
        assert!((christoffel_sup(&m, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(christoffel_sup(&m, 0.0).is_err());
    }

    #[test]
    fn heat_examples() {
        assert!((heat_transform(&atom(2.0, 1.0), 1.0).unwrap() - c((-4.0f64).exp())).norm() < 1e-16);
        let m = DiscreteMeasure::new(vec![(0.3, c(2.0)), (5.0, c(-0.5))], c(0.0)).unwrap();
        assert!((heat_transform(&m, 1e-12).unwrap() - c(1.5)).norm() < 1e-9);
        assert!(heat_transform(&m, 0.0).is_err());
    }

    #[test]
    fn filter_examples() {
        let m = DiscreteMeasure::new(vec![(3.0, c(1.0)), (5.0, c(2.0)), (9.0, c(-4.0))], c(0.0)).unwrap();
        let h = make_filter(3).unwrap();
        assert_eq!(filter_transform(&m, &h, 2.9).unwrap(), c(0.0));
        let cut = make_cutoff_filter();
        for n in [1.0, 3.0, 3.5, 5.0, 9.5, 20.0] {
            assert_eq!(filter_transform(&m, &cut, n).unwrap(), m.partial_mass(n));
        }
        assert_eq!(filter_transform(&m, &cut, 6.0).unwrap(), c(3.0));
    }

    #[test]
    fn bochner_riesz_examples() {
        assert!((bochner_riesz(&atom(1.0, 1.0), 2, 2.0).unwrap() - c(0.5625)).norm() < 1e-15);
        let m = DiscreteMeasure::new(vec![(3.0, c(1.0)), (5.0, c(2.0))], c(0.0)).unwrap();
        assert_eq!(bochner_riesz(&m, 3, 2.5).unwrap(), c(0.0));
        for n in [2.0, 3.0, 4.0, 5.0, 6.0] {
            assert_eq!(bochner_riesz(&m, 0, n).unwrap(), m.partial_mass(n));
        }
        let big = 1e6 * 5.0;
        let z = bochner_riesz(&m, 4, big).unwrap();
        assert!((z - m.total_mass()).norm() <= 1e-6 * m.total_mass().norm());
    }

    #[test]
    fn identity_connection_gives_squared_moduli() {
        let sys = build_circle_system(32, 6).unwrap();
        let a = ConnectionMatrix::identity(sys.eigenvalues()).unwrap();
        let mu = measure_from_connection(&sys, &sys, &a, 5, 5).unwrap();
        assert_eq!(mu.atoms().len(), 6);
        for (k, (u, m)) in mu.atoms().iter().enumerate() {
            assert_eq!(*u, (k + 1) as f64);
            // |sqrt2 cos|^2 + |sqrt2 sin|^2 = 2 at every frequency
            assert!(m.im.abs() < 1e-14 && (m.re - 2.0).abs() < 1e-12);
        }
        assert!((mu.origin_mass() - c(1.0)).norm() < 1e-14);
        let zero = ConnectionMatrix::zero(sys.num_modes(), sys.num_modes());
        assert!(measure_from_connection(&sys, &sys, &zero, 0, 3).unwrap().is_empty());
    }

    #[test]
    fn antipodal_circle_masses_alternate() {
        let n = 40;
        let sys = build_circle_system(n, 10).unwrap();
        let mu = measure_from_system(&sys, 0, n / 2).unwrap();
        for (u, m) in mu.atoms() {
            // 2 cos(k x) cos(k y) + 2 sin(k x) sin(k y) = 2 cos(k pi)
            let k = *u;
            assert!((m.re - 2.0 * (k * PI).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn heat_matches_system_kernel() {
        let sys = build_circle_system(64, 20).unwrap();
        for (i, j) in [(0, 0), (3, 17), (10, 42), (63, 1)] {
            let mu = measure_from_system(&sys, i, j).unwrap();
            for t in [0.001, 0.05, 1.0] {
                let a = heat_transform(&mu, t).unwrap();
                let b = sys.heat_kernel(t, i, j).unwrap();
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn filter_matches_pair_kernel() {
        let w = DMatrix::from_fn(9, 9, |i, j| ((i * 5 + j * 3) % 7) as f64 / 7.0 + if i == j { 1.0 } else { 0.0 });
        let pair = build_directed_pair(&to_complex(&w), 9).unwrap();
        let h = make_filter(2).unwrap();
        for (i, j) in [(0, 0), (1, 4), (8, 2)] {
            let mu = measure_from_pair(&pair, i, j).unwrap();
            for n in [0.3, 1.0, 2.0, 5.0] {
                let a = filter_transform(&mu, &h, n).unwrap();
                let b = pair.kernel(&h, n, i, j).unwrap();
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn cutoff_localization_is_skipped() {
        let mu = atom(1.0, 1.0);
        let r = verify_localization(&mu, &make_cutoff_filter(), 1.0, 2, 1.0, &[1.0, 2.0], 0.75).unwrap();
        assert_eq!(r.status, LocalizationStatus::NonSmoothFilter);
        assert!(r.slope_hat.is_none());
    }

    #[test]
    fn diagonal_growth_is_at_most_linear() {
        let sys = build_circle_system(256, 64).unwrap();
        let mu = measure_from_system(&sys, 0, 0).unwrap();
        let h = make_filter(4).unwrap();
        let grid: Vec<f64> = (0..12).map(|i| 2.0 * 1.3f64.powi(i)).collect();
        let r = verify_localization(&mu, &h, 1.0, 4, 0.0, &grid, 0.3).unwrap();
        assert!(r.slope_hat.unwrap() <= 1.3);
        assert_eq!(r.status, LocalizationStatus::Pass);
    }

    #[test]
    fn off_diagonal_decay_order_two() {
        let sys = build_circle_system(512, 128).unwrap();
        let mu = measure_from_system(&sys, 0, 128).unwrap();
        let r = PI / 2.0;
        let h = make_filter(2).unwrap();
        let grid: Vec<f64> = (0..16).map(|i| 4.0 / r * (16f64).powf(i as f64 / 15.0)).collect();
        let rep = verify_localization(&mu, &h, 1.0, 2, r, &grid, 0.75).unwrap();
        assert!(rep.slope_hat.unwrap() < 0.0);
        assert!(rep.bound_holds_with_c);
    }

    proptest! {
        #[test]
        fn transforms_are_linear(
            us in proptest::collection::vec(0.01f64..20.0, 1..8),
            ms in proptest::collection::vec(-3.0f64..3.0, 8),
            a in -2.0f64..2.0, n in 1.0f64..25.0, t in 0.001f64..2.0, s in 0u32..6,
        ) {
            let m1 = DiscreteMeasure::from_unsorted(us.iter().zip(&ms).map(|(u, m)| (*u, c(*m))).collect()).unwrap();
            let m2 = DiscreteMeasure::from_unsorted(us.iter().zip(ms.iter().rev()).map(|(u, m)| (*u + 0.5, c(*m))).collect()).unwrap();
            let sum = DiscreteMeasure::from_unsorted(
                m1.atoms().iter().map(|(u, m)| (*u, m * a)).chain(m2.atoms().iter().copied()).collect(),
            ).unwrap();
            let h = make_filter(3).unwrap();
            let lhs = [filter_transform(&sum, &h, n).unwrap(), heat_transform(&sum, t).unwrap(), bochner_riesz(&sum, s, n).unwrap()];
            let rhs = [
                filter_transform(&m1, &h, n).unwrap() * a + filter_transform(&m2, &h, n).unwrap(),
                heat_transform(&m1, t).unwrap() * a + heat_transform(&m2, t).unwrap(),
                bochner_riesz(&m1, s, n).unwrap() * a + bochner_riesz(&m2, s, n).unwrap(),
            ];
            for (l, r) in lhs.iter().zip(&rhs) {
                prop_assert!((l - r).norm() < 1e-10);
            }
        }

        #[test]
        fn heat_nonincreasing_for_positive_masses(
            us in proptest::collection::vec(0.01f64..10.0, 1..8), t1 in 0.001f64..2.0, dt in 0.0f64..2.0,
        ) {
            let m = DiscreteMeasure::from_unsorted(us.iter().map(|u| (*u, c(1.0))).collect()).unwrap();
            prop_assert!(heat_transform(&m, t1 + dt).unwrap().norm() <= heat_transform(&m, t1).unwrap().norm() + 1e-15);
        }
    }
}
