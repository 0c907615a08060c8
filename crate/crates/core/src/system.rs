//! Finite admissible systems: points, metric, quadrature weights and a
//! truncated eigensystem `{(lambda_k, phi_k)}`.

use crate::error::{check_index, check_len, Error, Result};
use crate::regress::fit_line;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Samples `f(x_i)` aligned with a system's points.
pub type FunctionSamples = DVector<Complex64>;

/// Orthonormality tolerance for systems produced by the constructors here.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    Euclidean,
    /// Points are single angles; arc length on the unit circle.
    Circle,
    /// Points are unit vectors in R^3; great-circle distance.
    Sphere,
    /// 0 on the diagonal, 1 elsewhere. Used for matrix-only inputs.
    Discrete,
    Matrix(DMatrix<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Laplacian,
    SvdLeft,
    SvdRight,
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LaplacianKind {
    /// `diag(row sums) - W`.
    #[default]
    Combinatorial,
    /// `I - D^{-1} W`; self-adjoint for the degree measure, which replaces the weights.
    RandomWalk,
}

#[derive(Debug, Clone)]
pub struct AdmissibleSystem {
    points: Vec<Vec<f64>>,
    metric: Metric,
    weights: Vec<f64>,
    eigenvalues: Vec<f64>,
    eigenfunctions: DMatrix<Complex64>,
    provenance: Provenance,
}

impl AdmissibleSystem {
    pub fn new(
        points: Vec<Vec<f64>>,
        metric: Metric,
        weights: Vec<f64>,
        eigenvalues: Vec<f64>,
        eigenfunctions: DMatrix<Complex64>,
        provenance: Provenance,
    ) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::InvalidArgument("system has no points".into()));
        }
        check_len(n, points.len())?;
        check_len(n, eigenfunctions.nrows())?;
        check_len(eigenvalues.len(), eigenfunctions.ncols())?;
        if eigenvalues.is_empty() {
            return Err(Error::InvalidArgument("system has no modes".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument(format!("measure weight {w} is not positive")));
        }
        if let Some(l) = eigenvalues.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument(format!("eigenvalue {l} is not nonnegative")));
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("eigenvalues must be nondecreasing".into()));
        }
        if eigenfunctions.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidArgument("eigenfunction table has non-finite entries".into()));
        }
        match &metric {
            Metric::Matrix(d) => {
                if d.nrows() != n || d.ncols() != n {
                    return Err(Error::InvalidArgument(format!(
                        "metric matrix is {}x{}, expected {n}x{n}",
                        d.nrows(),
                        d.ncols()
                    )));
                }
                for i in 0..n {
                    if d[(i, i)] != 0.0 {
                        return Err(Error::InvalidArgument("metric diagonal must be zero".into()));
                    }
                    for j in 0..i {
                        let (a, b) = (d[(i, j)], d[(j, i)]);
                        if !(a >= 0.0) || (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                            return Err(Error::InvalidArgument(
                                "metric matrix must be symmetric and nonnegative".into(),
                            ));
                        }
                    }
                }
            }
            Metric::Euclidean => {
                let dim = points[0].len();
                if points.iter().any(|p| p.len() != dim) {
                    return Err(Error::InvalidArgument("points have mixed dimensions".into()));
                }
            }
            Metric::Circle => {
                if points.iter().any(|p| p.len() != 1) {
                    return Err(Error::InvalidArgument("circle metric needs 1-d angle points".into()));
                }
            }
            Metric::Sphere => {
                if points.iter().any(|p| p.len() != 3) {
                    return Err(Error::InvalidArgument("sphere metric needs 3-d points".into()));
                }
            }
            Metric::Discrete => {}
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coordinate".into()));
        }
        Ok(Self { points, metric, weights, eigenvalues, eigenfunctions, provenance })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn num_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenfunctions(&self) -> &DMatrix<Complex64> {
        &self.eigenfunctions
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `phi_k(x_i)`.
    #[inline]
    pub fn phi(&self, i: usize, k: usize) -> Complex64 {
        self.eigenfunctions[(i, k)]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        distance(&self.metric, &self.points, i, j)
    }

    /// `max_{j,k} |<phi_j, phi_k> - delta_jk|` under the discrete measure.
    pub fn orthonormality_residual(&self) -> f64 {
        gram_residual(&self.eigenfunctions, &self.weights)
    }

    pub fn is_orthonormal(&self) -> bool {
        self.orthonormality_residual() < ORTHONORMAL_TOL
    }

    /// `f_hat(k) = sum_i w_i f(x_i) conj(phi_k(x_i))`.
    pub fn coefficients(&self, f: &FunctionSamples) -> Result<DVector<Complex64>> {
        check_len(self.len(), f.len())?;
        Ok(weighted_coefficients(&self.eigenfunctions, &self.weights, f))
    }

    /// `sum_k a_k phi_k`.
    pub fn synthesize(&self, coeffs: &DVector<Complex64>) -> Result<FunctionSamples> {
        check_len(self.num_modes(), coeffs.len())?;
        Ok(&self.eigenfunctions * coeffs)
    }

    /// `sum_k exp(-lambda_k^2 t) phi_k(x_i) conj(phi_k(x_j))`.
    pub fn heat_kernel(&self, t: f64, i: usize, j: usize) -> Result<Complex64> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("heat time {t} must be positive")));
        }
        check_index(i, self.len())?;
        check_index(j, self.len())?;
        Ok(self.heat_kernel_unchecked(t, i, j))
    }

    pub(crate) fn heat_kernel_unchecked(&self, t: f64, i: usize, j: usize) -> Complex64 {
        self.eigenvalues
            .iter()
            .enumerate()
            .map(|(k, l)| (-l * l * t).exp() * self.phi(i, k) * self.phi(j, k).conj())
            .sum()
    }

    /// Row `x_i` of the heat kernel, `K_t(x_i, x_j)` for all `j`.
    pub fn heat_kernel_row(&self, t: f64, i: usize) -> Result<FunctionSamples> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("heat time {t} must be positive")));
        }
        check_index(i, self.len())?;
        let mut row = FunctionSamples::zeros(self.len());
        for (k, l) in self.eigenvalues.iter().enumerate() {
            let c = (-l * l * t).exp() * self.phi(i, k);
            for j in 0..self.len() {
                row[j] += c * self.phi(j, k).conj();
            }
        }
        Ok(row)
    }

    /// `mu(B(x_i, r))`.
    pub fn ball_measure(&self, i: usize, r: f64) -> Result<f64> {
        check_index(i, self.len())?;
        if !(r >= 0.0) {
            return Err(Error::InvalidArgument(format!("radius {r} must be nonnegative")));
        }
        Ok((0..self.len()).filter(|&j| self.distance(i, j) <= r).map(|j| self.weights[j]).sum())
    }

    /// Discrete `L^p(mu)` norm; `p = f64::INFINITY` gives the max.
    pub fn lp_norm(&self, f: &FunctionSamples, p: f64) -> Result<f64> {
        check_len(self.len(), f.len())?;
        lp_norm(&self.weights, f, p)
    }

    /// Fits the Gaussian upper bound `|K_t(x,y)| <= c1 t^{-q/2} exp(-c2 d^2/t)`.
    pub fn estimate_gaussian_bound(&self, t_grid: &[f64]) -> Result<GaussianBoundFit> {
        if t_grid.len() < 2 {
            return Err(Error::InvalidArgument("t grid needs at least two values".into()));
        }
        if let Some(t) = t_grid.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::InvalidArgument(format!("t = {t} outside (0, 1]")));
        }
        let n = self.len();
        let diag_sup: Vec<f64> = t_grid
            .iter()
            .map(|&t| (0..n).map(|i| self.heat_kernel_unchecked(t, i, i).re).fold(f64::MIN, f64::max))
            .collect();
        if diag_sup.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Numeric("heat kernel diagonal is not positive".into()));
        }
        let lt: Vec<f64> = t_grid.iter().map(|t| t.ln()).collect();
        let ld: Vec<f64> = diag_sup.iter().map(|v| v.ln()).collect();
        let fit = fit_line(&lt, &ld)?;
        let q_hat = -2.0 * fit.slope;
        // c1 large enough to dominate the diagonal at every t
        let c1_hat = lt.iter().zip(&ld).map(|(l, d)| (d + 0.5 * q_hat * l).exp()).fold(0.0, f64::max);

        let pairs = sample_pairs(n, 4096);
        let mut c2_hat: Option<f64> = None;
        if n > 1 {
            if pairs.iter().all(|&(i, j)| self.distance(i, j) == 0.0) {
                return Err(Error::InvalidArgument("degenerate Gaussian fit: all sampled distances are zero".into()));
            }
            let mut c2 = f64::INFINITY;
            for &t in t_grid {
                for &(i, j) in &pairs {
                    let d = self.distance(i, j);
                    if d == 0.0 {
                        continue;
                    }
                    let k = self.heat_kernel_unchecked(t, i, j).norm();
                    if k <= 0.0 {
                        continue;
                    }
                    let z = d * d / t;
                    let y = k.ln() + 0.5 * q_hat * t.ln();
                    c2 = c2.min((c1_hat.ln() - y) / z);
                }
            }
            c2_hat = Some(if c2.is_finite() { c2.max(0.0) } else { 0.0 });
        }
        let c2 = c2_hat.unwrap_or(0.0);
        let mut max_violation: f64 = 0.0;
        for &t in t_grid {
            let scale = c1_hat * t.powf(-0.5 * q_hat);
            for i in 0..n {
                let k = self.heat_kernel_unchecked(t, i, i).norm();
                max_violation = max_violation.max(k / scale - 1.0);
            }
            for &(i, j) in &pairs {
                let d = self.distance(i, j);
                let k = self.heat_kernel_unchecked(t, i, j).norm();
                max_violation = max_violation.max(k / (scale * (-c2 * d * d / t).exp()) - 1.0);
            }
        }
        Ok(GaussianBoundFit { q_hat, c1_hat, c2_hat, max_violation: max_violation.max(0.0) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianBoundFit {
    pub q_hat: f64,
    pub c1_hat: f64,
    /// `None` when there is no pair of distinct points to fit against.
    pub c2_hat: Option<f64>,
    /// Largest relative excess over the fitted bound.
    pub max_violation: f64,
}

/// Deterministic subset of off-diagonal pairs `(i, j)`, `i < j`, at most `cap` of them.
pub(crate) fn sample_pairs(n: usize, cap: usize) -> Vec<(usize, usize)> {
    let total = n * n.saturating_sub(1) / 2;
    let stride = total.div_ceil(cap.max(1)).max(1);
    let mut out = Vec::with_capacity(total.min(cap));
    let mut idx = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            if idx.is_multiple_of(stride) {
                out.push((i, j));
            }
            idx += 1;
        }
    }
    out
}

pub fn distance(metric: &Metric, points: &[Vec<f64>], i: usize, j: usize) -> f64 {
    if i == j {
        return 0.0;
    }
    match metric {
        Metric::Matrix(d) => d[(i, j)],
        Metric::Discrete => 1.0,
        Metric::Euclidean => points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        Metric::Circle => {
            let d = (points[i][0] - points[j][0]).rem_euclid(2.0 * PI);
            d.min(2.0 * PI - d)
        }
        Metric::Sphere => {
            let dot: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| a * b).sum();
            dot.clamp(-1.0, 1.0).acos()
        }
    }
}

pub fn lp_norm(weights: &[f64], f: &FunctionSamples, p: f64) -> Result<f64> {
    check_len(weights.len(), f.len())?;
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidArgument(format!("p = {p} must be >= 1")));
    }
    if p.is_infinite() {
        return Ok(f.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    if p == 2.0 {
        return Ok(weights.iter().zip(f.iter()).map(|(w, z)| w * z.norm_sqr()).sum::<f64>().sqrt());
    }
    let s: f64 = weights.iter().zip(f.iter()).map(|(w, z)| w * z.norm().powf(p)).sum();
    Ok(s.powf(1.0 / p))
}

pub(crate) fn weighted_coefficients(
    basis: &DMatrix<Complex64>,
    weights: &[f64],
    f: &FunctionSamples,
) -> DVector<Complex64> {
    let wf = DVector::from_iterator(f.len(), f.iter().zip(weights).map(|(z, w)| z * *w));
    basis.ad_mul(&wf)
}

pub(crate) fn gram_residual(basis: &DMatrix<Complex64>, weights: &[f64]) -> f64 {
    let mut wb = basis.clone();
    for (i, w) in weights.iter().enumerate() {
        wb.row_mut(i).scale_mut(*w);
    }
    let g = basis.ad_mul(&wb);
    let mut r: f64 = 0.0;
    for j in 0..g.nrows() {
        for k in 0..g.ncols() {
            let target = if j == k { 1.0 } else { 0.0 };
            r = r.max((g[(j, k)] - target).norm());
        }
    }
    r
}

#[derive(Debug, Clone, Default)]
pub struct UndirectedOptions {
    pub laplacian: LaplacianKind,
    /// Per-point measure weights; uniform `1/N` when absent.
    pub weights: Option<Vec<f64>>,
}

fn eigen_residual(b: &DMatrix<f64>, values: &DVector<f64>, vectors: &DMatrix<f64>) -> f64 {
    (0..values.len())
        .map(|c| {
            let v = vectors.column(c);
            (b * v - v * values[c]).norm()
        })
        .fold(0.0, f64::max)
}

/// Eigenpairs of a symmetric PSD matrix, unsorted.
///
/// nalgebra's `SymmetricEigen` and its `U`-only SVD each return mixed-up
/// vectors for some near-singular graph Laplacians, so the full SVD is tried
/// first and every candidate is accepted only after a residual check.
pub(crate) fn psd_eigen(b: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let tol = 1e-8 * b.norm().max(1.0);
    let mut worst = f64::INFINITY;
    if let Some(svd) = b.clone().try_svd(true, true, f64::EPSILON, 0) {
        if let Some(u) = svd.u {
            let r = eigen_residual(b, &svd.singular_values, &u);
            if r <= tol {
                return Ok((svd.singular_values, u));
            }
            worst = worst.min(r);
        }
    }
    let eig = nalgebra::SymmetricEigen::new(b.clone());
    let values = eig.eigenvalues.map(|v| v.max(0.0));
    let r = eigen_residual(b, &values, &eig.eigenvectors);
    if r <= tol {
        return Ok((values, eig.eigenvectors));
    }
    Err(Error::Numeric(format!("eigendecomposition residual {:e} too large", worst.min(r))))
}

/// Gaussian-kernel graph Laplacian system with `lambda_k = sqrt(ell_k)`.
pub fn build_undirected_system(
    points: &[Vec<f64>],
    epsilon: f64,
    k: usize,
    opts: &UndirectedOptions,
) -> Result<AdmissibleSystem> {
    let n = points.len();
    if n == 0 || k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("need N >= K >= 1, got N = {n}, K = {k}")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon = {epsilon} must be positive")));
    }
    if points.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument("non-finite coordinate".into()));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::InvalidArgument("points have mixed dimensions".into()));
    }
    let w = DMatrix::from_fn(n, n, |i, j| {
        let d2: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum();
        (-d2 / epsilon).exp()
    });
    let deg: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();

    // Symmetric matrix B whose eigenvectors v map to phi = scale_i * v_i.
    let (b, measure, scale): (DMatrix<f64>, Vec<f64>, Vec<f64>) = match opts.laplacian {
        LaplacianKind::Combinatorial => {
            let measure = match &opts.weights {
                Some(m) => {
                    check_len(n, m.len())?;
                    if m.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                        return Err(Error::InvalidArgument("measure weights must be positive".into()));
                    }
                    m.clone()
                }
                None => vec![1.0 / n as f64; n],
            };
            let mean = measure.iter().sum::<f64>() / n as f64;
            // L phi = ell (D_w / mean) phi
            let s: Vec<f64> = measure.iter().map(|m| (m / mean).sqrt()).collect();
            let b = DMatrix::from_fn(n, n, |i, j| {
                let l = if i == j { deg[i] - w[(i, j)] } else { -w[(i, j)] };
                l / (s[i] * s[j])
            });
            let scale = s.iter().map(|si| 1.0 / (si * mean.sqrt())).collect();
            (b, measure, scale)
        }
        LaplacianKind::RandomWalk => {
            if opts.weights.is_some() {
                return Err(Error::InvalidArgument(
                    "random-walk Laplacian uses the degree measure; custom weights not allowed".into(),
                ));
            }
            let total: f64 = deg.iter().sum();
            let b = DMatrix::from_fn(n, n, |i, j| {
                let id = if i == j { 1.0 } else { 0.0 };
                id - w[(i, j)] / (deg[i] * deg[j]).sqrt()
            });
            let measure = deg.iter().map(|d| d / total).collect();
            let scale = deg.iter().map(|d| (total / d).sqrt()).collect();
            (b, measure, scale)
        }
    };

    let (values, vectors) = psd_eigen(&b)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| values[a].total_cmp(&values[c]).then(a.cmp(&c)));
    let order = &order[..k];

    let mut lambdas = Vec::with_capacity(k);
    let mut phi = DMatrix::<Complex64>::zeros(n, k);
    for (col, &c) in order.iter().enumerate() {
        lambdas.push(values[c].max(0.0).sqrt());
        let v = vectors.column(c);
        // fix the sign so that the largest-magnitude entry is positive
        let pivot = v.iter().copied().fold(0.0_f64, |acc, x| if x.abs() > acc.abs() + 1e-12 { x } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            phi[(i, col)] = Complex64::new(sign * v[i] * scale[i], 0.0);
        }
    }
    // guard against tiny negative round-off breaking monotonicity after sqrt
    for i in 1..k {
        if lambdas[i] < lambdas[i - 1] {
            lambdas[i] = lambdas[i - 1];
        }
    }
    AdmissibleSystem::new(points.to_vec(), Metric::Euclidean, measure, lambdas, phi, Provenance::Laplacian)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jacobi::build_circle_system;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn single_point() -> AdmissibleSystem {
        AdmissibleSystem::new(
            vec![vec![0.0]],
            Metric::Euclidean,
            vec![1.0],
            vec![0.0],
            DMatrix::from_element(1, 1, c(1.0)),
            Provenance::Analytic,
        )
        .unwrap()
    }

    #[test]
    fn two_identical_points() {
        let pts = vec![vec![0.3, 1.0], vec![0.3, 1.0]];
        let s = build_undirected_system(&pts, 0.7, 2, &UndirectedOptions::default()).unwrap();
        // L = [[1,-1],[-1,1]] has eigenvalues 0 and 2
        assert!(s.eigenvalues()[0].abs() < 1e-12);
        assert!((s.eigenvalues()[1] - 2f64.sqrt()).abs() < 1e-12);
        assert!(s.orthonormality_residual() < 1e-12);
    }

    #[test]
    fn constant_ground_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let s = build_undirected_system(&pts, 0.2, 6, &UndirectedOptions::default()).unwrap();
        assert!(s.eigenvalues()[0].abs() < 1e-6);
        let p0 = s.phi(0, 0);
        for i in 0..s.len() {
            assert!((s.phi(i, 0) - p0).norm() < 1e-8);
        }
        assert!(s.orthonormality_residual() < ORTHONORMAL_TOL);
    }

    #[test]
    fn random_walk_variant_orthonormal_for_degree_measure() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Vec<f64>> = (0..25).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let opts = UndirectedOptions { laplacian: LaplacianKind::RandomWalk, weights: None };
        let s = build_undirected_system(&pts, 0.1, 5, &opts).unwrap();
        assert!((s.total_mass() - 1.0).abs() < 1e-12);
        assert!(s.orthonormality_residual() < ORTHONORMAL_TOL);
        assert!(s.eigenvalues()[0] < 1e-6);
    }

    #[test]
    fn custom_weights_stay_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let pts: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.gen()]).collect();
        let w: Vec<f64> = (0..20).map(|_| rng.gen_range(0.5..2.0)).collect();
        let opts = UndirectedOptions { laplacian: LaplacianKind::Combinatorial, weights: Some(w) };
        let s = build_undirected_system(&pts, 0.05, 6, &opts).unwrap();
        assert!(s.orthonormality_residual() < ORTHONORMAL_TOL);
    }

    #[test]
    fn circle_grid_multiplicities() {
        // ring of 64 points: the graph Laplacian of a cycle-like kernel has
        // eigenvalue pattern 0, a, a, b, b
        let n = 64;
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / n as f64;
                vec![th.cos(), th.sin()]
            })
            .collect();
        let s = build_undirected_system(&pts, 0.01, 5, &UndirectedOptions::default()).unwrap();
        let l = s.eigenvalues();
        assert!(l[0] < 1e-6);
        assert!((l[1] - l[2]).abs() < 1e-8 * l[1].max(1.0));
        assert!((l[3] - l[4]).abs() < 1e-8 * l[3].max(1.0));
        assert!(l[2] < l[3] - 1e-6);
        // circulant spectrum: ell_m = sum_j w_j (1 - cos(2 pi m j / N)), independent oracle
        let wrow: Vec<f64> = (0..n)
            .map(|j| {
                let d2 = (pts[0][0] - pts[j][0]).powi(2) + (pts[0][1] - pts[j][1]).powi(2);
                (-d2 / 0.01).exp()
            })
            .collect();
        for (m, want_idx) in [(1usize, 1usize), (2, 3)] {
            let ell: f64 = (0..n).map(|j| wrow[j] * (1.0 - (2.0 * PI * (m * j) as f64 / n as f64).cos())).sum();
            assert!((l[want_idx] - ell.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let o = UndirectedOptions::default();
        assert!(build_undirected_system(&[vec![f64::NAN]], 1.0, 1, &o).is_err());
        assert!(build_undirected_system(&[vec![0.0]], 0.0, 1, &o).is_err());
        assert!(build_undirected_system(&[vec![0.0]], 1.0, 2, &o).is_err());
    }

    #[test]
    fn coefficients_of_basis_and_zero() {
        let s = build_circle_system(64, 8).unwrap();
        let k0 = 5;
        let f = s.eigenfunctions().column(k0).into_owned();
        let cf = s.coefficients(&f).unwrap();
        for k in 0..s.num_modes() {
            let want = if k == k0 { 1.0 } else { 0.0 };
            assert!((cf[k] - want).norm() < 1e-8);
        }
        let z = s.coefficients(&FunctionSamples::zeros(64)).unwrap();
        assert!(z.iter().all(|v| v.norm() == 0.0));
        let f = s.eigenfunctions().column(1) + s.eigenfunctions().column(3) * c(2.0);
        let cf = s.coefficients(&f).unwrap();
        assert!((cf[1] - 1.0).norm() < 1e-12 && (cf[3] - 2.0).norm() < 1e-12);
        assert!(cf[0].norm() < 1e-12 && cf[2].norm() < 1e-12);
        assert!(s.coefficients(&FunctionSamples::zeros(3)).is_err());
    }

    #[test]
    fn heat_kernel_limits() {
        let s = single_point();
        assert!((s.heat_kernel(0.3, 0, 0).unwrap() - 1.0).norm() < 1e-15);
        let circ = build_circle_system(32, 5).unwrap();
        let k = circ.heat_kernel(200.0, 3, 17).unwrap();
        assert!((k - 1.0).norm() < 1e-12);
        assert!(circ.heat_kernel(0.0, 0, 0).is_err());
        assert!(circ.heat_kernel(1.0, 0, 99).is_err());
    }

    #[test]
    fn heat_kernel_symmetry_and_semigroup() {
        let s = build_circle_system(48, 10).unwrap();
        let t = 0.05;
        for (x, y) in [(0, 5), (3, 40), (7, 7)] {
            let a = s.heat_kernel(t, x, y).unwrap();
            let b = s.heat_kernel(t, y, x).unwrap();
            assert!((a - b.conj()).norm() < 1e-13);
            let rx = s.heat_kernel_row(t, x).unwrap();
            let ry = s.heat_kernel_row(t, y).unwrap();
            let comp: Complex64 = (0..s.len()).map(|j| s.weights()[j] * rx[j] * ry[j].conj()).sum();
            assert!((comp - s.heat_kernel(2.0 * t, x, y).unwrap()).norm() < 1e-8);
        }
    }

    #[test]
    fn circle_diagonal_scaling() {
        let s = build_circle_system(512, 128).unwrap();
        let ts: Vec<f64> = (3..9).map(|m| 2f64.powi(-m)).collect();
        let lt: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
        let ld: Vec<f64> = ts.iter().map(|&t| s.heat_kernel(t, 0, 0).unwrap().re.ln()).collect();
        let f = fit_line(&lt, &ld).unwrap();
        assert!((-2.0 * f.slope - 1.0).abs() < 0.05);
        // theta-function oracle: 1 + 2 sum exp(-k^2 t) ~ sqrt(pi / t)
        let t = 0.01;
        let want = (PI / t).sqrt();
        assert!((s.heat_kernel(t, 0, 0).unwrap().re - want).abs() / want < 1e-6);
    }

    #[test]
    fn gaussian_bound_fit() {
        let s = build_circle_system(256, 64).unwrap();
        let ts: Vec<f64> = (2..8).map(|m| 2f64.powi(-m)).collect();
        let fit = s.estimate_gaussian_bound(&ts).unwrap();
        assert!((fit.q_hat - 1.0).abs() < 0.3, "{fit:?}");
        assert!(fit.c2_hat.is_some());
        let one = single_point().estimate_gaussian_bound(&[0.1, 0.5]).unwrap();
        assert!(one.q_hat.abs() < 1e-12);
        assert!(one.c2_hat.is_none());
    }

    #[test]
    fn gaussian_bound_degenerate() {
        let s = AdmissibleSystem::new(
            vec![vec![1.0], vec![1.0]],
            Metric::Euclidean,
            vec![0.5, 0.5],
            vec![0.0],
            DMatrix::from_element(2, 1, c(1.0)),
            Provenance::Analytic,
        )
        .unwrap();
        assert!(s.estimate_gaussian_bound(&[0.1, 0.2]).is_err());
    }

    #[test]
    fn ball_measure_cases() {
        let s = build_circle_system(64, 4).unwrap();
        assert!((s.ball_measure(3, 0.0).unwrap() - 1.0 / 64.0).abs() < 1e-15);
        assert!((s.ball_measure(3, 10.0).unwrap() - 1.0).abs() < 1e-12);
        // quarter circumference either way covers half the circle (both endpoints included)
        let half = s.ball_measure(0, PI / 2.0 + 1e-12).unwrap();
        assert!((half - 33.0 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn lp_norms() {
        let w = vec![0.25; 4];
        let one = FunctionSamples::from_element(4, c(1.0));
        for p in [1.0, 1.5, 2.0, 7.0, f64::INFINITY] {
            assert!((lp_norm(&w, &one, p).unwrap() - 1.0).abs() < 1e-14);
        }
        let f = FunctionSamples::from_vec(vec![c(3.0), c(-4.0)]);
        assert_eq!(lp_norm(&[0.5, 0.5], &f, f64::INFINITY).unwrap(), 4.0);
        assert!(lp_norm(&w, &one, 0.5).is_err());
    }

    #[test]
    fn validation() {
        let phi = DMatrix::from_element(2, 1, c(1.0));
        let mk = |w: Vec<f64>, l: Vec<f64>, m: Metric| {
            AdmissibleSystem::new(vec![vec![0.0], vec![1.0]], m, w, l, phi.clone(), Provenance::Analytic)
        };
        assert!(mk(vec![0.5, 0.0], vec![0.0], Metric::Euclidean).is_err());
        assert!(mk(vec![0.5, 0.5], vec![-1.0], Metric::Euclidean).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(mk(vec![0.5, 0.5], vec![0.0], Metric::Matrix(asym)).is_err());
        let sym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(mk(vec![0.5, 0.5], vec![0.0], Metric::Matrix(sym)).is_ok());
    }

    proptest::proptest! {
        #[test]
        fn coefficient_synthesis_roundtrip(seed in 0u64..1000) {
            let s = build_circle_system(40, 9).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = DVector::from_fn(s.num_modes(), |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let f = s.synthesize(&a).unwrap();
            let back = s.coefficients(&f).unwrap();
            proptest::prop_assert!((back - a).norm() < 1e-8);
        }
    }
}
