//! Reference systems with closed-form spectra: orthonormal Jacobi
//! polynomials, the trigonometric circle system, and a hemisphere/disc pair
//! coupled through Jacobi connection coefficients.

use crate::error::{Error, Result};
use crate::system::{AdmissibleSystem, Metric, Provenance};
use crate::twosys::{ConnectionEntry, ConnectionMatrix, JointDistance};
use gauss_quad::legendre::GaussLegendre;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::{PI, SQRT_2};
use twofloat::TwoFloat;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiBasis {
    alpha: f64,
    beta: f64,
    max_degree: usize,
}

impl JacobiBasis {
    pub fn new(alpha: f64, beta: f64, max_degree: usize) -> Result<Self> {
        if !(alpha > -1.0 && beta > -1.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!("Jacobi parameters ({alpha}, {beta}) must exceed -1")));
        }
        Ok(Self { alpha, beta, max_degree })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Mass of the weight `(1-x)^alpha (1+x)^beta` on `[-1, 1]`.
    pub fn weight_mass(&self) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        ((a + b + 1.0) * std::f64::consts::LN_2 + libm::lgamma(a + 1.0) + libm::lgamma(b + 1.0)
            - libm::lgamma(a + b + 2.0))
        .exp()
    }

    /// Diagonal recurrence coefficient `a_n`.
    fn a(&self, n: usize) -> TwoFloat {
        let (a, b) = (TwoFloat::from(self.alpha), TwoFloat::from(self.beta));
        if n == 0 {
            return (b - a) / (a + b + 2.0);
        }
        let s = a + b + 2.0 * n as f64;
        (b * b - a * a) / (s * (s + 2.0))
    }

    /// Squared off-diagonal coefficient `b_n`, `n >= 1`.
    fn b(&self, n: usize) -> TwoFloat {
        let (a, b) = (TwoFloat::from(self.alpha), TwoFloat::from(self.beta));
        if n == 1 {
            let s = a + b + 2.0;
            return 4.0 * (a + 1.0) * (b + 1.0) / (s * s * (s + 1.0));
        }
        let nf = TwoFloat::from(n as f64);
        let s = a + b + 2.0 * n as f64;
        4.0 * nf * (nf + a) * (nf + b) * (nf + a + b) / (s * s * (s + 1.0) * (s - 1.0))
    }

    /// `p_k(x)` with range checks.
    pub fn eval(&self, k: usize, x: f64) -> Result<f64> {
        if k > self.max_degree {
            return Err(Error::InvalidArgument(format!("degree {k} exceeds max degree {}", self.max_degree)));
        }
        if !(-1.0..=1.0).contains(&x) {
            return Err(Error::InvalidArgument(format!("x = {x} outside [-1, 1]")));
        }
        Ok(f64::from(self.eval_all_dd(k, TwoFloat::from(x))[k]))
    }

    /// `p_0(x), ..., p_max(x)`.
    pub fn eval_all(&self, x: f64) -> Vec<f64> {
        self.eval_all_dd(self.max_degree, TwoFloat::from(x)).into_iter().map(f64::from).collect()
    }

    // The recurrence runs in double-double: at degree ~40 near x = 1 the values
    // reach 1e5 and plain f64 loses about 1e-10 absolute.
    fn eval_all_dd(&self, deg: usize, x: TwoFloat) -> Vec<TwoFloat> {
        let mut p = Vec::with_capacity(deg + 1);
        p.push(TwoFloat::from(1.0) / TwoFloat::from(self.weight_mass()).sqrt());
        if deg == 0 {
            return p;
        }
        let mut sb_prev = self.b(1).sqrt();
        p.push((x - self.a(0)) * p[0] / sb_prev);
        for n in 1..deg {
            let sb_next = self.b(n + 1).sqrt();
            let next = ((x - self.a(n)) * p[n] - sb_prev * p[n - 1]) / sb_next;
            p.push(next);
            sb_prev = sb_next;
        }
        p
    }
}

pub fn jacobi_eval(basis: &JacobiBasis, k: usize, x: f64) -> Result<f64> {
    basis.eval(k, x)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let rule = GaussLegendre::new(n.max(2)).map_err(|e| Error::Numeric(format!("Gauss-Legendre rule: {e}")))?;
    Ok(rule.as_node_weight_pairs().iter().copied().unzip())
}

/// `a_{j,k}^{(m)} = int p_j^{(|m|,1/2)} p_k^{(|m|,1)} (1-x)^{|m|} (1+x) dx`, `k <= j`.
pub fn connection_coeff(m: i32, j: usize, k: usize) -> Result<f64> {
    if k > j {
        return Err(Error::InvalidArgument(format!("connection coefficient needs k <= j, got k = {k}, j = {j}")));
    }
    Ok(connection_block(m, j)?[(j, k)])
}

/// Lower-triangular `(J+1) x (J+1)` block of `a_{j,k}^{(m)}`.
pub fn connection_block(m: i32, j_max: usize) -> Result<DMatrix<f64>> {
    let am = f64::from(m.unsigned_abs());
    let half = JacobiBasis::new(am, 0.5, j_max)?;
    let one = JacobiBasis::new(am, 1.0, j_max)?;
    // the integrand is a polynomial of degree 2 j_max + |m| + 1
    let (x, w) = gauss_legendre(j_max + m.unsigned_abs() as usize / 2 + 6)?;
    let mut out = DMatrix::zeros(j_max + 1, j_max + 1);
    for (xi, wi) in x.iter().zip(&w) {
        let ph = half.eval_all(*xi);
        let po = one.eval_all(*xi);
        let wt = wi * (1.0 - xi).powf(am) * (1.0 + xi);
        for j in 0..=j_max {
            for k in 0..=j {
                out[(j, k)] += wt * ph[j] * po[k];
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UltraCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub abs_diff: f64,
}

/// Compares `p_{2j+1}^{(a,a)}(cos t)` with `2^{a/2+3/4} cos t p_j^{(a,1/2)}(cos 2t)`.
pub fn verify_jacobi_ultra(alpha: f64, j: usize, theta: f64) -> Result<UltraCheck> {
    if !(0.0..=PI / 2.0).contains(&theta) {
        return Err(Error::InvalidArgument(format!("theta = {theta} outside [0, pi/2]")));
    }
    let sym = JacobiBasis::new(alpha, alpha, 2 * j + 1)?;
    let half = JacobiBasis::new(alpha, 0.5, j)?;
    // cos 2t is formed from cos t so both sides see the same rounded argument
    let c = TwoFloat::from(theta.cos());
    let c2 = 2.0 * c * c - 1.0;
    let lhs = f64::from(sym.eval_all_dd(2 * j + 1, c)[2 * j + 1]);
    let rhs = f64::from(TwoFloat::from(2f64.powf(alpha / 2.0 + 0.75)) * c * half.eval_all_dd(j, c2)[j]);
    Ok(UltraCheck { lhs, rhs, abs_diff: (lhs - rhs).abs() })
}

/// Equispaced circle with modes `1, sqrt2 cos k t, sqrt2 sin k t` for `k <= max_freq`.
///
/// Weights are `1/N`, so the measure is a probability measure and the
/// eigenfunctions are orthonormal exactly when `N >= 2 max_freq + 1`.
pub fn build_circle_system(n: usize, max_freq: usize) -> Result<AdmissibleSystem> {
    if n < 2 * max_freq + 1 {
        return Err(Error::InvalidArgument(format!(
            "circle grid N = {n} too small for frequency {max_freq}; need N >= {}",
            2 * max_freq + 1
        )));
    }
    let theta: Vec<f64> = (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
    let modes = 2 * max_freq + 1;
    let mut phi = DMatrix::<Complex64>::zeros(n, modes);
    let mut lambdas = vec![0.0; modes];
    for (i, t) in theta.iter().enumerate() {
        phi[(i, 0)] = Complex64::new(1.0, 0.0);
        for k in 1..=max_freq {
            let (s, c) = (k as f64 * t).sin_cos();
            phi[(i, 2 * k - 1)] = Complex64::new(SQRT_2 * c, 0.0);
            phi[(i, 2 * k)] = Complex64::new(SQRT_2 * s, 0.0);
        }
    }
    for k in 1..=max_freq {
        lambdas[2 * k - 1] = k as f64;
        lambdas[2 * k] = k as f64;
    }
    AdmissibleSystem::new(
        theta.iter().map(|t| vec![*t]).collect(),
        Metric::Circle,
        vec![1.0 / n as f64; n],
        lambdas,
        phi,
        Provenance::Analytic,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HemisphereSpectrum {
    /// `sqrt(n(n+1))` with `n = 2j + 1 + |l|`, the Dirichlet Laplace-Beltrami frequency.
    #[default]
    LaplaceBeltrami,
    /// `sqrt((j+l)(j+l+1))` taken literally.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairConfig {
    /// Gauss-Legendre nodes in `x = cos(theta)` on `(0, 1)`.
    pub n_theta: usize,
    /// Trapezoid nodes in `phi`.
    pub n_phi: usize,
    /// Largest `j` (hemisphere) and `k` (disc).
    pub j_max: usize,
    /// Largest `|l|`, `|m|`.
    pub m_max: usize,
    pub spectrum: HemisphereSpectrum,
}

impl Default for PairConfig {
    fn default() -> Self {
        Self { n_theta: 64, n_phi: 64, j_max: 8, m_max: 8, spectrum: HemisphereSpectrum::LaplaceBeltrami }
    }
}

/// Hemisphere (system 1) and unit disc (system 2) sharing a `(theta, phi)` grid.
#[derive(Debug, Clone)]
pub struct HemisphereDiscPair {
    pub config: PairConfig,
    pub hemisphere: AdmissibleSystem,
    pub disc: AdmissibleSystem,
    /// `(j, l)` for each hemisphere column.
    pub hemisphere_modes: Vec<(usize, i32)>,
    /// `(k, m)` for each disc column.
    pub disc_modes: Vec<(usize, i32)>,
    /// `A` with `sum_k A phi_2 o q = phi_1 o p`; joint eigenvalue `lambda_1`.
    pub synthesis: ConnectionMatrix,
    /// Per-block `A^{-T}`; turns disc coefficients into those of `f o q` on the hemisphere.
    pub lifting: ConnectionMatrix,
    /// `theta` for each grid row (point index `= row * n_phi + col`).
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    /// `d_12(p(a), q(b)) = d_1(p(a), p(b))`.
    pub joint_distance: JointDistance,
}

/// Constant in `A = SYNTHESIS_SCALE * a_{j,k}^{(m)}`.
pub fn synthesis_scale() -> f64 {
    PI.sqrt() * 2f64.powf(0.25)
}

pub fn hemisphere_eigenvalue(j: usize, l: i32, spectrum: HemisphereSpectrum) -> f64 {
    match spectrum {
        HemisphereSpectrum::LaplaceBeltrami => {
            let n = (2 * j + 1) as f64 + f64::from(l.unsigned_abs());
            (n * (n + 1.0)).sqrt()
        }
        HemisphereSpectrum::AsPrinted => {
            let s = j as f64 + f64::from(l);
            (s * (s + 1.0)).max(0.0).sqrt()
        }
    }
}

pub fn disc_eigenvalue(k: usize, m: i32) -> f64 {
    let (k, am) = (k as f64, f64::from(m.unsigned_abs()));
    k * am + k + am
}

/// `phi_{1,(j,l)}(p(theta, phi))` evaluated directly.
pub fn hemisphere_eval(j: usize, l: i32, theta: f64, phi: f64) -> Complex64 {
    let al = f64::from(l.unsigned_abs());
    let basis = JacobiBasis::new(al, al, 2 * j + 1).expect("parameters are nonnegative");
    let v = SQRT_2 * theta.sin().powf(al) * basis.eval_all(theta.cos().clamp(-1.0, 1.0))[2 * j + 1];
    Complex64::from_polar(v, f64::from(l) * phi)
}

/// `phi_{2,(k,m)}(q(theta, phi))` evaluated directly.
pub fn disc_eval(k: usize, m: i32, theta: f64, phi: f64) -> Complex64 {
    let am = f64::from(m.unsigned_abs());
    let basis = JacobiBasis::new(am, 1.0, k).expect("parameters are nonnegative");
    let norm = (2f64.powf(am + 2.0) / PI).sqrt();
    let v = norm * theta.sin().powf(am) * theta.cos() * basis.eval_all((2.0 * theta).cos().clamp(-1.0, 1.0))[k];
    Complex64::from_polar(v, f64::from(m) * phi)
}

pub fn build_hemisphere_disc_pair(config: PairConfig) -> Result<HemisphereDiscPair> {
    let PairConfig { n_theta, n_phi, j_max, m_max, spectrum } = config;
    if j_max < 1 || m_max < 1 {
        return Err(Error::InvalidArgument("truncation must be >= 1".into()));
    }
    if n_theta < 2 || n_phi < 1 {
        return Err(Error::InvalidArgument("grid too small".into()));
    }
    let m_max_i = m_max as i32;
    let (xi, wi) = gauss_legendre(n_theta)?;
    // map (-1,1) to x = cos(theta) in (0,1)
    let x: Vec<f64> = xi.iter().map(|v| 0.5 * (v + 1.0)).collect();
    let wx: Vec<f64> = wi.iter().map(|v| 0.5 * v).collect();
    let theta: Vec<f64> = x.iter().map(|v| v.acos()).collect();
    let phis: Vec<f64> = (0..n_phi).map(|i| -PI + 2.0 * PI * (i + 1) as f64 / n_phi as f64).collect();
    let npts = n_theta * n_phi;

    let mut pts1 = Vec::with_capacity(npts);
    let mut pts2 = Vec::with_capacity(npts);
    let mut w1 = Vec::with_capacity(npts);
    let mut w2 = Vec::with_capacity(npts);
    for (it, t) in theta.iter().enumerate() {
        let (st, ct) = t.sin_cos();
        for p in &phis {
            let (sp, cp) = p.sin_cos();
            pts1.push(vec![st * cp, st * sp, ct]);
            pts2.push(vec![st * cp, st * sp]);
            // hemisphere: dx dphi / (2 pi); disc: x dx dphi
            w1.push(wx[it] / n_phi as f64);
            w2.push(x[it] * wx[it] * 2.0 * PI / n_phi as f64);
        }
    }

    let mut modes1: Vec<(usize, i32)> = Vec::new();
    let mut modes2: Vec<(usize, i32)> = Vec::new();
    for j in 0..=j_max {
        for l in -m_max_i..=m_max_i {
            modes1.push((j, l));
            modes2.push((j, l));
        }
    }
    let sort_by_key = |modes: &mut Vec<(usize, i32)>, f: &dyn Fn(usize, i32) -> f64| {
        modes.sort_by(|a, b| f(a.0, a.1).total_cmp(&f(b.0, b.1)).then(a.cmp(b)));
    };
    sort_by_key(&mut modes1, &|j, l| hemisphere_eigenvalue(j, l, spectrum));
    sort_by_key(&mut modes2, &disc_eigenvalue);
    let lam1: Vec<f64> = modes1.iter().map(|&(j, l)| hemisphere_eigenvalue(j, l, spectrum)).collect();
    let lam2: Vec<f64> = modes2.iter().map(|&(k, m)| disc_eigenvalue(k, m)).collect();

    // radial parts per |m|, per theta row
    let mut rad1 = vec![vec![vec![0.0; j_max + 1]; n_theta]; m_max + 1];
    let mut rad2 = vec![vec![vec![0.0; j_max + 1]; n_theta]; m_max + 1];
    for am in 0..=m_max {
        let a = am as f64;
        let b1 = JacobiBasis::new(a, a, 2 * j_max + 1)?;
        let b2 = JacobiBasis::new(a, 1.0, j_max)?;
        let norm2 = (2f64.powf(a + 2.0) / PI).sqrt();
        for (it, t) in theta.iter().enumerate() {
            let (st, ct) = t.sin_cos();
            let p1 = b1.eval_all(ct);
            let p2 = b2.eval_all((2.0 * t).cos().clamp(-1.0, 1.0));
            for j in 0..=j_max {
                rad1[am][it][j] = SQRT_2 * st.powf(a) * p1[2 * j + 1];
                rad2[am][it][j] = norm2 * st.powf(a) * ct * p2[j];
            }
        }
    }
    let tabulate = |modes: &[(usize, i32)], rad: &Vec<Vec<Vec<f64>>>| {
        let mut out = DMatrix::<Complex64>::zeros(npts, modes.len());
        for (col, &(j, l)) in modes.iter().enumerate() {
            let am = l.unsigned_abs() as usize;
            for it in 0..n_theta {
                let r = rad[am][it][j];
                for (ip, p) in phis.iter().enumerate() {
                    out[(it * n_phi + ip, col)] = Complex64::from_polar(r, f64::from(l) * p);
                }
            }
        }
        out
    };
    let phi1 = tabulate(&modes1, &rad1);
    let phi2 = tabulate(&modes2, &rad2);

    let hemisphere = AdmissibleSystem::new(pts1, Metric::Sphere, w1, lam1.clone(), phi1, Provenance::Analytic)?;
    let disc = AdmissibleSystem::new(pts2, Metric::Euclidean, w2, lam2, phi2, Provenance::Analytic)?;
    for (name, s) in [("hemisphere", &hemisphere), ("disc", &disc)] {
        let r = s.orthonormality_residual();
        if r > 1e-6 {
            return Err(Error::Numeric(format!(
                "{name} basis orthonormality residual {r:e} exceeds 1e-6; refine the grid"
            )));
        }
    }

    let col1 = |j: usize, l: i32| modes1.iter().position(|&v| v == (j, l)).expect("mode present");
    let col2 = |k: usize, m: i32| modes2.iter().position(|&v| v == (k, m)).expect("mode present");
    let scale = synthesis_scale();
    let mut syn = Vec::new();
    let mut lift = Vec::new();
    for m in -m_max_i..=m_max_i {
        let a = connection_block(m, j_max)? * scale;
        let inv = a
            .clone()
            .solve_lower_triangular(&DMatrix::identity(j_max + 1, j_max + 1))
            .ok_or_else(|| Error::Numeric(format!("connection block m = {m} is singular")))?;
        for j in 0..=j_max {
            let c1 = col1(j, m);
            for k in 0..=j_max {
                let c2 = col2(k, m);
                if k <= j {
                    syn.push(ConnectionEntry {
                        j: c1,
                        k: c2,
                        value: Complex64::new(a[(j, k)], 0.0),
                        ell: Some(lam1[c1]),
                    });
                }
                if j <= k {
                    // (A^{-T})_{jk} = (A^{-1})_{kj}
                    lift.push(ConnectionEntry {
                        j: c1,
                        k: c2,
                        value: Complex64::new(inv[(k, j)], 0.0),
                        ell: Some(lam1[c1]),
                    });
                }
            }
        }
    }
    let k1 = hemisphere.num_modes();
    let k2 = disc.num_modes();
    let synthesis = ConnectionMatrix::new(k1, k2, syn)?;
    let lifting = ConnectionMatrix::new(k1, k2, lift)?;
    Ok(HemisphereDiscPair {
        config,
        hemisphere,
        disc,
        hemisphere_modes: modes1,
        disc_modes: modes2,
        synthesis,
        lifting,
        theta,
        phi: phis,
        joint_distance: JointDistance::Correspondence((0..npts).collect()),
    })
}

impl HemisphereDiscPair {
    /// Grid point index of `(theta row, phi column)`.
    pub fn point_index(&self, row: usize, col: usize) -> usize {
        row * self.config.n_phi + col
    }

    /// Largest pointwise residual of the synthesis identity over the grid.
    pub fn synthesis_residual(&self) -> f64 {
        let phi1 = self.hemisphere.eigenfunctions();
        let phi2 = self.disc.eigenfunctions();
        let mut acc = DMatrix::<Complex64>::zeros(phi1.nrows(), phi1.ncols());
        for e in self.synthesis.entries() {
            let mut col = acc.column_mut(e.j);
            col.axpy(e.value, &phi2.column(e.k), Complex64::new(1.0, 0.0));
        }
        (acc - phi1).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}
