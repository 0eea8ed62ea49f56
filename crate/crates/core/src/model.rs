//! Closed-form quantities: parameters, self-similar exponents, critical
//! points with their linearizations, the explicit profile, local series
//! at the singular anchors, and the tail envelope.

use crate::error::{Error, Result};
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

/// The problem instance `u_t = (u^m)_xx + |x|^σ u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    m: f64,
    sigma: f64,
}

impl Params {
    /// Validates and builds a parameter pair. Requires finite `m > 1` and `σ > 0`.
    pub fn new(m: f64, sigma: f64) -> Result<Self> {
        if !m.is_finite() || m <= 1.0 {
            return Err(Error::InvalidParams(format!("m must be finite and > 1, got {m}")));
        }
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "sigma must be finite and > 0, got {sigma}"
            )));
        }
        Ok(Self { m, sigma })
    }

    /// Parameters at the explicit-solution exponent `σ_*(m)`.
    pub fn at_sigma_star(m: f64) -> Result<Self> {
        Self::new(m, sigma_star(m)?)
    }

    /// Diffusion exponent.
    pub fn m(&self) -> f64 {
        self.m
    }

    /// Weight exponent.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Shorthand for [`exponents`].
    pub fn exponents(&self) -> Exponents {
        exponents(self)
    }
}

/// Self-similar time and space rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    pub alpha: f64,
    pub beta: f64,
}

/// `α = (σ+2)/(σ(m−1))`, `β = 1/σ`.
pub fn exponents(p: &Params) -> Exponents {
    Exponents {
        alpha: (p.sigma + 2.0) / (p.sigma * (p.m - 1.0)),
        beta: 1.0 / p.sigma,
    }
}

/// `σ_* = √(2(m+1))`, the exponent with an explicit good profile.
pub fn sigma_star(m: f64) -> Result<f64> {
    if !m.is_finite() || m <= 1.0 {
        return Err(Error::InvalidParams(format!("m must be finite and > 1, got {m}")));
    }
    Ok((2.0 * (m + 1.0)).sqrt())
}

fn explicit_b(m: f64, s: f64) -> f64 {
    (m - 1.0).powi(2) / (m * (s + 2.0) * (m * s + m + 1.0))
}

/// The explicit good profile at `σ = σ_*(m)`:
/// `f_*(ξ) = ξ^{2/(m−1)} ((m−1)/(2m(m+1)) − B ξ^{σ_*})_+^{1/(m−1)}`.
///
/// Returns 0 outside the support. Invalid `m` or negative `ξ` yield NaN.
pub fn explicit_profile(m: f64, xi: f64) -> f64 {
    let Ok(s) = sigma_star(m) else {
        return f64::NAN;
    };
    if !(xi >= 0.0) {
        return f64::NAN;
    }
    if xi == 0.0 {
        return 0.0;
    }
    let a = (m - 1.0) / (2.0 * m * (m + 1.0));
    let bracket = a - explicit_b(m, s) * xi.powf(s);
    if bracket <= 8.0 * f64::EPSILON * a {
        return 0.0;
    }
    xi.powf(2.0 / (m - 1.0)) * bracket.powf(1.0 / (m - 1.0))
}

/// Pressure `v_* = f_*^{m−1}` and its derivative on the support of the explicit profile.
pub fn explicit_pressure(m: f64, xi: f64) -> (f64, f64) {
    let s = (2.0 * (m + 1.0)).sqrt();
    let a = (m - 1.0) / (2.0 * m * (m + 1.0));
    let b = explicit_b(m, s);
    let v = a * xi * xi - b * xi.powf(s + 2.0);
    let w = 2.0 * a * xi - (s + 2.0) * b * xi.powf(s + 1.0);
    (v, w)
}

/// Right edge `ξ₁` of the support of the explicit profile, from the closed formula.
///
/// In debug builds the value is cross-checked against `(α_* γ_*)^{1/σ_*}`.
pub fn explicit_support_edge(m: f64) -> f64 {
    let Ok(s) = sigma_star(m) else {
        return f64::NAN;
    };
    let edge = ((m - 1.0) / (2.0 * m * (m + 1.0) * explicit_b(m, s))).powf(1.0 / s);
    debug_assert!({
        let other = explicit_support_edge_from_gamma(m);
        ((edge - other) / edge).abs() <= 1e-10
    });
    edge
}

/// The same edge as `(α_* γ_*)^{1/σ_*}` with `γ_* = (mσ_*+m+1)/σ_*`.
pub fn explicit_support_edge_from_gamma(m: f64) -> f64 {
    let Ok(p) = Params::at_sigma_star(m) else {
        return f64::NAN;
    };
    let s = p.sigma;
    (p.exponents().alpha * explicit_gamma(m)).powf(1.0 / s)
}

/// `γ_* = (mσ_*+m+1)/σ_*`, the interface label reached by the explicit profile.
pub fn explicit_gamma(m: f64) -> f64 {
    let s = (2.0 * (m + 1.0)).sqrt();
    (m * s + m + 1.0) / s
}

fn p2_denominator(p: &Params) -> f64 {
    let (m, s) = (p.m, p.sigma);
    (m - 1.0) * s * s + (3.0 * m + 1.0) * s + 4.0 * (m + 1.0)
}

/// `ψ(σ) = ((m−1)²/((m−1)σ²+(3m+1)σ+4(m+1)))^{1/(m−1)}`.
pub fn psi_coefficient(p: &Params) -> f64 {
    ((p.m - 1.0).powi(2) / p2_denominator(p)).powf(1.0 / (p.m - 1.0))
}

/// Names of the critical points of the phase-space system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointTag {
    P0,
    P0Gamma,
    P1Gamma,
    P2,
    Q1,
    Q2,
    Q3,
    Q4,
    Q5,
}

/// Coordinates of a critical point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coords {
    /// `(X, Y, Z)` for points at finite distance.
    Finite([f64; 3]),
    /// Unit 4-vector on the Poincaré hypersphere.
    AtInfinity([f64; 4]),
}

/// A named critical point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint {
    pub tag: PointTag,
    pub gamma: Option<f64>,
    pub coords: Coords,
}

impl CriticalPoint {
    /// Finite coordinates, if the point is not at infinity.
    pub fn finite(&self) -> Option<[f64; 3]> {
        match self.coords {
            Coords::Finite(c) => Some(c),
            Coords::AtInfinity(_) => None,
        }
    }
}

/// Builds a critical point. `gamma` must be given and positive for the two lines.
pub fn critical_point(p: &Params, tag: PointTag, gamma: Option<f64>) -> Result<CriticalPoint> {
    let Exponents { alpha, beta } = p.exponents();
    let m = p.m;
    let needs_gamma = matches!(tag, PointTag::P0Gamma | PointTag::P1Gamma);
    let gamma = if needs_gamma {
        match gamma {
            Some(g) if g.is_finite() && g > 0.0 => Some(g),
            _ => return Err(Error::InvalidGamma(tag)),
        }
    } else {
        None
    };
    let coords = match tag {
        PointTag::P0 => Coords::Finite([0.0, 0.0, 0.0]),
        PointTag::P0Gamma => Coords::Finite([0.0, 0.0, gamma.unwrap_or_default()]),
        PointTag::P1Gamma => Coords::Finite([0.0, -beta / alpha, gamma.unwrap_or_default()]),
        PointTag::P2 => Coords::Finite([
            (m - 1.0) / (2.0 * (m + 1.0) * alpha),
            1.0 / ((m + 1.0) * alpha),
            0.0,
        ]),
        PointTag::Q1 => Coords::AtInfinity([1.0, 0.0, 0.0, 0.0]),
        PointTag::Q2 => Coords::AtInfinity([0.0, 1.0, 0.0, 0.0]),
        PointTag::Q3 => Coords::AtInfinity([0.0, -1.0, 0.0, 0.0]),
        PointTag::Q4 => Coords::AtInfinity([0.0, 0.0, 1.0, 0.0]),
        PointTag::Q5 => {
            let n = (1.0 + m * m).sqrt();
            Coords::AtInfinity([m / n, 1.0 / n, 0.0, 0.0])
        }
    };
    Ok(CriticalPoint { tag, gamma, coords })
}

/// Linear part of the flow at a critical point with its eigen-pairs.
///
/// Eigenvalues are sorted by real part, then imaginary part; `eigenvectors[i]`
/// belongs to `eigenvalues[i]` and has unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub point: CriticalPoint,
    pub matrix: Matrix3<f64>,
    pub eigenvalues: [Complex64; 3],
    pub eigenvectors: [Vector3<Complex64>; 3],
}

impl Linearization {
    /// True when every eigenvalue has imaginary part below `tol` times the matrix norm.
    pub fn is_real(&self, tol: f64) -> bool {
        let scale = self.matrix.norm().max(f64::MIN_POSITIVE);
        self.eigenvalues.iter().all(|l| l.im.abs() <= tol * scale)
    }

    /// Largest relative residual `|M v − λ v| / (‖M‖ + |λ|)` over the stored pairs.
    pub fn max_pair_residual(&self) -> f64 {
        let mc = self.matrix.map(Complex64::from);
        let scale = self.matrix.norm();
        (0..3)
            .map(|i| {
                let v = &self.eigenvectors[i];
                let r = &mc * v - v * self.eigenvalues[i];
                r.norm() / ((scale + self.eigenvalues[i].norm()) * v.norm()).max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }
}

/// Closed-form eigenvector `e₁` of `M(P₁^γ)` for the eigenvalue `−(m−1)β/α`.
pub fn p1_closed_form_e1(p: &Params, gamma: f64) -> [f64; 3] {
    let Exponents { alpha, beta } = p.exponents();
    let m = p.m;
    [
        -1.0,
        (alpha * (1.0 - gamma) + beta) / (m * beta),
        alpha * p.sigma * gamma / ((m - 1.0) * beta),
    ]
}

/// Eigenvector `e₃` of `M(P₂)` for `λ₃`, normalized to unit Z-component.
pub fn p2_e3(p: &Params) -> [f64; 3] {
    let d = p2_denominator(p);
    let m = p.m;
    [-(m - 1.0).powi(2) / d, -(m - 1.0) * (p.sigma + 2.0) / d, 1.0]
}

/// Linearizes the phase-space field at `point`. Points Q1–Q4 are rejected.
pub fn linearize(p: &Params, point: &CriticalPoint) -> Result<Linearization> {
    let Exponents { alpha, beta } = p.exponents();
    let (m, s) = (p.m, p.sigma);
    let ba = beta / alpha;
    let gamma = point.gamma.unwrap_or(0.0);
    let matrix = match point.tag {
        PointTag::P0 => Matrix3::new(0.0, 0.0, 0.0, 1.0, -ba, 0.0, 0.0, 0.0, 0.0),
        PointTag::P0Gamma => {
            Matrix3::new(0.0, 0.0, 0.0, 1.0 - gamma, -ba, 0.0, s * gamma, 0.0, 0.0)
        }
        PointTag::P1Gamma => Matrix3::new(
            -(m - 1.0) * ba,
            0.0,
            0.0,
            1.0 + ba - gamma,
            ba,
            0.0,
            s * gamma,
            0.0,
            0.0,
        ),
        PointTag::P2 => {
            let k = 1.0 / (2.0 * (m + 1.0) * alpha);
            Matrix3::new(
                -2.0 * (m - 1.0),
                (m - 1.0).powi(2),
                0.0,
                2.0 * (m + 1.0) * alpha - 2.0,
                -2.0 * beta * (m + 1.0) - (m + 3.0),
                -(m - 1.0),
                0.0,
                0.0,
                s * (m - 1.0),
            ) * k
        }
        PointTag::Q5 => Matrix3::new(
            1.0,
            1.0,
            beta / (m * alpha) - 1.0,
            0.0,
            -(m * s + m + 1.0) / m,
            0.0,
            0.0,
            0.0,
            -(m + 1.0) / m,
        ),
        tag => return Err(Error::UnsupportedPoint(tag)),
    };
    let (eigenvalues, mut eigenvectors) = eigen_pairs(&matrix);
    if point.tag == PointTag::P1Gamma {
        let target = -(m - 1.0) * ba;
        let idx = (0..3)
            .min_by(|&i, &j| {
                let di = (eigenvalues[i] - target).norm();
                let dj = (eigenvalues[j] - target).norm();
                di.total_cmp(&dj)
            })
            .unwrap_or(0);
        let e1 = p1_closed_form_e1(p, gamma);
        let v = Vector3::new(e1[0], e1[1], e1[2]);
        eigenvectors[idx] = (v / v.norm()).map(Complex64::from);
    }
    Ok(Linearization { point: *point, matrix, eigenvalues, eigenvectors })
}

/// Numerical eigen-pairs of a real 3×3 matrix.
///
/// Eigenvalues come from the real Schur form. Clusters closer than `1e-6‖M‖`
/// are replaced by their mean, which restores the accuracy lost to defective
/// blocks. Eigenvectors are null vectors of `M − λI` from a complex SVD; inside
/// a cluster successive null vectors are used while the singular values stay
/// negligible, and the first one is repeated otherwise.
pub fn eigen_pairs(matrix: &Matrix3<f64>) -> ([Complex64; 3], [Vector3<Complex64>; 3]) {
    let scale = matrix.norm().max(f64::MIN_POSITIVE);
    let raw = matrix.complex_eigenvalues();
    let mut vals: Vec<Complex64> = raw.iter().copied().collect();
    vals.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    let cluster_tol = 1e-6 * scale;
    let mut cluster_id = [0usize; 3];
    for i in 1..3 {
        cluster_id[i] = if (vals[i] - vals[i - 1]).norm() <= cluster_tol {
            cluster_id[i - 1]
        } else {
            cluster_id[i - 1] + 1
        };
    }
    let mut snapped = vals.clone();
    for i in 0..3 {
        let members: Vec<usize> = (0..3).filter(|&j| cluster_id[j] == cluster_id[i]).collect();
        if members.len() > 1 {
            let mean = members.iter().map(|&j| vals[j]).sum::<Complex64>() / members.len() as f64;
            snapped[i] = mean;
        }
    }

    let mc = matrix.map(Complex64::from);
    let mut vectors = [Vector3::<Complex64>::zeros(); 3];
    for i in 0..3 {
        let rank_in_cluster = (0..i).filter(|&j| cluster_id[j] == cluster_id[i]).count();
        let shifted = mc - Matrix3::<Complex64>::identity() * snapped[i];
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.expect("SVD requested right singular vectors");
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
        let pick = if rank_in_cluster < 3
            && svd.singular_values[order[rank_in_cluster]] <= 1e-8 * scale
        {
            order[rank_in_cluster]
        } else {
            order[0]
        };
        let row = v_t.row(pick);
        let mut v = Vector3::new(row[0].conj(), row[1].conj(), row[2].conj());
        let pivot = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(Complex64::new(1.0, 0.0));
        if pivot.norm() > 0.0 {
            v *= pivot.conj() / pivot.norm();
        }
        vectors[i] = v / Complex64::from(v.norm());
    }
    ([snapped[0], snapped[1], snapped[2]], vectors)
}

/// Anchor of a local series expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeriesAnchor {
    /// `f ~ c ξ^{(σ+2)/(m−1)}` as ξ → 0, coefficient c.
    OriginP0,
    /// The fixed two-term expansion out of P₂ (coefficient ignored).
    OriginP2,
    /// Interface expansion at `ξ₀ = (αγ)^{1/σ}`, coefficient γ.
    InterfaceP1,
    /// Tail `f ~ K ξ^{(σ+2)/(m−1)} e^{−ξ^σ}`, coefficient K.
    TailQ4,
    /// `f ~ K ξ^{1/m}` as ξ → 0, coefficient K.
    OriginQ5,
}

/// A truncated local expansion in the pressure variables `(v, w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSeries {
    pub anchor: SeriesAnchor,
    pub params: Params,
    pub coefficient: f64,
}

impl LocalSeries {
    /// Builds a series, rejecting non-positive coefficients where one is needed.
    pub fn new(anchor: SeriesAnchor, params: Params, coefficient: f64) -> Result<Self> {
        if anchor != SeriesAnchor::OriginP2 && !(coefficient.is_finite() && coefficient > 0.0) {
            return Err(Error::InvalidInput(format!(
                "series coefficient must be positive, got {coefficient}"
            )));
        }
        Ok(Self { anchor, params, coefficient })
    }

    /// Anchor location: 0 for origin series, ξ₀ for the interface, +∞ for the tail.
    pub fn anchor_xi(&self) -> f64 {
        match self.anchor {
            SeriesAnchor::InterfaceP1 => interface_point(&self.params, self.coefficient),
            SeriesAnchor::TailQ4 => f64::INFINITY,
            _ => 0.0,
        }
    }
}

/// `ξ₀ = (αγ)^{1/σ}`, the interface location of the orbit entering `P₁^γ`.
pub fn interface_point(p: &Params, gamma: f64) -> f64 {
    (p.exponents().alpha * gamma).powf(1.0 / p.sigma)
}

/// `γ = ξ₀^σ/α`, inverse of [`interface_point`].
pub fn interface_gamma(p: &Params, xi0: f64) -> f64 {
    xi0.powf(p.sigma) / p.exponents().alpha
}

/// Evaluates the truncated series, returning `(v, w)`.
pub fn local_series_eval(s: &LocalSeries, xi: f64) -> Result<(f64, f64)> {
    if !(xi >= 0.0) || !xi.is_finite() {
        return Err(Error::InvalidInput(format!("xi must be finite and >= 0, got {xi}")));
    }
    let p = &s.params;
    let (m, sg) = (p.m, p.sigma);
    let c = s.coefficient;
    match s.anchor {
        SeriesAnchor::OriginP0 => {
            let cc = c.powf(m - 1.0);
            Ok((cc * xi.powf(sg + 2.0), (sg + 2.0) * cc * xi.powf(sg + 1.0)))
        }
        SeriesAnchor::OriginP2 => {
            let a = (m - 1.0) / (2.0 * m * (m + 1.0));
            let b = psi_coefficient(p).powf(m - 1.0) / m;
            Ok((
                a * xi * xi - b * xi.powf(sg + 2.0),
                2.0 * a * xi - (sg + 2.0) * b * xi.powf(sg + 1.0),
            ))
        }
        SeriesAnchor::InterfaceP1 => {
            let alpha = p.exponents().alpha;
            let x0 = (alpha * c).powf(1.0 / sg);
            let v = (m - 1.0) * (x0 - xi) * (x0 + xi) / (2.0 * m * sg);
            if v < 0.0 {
                return Err(Error::OutsideSupport { xi });
            }
            Ok((v, -(m - 1.0) * xi / (m * sg)))
        }
        SeriesAnchor::TailQ4 => {
            if xi == 0.0 {
                return Ok((0.0, 0.0));
            }
            let v = c.powf(m - 1.0) * xi.powf(sg + 2.0) * (-(m - 1.0) * xi.powf(sg)).exp();
            let r = (sg + 2.0) / xi - (m - 1.0) * sg * xi.powf(sg - 1.0);
            Ok((v, v * r))
        }
        SeriesAnchor::OriginQ5 => {
            if xi == 0.0 {
                return Err(Error::InvalidInput("the Q5 series is singular at xi = 0".into()));
            }
            let v = c.powf(m - 1.0) * xi.powf((m - 1.0) / m);
            Ok((v, v * (m - 1.0) / (m * xi)))
        }
    }
}

/// Taylor coefficients `a₀ = 0, a₁, …, a_order` of the pressure at an interface,
/// `v(ξ) = Σ a_k (ξ₀−ξ)^k`.
///
/// The pressure equation multiplied by `v` is polynomial in `(v, v', v'')`
/// apart from the factor `ξ^σ`, so matching powers of `h = ξ₀−ξ` gives each
/// `a_{n+1}` linearly from the lower ones; its multiplier is
/// `(n+1) a₁ (n + 1/(m−1))`, which never vanishes.
pub fn interface_series_coefficients(p: &Params, xi0: f64, order: usize) -> Result<Vec<f64>> {
    if !(xi0 > 0.0 && xi0.is_finite()) || order == 0 {
        return Err(Error::InvalidInput(format!("need xi0 > 0 and order >= 1, got {xi0}, {order}")));
    }
    let Exponents { alpha, beta } = p.exponents();
    let (m, sg) = (p.m, p.sigma);
    // g(h) = α − (ξ₀−h)^σ as a power series in h.
    let mut g = vec![0.0; order + 1];
    let mut binom = 1.0;
    for (i, gi) in g.iter_mut().enumerate() {
        if i > 0 {
            binom *= (sg - (i as f64 - 1.0)) / i as f64;
        }
        *gi = -xi0.powf(sg) * binom * (-1.0 / xi0).powi(i as i32);
    }
    g[0] += alpha;
    let mut a = vec![0.0; order + 1];
    a[1] = (m - 1.0) * beta * xi0 / m;
    for n in 1..order {
        let coef_at = |a: &[f64]| -> f64 {
            let mut c = 0.0;
            for i in 0..=n {
                let j = n - i;
                if j + 2 < a.len() {
                    c += a[i] * (j as f64 + 2.0) * (j as f64 + 1.0) * a[j + 2];
                }
                if i + 1 < a.len() && j + 1 < a.len() {
                    c += (i as f64 + 1.0) * a[i + 1] * (j as f64 + 1.0) * a[j + 1] / (m - 1.0);
                }
                c -= (m - 1.0) / m * g[i] * a[j];
            }
            if n + 1 < a.len() {
                c -= beta * xi0 * (n as f64 + 1.0) * a[n + 1] / m;
            }
            c + beta * n as f64 * a[n] / m
        };
        a[n + 1] = 0.0;
        let rest = coef_at(&a);
        let lead = (n as f64 + 1.0) * a[1] * (n as f64 + 1.0 / (m - 1.0));
        a[n + 1] = -rest / lead;
    }
    Ok(a)
}

/// Launch data `(v, w)` at `ξ < ξ₀` on the interface orbit into `P₁^γ`, from
/// the interface power series truncated at order 12.
pub fn interface_launch(p: &Params, xi0: f64, xi: f64) -> Result<(f64, f64)> {
    if !(xi >= 0.0) {
        return Err(Error::InvalidInput(format!("xi must be >= 0, got {xi}")));
    }
    let a = interface_series_coefficients(p, xi0, 12)?;
    let h = xi0 - xi;
    let (mut v, mut dv) = (0.0, 0.0);
    for k in (1..a.len()).rev() {
        v = v * h + a[k];
        dv = dv * h + k as f64 * a[k];
    }
    v *= h;
    if v < 0.0 || h < 0.0 {
        return Err(Error::OutsideSupport { xi });
    }
    Ok((v, -dv))
}

/// Phase-space slope `k = Z/X` of the orbit out of P₀ with profile coefficient `c`.
pub fn origin_coefficient_to_k(p: &Params, c: f64) -> Result<f64> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidInput(format!("c must be positive, got {c}")));
    }
    Ok(1.0 / (p.m * c.powf(p.m - 1.0)))
}

/// Inverse of [`origin_coefficient_to_k`].
pub fn k_to_origin_coefficient(p: &Params, k: f64) -> Result<f64> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::InvalidInput(format!("k must be positive, got {k}")));
    }
    Ok((1.0 / (p.m * k)).powf(1.0 / (p.m - 1.0)))
}

/// `r = ln f + ξ^σ − ((σ+2)/(m−1)) ln ξ`, constant `ln K` along an exact tail.
pub fn tail_residual(p: &Params, xi: f64, f: f64) -> Result<f64> {
    if !(f > 0.0) {
        return Err(Error::InvalidInput(format!("f must be positive, got {f}")));
    }
    if !(xi > 0.0) {
        return Err(Error::InvalidInput(format!("xi must be positive, got {xi}")));
    }
    Ok(f.ln() + xi.powf(p.sigma) - (p.sigma + 2.0) / (p.m - 1.0) * xi.ln())
}

/// Tail residual computed from the pressure, usable when `f` underflows.
pub fn tail_residual_from_pressure(p: &Params, xi: f64, v: f64) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::InvalidInput(format!("v must be positive, got {v}")));
    }
    Ok(v.ln() / (p.m - 1.0) + xi.powf(p.sigma) - (p.sigma + 2.0) / (p.m - 1.0) * xi.ln())
}

/// Anything that can evaluate a profile `f(ξ)`.
pub trait ProfileFn {
    /// Profile value at `ξ ≥ 0`.
    fn profile_at(&self, xi: f64) -> Result<f64>;
}

/// The explicit profile as a [`ProfileFn`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplicitProfile {
    pub m: f64,
}

impl ProfileFn for ExplicitProfile {
    fn profile_at(&self, xi: f64) -> Result<f64> {
        if !(xi >= 0.0) {
            return Err(Error::InvalidInput(format!("xi must be >= 0, got {xi}")));
        }
        Ok(explicit_profile(self.m, xi))
    }
}

/// `u(x,t) = (T−t)^{−α} f(|x|(T−t)^β)`.
pub fn selfsimilar_eval<P: ProfileFn + ?Sized>(
    profile: &P,
    p: &Params,
    big_t: f64,
    x: f64,
    t: f64,
) -> Result<f64> {
    if !(t < big_t) || !t.is_finite() || !big_t.is_finite() || !x.is_finite() {
        return Err(Error::InvalidInput(format!("need finite t < T, got t={t}, T={big_t}")));
    }
    let Exponents { alpha, beta } = p.exponents();
    let tau = big_t - t;
    let f = profile.profile_at(x.abs() * tau.powf(beta))?;
    Ok(tau.powf(-alpha) * f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponents_examples() {
        let e = exponents(&Params::new(3.0, 2.0).unwrap());
        assert_eq!((e.alpha, e.beta), (1.0, 0.5));
        let e = exponents(&Params::new(2.0, 1.0).unwrap());
        assert_eq!((e.alpha, e.beta), (3.0, 1.0));
        let e = exponents(&Params::new(4.0, 4.0).unwrap());
        assert_eq!((e.alpha, e.beta), (0.5, 0.25));
    }

    #[test]
    fn params_rejects_bad_domain() {
        assert!(Params::new(1.0, 2.0).is_err());
        assert!(Params::new(3.0, 0.0).is_err());
        assert!(Params::new(f64::NAN, 1.0).is_err());
        assert!(Params::new(3.0, f64::INFINITY).is_err());
    }

    #[test]
    fn sigma_star_examples() {
        assert_eq!(sigma_star(7.0).unwrap(), 4.0);
        assert_relative_eq!(sigma_star(3.0).unwrap(), 8f64.sqrt(), epsilon = 1e-15);
        assert!(sigma_star(1.0).is_err());
    }

    #[test]
    fn explicit_profile_hand_values() {
        assert_eq!(explicit_profile(3.0, 0.0), 0.0);
        let s = 8f64.sqrt();
        let b = 4.0 / (3.0 * (2.0 + 2.0 * 2f64.sqrt()) * (4.0 + 6.0 * 2f64.sqrt()));
        assert_relative_eq!(explicit_b(3.0, s), b, epsilon = 1e-15);
        assert!((b - 0.0221175).abs() < 1e-6);
        assert!((explicit_profile(3.0, 1.0) - 0.247418).abs() < 1e-5);
        assert_eq!(explicit_profile(3.0, 2.0), 0.0);
    }

    #[test]
    fn support_edge_matches_both_formulas() {
        let e = explicit_support_edge(3.0);
        assert!((e - 1.59836).abs() < 1e-4);
        assert_eq!(explicit_profile(3.0, e), 0.0);
        for i in 1..=90 {
            let m = 1.0 + 0.1 * i as f64;
            let a = explicit_support_edge(m);
            let b = explicit_support_edge_from_gamma(m);
            assert!(((a - b) / a).abs() <= 1e-10, "m={m}: {a} vs {b}");
        }
    }

    #[test]
    fn psi_examples() {
        assert_relative_eq!(psi_coefficient(&Params::new(2.0, 1.0).unwrap()), 0.05, epsilon = 1e-15);
        assert!((psi_coefficient(&Params::new(3.0, 2.0).unwrap()) - 0.301511).abs() < 1e-6);
        let at = |s: f64| psi_coefficient(&Params::new(2.0, s).unwrap());
        assert!(at(100.0) < at(1.0));
        assert!(at(1e4) < 1e-3);
        let mut prev = f64::INFINITY;
        for i in 0..=99 {
            let v = psi_coefficient(&Params::new(3.0, 1.0 + i as f64).unwrap());
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn critical_point_examples() {
        let p = Params::new(3.0, 2.0).unwrap();
        let p2 = critical_point(&p, PointTag::P2, None).unwrap();
        assert_eq!(p2.finite().unwrap(), [0.25, 0.25, 0.0]);
        let p1 = critical_point(&p, PointTag::P1Gamma, Some(1.0)).unwrap();
        assert_eq!(p1.finite().unwrap(), [0.0, -0.5, 1.0]);
        let q5 = critical_point(&p, PointTag::Q5, None).unwrap();
        let n = 10f64.sqrt();
        assert_eq!(q5.coords, Coords::AtInfinity([3.0 / n, 1.0 / n, 0.0, 0.0]));
        assert!(critical_point(&p, PointTag::P1Gamma, None).is_err());
        assert!(critical_point(&p, PointTag::P0Gamma, Some(-1.0)).is_err());
        for tag in [PointTag::Q1, PointTag::Q2, PointTag::Q3, PointTag::Q4, PointTag::Q5] {
            let Coords::AtInfinity(c) = critical_point(&p, tag, None).unwrap().coords else {
                panic!()
            };
            let n: f64 = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert_relative_eq!(n, 1.0, epsilon = 1e-15);
            assert_eq!(c[3], 0.0);
        }
    }

    #[test]
    fn linearize_p0_and_p2_examples() {
        let p = Params::new(3.0, 2.0).unwrap();
        let l0 = linearize(&p, &critical_point(&p, PointTag::P0, None).unwrap()).unwrap();
        let mut re: Vec<f64> = l0.eigenvalues.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 0.5).abs() < 1e-12 && re[1].abs() < 1e-12 && re[2].abs() < 1e-12);

        let l2 = linearize(&p, &critical_point(&p, PointTag::P2, None).unwrap()).unwrap();
        let expect = [-1.593070, -0.156930, 0.5];
        for (z, e) in l2.eigenvalues.iter().zip(expect) {
            assert!((z.re - e).abs() < 1e-6 && z.im.abs() < 1e-12);
        }
        let e3 = l2.eigenvectors[2];
        let target = Vector3::new(-4.0 / 44.0, -8.0 / 44.0, 1.0);
        let cross = Vector3::new(e3[0].re, e3[1].re, e3[2].re).cross(&target).norm();
        assert!(cross < 1e-12 * target.norm());
        assert!(l2.max_pair_residual() < 1e-12);
    }

    #[test]
    fn unsupported_points() {
        let p = Params::new(3.0, 2.0).unwrap();
        for tag in [PointTag::Q1, PointTag::Q2, PointTag::Q3, PointTag::Q4] {
            let c = critical_point(&p, tag, None).unwrap();
            assert_eq!(linearize(&p, &c), Err(Error::UnsupportedPoint(tag)));
        }
    }

    #[test]
    fn defective_p0_gamma_pairs_are_accurate() {
        let p = Params::new(2.5, 1.3).unwrap();
        for g in [0.3, 1.0, 2.7] {
            let c = critical_point(&p, PointTag::P0Gamma, Some(g)).unwrap();
            let l = linearize(&p, &c).unwrap();
            assert!(l.max_pair_residual() < 1e-12, "{}", l.max_pair_residual());
        }
        let q5 = linearize(&p, &critical_point(&p, PointTag::Q5, None).unwrap()).unwrap();
        assert!(q5.max_pair_residual() < 1e-12);
    }

    #[test]
    fn series_examples() {
        let p = Params::new(3.0, 2.0).unwrap();
        let s = LocalSeries::new(SeriesAnchor::InterfaceP1, p, 1.0).unwrap();
        let (v, _) = local_series_eval(&s, 0.9).unwrap();
        assert!((v.sqrt() - 0.177952).abs() < 1e-5);
        assert_eq!(local_series_eval(&s, 1.0).unwrap().0, 0.0);
        assert_eq!(local_series_eval(&s, 1.1), Err(Error::OutsideSupport { xi: 1.1 }));
        let s0 = LocalSeries::new(SeriesAnchor::OriginP0, p, 1.0).unwrap();
        let (v, w) = local_series_eval(&s0, 0.1).unwrap();
        assert_relative_eq!(v, 1e-4, epsilon = 1e-18);
        assert_relative_eq!(w, 4e-3, epsilon = 1e-17);
    }

    #[test]
    fn interface_series_slope_independent_of_gamma() {
        let p = Params::new(2.5, 1.7).unwrap();
        for g in [0.2, 1.0, 5.0] {
            let s = LocalSeries::new(SeriesAnchor::InterfaceP1, p, g).unwrap();
            let x0 = s.anchor_xi();
            assert_eq!(local_series_eval(&s, x0).unwrap().0.abs(), 0.0);
            let (_, w) = local_series_eval(&s, 0.5 * x0).unwrap();
            assert_relative_eq!(w, -1.5 * 0.5 * x0 / (2.5 * 1.7), epsilon = 1e-15);
        }
    }

    #[test]
    fn p2_series_reproduces_explicit_profile_at_sigma_star() {
        for m in [2.0, 3.0, 5.0] {
            let p = Params::at_sigma_star(m).unwrap();
            let s = LocalSeries::new(SeriesAnchor::OriginP2, p, 0.0).unwrap();
            for xi in [0.05, 0.3, 0.8] {
                let (v, w) = local_series_eval(&s, xi).unwrap();
                let (ve, we) = explicit_pressure(m, xi);
                assert_relative_eq!(v, ve, max_relative = 1e-12);
                assert_relative_eq!(w, we, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn interface_launch_matches_explicit_profile() {
        for m in [2.0, 3.0, 5.0] {
            let p = Params::at_sigma_star(m).unwrap();
            let x1 = explicit_support_edge(m);
            for h in [1e-4, 1e-3, 1e-2] {
                let (v, w) = interface_launch(&p, x1, x1 - h * x1).unwrap();
                let (ve, we) = explicit_pressure(m, x1 - h * x1);
                assert_relative_eq!(v, ve, max_relative = 1e-13);
                assert_relative_eq!(w, we, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn interface_series_low_orders_match_closed_forms() {
        let p = Params::new(2.6, 1.4).unwrap();
        let Exponents { alpha, beta } = p.exponents();
        let (m, sg) = (2.6, 1.4);
        let x0 = 1.3;
        let a = interface_series_coefficients(&p, x0, 4).unwrap();
        assert_eq!(a[0], 0.0);
        assert_relative_eq!(a[1], (m - 1.0) * x0 / (m * sg), max_relative = 1e-14);
        let d = -(m - 1.0) * (m - 1.0) * (alpha + beta - x0.powf(sg)) / (m * m);
        assert_relative_eq!(a[2], -(m - 1.0) / (2.0 * m * sg) - d / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn k_conversion_examples() {
        let p3 = Params::new(3.0, 2.0).unwrap();
        assert_relative_eq!(origin_coefficient_to_k(&p3, 1.0).unwrap(), 1.0 / 3.0);
        let p2 = Params::new(2.0, 1.0).unwrap();
        assert_relative_eq!(origin_coefficient_to_k(&p2, 2.0).unwrap(), 0.25);
        assert!(origin_coefficient_to_k(&p2, 0.0).is_err());
        assert!(origin_coefficient_to_k(&p3, 1e6).unwrap() < 1e-12);
        let c = k_to_origin_coefficient(&p3, 0.37).unwrap();
        assert_relative_eq!(origin_coefficient_to_k(&p3, c).unwrap(), 0.37, epsilon = 1e-15);
    }

    #[test]
    fn tail_residual_examples() {
        let p = Params::new(3.0, 2.0).unwrap();
        for xi in [0.5f64, 1.0, 3.0] {
            let base = xi.powf(2.0) * (-xi * xi).exp();
            assert!(tail_residual(&p, xi, base).unwrap().abs() < 1e-12);
            assert_relative_eq!(tail_residual(&p, xi, 5.0 * base).unwrap(), 5f64.ln(), epsilon = 1e-12);
            let r2 = tail_residual_from_pressure(&p, xi, (5.0 * base).powi(2)).unwrap();
            assert_relative_eq!(r2, 5f64.ln(), epsilon = 1e-12);
        }
        assert!(tail_residual(&p, 1.0, 0.0).is_err());
    }

    #[test]
    fn selfsimilar_examples() {
        struct Flat(f64);
        impl ProfileFn for Flat {
            fn profile_at(&self, _xi: f64) -> Result<f64> {
                Ok(self.0)
            }
        }
        let p = Params::new(3.0, 2.0).unwrap();
        assert_eq!(selfsimilar_eval(&Flat(0.7), &p, 1.0, 0.0, 0.0).unwrap(), 0.7);
        assert!(selfsimilar_eval(&Flat(0.7), &p, 1.0, 0.0, 1.0).is_err());

        let ps = Params::at_sigma_star(3.0).unwrap();
        let ex = ExplicitProfile { m: 3.0 };
        let e = ps.exponents();
        let (bt, t, x) = (2.0, 0.5, 0.8);
        let u = selfsimilar_eval(&ex, &ps, bt, x, t).unwrap();
        let direct = 1.5f64.powf(-e.alpha) * explicit_profile(3.0, x * 1.5f64.powf(e.beta));
        assert_relative_eq!(u, direct, epsilon = 1e-15);
        let outside = 1.01 * explicit_support_edge(3.0) * 1.5f64.powf(-e.beta);
        assert_eq!(selfsimilar_eval(&ex, &ps, bt, outside, t).unwrap(), 0.0);
    }
}
