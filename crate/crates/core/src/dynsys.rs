//! Right-hand sides and coordinate changes: the profile equation in pressure
//! variables, the autonomous phase-space system, its `W = XZ` reduction, the
//! reduced flow on the center manifold and that flow's first integral.

use crate::error::{Error, Result};
use crate::model::{Exponents, Params};

/// A point of a profile in pressure variables `v = f^{m−1}`, `w = v'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileState {
    pub xi: f64,
    pub v: f64,
    pub w: f64,
}

impl ProfileState {
    /// Builds a state.
    pub fn new(xi: f64, v: f64, w: f64) -> Self {
        Self { xi, v, w }
    }

    /// Profile value `f = v^{1/(m−1)}` (zero for `v ≤ 0`).
    pub fn f(&self, p: &Params) -> f64 {
        if self.v <= 0.0 {
            0.0
        } else {
            self.v.powf(1.0 / (p.m() - 1.0))
        }
    }

    /// `f' = v^{(2−m)/(m−1)} w/(m−1)`, meaningful for `v > 0`.
    pub fn fprime(&self, p: &Params) -> f64 {
        let m = p.m();
        self.v.powf((2.0 - m) / (m - 1.0)) * self.w / (m - 1.0)
    }

    /// `(f^m)' = (m/(m−1)) v^{1/(m−1)} w`.
    pub fn fm_prime(&self, p: &Params) -> f64 {
        let m = p.m();
        m / (m - 1.0) * self.f(p) * self.w
    }

    /// `f''` from the state and the pressure equation (requires `v > 0`).
    pub fn fsecond(&self, p: &Params) -> Result<f64> {
        let (_, dw) = profile_rhs(p, self)?;
        let m = p.m();
        let q = 1.0 / (m - 1.0);
        Ok(q * ((q - 1.0) * self.v.powf(q - 2.0) * self.w * self.w + self.v.powf(q - 1.0) * dw))
    }
}

/// A point of the phase-space system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl PhaseState {
    /// Builds a state.
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Coordinates as an array.
    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Euclidean distance to `q`.
    pub fn distance(&self, q: [f64; 3]) -> f64 {
        ((self.x - q[0]).powi(2) + (self.y - q[1]).powi(2) + (self.z - q[2]).powi(2)).sqrt()
    }
}

impl From<[f64; 3]> for PhaseState {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

/// A point of the system reduced by `W = XZ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedState {
    pub x: f64,
    pub y: f64,
    pub w: f64,
}

impl ReducedState {
    /// The reduced image `(X, Y, XZ)` of a phase state.
    pub fn from_phase(s: &PhaseState) -> Self {
        Self { x: s.x, y: s.y, w: s.x * s.z }
    }
}

/// Pressure form of the profile equation:
/// `v' = w`, `w' = ((m−1)/m)(α−ξ^σ) − βξw/(mv) − w²/((m−1)v)`.
pub fn profile_rhs(p: &Params, s: &ProfileState) -> Result<(f64, f64)> {
    if !(s.v > 0.0) {
        return Err(Error::DegenerateState { v: s.v });
    }
    Ok((s.w, profile_dw(p, s.xi, s.v, s.w)))
}

#[inline]
pub(crate) fn profile_dw(p: &Params, xi: f64, v: f64, w: f64) -> f64 {
    let Exponents { alpha, beta } = p.exponents();
    let m = p.m();
    (m - 1.0) / m * (alpha - xi.powf(p.sigma())) - beta * xi * w / (m * v) - w * w / ((m - 1.0) * v)
}

/// Residual of the original profile equation `(f^m)'' − αf + βξf' + ξ^σ f`
/// for a profile given by `f`, `f'` and `f''` at `ξ`.
pub fn profile_residual_f(p: &Params, xi: f64, f: f64, fp: f64, fpp: f64) -> f64 {
    let Exponents { alpha, beta } = p.exponents();
    let m = p.m();
    let fm2 = m * (m - 1.0) * f.powf(m - 2.0) * fp * fp + m * f.powf(m - 1.0) * fpp;
    fm2 - alpha * f + beta * xi * fp + xi.powf(p.sigma()) * f
}

/// The autonomous phase-space field
/// `Ẋ = X[(m−1)Y−2X]`, `Ẏ = −Y²−(β/α)Y+X−XY−XZ`, `Ż = σZX`.
pub fn phase_rhs(p: &Params, s: &PhaseState) -> (f64, f64, f64) {
    let Exponents { alpha, beta } = p.exponents();
    let (x, y, z) = (s.x, s.y, s.z);
    (
        x * ((p.m() - 1.0) * y - 2.0 * x),
        -y * y - beta / alpha * y + x - x * y - x * z,
        p.sigma() * z * x,
    )
}

/// The `W = XZ` reduction: `Ẇ = W[(m−1)Y+(σ−2)X]`, with `W` replacing `XZ` in `Ẏ`.
pub fn reduced_rhs(p: &Params, s: &ReducedState) -> (f64, f64, f64) {
    let Exponents { alpha, beta } = p.exponents();
    let (x, y, w) = (s.x, s.y, s.w);
    (
        x * ((p.m() - 1.0) * y - 2.0 * x),
        -y * y - beta / alpha * y + x - x * y - w,
        w * ((p.m() - 1.0) * y + (p.sigma() - 2.0) * x),
    )
}

/// Flow on the center manifold: `Ẋ = X[σX−(σ+2)W]`, `Ẇ = W[2σX−(σ+2)W]`.
pub fn center_flow_rhs(p: &Params, x: f64, w: f64) -> (f64, f64) {
    let s = p.sigma();
    (x * (s * x - (s + 2.0) * w), w * (2.0 * s * x - (s + 2.0) * w))
}

/// First integral of the center flow, `c = X / (K e^{−((σ+2)/σ)K})` with `K = W/X`.
pub fn center_flow_integral(p: &Params, x: f64, w: f64) -> Result<f64> {
    if !(x > 0.0 && w > 0.0) {
        return Err(Error::InvalidInput(format!("need X > 0 and W > 0, got {x}, {w}")));
    }
    let s = p.sigma();
    let k = w / x;
    Ok(x / (k * (-(s + 2.0) / s * k).exp()))
}

/// Phase coordinates of a profile state:
/// `X = (m/α)ξ^{−2}v`, `Y = (m/(α(m−1)))ξ^{−1}w`, `Z = ξ^σ/α`.
pub fn profile_to_phase(p: &Params, s: &ProfileState) -> Result<PhaseState> {
    if !(s.xi > 0.0) {
        return Err(Error::InvalidInput(format!("xi must be positive, got {}", s.xi)));
    }
    let alpha = p.exponents().alpha;
    let m = p.m();
    Ok(PhaseState {
        x: m / alpha * s.v / (s.xi * s.xi),
        y: m / (alpha * (m - 1.0)) * s.w / s.xi,
        z: s.xi.powf(p.sigma()) / alpha,
    })
}

/// Inverse of [`profile_to_phase`] for `Z > 0`, with `ξ = (αZ)^{1/σ}`.
pub fn phase_to_profile(p: &Params, s: &PhaseState) -> Result<ProfileState> {
    if !(s.z > 0.0) {
        return Err(Error::InvalidInput(format!("Z must be positive, got {}", s.z)));
    }
    let alpha = p.exponents().alpha;
    let m = p.m();
    let xi = (alpha * s.z).powf(1.0 / p.sigma());
    Ok(ProfileState {
        xi,
        v: alpha / m * s.x * xi * xi,
        w: alpha * (m - 1.0) / m * s.y * xi,
    })
}

/// Y on the explicit phase-space line at `σ_*`, as a function of X.
pub fn explicit_line_y(m: f64, x: f64) -> f64 {
    let s = (2.0 * (m + 1.0)).sqrt();
    -(m - 1.0) / (s + 2.0) + (s + 2.0) / (m - 1.0) * x
}

/// Z on the explicit phase-space line at `σ_*`, as a function of X.
pub fn explicit_line_z(m: f64, x: f64) -> f64 {
    let s = (2.0 * (m + 1.0)).sqrt();
    let g = (m * s + m + 1.0) / s;
    g - (m * s + m + 1.0) * (s + 2.0) / (m - 1.0).powi(2) * x
}

/// Distance from a phase point to the explicit line at `σ_*`.
pub fn explicit_line_distance(m: f64, s: &PhaseState) -> f64 {
    let d = explicit_line_direction(m);
    let y0 = explicit_line_y(m, 0.0);
    let z0 = explicit_line_z(m, 0.0);
    let r = [s.x, s.y - y0, s.z - z0];
    let t = r[0] * d[0] + r[1] * d[1] + r[2] * d[2];
    ((r[0] - t * d[0]).powi(2) + (r[1] - t * d[1]).powi(2) + (r[2] - t * d[2]).powi(2)).sqrt()
}

/// Unit direction of the explicit line.
pub fn explicit_line_direction(m: f64) -> [f64; 3] {
    let s = (2.0 * (m + 1.0)).sqrt();
    let d = [
        1.0,
        (s + 2.0) / (m - 1.0),
        -(m * s + m + 1.0) * (s + 2.0) / (m - 1.0).powi(2),
    ];
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    [d[0] / n, d[1] / n, d[2] / n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{explicit_pressure, explicit_profile, explicit_support_edge, sigma_star};
    use approx::assert_relative_eq;

    #[test]
    fn profile_rhs_hand_value_m2() {
        let p = Params::new(2.0, 1.0).unwrap();
        let (dv, dw) = profile_rhs(&p, &ProfileState::new(1.0, 1.0, 0.0)).unwrap();
        assert_eq!((dv, dw), (0.0, 1.0));
        assert_eq!(
            profile_rhs(&p, &ProfileState::new(1.0, 0.0, 0.3)),
            Err(Error::DegenerateState { v: 0.0 })
        );
    }

    #[test]
    fn profile_rhs_matches_explicit_pressure_derivative() {
        let m = 3.0;
        let p = Params::at_sigma_star(m).unwrap();
        let s = p.sigma();
        let a = (m - 1.0) / (2.0 * m * (m + 1.0));
        let b = (m - 1.0).powi(2) / (m * (s + 2.0) * (m * s + m + 1.0));
        let xi: f64 = 1.0;
        let (v, w) = explicit_pressure(m, xi);
        let exact = 2.0 * a - (s + 2.0) * (s + 1.0) * b * xi.powf(s);
        let (_, dw) = profile_rhs(&p, &ProfileState::new(xi, v, w)).unwrap();
        assert!((dw - exact).abs() <= 1e-10);
        let h = 1e-3;
        let fd = (-explicit_pressure(m, xi + 2.0 * h).1 + 8.0 * explicit_pressure(m, xi + h).1
            - 8.0 * explicit_pressure(m, xi - h).1
            + explicit_pressure(m, xi - 2.0 * h).1)
            / (12.0 * h);
        assert!((dw - fd).abs() <= 1e-10);
    }

    #[test]
    fn explicit_profile_f_residual_small() {
        for m in [2.0, 3.0, 5.0] {
            let p = Params::at_sigma_star(m).unwrap();
            let e = explicit_support_edge(m);
            for i in 1..100 {
                let xi = e * i as f64 / 100.0;
                let (v, w) = explicit_pressure(m, xi);
                let st = ProfileState::new(xi, v, w);
                let r = profile_residual_f(&p, xi, st.f(&p), st.fprime(&p), st.fsecond(&p).unwrap());
                assert!(r.abs() < 1e-12, "m={m} xi={xi} r={r}");
                assert_relative_eq!(st.f(&p), explicit_profile(m, xi), max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn phase_rhs_examples() {
        let p = Params::new(3.0, 2.0).unwrap();
        let (a, b, c) = phase_rhs(&p, &PhaseState::new(0.25, 0.25, 0.0));
        assert!(a.abs() < 1e-16 && b.abs() < 1e-16 && c == 0.0);
        assert_eq!(phase_rhs(&p, &PhaseState::new(1.0, 1.0, 1.0)), (0.0, -2.5, 2.0));
        for z in [0.5, 1.0, 2.0] {
            let (_, dy, _) = phase_rhs(&p, &PhaseState::new(0.7, 0.0, z));
            assert_relative_eq!(dy, 0.7 * (1.0 - z), epsilon = 1e-15);
        }
    }

    #[test]
    fn reduced_rhs_examples() {
        let p = Params::new(3.0, 2.0).unwrap();
        let (dx, dy, dw) = reduced_rhs(&p, &ReducedState { x: 1.0, y: 0.0, w: 1.0 });
        assert_eq!((dx, dy, dw), (-2.0, 0.0, 0.0));
        let e = p.exponents();
        let (a, b, c) = reduced_rhs(&p, &ReducedState { x: 0.0, y: -e.beta / e.alpha, w: 0.0 });
        assert_eq!((a, b, c), (0.0, 0.0, 0.0));
    }

    #[test]
    fn center_flow_examples() {
        let p = Params::new(3.0, 2.0).unwrap();
        assert_eq!(center_flow_rhs(&p, 1.0, 1.0), (-2.0, 0.0));
        let (dx, dw) = center_flow_rhs(&p, 0.0, 0.3);
        assert_eq!(dx, 0.0);
        assert_relative_eq!(dw, -4.0 * 0.09, epsilon = 1e-15);
        let x = (-2.0f64).exp();
        assert_relative_eq!(center_flow_integral(&p, x, x).unwrap(), 1.0, epsilon = 1e-15);
        let c = center_flow_integral(&p, 0.3, 0.2).unwrap();
        assert_relative_eq!(center_flow_integral(&p, 0.9, 0.6).unwrap(), 3.0 * c, max_relative = 1e-14);
        assert!(center_flow_integral(&p, 0.0, 1.0).is_err());
    }

    #[test]
    fn profile_phase_round_trip_and_examples() {
        let p = Params::new(2.7, 1.3).unwrap();
        let s = ProfileState::new(0.8, 0.04, -0.3);
        let back = phase_to_profile(&p, &profile_to_phase(&p, &s).unwrap()).unwrap();
        assert_relative_eq!(back.xi, s.xi, max_relative = 1e-14);
        assert_relative_eq!(back.v, s.v, max_relative = 1e-14);
        assert_relative_eq!(back.w, s.w, max_relative = 1e-14);
        let e = p.exponents();
        let z1 = profile_to_phase(&p, &ProfileState::new(e.alpha.powf(1.0 / p.sigma()), 1.0, 0.0)).unwrap();
        assert_relative_eq!(z1.z, 1.0, epsilon = 1e-14);
        assert!(profile_to_phase(&p, &ProfileState::new(0.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn interface_series_maps_to_p1_y() {
        let p = Params::new(3.0, 2.0).unwrap();
        let e = p.exponents();
        let xi = 0.999_999;
        let y = profile_to_phase(&p, &ProfileState::new(xi, 1e-9, -(3.0 - 1.0) * xi / (3.0 * 2.0)))
            .unwrap()
            .y;
        assert_relative_eq!(y, -e.beta / e.alpha, epsilon = 1e-14);
    }

    #[test]
    fn explicit_profile_lies_on_line() {
        for m in [2.0, 3.0, 5.0, 7.0] {
            let p = Params::at_sigma_star(m).unwrap();
            let e = explicit_support_edge(m);
            for i in 1..50 {
                let xi = e * i as f64 / 50.0;
                let (v, w) = explicit_pressure(m, xi);
                let ph = profile_to_phase(&p, &ProfileState::new(xi, v, w)).unwrap();
                assert!((ph.y - explicit_line_y(m, ph.x)).abs() < 1e-10);
                assert!((ph.z - explicit_line_z(m, ph.x)).abs() < 1e-10 * ph.z.max(1.0));
                assert!(explicit_line_distance(m, &ph) < 1e-10);
            }
            assert_eq!(sigma_star(m).unwrap(), p.sigma());
        }
    }
}
