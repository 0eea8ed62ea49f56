//! Trajectory classifiers, barrier formulas of the confinement arguments and
//! the σ-regime scanner.

use crate::dynsys::PhaseState;
use crate::error::{Error, Result};
use crate::integrate::ProfileTrajectory;
use crate::model::{critical_point, sigma_star, Exponents, Params, PointTag};
use crate::shooting::{
    classify_c_intervals, find_good_profile, find_interface_c, ForwardClass, ForwardKind, ShootConfig,
};
use rayon::prelude::*;

/// Power laws a profile can follow at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OriginLaw {
    /// `ξ^{2/(m−1)}`, the law of the explicit profile.
    TwoOverM1,
    /// `ξ^{(σ+2)/(m−1)}`, the law of orbits out of P₀.
    SigmaPlus2OverM1,
    /// `ξ^{1/m}`.
    OneOverM,
    /// `f(0) > 0`.
    Constant,
    None,
}

impl OriginLaw {
    pub fn name(&self) -> &'static str {
        match self {
            OriginLaw::TwoOverM1 => "TwoOverM1",
            OriginLaw::SigmaPlus2OverM1 => "SigmaPlus2OverM1",
            OriginLaw::OneOverM => "OneOverM",
            OriginLaw::Constant => "Constant",
            OriginLaw::None => "None",
        }
    }
}

/// Log-log fit `f ≈ coefficient · ξ^exponent` near the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OriginFit {
    pub exponent: f64,
    pub coefficient: f64,
    pub rms_residual: f64,
    pub matched_law: OriginLaw,
}

/// Number of log-spaced points used when a window holds too few samples.
const RESAMPLE: usize = 32;
/// Minimal number of samples of a fit.
const MIN_SAMPLES: usize = 8;

/// `(ln ξ, ln v)` pairs of the trajectory on `[a, b]`, resampled on a log grid
/// through the trajectory's interpolant when fewer than eight samples fall inside.
fn window_log_v(tr: &ProfileTrajectory, a: f64, b: f64) -> Result<Vec<(f64, f64)>> {
    if !(a > 0.0 && b > a) {
        return Err(Error::InvalidInput(format!("need 0 < xi_a < xi_b, got ({a}, {b})")));
    }
    let (lo, hi) = tr.xi_range();
    if a < lo || b > hi {
        return Err(Error::OutOfRange { xi: if a < lo { a } else { b }, lo, hi });
    }
    let raw: Vec<(f64, f64)> = tr
        .ascending_log_v()
        .into_iter()
        .filter(|(x, l)| *x >= a && *x <= b && l.is_finite())
        .map(|(x, l)| (x.ln(), l))
        .collect();
    if raw.len() >= MIN_SAMPLES {
        return Ok(raw);
    }
    let (la, lb) = (a.ln(), b.ln());
    let mut out = Vec::with_capacity(RESAMPLE);
    for i in 0..RESAMPLE {
        let lx = la + (lb - la) * i as f64 / (RESAMPLE - 1) as f64;
        let s = tr.state_at(lx.exp().clamp(a, b))?;
        if !(s.v > 0.0) {
            return Err(Error::DegenerateState { v: s.v });
        }
        out.push((lx, s.v.ln()));
    }
    Ok(out)
}

/// Least-squares line `y = a + b x`; returns `(a, b, rms)`.
fn line_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let rms = (pts.iter().map(|p| (p.1 - a - b * p.0).powi(2)).sum::<f64>() / n).sqrt();
    (a, b, rms)
}

/// Picks the candidate law matching `exponent`.
///
/// A nonzero law matches within 5% relative, the constant law when
/// `|exponent| ≤ 0.05`. A match whose law lies within 10% of another candidate
/// is refused.
pub fn match_origin_law(p: &Params, exponent: f64) -> OriginLaw {
    let (m, s) = (p.m(), p.sigma());
    let laws = [
        (OriginLaw::TwoOverM1, 2.0 / (m - 1.0)),
        (OriginLaw::SigmaPlus2OverM1, (s + 2.0) / (m - 1.0)),
        (OriginLaw::OneOverM, 1.0 / m),
    ];
    if exponent.abs() <= 0.05 {
        return OriginLaw::Constant;
    }
    let hit = laws.iter().find(|(_, e)| (exponent - e).abs() <= 0.05 * e);
    match hit {
        Some(&(law, e)) => {
            let ambiguous =
                laws.iter().any(|&(l, o)| l != law && (o - e).abs() <= 0.1 * e.max(o));
            if ambiguous {
                OriginLaw::None
            } else {
                law
            }
        }
        None => OriginLaw::None,
    }
}

/// Fits `ln f` against `ln ξ` on `window`.
pub fn fit_origin(tr: &ProfileTrajectory, p: &Params, window: (f64, f64)) -> Result<OriginFit> {
    let pts = window_log_v(tr, window.0, window.1)?;
    if pts.len() < MIN_SAMPLES {
        return Err(Error::WindowTooShort(pts.len()));
    }
    let k = 1.0 / (p.m() - 1.0);
    let lf: Vec<(f64, f64)> = pts.iter().map(|&(x, l)| (x, k * l)).collect();
    let (a, b, rms) = line_fit(&lf);
    let matched_law = match_origin_law(p, b);
    let coefficient = if matched_law == OriginLaw::Constant { lf[0].1.exp() } else { a.exp() };
    Ok(OriginFit { exponent: b, coefficient, rms_residual: rms, matched_law })
}

/// Decade window above the smallest sampled ξ, clipped to the sampled range.
pub fn default_origin_window(tr: &ProfileTrajectory) -> (f64, f64) {
    let (lo, hi) = tr.xi_range();
    (lo, (10.0 * lo).min(hi))
}

/// Tail-residual statistics on a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFit {
    /// Mean of the residual, an estimate of `ln K`.
    pub ln_k: f64,
    /// Total variation of the residual.
    pub drift: f64,
    /// Residual at the window start.
    pub rho_start: f64,
    /// Largest residual on the window.
    pub rho_max: f64,
    pub samples: usize,
}

impl TailFit {
    /// Whether the profile stays below `K ξ^{(σ+2)/(m−1)} e^{−ξ^σ}` with `K`
    /// taken at the window start, up to `slack` in the logarithm.
    pub fn upper_bound_holds(&self, slack: f64) -> bool {
        self.rho_max <= self.rho_start + slack
    }
}

/// ξ-window corresponding to `Z ∈ [frac · z_cut, z_cut]`.
pub fn tail_window(p: &Params, z_cut: f64, frac: f64) -> (f64, f64) {
    let alpha = p.exponents().alpha;
    let s = p.sigma();
    ((alpha * frac * z_cut).powf(1.0 / s), (alpha * z_cut).powf(1.0 / s))
}

/// Mean and total variation of the tail residual on the samples inside `window`,
/// computed from `ln v` so that underflowing tails stay usable.
pub fn fit_tail(tr: &ProfileTrajectory, p: &Params, window: (f64, f64)) -> Result<TailFit> {
    let (a, b) = window;
    if !(a > 0.0 && b > a) {
        return Err(Error::InvalidInput(format!("need 0 < xi_a < xi_b, got ({a}, {b})")));
    }
    let (m, s) = (p.m(), p.sigma());
    let rho: Vec<f64> = tr
        .ascending_log_v()
        .into_iter()
        .filter(|(x, _)| *x >= a && *x <= b)
        .map(|(x, l)| l / (m - 1.0) + x.powf(s) - (s + 2.0) / (m - 1.0) * x.ln())
        .collect();
    if rho.len() < MIN_SAMPLES {
        return Err(Error::WindowTooShort(rho.len()));
    }
    if rho.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidInput("non-finite tail residual".into()));
    }
    let ln_k = rho.iter().sum::<f64>() / rho.len() as f64;
    let drift = rho.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let rho_max = rho.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(TailFit { ln_k, drift, rho_start: rho[0], rho_max, samples: rho.len() })
}

/// Character of the blow-up set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlowupCharacter {
    Global,
    AtInfinity,
    Unknown,
}

impl BlowupCharacter {
    pub fn name(&self) -> &'static str {
        match self {
            BlowupCharacter::Global => "Global",
            BlowupCharacter::AtInfinity => "AtInfinity",
            BlowupCharacter::Unknown => "Unknown",
        }
    }
}

/// Maps an origin law to the blow-up character it implies.
pub fn blowup_character(fit: &OriginFit) -> BlowupCharacter {
    match fit.matched_law {
        OriginLaw::Constant | OriginLaw::TwoOverM1 => BlowupCharacter::Global,
        OriginLaw::SigmaPlus2OverM1 => BlowupCharacter::AtInfinity,
        _ => BlowupCharacter::Unknown,
    }
}

/// Level `k₁ = (β/(2α))²` of the barrier surface `XZ = k₁`.
pub fn barrier_k1(p: &Params) -> f64 {
    let Exponents { alpha, beta } = p.exponents();
    (beta / (2.0 * alpha)).powi(2)
}

/// Y-component of the field on the plane `Y = y₀`.
pub fn flow_on_y_plane(p: &Params, y0: f64, x: f64, z: f64) -> f64 {
    let Exponents { alpha, beta } = p.exponents();
    -y0 * y0 - beta / alpha * y0 + x - x * y0 - x * z
}

/// Second η-derivative of Y at a tangency with the plane `Y = y₀`, with Z
/// eliminated through the tangency hyperbola.
///
/// The printed expression is evaluated as given. It differs from a direct
/// derivation by `y₀(y₀−1)/(σ+2)`.
pub fn tangency_second_derivative(p: &Params, y0: f64, x: f64) -> f64 {
    let (m, s) = (p.m(), p.sigma());
    s * x * x * (y0 - 1.0)
        + (m - 1.0) * y0.powi(3)
        + ((s - 2.0) * x * y0 * (m - 1.0 + (s + 2.0) * y0) + m * (m - 2.0) * y0 * y0 + y0) / (s + 2.0)
}

/// Lower end of the `y₀` range on which the tangency expression is non-positive.
pub fn tangency_y0_lower(p: &Params) -> f64 {
    let m = p.m();
    if m <= 2.0 {
        let ps = Params::at_sigma_star(m).expect("m > 1");
        let e = ps.exponents();
        -e.beta / e.alpha
    } else {
        -1.0 / (m * (m - 2.0))
    }
}

/// Membership in the open box `0 < X < X(P₂)`, `0 < Y < Y(P₂)` cut by `Y + Z/(1+σ) ≤ 1`.
pub fn confinement_region_contains(p: &Params, s: &PhaseState) -> bool {
    let c = critical_point(p, PointTag::P2, None).ok().and_then(|c| c.finite()).unwrap_or([0.0; 3]);
    s.x > 0.0 && s.x < c[0] && s.y > 0.0 && s.y < c[1] && s.y + s.z / (1.0 + p.sigma()) <= 1.0
}

/// Positive root of `x(x+1)(x+2) = m+1`.
pub fn sigma0_cubic_root(m: f64) -> f64 {
    let g = |x: f64| x * (x + 1.0) * (x + 2.0) - (m + 1.0);
    let dg = |x: f64| 3.0 * x * x + 6.0 * x + 2.0;
    let (mut lo, mut hi) = (0.0, (m + 1.0).cbrt().max(1.0));
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let gx = g(x);
        if gx.abs() <= 1e-14 * (m + 1.0) {
            break;
        }
        if gx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let xn = x - gx / dg(x);
        x = if xn > lo && xn < hi { xn } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    x
}

/// Outcome of the regime scan at one σ.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub sigma: f64,
    pub all_tail: bool,
    pub has_interface_from_origin: bool,
    pub has_transversal: bool,
    pub good_profile_origin_value: f64,
    pub blowup_character: BlowupCharacter,
    pub origin_fit: Option<OriginFit>,
    /// Interface point of the good profile, when one was found.
    pub good_profile_interface: Option<f64>,
    pub inconclusive: usize,
    pub total: usize,
    /// `σ < min(σ₀, 2)`, where every orbit out of P₀ is a tail.
    pub in_all_tail_range: bool,
    /// Sign of `σ − σ_*`.
    pub above_sigma_star: bool,
    /// Error message of a failed good-profile search.
    pub note: Option<String>,
}

/// `n` log-spaced values between `10^a` and `10^b`.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![10f64.powf(a)],
        _ => (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect(),
    }
}

/// Default c grid of the regime scan.
pub fn default_c_grid() -> Vec<f64> {
    logspace(-2.0, 2.0, 25)
}

/// Scans σ: classifies forward shoots on `c_grid` and searches a good profile.
///
/// With a Tail/TransversalZero bracket on the grid, the good profile is the
/// interface orbit out of the origin; otherwise it comes from backward
/// bisection. Failed searches are recorded in `note`.
pub fn regime_scan(m: f64, sigma_grid: &[f64], c_grid: &[f64], cfg: &ShootConfig) -> Result<Vec<RegimeReport>> {
    if sigma_grid.is_empty() {
        return Err(Error::InvalidInput("empty sigma grid".into()));
    }
    if sigma_grid.iter().any(|s| !(s.is_finite() && *s > 0.0)) || sigma_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("sigma grid must be positive and strictly increasing".into()));
    }
    let s_star = sigma_star(m)?;
    let s0 = sigma0_cubic_root(m);
    let params: Vec<Params> = sigma_grid.iter().map(|&s| Params::new(m, s)).collect::<Result<_>>()?;
    params.par_iter().map(|p| regime_at(p, c_grid, cfg, s0, s_star)).collect()
}

fn regime_at(p: &Params, c_grid: &[f64], cfg: &ShootConfig, s0: f64, s_star: f64) -> Result<RegimeReport> {
    let k = classify_c_intervals(p, c_grid, cfg)?;
    let total = k.entries.len();
    let mut inconclusive = k.inconclusive;
    let all_tail = k.count(ForwardClass::Tail) == total;
    let has_transversal = k.count(ForwardClass::TransversalZero) > 0;
    let mut has_interface_from_origin = k.count(ForwardClass::Interface) > 0;
    let mut origin_fit = None;
    let mut origin_value = 0.0;
    let mut interface = None;
    let mut note = None;
    if let Some(&br) = k.brackets.first() {
        match find_interface_c(p, br, cfg) {
            Ok(s) => match s.outcome.kind {
                ForwardKind::Interface { xi0, .. } => {
                    has_interface_from_origin = true;
                    interface = Some(xi0);
                    let tr = &s.outcome.trajectory;
                    origin_fit = fit_origin(tr, p, default_origin_window(tr)).ok();
                }
                kind => {
                    inconclusive += 1;
                    note = Some(format!("interface search ended with {:?}", kind.class()));
                }
            },
            Err(e) => note = Some(e.to_string()),
        }
    } else {
        match find_good_profile(p, None, cfg) {
            Ok(g) => {
                interface = Some(g.eta_star);
                if let Some(o) = g.outcome.origin {
                    origin_value = o.value.max(0.0);
                }
                let tr = &g.outcome.trajectory;
                origin_fit = fit_origin(tr, p, g.outcome.origin_window(cfg.tol.capture_radius)).ok();
            }
            Err(e) => note = Some(e.to_string()),
        }
    }
    let blowup = origin_fit.as_ref().map_or(BlowupCharacter::Unknown, blowup_character);
    Ok(RegimeReport {
        sigma: p.sigma(),
        all_tail,
        has_interface_from_origin,
        has_transversal,
        good_profile_origin_value: origin_value,
        blowup_character: blowup,
        origin_fit,
        good_profile_interface: interface,
        inconclusive,
        total,
        in_all_tail_range: p.sigma() < s0.min(2.0),
        above_sigma_star: p.sigma() > s_star,
        note,
    })
}
