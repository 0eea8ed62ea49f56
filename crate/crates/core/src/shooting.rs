//! Backward shooting from an interface and forward shooting from the origin,
//! with bisection for good profiles and for interface profiles out of P₀.

use crate::analysis::{fit_tail, tail_window};
use crate::dynsys::{phase_to_profile, profile_to_phase, PhaseState, ProfileState};
use crate::error::{Error, Result};
use crate::integrate::{
    integrate_phase, integrate_profile, Direction, EventKind, IntegratorControl, PhaseTrajectory,
    ProfileTrajectory,
};
use crate::model::{
    critical_point, interface_gamma, interface_launch, origin_coefficient_to_k, p2_e3, Exponents,
    Params, PointTag,
};
use rayon::prelude::*;

/// Classification thresholds and launch offsets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingTolerances {
    /// Bound on `|f'(0)|` for a good profile.
    pub slope_tol: f64,
    /// Bound on the terminal `|(f^m)'|` separating interfaces from transversal zeros.
    pub fmslope_tol: f64,
    /// Z cutoff of forward runs.
    pub z_cut: f64,
    /// Bound on the tail-residual total variation over the fit window.
    pub tail_tol: f64,
    /// Tail fit window starts at `Z = tail_window_frac · z_cut`.
    pub tail_window_frac: f64,
    /// Relative launch offset from an interface.
    pub eps_rel: f64,
    /// Phase coordinate X at the forward launch out of P₀.
    pub x_launch: f64,
    /// Cap on Z at the forward launch out of P₀.
    pub z_launch: f64,
    /// Relative bracket width at which bisections stop.
    pub bisect_rel: f64,
    /// Phase-space radius around P₂ accepted as reaching it on backward runs.
    pub capture_radius: f64,
}

impl Default for ShootingTolerances {
    fn default() -> Self {
        Self {
            slope_tol: 1e-4,
            fmslope_tol: 1e-6,
            z_cut: 50.0,
            tail_tol: 1e-2,
            tail_window_frac: 0.25,
            eps_rel: 1e-4,
            x_launch: 1e-8,
            z_launch: 1e-3,
            bisect_rel: 1e-10,
            capture_radius: 1e-3,
        }
    }
}

/// Integrator control together with classification thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ShootConfig {
    pub ctrl: IntegratorControl,
    pub tol: ShootingTolerances,
}

/// Terminal behaviour of a backward shoot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BackwardKind {
    /// The profile vanishes at `0 < θ < η`.
    SignChange { theta: f64 },
    /// Positive at the origin with a clearly negative slope there.
    PositiveAtZero { a: f64, slope: f64 },
    /// Satisfies one of the good-profile conditions at the origin.
    GoodCandidate { a: f64 },
    /// Pressure or its slope diverged.
    Asymptote,
    Inconclusive,
}

impl BackwardKind {
    /// Short name used in reports.
    pub fn name(&self) -> &'static str {
        match self {
            BackwardKind::SignChange { .. } => "SignChange",
            BackwardKind::PositiveAtZero { .. } => "PositiveAtZero",
            BackwardKind::GoodCandidate { .. } => "GoodCandidate",
            BackwardKind::Asymptote => "Asymptote",
            BackwardKind::Inconclusive => "Inconclusive",
        }
    }
}

/// Extrapolated behaviour at ξ = 0 of a backward run that reached `xi_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OriginData {
    /// `f(0)` from a quadratic Taylor extrapolation.
    pub value: f64,
    /// `f'(0) ≈ f'(ξ) − ξ f''(ξ)`.
    pub slope: f64,
    /// `(f^m)'` at the last sample.
    pub fm_slope: f64,
    /// `f` at the last sample.
    pub f_last: f64,
}

/// Result of a backward shoot.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardOutcome {
    pub eta: f64,
    pub kind: BackwardKind,
    pub origin: Option<OriginData>,
    /// Smallest phase-space distance to P₂ along the run.
    pub p2_distance: f64,
    /// ξ at the closest approach to P₂.
    pub p2_closest_xi: f64,
    pub trajectory: ProfileTrajectory,
}

impl BackwardOutcome {
    /// Decade window for the origin fit. Runs captured by P₂ are fitted just
    /// above the closest approach, where the backward error is still small.
    pub fn origin_window(&self, capture_radius: f64) -> (f64, f64) {
        let (lo, hi) = self.trajectory.xi_range();
        if self.p2_distance <= capture_radius && self.p2_closest_xi.is_finite() {
            let a = self.p2_closest_xi.max(lo);
            (a, (10.0 * a).min(hi))
        } else {
            (lo, (10.0 * lo).min(hi))
        }
    }

    /// True on the "positive at the origin, decreasing" side of a bisection.
    pub fn decreasing_side(&self) -> bool {
        self.trajectory.termination.kind == EventKind::ReachedXiMin
            && self.origin.is_some_and(|o| o.slope < 0.0)
    }
}

/// Shoots backward from an interface at `ξ = η`.
///
/// The launch sits at `η(1 − eps_rel)` on the interface power series. Runs
/// that reach `xi_min` are classified by the extrapolated slope at the origin;
/// a run with positive slope whose value and `(f^m)'` vanish at the origin is
/// the `f(0) = 0` kind of good profile. A run that passes within
/// `capture_radius` of P₂ in phase space also counts as that kind.
pub fn shoot_from_interface(p: &Params, eta: f64, cfg: &ShootConfig) -> Result<BackwardOutcome> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidInput(format!("eta must be positive, got {eta}")));
    }
    let xs = eta * (1.0 - cfg.tol.eps_rel);
    if !(xs > cfg.ctrl.xi_min) {
        return Err(Error::InvalidInput(format!(
            "eta = {eta} too close to xi_min = {}",
            cfg.ctrl.xi_min
        )));
    }
    let (v, w) = interface_launch(p, eta, xs)?;
    let tr = integrate_profile(p, ProfileState::new(xs, v, w), Direction::Backward, &cfg.ctrl, &[])?;
    Ok(classify_backward(p, eta, tr, cfg))
}

fn classify_backward(p: &Params, eta: f64, tr: ProfileTrajectory, cfg: &ShootConfig) -> BackwardOutcome {
    let tol = &cfg.tol;
    let p2 = critical_point(p, PointTag::P2, None).ok().and_then(|c| c.finite()).unwrap_or([0.0; 3]);
    let (p2_distance, p2_closest_xi) = tr
        .samples
        .iter()
        .filter(|s| s.xi > 0.0 && s.v > 0.0)
        .filter_map(|s| profile_to_phase(p, s).ok().map(|ph| (ph.distance(p2), s.xi)))
        .fold((f64::INFINITY, f64::NAN), |a, b| if b.0 < a.0 { b } else { a });
    let captured = p2_distance <= tol.capture_radius;
    let mut origin = None;
    let kind = match tr.termination.kind {
        EventKind::VHitsZero => {
            let theta = tr.termination.location;
            if captured {
                BackwardKind::GoodCandidate { a: 0.0 }
            } else if theta > 0.0 && theta < eta {
                BackwardKind::SignChange { theta }
            } else {
                BackwardKind::Inconclusive
            }
        }
        EventKind::ReachedXiMin => {
            let last = *tr.samples.last().unwrap_or(&tr.termination.state);
            match last.fsecond(p) {
                Ok(fpp) => {
                    let (x, f, fp) = (last.xi, last.f(p), last.fprime(p));
                    let od = OriginData {
                        value: f - x * fp + 0.5 * x * x * fpp,
                        slope: fp - x * fpp,
                        fm_slope: last.fm_prime(p),
                        f_last: f,
                    };
                    origin = Some(od);
                    let f_max = tr.samples.iter().map(|s| s.f(p)).fold(0.0, f64::max);
                    if captured {
                        BackwardKind::GoodCandidate { a: 0.0 }
                    } else if od.slope < -tol.slope_tol {
                        if od.value > 0.0 {
                            BackwardKind::PositiveAtZero { a: od.value, slope: od.slope }
                        } else {
                            BackwardKind::Inconclusive
                        }
                    } else if od.slope.abs() <= tol.slope_tol {
                        BackwardKind::GoodCandidate { a: od.value.max(0.0) }
                    } else if od.fm_slope.abs() <= tol.fmslope_tol && od.f_last <= 1e-2 * f_max {
                        BackwardKind::GoodCandidate { a: 0.0 }
                    } else {
                        BackwardKind::Inconclusive
                    }
                }
                Err(_) => BackwardKind::Inconclusive,
            }
        }
        EventKind::VDiverges => {
            if captured {
                BackwardKind::GoodCandidate { a: 0.0 }
            } else {
                BackwardKind::Asymptote
            }
        }
        _ => BackwardKind::Inconclusive,
    };
    BackwardOutcome { eta, kind, origin, p2_distance, p2_closest_xi, trajectory: tr }
}

/// Result of the good-profile bisection.
#[derive(Debug, Clone, PartialEq)]
pub struct GoodProfile {
    pub eta_star: f64,
    pub outcome: BackwardOutcome,
    /// Final bracket `(decreasing side, other side)`.
    pub bracket: (f64, f64),
    pub lo_kind: BackwardKind,
    pub hi_kind: BackwardKind,
}

/// Finds a bracket `(η_lo, η_hi)` with a decreasing-positive run at the lower
/// end and a sign change at the upper end, starting from `α^{1/σ}/2` and
/// doubling.
pub fn auto_bracket(p: &Params, cfg: &ShootConfig) -> Result<(f64, f64)> {
    let alpha = p.exponents().alpha;
    let mut lo = 0.5 * alpha.powf(1.0 / p.sigma());
    let mut guard = 0;
    while !shoot_from_interface(p, lo, cfg)?.decreasing_side() {
        lo *= 0.5;
        guard += 1;
        if guard > 30 || lo * (1.0 - cfg.tol.eps_rel) <= cfg.ctrl.xi_min {
            return Err(Error::InvalidBracket("no decreasing-positive run below alpha^(1/sigma)".into()));
        }
    }
    let mut hi = 2.0 * lo;
    for _ in 0..40 {
        let o = shoot_from_interface(p, hi, cfg)?;
        if matches!(o.kind, BackwardKind::SignChange { .. }) {
            return Ok((lo, hi));
        }
        if o.decreasing_side() {
            lo = hi;
        }
        hi *= 2.0;
    }
    Err(Error::InvalidBracket("no sign change found while doubling eta".into()))
}

/// Bisects between a decreasing-positive run and a sign change for the good
/// profile. `bracket = None` runs [`auto_bracket`] first.
pub fn find_good_profile(
    p: &Params,
    bracket: Option<(f64, f64)>,
    cfg: &ShootConfig,
) -> Result<GoodProfile> {
    let (mut lo, mut hi) = match bracket {
        Some(b) => b,
        None => auto_bracket(p, cfg)?,
    };
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidBracket(format!("need 0 < eta_lo < eta_hi, got ({lo}, {hi})")));
    }
    let olo = shoot_from_interface(p, lo, cfg)?;
    let ohi = shoot_from_interface(p, hi, cfg)?;
    if !matches!(olo.kind, BackwardKind::PositiveAtZero { .. }) {
        return Err(Error::InvalidBracket(format!("eta_lo = {lo} gives {}", olo.kind.name())));
    }
    if !matches!(ohi.kind, BackwardKind::SignChange { .. }) {
        return Err(Error::InvalidBracket(format!("eta_hi = {hi} gives {}", ohi.kind.name())));
    }
    let (mut lo_kind, mut hi_kind) = (olo.kind, ohi.kind);
    while hi - lo > cfg.tol.bisect_rel * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let o = shoot_from_interface(p, mid, cfg)?;
        if o.decreasing_side() {
            lo = mid;
            lo_kind = o.kind;
        } else {
            hi = mid;
            hi_kind = o.kind;
        }
    }
    let mid = 0.5 * (lo + hi);
    let o = shoot_from_interface(p, mid, cfg)?;
    if !matches!(o.kind, BackwardKind::GoodCandidate { .. }) {
        for end in [lo, hi] {
            let oe = shoot_from_interface(p, end, cfg)?;
            if matches!(oe.kind, BackwardKind::GoodCandidate { .. }) {
                return Ok(GoodProfile { eta_star: end, outcome: oe, bracket: (lo, hi), lo_kind, hi_kind });
            }
        }
    }
    Ok(GoodProfile { eta_star: mid, outcome: o, bracket: (lo, hi), lo_kind, hi_kind })
}

/// Terminal behaviour of a forward shoot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForwardKind {
    Interface { xi0: f64, gamma: f64 },
    TransversalZero { xi0: f64 },
    Tail { ln_k: f64 },
    Inconclusive,
}

/// Kind of a forward outcome without its data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ForwardClass {
    Interface,
    TransversalZero,
    Tail,
    Inconclusive,
}

impl ForwardKind {
    /// The data-free class.
    pub fn class(&self) -> ForwardClass {
        match self {
            ForwardKind::Interface { .. } => ForwardClass::Interface,
            ForwardKind::TransversalZero { .. } => ForwardClass::TransversalZero,
            ForwardKind::Tail { .. } => ForwardClass::Tail,
            ForwardKind::Inconclusive => ForwardClass::Inconclusive,
        }
    }
}

impl ForwardClass {
    /// Short name used in reports.
    pub fn name(&self) -> &'static str {
        match self {
            ForwardClass::Interface => "Interface",
            ForwardClass::TransversalZero => "TransversalZero",
            ForwardClass::Tail => "Tail",
            ForwardClass::Inconclusive => "Inconclusive",
        }
    }
}

/// Result of a forward shoot.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutcome {
    pub kind: ForwardKind,
    /// Tail-residual total variation over the fit window, for runs reaching the Z cutoff.
    pub tail_drift: Option<f64>,
    pub trajectory: ProfileTrajectory,
}

/// Launch state on the orbit out of P₀ with profile coefficient `c`.
///
/// The launch point is where the phase coordinate X equals `x_launch`,
/// moved closer to the origin if Z there would exceed `z_launch`.
pub fn origin_launch(p: &Params, c: f64, tol: &ShootingTolerances) -> Result<ProfileState> {
    let k = origin_coefficient_to_k(p, c)?;
    let Exponents { alpha, .. } = p.exponents();
    let (m, s) = (p.m(), p.sigma());
    let z = (tol.x_launch * k).min(tol.z_launch);
    let xi = (alpha * z).powf(1.0 / s);
    let ln_v = (m - 1.0) * c.ln() + (s + 2.0) * xi.ln();
    let v = ln_v.exp();
    if !(v > 0.0 && xi > 0.0) {
        return Err(Error::InvalidInput(format!("launch underflows for c = {c}")));
    }
    Ok(ProfileState::new(xi, v, (s + 2.0) * v / xi))
}

/// Shoots forward from the origin along the P₀ family with coefficient `c`.
pub fn shoot_from_origin(p: &Params, c: f64, cfg: &ShootConfig) -> Result<ForwardOutcome> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidInput(format!("c must be positive, got {c}")));
    }
    let start = origin_launch(p, c, &cfg.tol)?;
    let tr = integrate_profile(p, start, Direction::Forward, &cfg.ctrl, &[EventKind::ZReaches(cfg.tol.z_cut)])?;
    Ok(classify_forward(p, tr, cfg))
}

/// Classifies a forward profile run by its terminal event.
pub fn classify_forward(p: &Params, tr: ProfileTrajectory, cfg: &ShootConfig) -> ForwardOutcome {
    let tol = &cfg.tol;
    let mut tail_drift = None;
    let kind = match tr.termination.kind {
        EventKind::VHitsZero => {
            let xi0 = tr.termination.location;
            match tr.termination.fm_slope {
                Some(q) if q.abs() <= tol.fmslope_tol => {
                    ForwardKind::Interface { xi0, gamma: interface_gamma(p, xi0) }
                }
                Some(q) if q < -tol.fmslope_tol => ForwardKind::TransversalZero { xi0 },
                _ => ForwardKind::Inconclusive,
            }
        }
        EventKind::ZReaches(_) => {
            match fit_tail(&tr, p, tail_window(p, tol.z_cut, tol.tail_window_frac)) {
                Ok(fit) => {
                    tail_drift = Some(fit.drift);
                    if fit.drift <= tol.tail_tol {
                        ForwardKind::Tail { ln_k: fit.ln_k }
                    } else {
                        ForwardKind::Inconclusive
                    }
                }
                Err(_) => ForwardKind::Inconclusive,
            }
        }
        _ => ForwardKind::Inconclusive,
    };
    ForwardOutcome { kind, tail_drift, trajectory: tr }
}

/// A maximal run of equal classes on a c grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CInterval {
    pub class: ForwardClass,
    pub c_lo: f64,
    pub c_hi: f64,
}

/// Classification of a c grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KClassification {
    /// `(c, kind)` in grid order.
    pub entries: Vec<(f64, ForwardKind)>,
    pub intervals: Vec<CInterval>,
    /// `(c_tail, c_cross)` pairs adjacent once Inconclusive entries are skipped,
    /// each a candidate bracket for an interface profile.
    pub brackets: Vec<(f64, f64)>,
    pub inconclusive: usize,
}

impl KClassification {
    /// Number of entries of the given class.
    pub fn count(&self, class: ForwardClass) -> usize {
        self.entries.iter().filter(|(_, k)| k.class() == class).count()
    }
}

/// Shoots forward for every `c` of an increasing positive grid, in parallel.
pub fn classify_c_intervals(p: &Params, c_grid: &[f64], cfg: &ShootConfig) -> Result<KClassification> {
    if c_grid.is_empty() {
        return Err(Error::InvalidInput("empty c grid".into()));
    }
    if c_grid.iter().any(|c| !(c.is_finite() && *c > 0.0)) || c_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("c grid must be positive and strictly increasing".into()));
    }
    let kinds: Vec<Result<ForwardKind>> =
        c_grid.par_iter().map(|&c| shoot_from_origin(p, c, cfg).map(|o| o.kind)).collect();
    let mut entries = Vec::with_capacity(c_grid.len());
    for (c, k) in c_grid.iter().zip(kinds) {
        entries.push((*c, k?));
    }
    let mut intervals: Vec<CInterval> = Vec::new();
    for &(c, k) in &entries {
        match intervals.last_mut() {
            Some(iv) if iv.class == k.class() => iv.c_hi = c,
            _ => intervals.push(CInterval { class: k.class(), c_lo: c, c_hi: c }),
        }
    }
    let mut brackets = Vec::new();
    let decided: Vec<(f64, ForwardClass)> = entries
        .iter()
        .map(|&(c, k)| (c, k.class()))
        .filter(|(_, k)| *k != ForwardClass::Inconclusive)
        .collect();
    for w in decided.windows(2) {
        match (w[0].1, w[1].1) {
            (ForwardClass::Tail, ForwardClass::TransversalZero | ForwardClass::Interface) => {
                brackets.push((w[0].0, w[1].0))
            }
            (ForwardClass::TransversalZero | ForwardClass::Interface, ForwardClass::Tail) => {
                brackets.push((w[1].0, w[0].0))
            }
            _ => {}
        }
    }
    let inconclusive = entries.iter().filter(|(_, k)| k.class() == ForwardClass::Inconclusive).count();
    Ok(KClassification { entries, intervals, brackets, inconclusive })
}

/// Result of the interface bisection in c.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceSearch {
    pub c_star: f64,
    pub outcome: ForwardOutcome,
    /// Final `(c_tail, c_cross)` bracket.
    pub bracket: (f64, f64),
}

/// Bisects in `ln c` between a Tail and a TransversalZero launch.
///
/// Midpoints are sorted by whether the run reaches a zero before the Z
/// cutoff, so runs whose tail has not settled still count on the tail side.
pub fn find_interface_c(p: &Params, bracket: (f64, f64), cfg: &ShootConfig) -> Result<InterfaceSearch> {
    let (mut ct, mut cx) = bracket;
    let ot = shoot_from_origin(p, ct, cfg)?;
    let ox = shoot_from_origin(p, cx, cfg)?;
    if ot.kind.class() != ForwardClass::Tail {
        return Err(Error::InvalidBracket(format!("c_tail = {ct} gives {}", ot.kind.class().name())));
    }
    if !matches!(ox.kind.class(), ForwardClass::TransversalZero | ForwardClass::Interface) {
        return Err(Error::InvalidBracket(format!("c_cross = {cx} gives {}", ox.kind.class().name())));
    }
    let mut cross_outcome = ox;
    while (ct / cx).ln().abs() > cfg.tol.bisect_rel {
        let mid = (ct * cx).sqrt();
        if mid == ct || mid == cx {
            break;
        }
        let o = shoot_from_origin(p, mid, cfg)?;
        match o.trajectory.termination.kind {
            EventKind::ZReaches(_) => ct = mid,
            EventKind::VHitsZero => {
                cx = mid;
                cross_outcome = o;
            }
            _ => return Ok(InterfaceSearch { c_star: mid, outcome: o, bracket: (ct, cx) }),
        }
    }
    let mid = (ct * cx).sqrt();
    let o = shoot_from_origin(p, mid, cfg)?;
    if o.kind.class() != ForwardClass::Interface && cross_outcome.kind.class() == ForwardClass::Interface {
        return Ok(InterfaceSearch { c_star: cx, outcome: cross_outcome, bracket: (ct, cx) });
    }
    Ok(InterfaceSearch { c_star: mid, outcome: o, bracket: (ct, cx) })
}

/// Starting point of a phase-space orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseLaunch {
    /// `P₂ + δ e₃` with `e₃` normalized to unit Z-component.
    FromP2 { delta: f64 },
    /// On the center manifold of P₀ with `Z = kX`, at `X = x0`.
    FromP0 { k: f64, x0: f64 },
    /// An explicit phase state.
    At(PhaseState),
}

/// Phase state of a [`PhaseLaunch`].
///
/// The P₀ launch uses the center manifold `Y = (α/β)(X + hX² − XZ)` with
/// `h = −(mσ+m+1)(σ+2)/(m−1)²`.
pub fn phase_launch_state(p: &Params, launch: PhaseLaunch) -> Result<PhaseState> {
    match launch {
        PhaseLaunch::FromP2 { delta } => {
            if !(delta.is_finite() && delta > 0.0) {
                return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
            }
            let c = critical_point(p, PointTag::P2, None)?.finite().unwrap_or([0.0; 3]);
            let e3 = p2_e3(p);
            Ok(PhaseState::new(c[0] + delta * e3[0], c[1] + delta * e3[1], c[2] + delta * e3[2]))
        }
        PhaseLaunch::FromP0 { k, x0 } => {
            if !(k.is_finite() && k >= 0.0 && x0.is_finite() && x0 > 0.0) {
                return Err(Error::InvalidInput(format!("need k >= 0 and x0 > 0, got {k}, {x0}")));
            }
            let Exponents { alpha, beta } = p.exponents();
            let (m, s) = (p.m(), p.sigma());
            let h = -(m * s + m + 1.0) * (s + 2.0) / (m - 1.0).powi(2);
            let z = k * x0;
            Ok(PhaseState::new(x0, alpha / beta * (x0 + h * x0 * x0 - x0 * z), z))
        }
        PhaseLaunch::At(s) => Ok(s),
    }
}

/// A phase orbit with its profile continuation and classification.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOrbit {
    pub phase: PhaseTrajectory,
    /// Forward profile run from the hand-off point, when the orbit reached one.
    pub continuation: Option<ForwardOutcome>,
}

impl PhaseOrbit {
    /// Classification of the continued profile, Inconclusive without one.
    pub fn kind(&self) -> ForwardKind {
        self.continuation.as_ref().map_or(ForwardKind::Inconclusive, |c| c.kind)
    }
}

/// Integrates a phase orbit until it enters `X ≤ x_handoff, Y < 0, Z > 1`,
/// then continues in profile variables up to the Z cutoff and classifies it.
/// Extra events in `watch` end the phase stage without a continuation.
pub fn shoot_phase_orbit(
    p: &Params,
    launch: PhaseLaunch,
    x_handoff: f64,
    watch: &[EventKind],
    cfg: &ShootConfig,
) -> Result<PhaseOrbit> {
    let start = phase_launch_state(p, launch)?;
    let mut w: Vec<EventKind> = watch.to_vec();
    w.push(EventKind::TailEntry { x_max: x_handoff });
    w.push(EventKind::ZReaches(cfg.tol.z_cut));
    let phase = integrate_phase(p, start, &cfg.ctrl, &w)?;
    let continuation = match phase.termination.kind {
        EventKind::TailEntry { .. } | EventKind::ZReaches(_) => {
            let ps = phase_to_profile(p, &phase.termination.state)?;
            if ps.v > 0.0 {
                let tr = integrate_profile(
                    p,
                    ps,
                    Direction::Forward,
                    &cfg.ctrl,
                    &[EventKind::ZReaches(cfg.tol.z_cut)],
                )?;
                Some(classify_forward(p, tr, cfg))
            } else {
                None
            }
        }
        _ => None,
    };
    Ok(PhaseOrbit { phase, continuation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{explicit_profile, explicit_support_edge};

    #[test]
    fn backward_examples_m3_sigma2() {
        let p = Params::new(3.0, 2.0).unwrap();
        let cfg = ShootConfig::default();
        let o = shoot_from_interface(&p, 0.5, &cfg).unwrap();
        assert!(matches!(o.kind, BackwardKind::PositiveAtZero { .. }), "{:?}", o.kind);
        let o = shoot_from_interface(&p, 10.0, &cfg).unwrap();
        match o.kind {
            BackwardKind::SignChange { theta } => assert!(theta > 0.0 && theta < 10.0),
            k => panic!("{k:?}"),
        }
        assert!(shoot_from_interface(&p, -1.0, &cfg).is_err());
    }

    #[test]
    fn backward_at_explicit_edge_is_good() {
        let m = 3.0;
        let p = Params::at_sigma_star(m).unwrap();
        let cfg = ShootConfig {
            ctrl: IntegratorControl { rtol: 1e-12, atol: 1e-14, ..Default::default() },
            ..Default::default()
        };
        let x1 = explicit_support_edge(m);
        let o = shoot_from_interface(&p, x1, &cfg).unwrap();
        assert_eq!(o.kind, BackwardKind::GoodCandidate { a: 0.0 });
        let f = o.trajectory.f_at(0.5).unwrap();
        assert!((f - explicit_profile(m, 0.5)).abs() < 1e-8);
    }

    #[test]
    fn origin_launch_is_on_series() {
        let p = Params::new(4.0, 4.0).unwrap();
        let tol = ShootingTolerances::default();
        let s = origin_launch(&p, 2.0, &tol).unwrap();
        let ph = profile_to_phase(&p, &s).unwrap();
        assert!((ph.x - 1e-8).abs() < 1e-20);
        let s = origin_launch(&p, 1e-3, &tol).unwrap();
        assert!(profile_to_phase(&p, &s).unwrap().z <= 1e-3 * (1.0 + 1e-12));
    }

    #[test]
    fn classify_single_entry_grid() {
        let p = Params::new(4.0, 0.5).unwrap();
        let k = classify_c_intervals(&p, &[1.0], &ShootConfig::default()).unwrap();
        assert_eq!(k.entries.len(), 1);
        assert!(k.brackets.is_empty());
        assert!(classify_c_intervals(&p, &[], &ShootConfig::default()).is_err());
        assert!(classify_c_intervals(&p, &[2.0, 1.0], &ShootConfig::default()).is_err());
    }

    #[test]
    fn p0_launch_on_center_manifold() {
        let p = Params::new(3.0, 2.0).unwrap();
        let e = p.exponents();
        let h = -(3.0 * 2.0 + 4.0) * 4.0 / 4.0;
        let defect = |x0: f64| {
            let s = phase_launch_state(&p, PhaseLaunch::FromP0 { k: 0.0, x0 }).unwrap();
            let (dx, dy, _) = crate::dynsys::phase_rhs(&p, &s);
            (dy - e.alpha / e.beta * (1.0 + 2.0 * h * x0) * dx).abs() / dx.abs()
        };
        let (a, b) = (defect(1e-3), defect(1e-4));
        assert!(a < 0.2 && b < a / 5.0, "{a} {b}");
    }
}
