//! Adaptive explicit integration with dense output and event location for the
//! profile equation (independent variable ξ) and the phase-space system
//! (independent variable η).
//!
//! Profile runs use three stages chosen on the fly:
//!
//! * the pressure form `(v, w)` stepped in ξ;
//! * a slaved stage for forward runs, where the fast relaxation rate
//!   `βξ/(mv)` dwarfs the slow rate of the orbit: there `ln v` is advanced on
//!   the slow manifold `w = r₁(ξ, v) v`;
//! * a zero-approach stage where `f` becomes the independent variable and
//!   `(ξ, (f^m)')` is advanced down to `f = 0`, which resolves both
//!   interfaces and transversal zeros without a singular right-hand side.

mod dopri;

use crate::dynsys::{center_flow_rhs, phase_rhs, profile_dw, PhaseState, ProfileState};
use crate::error::{Error, Result};
use crate::model::{Exponents, Params, ProfileFn};
use dopri::{bisect, hermite, Controller};

/// Integration tolerances and limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
    /// Lower ξ cutoff of backward profile runs.
    pub xi_min: f64,
    /// Magnitude treated as divergence.
    pub bound_huge: f64,
    /// Enables the slaved stage on forward profile runs.
    pub slaving: bool,
    /// Stiffness ratio above which the slaved stage is entered.
    pub stiff_on: f64,
    /// Stiffness ratio below which the slaved stage is left.
    pub stiff_off: f64,
}

impl Default for IntegratorControl {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-6,
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
            xi_min: 1e-4,
            bound_huge: 1e8,
            slaving: true,
            stiff_on: 1e4,
            stiff_off: 2e3,
        }
    }
}

impl IntegratorControl {
    /// Checks positivity and ordering of every field.
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !(pos(self.rtol) && pos(self.atol) && pos(self.h_init) && self.h_max > 0.0) {
            return Err(Error::InvalidInput("tolerances and step sizes must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidInput("max_steps must be positive".into()));
        }
        if !(pos(self.xi_min) && pos(self.bound_huge)) {
            return Err(Error::InvalidInput("xi_min and bound_huge must be positive".into()));
        }
        if !(pos(self.stiff_off) && self.stiff_on > self.stiff_off) {
            return Err(Error::InvalidInput("need 0 < stiff_off < stiff_on".into()));
        }
        Ok(())
    }
}

/// Direction of a profile run in ξ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// Kinds of terminating events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    /// The pressure reaches zero; the terminal `(f^m)'` is attached.
    VHitsZero,
    /// A coordinate exceeded `bound_huge` or the step size collapsed in a blow-up.
    VDiverges,
    /// The phase coordinate Y crosses the given value.
    YCrossesValue(f64),
    /// The phase coordinate Z reaches the given value.
    ZReaches(f64),
    /// The phase state comes within `radius` of `point`.
    StateNearPoint { point: [f64; 3], radius: f64 },
    /// The step budget ran out or the run stagnated.
    StepBudgetExhausted,
    /// A backward profile run reached `xi_min`.
    ReachedXiMin,
    /// A phase orbit entered the tail region `X ≤ x_max`, `Y < 0`, `Z > 1`.
    TailEntry { x_max: f64 },
}

/// A terminating event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event<S> {
    pub kind: EventKind,
    /// Independent variable at the event (ξ or η).
    pub location: f64,
    pub state: S,
    /// Terminal `(f^m)'` for profile zeros.
    pub fm_slope: Option<f64>,
}

/// A sampled profile with its terminating event.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTrajectory {
    pub params: Params,
    pub direction: Direction,
    /// Accepted states, strictly monotone in ξ along `direction`.
    pub samples: Vec<ProfileState>,
    /// `ln v` for every sample, kept separately because `v` may underflow in tails.
    pub log_v: Vec<f64>,
    pub termination: Event<ProfileState>,
}

/// A sampled phase orbit with its terminating event.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory {
    pub params: Params,
    /// `(η, state)` pairs with η increasing.
    pub samples: Vec<(f64, PhaseState)>,
    pub termination: Event<PhaseState>,
}

/// Slow-manifold rate `r₁ = w/v` of the pressure equation, to first order in `v`.
pub fn slow_rate(p: &Params, xi: f64, v: f64) -> f64 {
    let Exponents { alpha, beta } = p.exponents();
    let (m, s) = (p.m(), p.sigma());
    let r0 = (m - 1.0) * s * (alpha - xi.powf(s)) / xi;
    let r0p = -(m - 1.0) * s * (alpha / (xi * xi) + (s - 1.0) * xi.powf(s - 2.0));
    r0 - m * v / (beta * xi) * (r0p + m * r0 * r0 / (m - 1.0))
}

/// Ratio of the fast relaxation rate to the slow rate at a state.
pub fn stiffness_ratio(p: &Params, s: &ProfileState) -> f64 {
    if !(s.xi > 0.0 && s.v > 0.0) {
        return 0.0;
    }
    let lambda = fast_rate(p, s);
    let nu = slow_rate(p, s.xi, s.v).abs() + 1.0 / s.xi;
    lambda / nu
}

fn fast_rate(p: &Params, s: &ProfileState) -> f64 {
    let m = p.m();
    (p.exponents().beta * s.xi / m + 2.0 * s.w / (m - 1.0)).abs() / s.v
}

enum Mode {
    Explicit,
    Slaved,
}

enum FinishResult {
    Zero { xi0: f64, q: f64 },
    Turnaround(ProfileState),
    Failed,
}

struct ProfileDriver<'a> {
    p: &'a Params,
    ctrl: &'a IntegratorControl,
    dir: Direction,
    sgn: f64,
    xi_stop: f64,
    stop_kind: EventKind,
    y_values: Vec<f64>,
    samples: Vec<ProfileState>,
    log_v: Vec<f64>,
    steps: usize,
}

/// Integrates the profile equation from `start` in the given direction.
///
/// Backward runs stop at `ctrl.xi_min`; forward runs stop at the smallest
/// `ZReaches` value in `watch` (or run until another event). `YCrossesValue`
/// entries are honoured in both directions. Zeros, divergence and budget
/// exhaustion always terminate.
pub fn integrate_profile(
    p: &Params,
    start: ProfileState,
    direction: Direction,
    ctrl: &IntegratorControl,
    watch: &[EventKind],
) -> Result<ProfileTrajectory> {
    ctrl.validate()?;
    if !(start.v > 0.0 && start.v.is_finite()) {
        return Err(Error::DegenerateState { v: start.v });
    }
    if !(start.xi >= 0.0 && start.xi.is_finite() && start.w.is_finite()) {
        return Err(Error::InvalidInput(format!("bad start state {start:?}")));
    }
    let alpha = p.exponents().alpha;
    let (xi_stop, stop_kind) = match direction {
        Direction::Backward => {
            if !(start.xi > ctrl.xi_min) {
                return Err(Error::InvalidInput(format!(
                    "backward start xi = {} must exceed xi_min = {}",
                    start.xi, ctrl.xi_min
                )));
            }
            (ctrl.xi_min, EventKind::ReachedXiMin)
        }
        Direction::Forward => watch
            .iter()
            .filter_map(|k| match k {
                EventKind::ZReaches(z) => Some(*z),
                _ => None,
            })
            .fold(None, |acc: Option<f64>, z| Some(acc.map_or(z, |a| a.min(z))))
            .map(|z| ((alpha * z).powf(1.0 / p.sigma()), EventKind::ZReaches(z)))
            .unwrap_or((f64::INFINITY, EventKind::StepBudgetExhausted)),
    };
    let y_values = watch
        .iter()
        .filter_map(|k| match k {
            EventKind::YCrossesValue(y) => Some(*y),
            _ => None,
        })
        .collect();
    let mut d = ProfileDriver {
        p,
        ctrl,
        dir: direction,
        sgn: direction.sign(),
        xi_stop,
        stop_kind,
        y_values,
        samples: Vec::new(),
        log_v: Vec::new(),
        steps: 0,
    };
    Ok(d.run(start))
}

impl<'a> ProfileDriver<'a> {
    fn push(&mut self, s: ProfileState, lv: f64) {
        self.samples.push(s);
        self.log_v.push(lv);
    }

    fn done(&mut self, kind: EventKind, location: f64, state: ProfileState, fm: Option<f64>) -> ProfileTrajectory {
        ProfileTrajectory {
            params: *self.p,
            direction: self.dir,
            samples: std::mem::take(&mut self.samples),
            log_v: std::mem::take(&mut self.log_v),
            termination: Event { kind, location, state, fm_slope: fm },
        }
    }

    fn can_slave(&self) -> bool {
        self.dir == Direction::Forward && self.ctrl.slaving
    }

    fn slave_entry(&self, s: &ProfileState) -> bool {
        if !(s.xi > 0.0 && s.v > 0.0) {
            return false;
        }
        let r1 = slow_rate(self.p, s.xi, s.v);
        let nu = r1.abs() + 1.0 / s.xi;
        stiffness_ratio(self.p, s) > self.ctrl.stiff_on && (s.w / s.v - r1).abs() <= 1e-3 * nu
    }

    fn explicit_h(&self, s: &ProfileState) -> f64 {
        let lam = fast_rate(self.p, s);
        let mut h = self.ctrl.h_init;
        if lam.is_finite() && lam > 0.0 {
            h = h.min(0.1 / lam);
        }
        if s.xi > 0.0 {
            h = h.min(0.01 * s.xi);
        }
        self.sgn * h
    }

    fn y_of(&self, s: &ProfileState) -> f64 {
        let alpha = self.p.exponents().alpha;
        let m = self.p.m();
        m / (alpha * (m - 1.0)) * s.w / s.xi
    }

    fn diverged(&self, s: &ProfileState) -> bool {
        !(s.v.is_finite() && s.w.is_finite())
            || s.v > self.ctrl.bound_huge
            || s.w.abs() > self.ctrl.bound_huge
    }

    /// Earliest watched Y crossing inside a step, located on the interpolant `at`.
    fn y_event<F: Fn(f64) -> ProfileState>(
        &self,
        a: &ProfileState,
        b: &ProfileState,
        at: F,
    ) -> Option<(f64, ProfileState, f64)> {
        if a.xi <= 0.0 || b.xi <= 0.0 {
            return None;
        }
        let mut best: Option<(f64, ProfileState, f64)> = None;
        for &y0 in &self.y_values {
            let ga = self.y_of(a) - y0;
            let gb = self.y_of(b) - y0;
            if ga == 0.0 || (ga > 0.0) == (gb > 0.0) {
                continue;
            }
            let tol = 1e-12 * a.xi.abs().max(1.0);
            let loc = bisect(|x| self.y_of(&at(x)) - y0, a.xi, b.xi, tol);
            if best.map_or(true, |(l, _, _)| self.sgn * (loc - l) < 0.0) {
                best = Some((loc, at(loc), y0));
            }
        }
        best
    }

    fn finish_trigger(&self, s: &ProfileState) -> bool {
        if !(s.v > 0.0 && s.xi > 0.0) || self.sgn * s.w >= 0.0 {
            return false;
        }
        let d = s.v / (s.w.abs() * s.xi);
        if d >= 0.05 {
            return false;
        }
        if self.dir == Direction::Forward {
            let m = self.p.m();
            let w_i = -(m - 1.0) * self.p.exponents().beta * s.xi / m;
            return s.w / w_i >= 0.5;
        }
        true
    }

    /// Zero-approach stage with `f` as independent variable.
    fn finish(&mut self, s: &ProfileState) -> FinishResult {
        let p = self.p;
        let Exponents { alpha, beta } = p.exponents();
        let (m, sg) = (p.m(), p.sigma());
        let f_s = s.f(p);
        let q_s = s.fm_prime(p);
        if !(f_s > 0.0 && q_s != 0.0 && q_s.is_finite()) {
            return FinishResult::Failed;
        }
        let mut rhs = |f: f64, y: &[f64; 2]| {
            let (xi, q) = (y[0], y[1]);
            if q == 0.0 || !xi.is_finite() || !q.is_finite() || xi < 0.0 {
                return None;
            }
            let fp = f.max(0.0);
            Some([m * fp.powf(m - 1.0) / q, m * (alpha - xi.powf(sg)) * fp.powf(m) / q - beta * xi])
        };
        let ctl = Controller { rtol: self.ctrl.rtol, atol: [self.ctrl.atol; 2], h_max: f64::INFINITY };
        let mut t = f_s;
        let mut y = [s.xi, q_s];
        let Some(mut k) = rhs(t, &y) else {
            return FinishResult::Failed;
        };
        let mut h = -0.05 * f_s;
        let mut local: Vec<(ProfileState, f64)> = Vec::new();
        let budget = 100_000;
        for _ in 0..budget {
            let Ok(a) = ctl.advance(&mut rhs, t, &y, &k, h, Some(0.0)) else {
                return FinishResult::Failed;
            };
            let (xi_n, q_n, f_n) = (a.y[0], a.y[1], a.t);
            if self.sgn * (xi_n - self.xi_stop) >= 0.0 || self.sgn * (xi_n - y[0]) < 0.0 {
                return FinishResult::Failed;
            }
            self.steps += 1;
            if q_n * q_s <= 0.0 {
                let landed = a.hit_end || f_n <= 0.0;
                let q0 = if landed { q_n } else { y[1] + beta * y[0] * t };
                if q0.abs() <= 1e-9 * beta * y[0] * f_s {
                    for (st, l) in local {
                        self.push(st, l);
                    }
                    return FinishResult::Zero { xi0: if landed { xi_n } else { y[0] }, q: q0 };
                }
                let prev = ProfileState::new(y[0], t.powf(m - 1.0), (m - 1.0) * y[1] / (m * t));
                for (st, l) in local {
                    self.push(st, l);
                }
                return if prev.xi == s.xi { FinishResult::Failed } else { FinishResult::Turnaround(prev) };
            }
            if a.hit_end || f_n <= 0.0 {
                for (st, lv) in local {
                    self.push(st, lv);
                }
                return FinishResult::Zero { xi0: xi_n, q: q_n };
            }
            let state = ProfileState::new(xi_n, f_n.powf(m - 1.0), (m - 1.0) * q_n / (m * f_n));
            let lv = (m - 1.0) * f_n.ln();
            if q_n.abs() < 0.25 * q_s.abs() * (f_n / f_s) {
                for (st, l) in local {
                    self.push(st, l);
                }
                self.push(state, lv);
                return FinishResult::Turnaround(state);
            }
            local.push((state, lv));
            t = f_n;
            y = a.y;
            k = a.k;
            h = a.h_next;
        }
        FinishResult::Failed
    }

    fn run(&mut self, start: ProfileState) -> ProfileTrajectory {
        let p = self.p;
        self.push(start, start.v.ln());
        if self.sgn * (start.xi - self.xi_stop) >= 0.0 {
            return self.done(self.stop_kind, start.xi, start, None);
        }
        let mut cur = start;
        let mut mode = if self.can_slave() && self.slave_entry(&cur) { Mode::Slaved } else { Mode::Explicit };
        let mut h = match mode {
            Mode::Explicit => self.explicit_h(&cur),
            Mode::Slaved => self.sgn * 0.01 * cur.xi,
        };
        let mut finish_block = false;
        let ctrl = *self.ctrl;
        let stop_kind = self.stop_kind;
        loop {
            if self.steps >= ctrl.max_steps {
                return self.done(EventKind::StepBudgetExhausted, cur.xi, cur, None);
            }
            match mode {
                Mode::Explicit => {
                    let ctl = Controller {
                        rtol: ctrl.rtol,
                        atol: [ctrl.atol * cur.v.min(1.0); 2],
                        h_max: ctrl.h_max,
                    };
                    let mut rhs = |xi: f64, y: &[f64; 2]| {
                        if y[0] > 0.0 && y[0].is_finite() && y[1].is_finite() {
                            Some([y[1], profile_dw(p, xi, y[0], y[1])])
                        } else {
                            None
                        }
                    };
                    let y0 = [cur.v, cur.w];
                    let Some(k1) = rhs(cur.xi, &y0) else {
                        return self.done(EventKind::VDiverges, cur.xi, cur, None);
                    };
                    match ctl.advance(&mut rhs, cur.xi, &y0, &k1, h, Some(self.xi_stop)) {
                        Err(_) => {
                            if self.sgn * cur.w < 0.0 {
                                match self.finish(&cur) {
                                    FinishResult::Zero { xi0, q } => {
                                        let last = *self.samples.last().unwrap_or(&cur);
                                        let st = ProfileState::new(xi0, 0.0, last.w);
                                        return self.done(EventKind::VHitsZero, xi0, st, Some(q));
                                    }
                                    FinishResult::Turnaround(s) => {
                                        cur = s;
                                        finish_block = true;
                                        if self.can_slave() && stiffness_ratio(p, &cur) > ctrl.stiff_on {
                                            cur.w = slow_rate(p, cur.xi, cur.v) * cur.v;
                                            mode = Mode::Slaved;
                                            h = self.sgn * 0.01 * cur.xi;
                                        } else {
                                            h = self.explicit_h(&cur);
                                        }
                                        continue;
                                    }
                                    FinishResult::Failed => {}
                                }
                            }
                            return self.done(EventKind::StepBudgetExhausted, cur.xi, cur, None);
                        }
                        Ok(a) => {
                            self.steps += 1;
                            let next = ProfileState::new(a.t, a.y[0], a.y[1]);
                            if self.diverged(&next) {
                                let st = if next.v.is_finite() && next.w.is_finite() { next } else { cur };
                                if st != cur {
                                    self.push(st, st.v.ln());
                                }
                                return self.done(EventKind::VDiverges, st.xi, st, None);
                            }
                            let (ka, kb) = (k1, a.k);
                            let cur_c = cur;
                            let interp = |x: f64| {
                                let y = hermite(cur_c.xi, &[cur_c.v, cur_c.w], &ka, next.xi, &a.y, &kb, x);
                                ProfileState::new(x, y[0], y[1])
                            };
                            if let Some((loc, st, y0)) = self.y_event(&cur, &next, interp) {
                                self.push(st, st.v.ln());
                                return self.done(EventKind::YCrossesValue(y0), loc, st, None);
                            }
                            self.push(next, next.v.ln());
                            cur = next;
                            h = a.h_next;
                            if a.hit_end {
                                return self.done(stop_kind, cur.xi, cur, None);
                            }
                            if finish_block
                                && (self.sgn * cur.w >= 0.0 || cur.v / (cur.w.abs() * cur.xi) > 0.1)
                            {
                                finish_block = false;
                            }
                            if !finish_block && self.finish_trigger(&cur) {
                                match self.finish(&cur) {
                                    FinishResult::Zero { xi0, q } => {
                                        let last = *self.samples.last().unwrap_or(&cur);
                                        let st = ProfileState::new(xi0, 0.0, last.w);
                                        return self.done(EventKind::VHitsZero, xi0, st, Some(q));
                                    }
                                    FinishResult::Turnaround(s) => {
                                        cur = s;
                                        finish_block = true;
                                        if self.can_slave() && stiffness_ratio(p, &cur) > ctrl.stiff_on {
                                            cur.w = slow_rate(p, cur.xi, cur.v) * cur.v;
                                            mode = Mode::Slaved;
                                            h = self.sgn * 0.01 * cur.xi;
                                        } else {
                                            h = self.explicit_h(&cur);
                                        }
                                        continue;
                                    }
                                    FinishResult::Failed => {
                                        finish_block = true;
                                    }
                                }
                            }
                            if self.can_slave() && self.slave_entry(&cur) {
                                mode = Mode::Slaved;
                                h = self.sgn * 0.01 * cur.xi;
                            }
                        }
                    }
                }
                Mode::Slaved => {
                    let ctl = Controller { rtol: ctrl.rtol, atol: [ctrl.rtol], h_max: ctrl.h_max };
                    let mut rhs = |xi: f64, y: &[f64; 1]| {
                        let r = slow_rate(p, xi, y[0].exp());
                        r.is_finite().then_some([r])
                    };
                    let l0 = *self.log_v.last().unwrap_or(&cur.v.ln());
                    let Some(k1) = rhs(cur.xi, &[l0]) else {
                        mode = Mode::Explicit;
                        h = self.explicit_h(&cur);
                        continue;
                    };
                    match ctl.advance(&mut rhs, cur.xi, &[l0], &k1, h, Some(self.xi_stop)) {
                        Err(_) => {
                            mode = Mode::Explicit;
                            h = self.explicit_h(&cur);
                        }
                        Ok(a) => {
                            self.steps += 1;
                            let l1 = a.y[0];
                            let v1 = l1.exp();
                            let next = ProfileState::new(a.t, v1, a.k[0] * v1);
                            if l1 > ctrl.bound_huge.ln() {
                                self.push(next, l1);
                                return self.done(EventKind::VDiverges, next.xi, next, None);
                            }
                            let (x0, k0, kb) = (cur.xi, k1, a.k);
                            let interp = |x: f64| {
                                let l = hermite(x0, &[l0], &k0, a.t, &[l1], &kb, x)[0];
                                let v = l.exp();
                                ProfileState::new(x, v, slow_rate(p, x, v) * v)
                            };
                            if let Some((loc, st, y0)) = self.y_event(&cur, &next, interp) {
                                self.push(st, st.v.ln());
                                return self.done(EventKind::YCrossesValue(y0), loc, st, None);
                            }
                            self.push(next, l1);
                            cur = next;
                            h = self.sgn * a.h_next.abs().min(0.02 * cur.xi);
                            if a.hit_end {
                                return self.done(stop_kind, cur.xi, cur, None);
                            }
                            if stiffness_ratio(p, &cur) < ctrl.stiff_off {
                                mode = Mode::Explicit;
                                h = self.explicit_h(&cur);
                            }
                        }
                    }
                }
            }
        }
    }
}

impl ProfileTrajectory {
    /// Smallest and largest sampled ξ.
    pub fn xi_range(&self) -> (f64, f64) {
        let a = self.samples.first().map_or(f64::NAN, |s| s.xi);
        let b = self.samples.last().map_or(f64::NAN, |s| s.xi);
        (a.min(b), a.max(b))
    }

    /// Samples ordered by increasing ξ.
    pub fn ascending(&self) -> Vec<ProfileState> {
        let mut v = self.samples.clone();
        if self.direction == Direction::Backward {
            v.reverse();
        }
        v
    }

    /// `(ξ, ln v)` pairs ordered by increasing ξ.
    pub fn ascending_log_v(&self) -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> =
            self.samples.iter().zip(&self.log_v).map(|(s, l)| (s.xi, *l)).collect();
        if self.direction == Direction::Backward {
            v.reverse();
        }
        v
    }

    /// True when the run ended at a zero of the profile.
    pub fn ends_at_zero(&self) -> bool {
        self.termination.kind == EventKind::VHitsZero
    }

    /// Interpolated state at `xi` inside the sampled range (cubic Hermite on
    /// `(v, w)` with slopes from the pressure equation).
    pub fn state_at(&self, xi: f64) -> Result<ProfileState> {
        let asc = self.ascending();
        let (lo, hi) = self.xi_range();
        if !(xi >= lo && xi <= hi) {
            return Err(Error::OutOfRange { xi, lo, hi });
        }
        let j = asc.partition_point(|s| s.xi < xi);
        if j == 0 {
            return Ok(asc[0]);
        }
        let (a, b) = (asc[j - 1], asc[j]);
        if b.xi == xi {
            return Ok(b);
        }
        let p = &self.params;
        let da = [a.w, if a.v > 0.0 { profile_dw(p, a.xi, a.v, a.w) } else { 0.0 }];
        let db = [b.w, if b.v > 0.0 { profile_dw(p, b.xi, b.v, b.w) } else { 0.0 }];
        if !(da[1].is_finite() && db[1].is_finite()) {
            let t = (xi - a.xi) / (b.xi - a.xi);
            return Ok(ProfileState::new(xi, a.v + t * (b.v - a.v), a.w + t * (b.w - a.w)));
        }
        let y = hermite(a.xi, &[a.v, a.w], &da, b.xi, &[b.v, b.w], &db, xi);
        Ok(ProfileState::new(xi, y[0], y[1]))
    }

    /// Profile value `f(ξ)`.
    ///
    /// Inside the sampled range the pressure is interpolated. Beyond a terminal
    /// zero the value is 0, and between the last sample and that zero the
    /// pressure is interpolated linearly. Below the sampled range a run that
    /// reaches `ξ ≤ 1e-3` is extended linearly in `f` down to `ξ = 0`.
    pub fn f_at(&self, xi: f64) -> Result<f64> {
        let p = &self.params;
        let (lo, hi) = self.xi_range();
        if xi >= lo && xi <= hi {
            return Ok(self.state_at(xi)?.f(p));
        }
        if self.ends_at_zero() {
            let z = self.termination.location;
            let last = self.samples.last().copied().ok_or(Error::OutOfRange { xi, lo, hi })?;
            let beyond = match self.direction {
                Direction::Forward => xi >= z,
                Direction::Backward => xi <= z,
            };
            if beyond {
                return Ok(0.0);
            }
            let between = match self.direction {
                Direction::Forward => xi > last.xi && xi < z,
                Direction::Backward => xi < last.xi && xi > z,
            };
            if between {
                let t = (xi - z) / (last.xi - z);
                return Ok(ProfileState::new(xi, t * last.v, last.w).f(p));
            }
        }
        if xi >= 0.0 && xi < lo && lo <= 1e-3 {
            let s = self.ascending()[0];
            return Ok((s.f(p) + s.fprime(p) * (xi - s.xi)).max(0.0));
        }
        Err(Error::OutOfRange { xi, lo, hi })
    }
}

impl ProfileFn for ProfileTrajectory {
    fn profile_at(&self, xi: f64) -> Result<f64> {
        self.f_at(xi)
    }
}

/// Integrates the center-manifold flow in `(X, W)` from `(x0, w0)` up to
/// `eta_end`, returning the accepted `(η, X, W)` samples.
pub fn integrate_center_flow(
    p: &Params,
    x0: f64,
    w0: f64,
    eta_end: f64,
    ctrl: &IntegratorControl,
) -> Result<Vec<(f64, f64, f64)>> {
    ctrl.validate()?;
    if !(x0 >= 0.0 && w0 >= 0.0 && x0.is_finite() && w0.is_finite()) {
        return Err(Error::InvalidInput(format!("need finite X, W >= 0, got {x0}, {w0}")));
    }
    if !(eta_end.is_finite() && eta_end >= 0.0) {
        return Err(Error::InvalidInput(format!("eta_end must be finite and >= 0, got {eta_end}")));
    }
    let mut rhs = |_t: f64, y: &[f64; 2]| {
        let (a, b) = center_flow_rhs(p, y[0], y[1]);
        (a.is_finite() && b.is_finite()).then_some([a, b])
    };
    let ctl = Controller { rtol: ctrl.rtol, atol: [ctrl.atol; 2], h_max: ctrl.h_max };
    let mut out = vec![(0.0, x0, w0)];
    let (mut t, mut y) = (0.0, [x0, w0]);
    let mut k = rhs(t, &y).ok_or_else(|| Error::InvalidInput("non-finite field at start".into()))?;
    let mut h = ctrl.h_init;
    while t < eta_end && out.len() <= ctrl.max_steps {
        let a = ctl
            .advance(&mut rhs, t, &y, &k, h, Some(eta_end))
            .map_err(|_| Error::InvalidInput(format!("step size underflow at eta = {t}")))?;
        t = a.t;
        y = a.y;
        k = a.k;
        h = a.h_next;
        out.push((t, y[0], y[1]));
    }
    Ok(out)
}

/// Integrates the phase-space system from `start` in increasing η.
///
/// `StateNearPoint` fires when the orbit enters the ball (a start inside the
/// ball does not fire). `TailEntry` is tested at step ends. Coordinates
/// beyond `bound_huge`, or a collapsed step size, end the run with `VDiverges`.
pub fn integrate_phase(
    p: &Params,
    start: PhaseState,
    ctrl: &IntegratorControl,
    watch: &[EventKind],
) -> Result<PhaseTrajectory> {
    ctrl.validate()?;
    if !(start.x >= 0.0 && start.z >= 0.0 && start.x.is_finite() && start.y.is_finite() && start.z.is_finite()) {
        return Err(Error::InvalidInput(format!("phase start must have X, Z >= 0, got {start:?}")));
    }
    let mut rhs = |_t: f64, y: &[f64; 3]| {
        let (a, b, c) = phase_rhs(p, &PhaseState::from(*y));
        (a.is_finite() && b.is_finite() && c.is_finite()).then_some([a, b, c])
    };
    let ctl = Controller { rtol: ctrl.rtol, atol: [ctrl.atol; 3], h_max: ctrl.h_max.min(1.0) };
    let mut samples = vec![(0.0, start)];
    let mut t = 0.0;
    let mut y = start.to_array();
    let Some(mut k) = rhs(t, &y) else {
        return Err(Error::InvalidInput("non-finite field at start".into()));
    };
    let mut h = ctrl.h_init;
    let end = |samples: Vec<(f64, PhaseState)>, kind, location, state| PhaseTrajectory {
        params: *p,
        samples,
        termination: Event { kind, location, state, fm_slope: None },
    };
    let event_fn = |kind: &EventKind, s: &[f64; 3]| -> Option<f64> {
        match kind {
            EventKind::YCrossesValue(y0) => Some(s[1] - y0),
            EventKind::ZReaches(z0) => Some(s[2] - z0),
            EventKind::StateNearPoint { point, radius } => {
                Some(PhaseState::from(*s).distance(*point) - radius)
            }
            _ => None,
        }
    };
    for _ in 0..ctrl.max_steps {
        let Ok(a) = ctl.advance(&mut rhs, t, &y, &k, h, None) else {
            let s = PhaseState::from(y);
            return Ok(end(samples, EventKind::VDiverges, t, s));
        };
        let mut best: Option<(f64, EventKind)> = None;
        for kind in watch {
            let Some(ga) = event_fn(kind, &y) else { continue };
            if matches!(kind, EventKind::StateNearPoint { .. }) && ga <= 0.0 {
                continue;
            }
            let probe = [0.25, 0.5, 0.75, 1.0];
            let mut hit = None;
            let mut prev_t = t;
            for frac in probe {
                let tt = t + frac * (a.t - t);
                let s = hermite(t, &y, &k, a.t, &a.y, &a.k, tt);
                let g = event_fn(kind, &s).unwrap_or(ga);
                if g == 0.0 || (g > 0.0) != (ga > 0.0) {
                    hit = Some((prev_t, tt));
                    break;
                }
                prev_t = tt;
            }
            if let Some((lo, hi)) = hit {
                let tol = 1e-12 * t.abs().max(1.0);
                let loc = bisect(
                    |tt| event_fn(kind, &hermite(t, &y, &k, a.t, &a.y, &a.k, tt)).unwrap_or(ga),
                    lo,
                    hi,
                    tol,
                );
                if best.map_or(true, |(l, _)| loc < l) {
                    best = Some((loc, *kind));
                }
            }
        }
        if let Some((loc, kind)) = best {
            let s = PhaseState::from(hermite(t, &y, &k, a.t, &a.y, &a.k, loc));
            if loc > t {
                samples.push((loc, s));
            }
            return Ok(end(samples, kind, loc, s));
        }
        t = a.t;
        y = a.y;
        k = a.k;
        h = a.h_next;
        let s = PhaseState::from(y);
        samples.push((t, s));
        if y.iter().any(|c| c.abs() > ctrl.bound_huge) {
            return Ok(end(samples, EventKind::VDiverges, t, s));
        }
        for kind in watch {
            if let EventKind::TailEntry { x_max } = kind {
                if s.x <= *x_max && s.y < 0.0 && s.z > 1.0 {
                    return Ok(end(samples, *kind, t, s));
                }
            }
        }
    }
    let s = PhaseState::from(y);
    Ok(end(samples, EventKind::StepBudgetExhausted, t, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::profile_to_phase;
    use crate::model::{
        critical_point, explicit_pressure, explicit_profile, explicit_support_edge, interface_launch,
        PointTag,
    };

    #[test]
    fn backward_recovers_explicit_profile() {
        let m = 3.0;
        let p = Params::at_sigma_star(m).unwrap();
        let x1 = explicit_support_edge(m);
        let xs = x1 - 1e-4;
        let (v, w) = interface_launch(&p, x1, xs).unwrap();
        let ctrl = IntegratorControl { rtol: 1e-12, atol: 1e-14, ..Default::default() };
        let tr = integrate_profile(&p, ProfileState::new(xs, v, w), Direction::Backward, &ctrl, &[]).unwrap();
        assert_eq!(tr.termination.kind, EventKind::ReachedXiMin);
        let mut worst: f64 = 0.0;
        for s in &tr.samples {
            if s.xi >= 0.1 && s.xi <= 0.9 * x1 {
                let (ve, _) = explicit_pressure(m, s.xi);
                worst = worst.max(((s.v - ve) / ve).abs());
            }
        }
        assert!(worst < 1e-6, "worst relative pressure error {worst}");
        let fe = explicit_profile(m, 0.5);
        assert!((tr.f_at(0.5).unwrap() - fe).abs() < 1e-6 * fe);
    }

    #[test]
    fn zero_width_forward_run() {
        let p = Params::new(3.0, 2.0).unwrap();
        let ctrl = IntegratorControl::default();
        let s = ProfileState::new(2.0, 1.0, 0.0);
        let tr = integrate_profile(&p, s, Direction::Forward, &ctrl, &[EventKind::ZReaches(1.0)]).unwrap();
        assert_eq!(tr.samples.len(), 1);
        assert_eq!(tr.termination.kind, EventKind::ZReaches(1.0));
    }

    #[test]
    fn backward_start_below_xi_min_rejected() {
        let p = Params::new(3.0, 2.0).unwrap();
        let ctrl = IntegratorControl::default();
        let s = ProfileState::new(1e-5, 1.0, 0.0);
        assert!(integrate_profile(&p, s, Direction::Backward, &ctrl, &[]).is_err());
        let s = ProfileState::new(1.0, 0.0, 0.0);
        assert!(integrate_profile(&p, s, Direction::Backward, &ctrl, &[]).is_err());
    }

    #[test]
    fn forward_interface_from_explicit_interior_point() {
        let m = 3.0;
        let p = Params::at_sigma_star(m).unwrap();
        let x1 = explicit_support_edge(m);
        let (v, w) = explicit_pressure(m, 0.5);
        let ctrl = IntegratorControl::default();
        let tr = integrate_profile(&p, ProfileState::new(0.5, v, w), Direction::Forward, &ctrl, &[]).unwrap();
        assert_eq!(tr.termination.kind, EventKind::VHitsZero);
        assert!((tr.termination.location - x1).abs() < 1e-8, "{}", tr.termination.location);
        assert!(tr.termination.fm_slope.unwrap().abs() < 1e-6);
    }

    #[test]
    fn y_crossing_located() {
        let m = 3.0;
        let p = Params::at_sigma_star(m).unwrap();
        let (v, w) = explicit_pressure(m, 0.3);
        let ctrl = IntegratorControl::default();
        let tr = integrate_profile(
            &p,
            ProfileState::new(0.3, v, w),
            Direction::Forward,
            &ctrl,
            &[EventKind::YCrossesValue(0.0)],
        )
        .unwrap();
        assert_eq!(tr.termination.kind, EventKind::YCrossesValue(0.0));
        let y = profile_to_phase(&p, &tr.termination.state).unwrap().y;
        assert!(y.abs() < 1e-9);
        let (_, we) = explicit_pressure(m, tr.termination.location);
        assert!(we.abs() < 1e-8);
    }

    #[test]
    fn phase_equilibrium_stagnates() {
        let p = Params::new(3.0, 2.0).unwrap();
        let c = critical_point(&p, PointTag::P2, None).unwrap().finite().unwrap();
        let ctrl = IntegratorControl { max_steps: 500, ..Default::default() };
        let tr = integrate_phase(&p, PhaseState::from(c), &ctrl, &[EventKind::ZReaches(1.0)]).unwrap();
        assert_eq!(tr.termination.kind, EventKind::StepBudgetExhausted);
        assert_eq!(tr.termination.state, PhaseState::from(c));
    }

    #[test]
    fn phase_z_event_bisected() {
        let p = Params::new(3.0, 2.0).unwrap();
        let ctrl = IntegratorControl::default();
        let tr = integrate_phase(&p, PhaseState::new(0.2, 0.1, 0.1), &ctrl, &[EventKind::ZReaches(0.5)]);
        let tr = tr.unwrap();
        if tr.termination.kind == EventKind::ZReaches(0.5) {
            assert!((tr.termination.state.z - 0.5).abs() < 1e-9);
        }
    }
}
