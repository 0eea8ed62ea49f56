//! Dormand–Prince 5(4) stepping with error control and cubic Hermite dense output.

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Right-hand side returning `None` where the state is inadmissible.
pub(crate) trait Rhs<const N: usize> {
    fn eval(&mut self, t: f64, y: &[f64; N]) -> Option<[f64; N]>;
}

impl<const N: usize, F: FnMut(f64, &[f64; N]) -> Option<[f64; N]>> Rhs<N> for F {
    fn eval(&mut self, t: f64, y: &[f64; N]) -> Option<[f64; N]> {
        self(t, y)
    }
}

fn comb<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

fn finite<const N: usize>(y: &[f64; N]) -> bool {
    y.iter().all(|v| v.is_finite())
}

/// One trial step. Returns the new state, the derivative there, and the error estimate.
fn trial<const N: usize, F: Rhs<N>>(
    f: &mut F,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
) -> Option<([f64; N], [f64; N], [f64; N])> {
    let y2 = comb(y, h, &[(A21, k1)]);
    let k2 = f.eval(t + C2 * h, &y2)?;
    let y3 = comb(y, h, &[(A31, k1), (A32, &k2)]);
    let k3 = f.eval(t + C3 * h, &y3)?;
    let y4 = comb(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]);
    let k4 = f.eval(t + C4 * h, &y4)?;
    let y5 = comb(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
    let k5 = f.eval(t + C5 * h, &y5)?;
    let y6 = comb(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
    let k6 = f.eval(t + h, &y6)?;
    let y7 = comb(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    if !finite(&y7) {
        return None;
    }
    let k7 = f.eval(t + h, &y7)?;
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h
            * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    Some((y7, k7, err))
}

/// An accepted step.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Accepted<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub k: [f64; N],
    pub h_next: f64,
    /// True when the step was shortened to land on the requested end point.
    pub hit_end: bool,
}

/// Step-size control failure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum StepFailure {
    /// The step size fell below the resolution of the independent variable.
    Underflow,
}

/// Tolerances of the adaptive controller.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Controller<const N: usize> {
    pub rtol: f64,
    pub atol: [f64; N],
    pub h_max: f64,
}

impl<const N: usize> Controller<N> {
    /// Advances from `(t, y)` with trial step `h` (signed), never passing `t_end`.
    pub fn advance<F: Rhs<N>>(
        &self,
        f: &mut F,
        t: f64,
        y: &[f64; N],
        k1: &[f64; N],
        h: f64,
        t_end: Option<f64>,
    ) -> Result<Accepted<N>, StepFailure> {
        let dir = if h >= 0.0 { 1.0 } else { -1.0 };
        let mut h = dir * h.abs().min(self.h_max);
        let h_min = 4.0 * f64::EPSILON * t.abs() + 1e-300;
        loop {
            let mut hit_end = false;
            if let Some(te) = t_end {
                if dir * (t + h - te) >= 0.0 {
                    h = te - t;
                    hit_end = true;
                }
            }
            if h.abs() < h_min {
                return Err(StepFailure::Underflow);
            }
            match trial(f, t, y, k1, h) {
                None => {
                    h *= 0.25;
                }
                Some((yn, kn, e)) => {
                    let mut err: f64 = 0.0;
                    for i in 0..N {
                        let sc = self.atol[i] + self.rtol * y[i].abs().max(yn[i].abs());
                        err = err.max(e[i].abs() / sc);
                    }
                    if err.is_nan() {
                        h *= 0.25;
                        continue;
                    }
                    if err <= 1.0 {
                        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                        let t_new = if hit_end { t_end.unwrap_or(t + h) } else { t + h };
                        let h_next = dir * (h.abs() * fac).min(self.h_max);
                        return Ok(Accepted { t: t_new, y: yn, k: kn, h_next, hit_end });
                    }
                    h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                }
            }
        }
    }
}

/// Cubic Hermite interpolant of a step from `(t0, y0, f0)` to `(t1, y1, f1)`.
pub(crate) fn hermite<const N: usize>(
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    t1: f64,
    y1: &[f64; N],
    f1: &[f64; N],
    t: f64,
) -> [f64; N] {
    let h = t1 - t0;
    if h == 0.0 {
        return *y0;
    }
    let s = (t - t0) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    }
    out
}

/// Bisects `g` on `[a, b]` where `g(a)` and `g(b)` differ in sign, down to
/// `tol` in the independent variable. Returns the end of the final bracket
/// on the `b` side, so the reported point already satisfies the event.
pub(crate) fn bisect<G: FnMut(f64) -> f64>(mut g: G, a: f64, b: f64, tol: f64) -> f64 {
    let (mut lo, mut hi) = (a, b);
    let glo = g(lo);
    for _ in 0..200 {
        if (hi - lo).abs() <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm > 0.0) == (glo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_accurate() {
        let ctl = Controller { rtol: 1e-10, atol: [1e-12], h_max: f64::INFINITY };
        let mut f = |_t: f64, y: &[f64; 1]| Some([-y[0]]);
        let (mut t, mut y) = (0.0, [1.0]);
        let mut k = [-1.0];
        let mut h = 1e-3;
        while t < 5.0 {
            let a = ctl.advance(&mut f, t, &y, &k, h, Some(5.0)).unwrap();
            t = a.t;
            y = a.y;
            k = a.k;
            h = a.h_next;
        }
        assert_eq!(t, 5.0);
        assert!((y[0] - (-5f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn harmonic_oscillator_backward() {
        let ctl = Controller { rtol: 1e-11, atol: [1e-13; 2], h_max: 0.1 };
        let mut f = |_t: f64, y: &[f64; 2]| Some([y[1], -y[0]]);
        let (mut t, mut y) = (0.0, [0.0, 1.0]);
        let mut k = [1.0, 0.0];
        let mut h = -1e-3;
        while t > -3.0 {
            let a = ctl.advance(&mut f, t, &y, &k, h, Some(-3.0)).unwrap();
            t = a.t;
            y = a.y;
            k = a.k;
            h = a.h_next;
        }
        assert!((y[0] - (-3f64).sin()).abs() < 1e-9);
        assert!((y[1] - (-3f64).cos()).abs() < 1e-9);
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let p = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t * t;
        let dp = |t: f64| -2.0 + 1.5 * t * t;
        let v = hermite(0.5, &[p(0.5)], &[dp(0.5)], 1.7, &[p(1.7)], &[dp(1.7)], 1.1);
        assert!((v[0] - p(1.1)).abs() < 1e-14);
    }

    #[test]
    fn bisect_finds_root_within_tolerance() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-13);
        assert!((r - 2f64.sqrt()).abs() <= 1e-13);
        assert!(r * r - 2.0 >= 0.0);
    }

    #[test]
    fn rejected_states_shrink_the_step() {
        let ctl = Controller { rtol: 1e-10, atol: [1e-12], h_max: f64::INFINITY };
        let mut f = |t: f64, y: &[f64; 1]| if t > 0.5 { None } else { Some([y[0]]) };
        let a = ctl.advance(&mut f, 0.0, &[1.0], &[1.0], 1.0, None).unwrap();
        assert!(a.t <= 0.5);
    }
}
