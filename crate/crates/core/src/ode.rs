//! Dormand–Prince 5(4) stepper with embedded error estimate and the
//! standard quartic continuous extension (Hairer–Nørsett–Wanner `CONTD5`).
//!
//! The stepper is deliberately low level: the profile integrator drives the
//! step loop itself because its termination logic (turning points, radius
//! targets, change of independent variable) is problem specific.

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

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

pub type Vector<const N: usize> = [f64; N];

/// Tolerances and step-size controller parameters.
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub safety: f64,
    pub min_factor: f64,
    pub max_factor: f64,
}

impl StepControl {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Self {
        StepControl { rel_tol, abs_tol, safety: 0.9, min_factor: 0.2, max_factor: 5.0 }
    }
}

/// One trial step: the new state, the scaled error norm and the data needed
/// for dense output if the step is accepted.
pub struct Trial<const N: usize> {
    pub y_new: Vector<N>,
    pub f_new: Vector<N>,
    pub err: f64,
    pub segment: DenseSegment<N>,
}

/// Quartic interpolant over one accepted step `[t0, t0 + h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSegment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    r: [Vector<N>; 5],
}

impl<const N: usize> DenseSegment<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    fn theta(&self, t: f64) -> f64 {
        (t - self.t0) / self.h
    }

    pub fn eval(&self, t: f64) -> Vector<N> {
        let th = self.theta(t);
        let th1 = 1.0 - th;
        let r = &self.r;
        std::array::from_fn(|i| {
            r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])))
        })
    }

    pub fn eval_component(&self, t: f64, i: usize) -> f64 {
        let th = self.theta(t);
        let th1 = 1.0 - th;
        let r = &self.r;
        r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])))
    }

    /// Time derivative of the interpolant.
    pub fn derivative(&self, t: f64) -> Vector<N> {
        let th = self.theta(t);
        let th1 = 1.0 - th;
        let r = &self.r;
        std::array::from_fn(|i| {
            (r[1][i]
                + (1.0 - 2.0 * th) * r[2][i]
                + th * (2.0 - 3.0 * th) * r[3][i]
                + 2.0 * th * th1 * (th1 - th) * r[4][i])
                / self.h
        })
    }

    pub fn derivative_component(&self, t: f64, i: usize) -> f64 {
        let th = self.theta(t);
        let th1 = 1.0 - th;
        let r = &self.r;
        (r[1][i]
            + (1.0 - 2.0 * th) * r[2][i]
            + th * (2.0 - 3.0 * th) * r[3][i]
            + 2.0 * th * th1 * (th1 - th) * r[4][i])
            / self.h
    }

    /// Image under `t -> a t + b` and componentwise `y_i -> s_i y_i + o_i`.
    pub fn affine(&self, a: f64, b: f64, scale: &Vector<N>, offset: &Vector<N>) -> Self {
        let mut r = self.r;
        for i in 0..N {
            r[0][i] = scale[i] * r[0][i] + offset[i];
            for row in r.iter_mut().skip(1) {
                row[i] *= scale[i];
            }
        }
        DenseSegment { t0: a * self.t0 + b, h: a * self.h, r }
    }
}

#[inline]
fn axpy<const N: usize>(y: &Vector<N>, h: f64, terms: &[(f64, &Vector<N>)]) -> Vector<N> {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

/// Performs one Dormand–Prince trial step of size `h` (may be negative).
/// `f0` is the derivative at `(t, y)` (first-same-as-last reuse).
pub fn trial_step<const N: usize, F>(
    rhs: &F,
    ctl: &StepControl,
    t: f64,
    y: &Vector<N>,
    f0: &Vector<N>,
    h: f64,
) -> Trial<N>
where
    F: Fn(f64, &Vector<N>) -> Vector<N>,
{
    let k1 = *f0;
    let k2 = rhs(t + C2 * h, &axpy(y, h, &[(A21, &k1)]));
    let k3 = rhs(t + C3 * h, &axpy(y, h, &[(A31, &k1), (A32, &k2)]));
    let k4 = rhs(t + C4 * h, &axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
    let k5 = rhs(
        t + C5 * h,
        &axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    );
    let k6 = rhs(
        t + h,
        &axpy(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    );
    let y_new = axpy(y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = rhs(t + h, &y_new);

    let mut acc = 0.0;
    for i in 0..N {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = ctl.abs_tol + ctl.rel_tol * y[i].abs().max(y_new[i].abs());
        acc += (e / sc).powi(2);
    }
    let err = (acc / N as f64).sqrt();

    let mut r = [[0.0; N]; 5];
    for i in 0..N {
        let dy = y_new[i] - y[i];
        let bspl = h * k1[i] - dy;
        r[0][i] = y[i];
        r[1][i] = dy;
        r[2][i] = bspl;
        r[3][i] = dy - h * k7[i] - bspl;
        r[4][i] = h
            * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    Trial { y_new, f_new: k7, err, segment: DenseSegment { t0: t, h, r } }
}

/// Step-size factor for the next attempt given a scaled error norm.
pub fn step_factor(ctl: &StepControl, err: f64) -> f64 {
    if !err.is_finite() {
        return ctl.min_factor;
    }
    if err == 0.0 {
        return ctl.max_factor;
    }
    (ctl.safety * err.powf(-0.2)).clamp(ctl.min_factor, ctl.max_factor)
}

/// Safeguarded root of `g` on `[a, b]` with `g(a)` and `g(b)` of opposite
/// sign (or zero). Bisection with secant acceleration.
pub fn bracket_root<G: Fn(f64) -> f64>(g: G, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut ga = g(a);
    let mut gb = g(b);
    if ga == 0.0 {
        return a;
    }
    if gb == 0.0 {
        return b;
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        // secant point, accepted only when it falls well inside the bracket
        let sec = b - gb * (b - a) / (gb - ga);
        let lo = a.min(b);
        let hi = a.max(b);
        let w = hi - lo;
        let c = if sec.is_finite() && sec > lo + 0.05 * w && sec < hi - 0.05 * w {
            sec
        } else {
            mid
        };
        let gc = g(c);
        if gc == 0.0 {
            return c;
        }
        if (gc < 0.0) == (ga < 0.0) {
            a = c;
            ga = gc;
        } else {
            b = c;
            gb = gc;
        }
        if (b - a).abs() <= tol * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        // force a bisection when the secant stalls on one side
        let m = 0.5 * (a + b);
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
            gb = gm;
        }
        if (b - a).abs() <= tol * (1.0 + a.abs().max(b.abs())) {
            break;
        }
    }
    if ga.abs() < gb.abs() {
        a
    } else {
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate<const N: usize, F: Fn(f64, &Vector<N>) -> Vector<N>>(
        rhs: F,
        y0: Vector<N>,
        t_end: f64,
        tol: f64,
    ) -> (Vector<N>, Vec<DenseSegment<N>>) {
        let ctl = StepControl::new(tol, tol * 1e-2);
        let mut t = 0.0;
        let mut y = y0;
        let mut f = rhs(t, &y);
        let mut h = 1e-3 * t_end.signum();
        let mut segs = Vec::new();
        while (t_end - t) * h.signum() > 0.0 {
            if (t + h - t_end) * h.signum() > 0.0 {
                h = t_end - t;
            }
            let tr = trial_step(&rhs, &ctl, t, &y, &f, h);
            let fac = step_factor(&ctl, tr.err);
            if tr.err <= 1.0 {
                t += h;
                y = tr.y_new;
                f = tr.f_new;
                segs.push(tr.segment);
            }
            h *= fac;
        }
        (y, segs)
    }

    #[test]
    fn harmonic_oscillator_accuracy() {
        let (y, _) = integrate(|_, y: &[f64; 2]| [y[1], -y[0]], [1.0, 0.0], 10.0, 1e-10);
        assert!((y[0] - 10f64.cos()).abs() < 1e-8);
        assert!((y[1] + 10f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn backward_integration() {
        let (y, _) = integrate(|_, y: &[f64; 1]| [y[0]], [1.0], -2.0, 1e-10);
        assert!((y[0] - (-2f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn dense_output_and_derivative() {
        let (_, segs) = integrate(|_, y: &[f64; 2]| [y[1], -y[0]], [1.0, 0.0], 6.0, 1e-10);
        for s in &segs {
            let t = s.t0 + 0.37 * s.h;
            let y = s.eval(t);
            assert!((y[0] - t.cos()).abs() < 1e-8);
            let d = s.derivative(t);
            assert!((d[0] + t.sin()).abs() < 1e-7);
            assert_eq!(s.eval_component(t, 1), y[1]);
            assert_eq!(s.derivative_component(t, 0), d[0]);
            // endpoints reproduce the step states
            assert!((s.eval(s.t1())[0] - s.t1().cos()).abs() < 1e-8);
        }
    }

    #[test]
    fn affine_map_of_segment() {
        let (_, segs) = integrate(|_, y: &[f64; 1]| [y[0]], [1.0], 1.0, 1e-10);
        let s = &segs[1];
        let m = s.affine(2.0, 1.0, &[3.0], &[0.5]);
        let t = s.t0 + 0.5 * s.h;
        assert!((m.eval(2.0 * t + 1.0)[0] - (3.0 * s.eval(t)[0] + 0.5)).abs() < 1e-14);
        assert!((m.derivative(2.0 * t + 1.0)[0] - 1.5 * s.derivative(t)[0]).abs() < 1e-12);
    }

    #[test]
    fn root_finder() {
        let r = bracket_root(|x| x * x - 2.0, 0.0, 2.0, 1e-15);
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
        let r = bracket_root(|x| (x - 1.0).powi(3), 3.0, -1.0, 1e-15);
        assert!((r - 1.0).abs() < 1e-5);
    }
}
