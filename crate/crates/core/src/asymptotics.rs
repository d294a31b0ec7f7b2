//! Behaviour at infinity of catenoid ends.
//!
//! An end is the graph of `f` over `x > r0`. Quantities are oriented so that
//! they are positive on both ends: `u(x) = |x f'(x)|` and heights `|f(x)|`.
//! An unbounded end has `u -> c0 > 0` and `|f| ~ c0 log x`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::prescribed::least_squares;
use crate::profile::{BranchKind, Catenoid};

/// Smallest growth constant accepted as "unbounded".
pub const C0_MIN: f64 = 1e-4;
/// Largest relative spread of `u` over the last two decades for "unbounded".
pub const STABILITY_MAX: f64 = 0.01;
/// Tail tolerance in units of `r0`.
pub const TAIL_TOL_FACTOR: f64 = 1e-3;
/// Branches must reach this many necksizes before classification.
pub const MIN_DECADES_FACTOR: f64 = 1e4;
/// Slack for the monotonicity of `u`, relative to `max(1, u)`.
pub const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Unbounded,
    Bounded,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub c0_min: f64,
    pub stability_max: f64,
    pub tail_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndClassification {
    pub branch: BranchKind,
    pub verdict: Verdict,
    pub c0: Option<f64>,
    /// `[x, u(x)]` at `x = 10^k r0` and at the last radius.
    pub checkpoints: Vec<[f64; 2]>,
    pub stability: f64,
    pub height_tail: f64,
    /// Extrapolated `∫ |f'|` beyond the last radius (power-law tail fit).
    pub slope_tail: f64,
    /// `u` nonincreasing over all dense checkpoints.
    pub monotone: bool,
    /// Largest increase of `u` between consecutive checkpoints.
    pub max_increase: f64,
    pub x_reached: f64,
    pub thresholds: Thresholds,
}

impl EndClassification {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("classification serializes")
    }
}

/// `(x, u(x))` at every dense checkpoint past the waist.
pub fn growth_samples(c: &Catenoid, branch: BranchKind) -> Result<Vec<(f64, f64)>> {
    c.checkpoint_radii(branch)
        .into_iter()
        .skip(1)
        .map(|x| Ok((x, c.growth_at(branch, x)?.abs())))
        .collect()
}

fn require_length(c: &Catenoid, branch: BranchKind) -> Result<f64> {
    let reached = c.x_reached(branch);
    let required = MIN_DECADES_FACTOR * c.necksize();
    if reached < required * (1.0 - 1e-12) {
        return Err(Error::BranchTooShort { reached, required });
    }
    Ok(reached)
}

fn decade_radii(r0: f64, x_end: f64) -> Vec<f64> {
    let mut xs: Vec<f64> = (1..)
        .map(|k| r0 * 10f64.powi(k))
        .take_while(|&x| x < x_end * (1.0 - 1e-12))
        .collect();
    xs.push(x_end);
    xs
}

/// Classifies one end as unbounded, bounded or inconclusive.
pub fn classify_end(c: &Catenoid, branch: BranchKind) -> Result<EndClassification> {
    let x_end = require_length(c, branch)?;
    let r0 = c.necksize();
    let tail_tol = TAIL_TOL_FACTOR * r0;
    let samples = growth_samples(c, branch)?;

    let mut max_increase = f64::NEG_INFINITY;
    let mut monotone = true;
    for w in samples.windows(2) {
        let inc = w[1].1 - w[0].1;
        max_increase = max_increase.max(inc);
        if inc > MONOTONE_SLACK * w[0].1.max(1.0) {
            monotone = false;
        }
    }

    let last_two: Vec<f64> =
        samples.iter().filter(|s| s.0 >= x_end / 100.0).map(|s| s.1).collect();
    let c0 = final_decade_mean(&samples, x_end);
    let (lo, hi) = last_two
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &u| (a.min(u), b.max(u)));
    let stability = if c0 > 0.0 { (hi - lo) / c0 } else { f64::INFINITY };

    let height_tail =
        (c.height_at(branch, x_end)? - c.height_at(branch, x_end / 10.0)?).abs();
    let slope_tail = power_tail(c, branch, 1.0)?;

    let verdict = if stability <= STABILITY_MAX && c0 > C0_MIN {
        Verdict::Unbounded
    } else if slope_tail < tail_tol && height_tail < tail_tol {
        Verdict::Bounded
    } else {
        Verdict::Inconclusive
    };

    let checkpoints = decade_radii(r0, x_end)
        .into_iter()
        .map(|x| Ok([x, c.growth_at(branch, x)?.abs()]))
        .collect::<Result<Vec<_>>>()?;

    Ok(EndClassification {
        branch,
        verdict,
        c0: (verdict == Verdict::Unbounded).then_some(c0),
        checkpoints,
        stability,
        height_tail,
        slope_tail,
        monotone,
        max_increase,
        x_reached: x_end,
        thresholds: Thresholds { c0_min: C0_MIN, stability_max: STABILITY_MAX, tail_tol },
    })
}

fn final_decade_mean(samples: &[(f64, f64)], x_end: f64) -> f64 {
    let last: Vec<f64> = samples.iter().filter(|s| s.0 >= x_end / 10.0).map(|s| s.1).collect();
    last.iter().sum::<f64>() / last.len() as f64
}

/// Fit of `|f(x)| = c0 log(x / r0) + const` with `c0` held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogFit {
    pub slope: f64,
    pub intercept: f64,
    pub window: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    pub c0: f64,
    /// `(x, u(x) - c0)` at `x = 10^k r0` up to a decade below the last radius.
    pub remainder: Vec<(f64, f64)>,
    pub log_fit: LogFit,
    /// Largest deviation of `|f|` from the fitted line over the window.
    pub fit_residual: f64,
}

/// Growth constant and logarithmic fit over the last two decades.
pub fn estimate_c0(c: &Catenoid, branch: BranchKind) -> Result<GrowthFit> {
    let x_end = c.x_reached(branch);
    estimate_c0_window(c, branch, x_end / 100.0, x_end)
}

/// As [`estimate_c0`], with the log fit over `[lo, hi]`.
pub fn estimate_c0_window(c: &Catenoid, branch: BranchKind, lo: f64, hi: f64) -> Result<GrowthFit> {
    let class = classify_end(c, branch)?;
    if class.verdict != Verdict::Unbounded {
        return Err(Error::Precondition(format!(
            "{} end classified {:?}, not Unbounded",
            branch.as_str(),
            class.verdict
        )));
    }
    let x_end = class.x_reached;
    if !(lo > c.necksize() && lo < hi && hi <= x_end) {
        return Err(Error::InvalidParameter(format!(
            "fit window [{lo}, {hi}] must lie inside ({}, {x_end}]",
            c.necksize()
        )));
    }
    let r0 = c.necksize();
    let samples = growth_samples(c, branch)?;
    let c0 = final_decade_mean(&samples, x_end);

    let remainder = decade_radii(r0, x_end)
        .into_iter()
        .filter(|&x| x <= x_end / 10.0 * (1.0 + 1e-12))
        .map(|x| Ok((x, c.growth_at(branch, x)?.abs() - c0)))
        .collect::<Result<Vec<_>>>()?;

    let mut pts = Vec::new();
    for x in c.checkpoint_radii(branch) {
        if x >= lo && x <= hi {
            pts.push((x, c.height_at(branch, x)?.abs()));
        }
    }
    for x in [lo, hi] {
        if !pts.iter().any(|p| p.0 == x) {
            pts.push((x, c.height_at(branch, x)?.abs()));
        }
    }
    let offsets: Vec<f64> = pts.iter().map(|(x, z)| z - c0 * (x / r0).ln()).collect();
    let (mn, mx) = offsets
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    // minimax constant
    let intercept = 0.5 * (mn + mx);
    let fit_residual = 0.5 * (mx - mn);
    Ok(GrowthFit {
        c0,
        remainder,
        log_fit: LogFit { slope: c0, intercept, window: [lo, hi] },
        fit_residual,
    })
}

/// Margins `r0 / sqrt(x^2 - r0^2) - f'(x)` of the comparison with the
/// minimal catenoid on the upper end.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundMargins {
    /// `(x, margin)` at every dense checkpoint past the waist.
    pub margins: Vec<(f64, f64)>,
    pub min_margin: f64,
    /// Largest `|margin|` relative to the bound.
    pub max_relative: f64,
    pub all_positive: bool,
}

pub fn verify_claim1_bound(c: &Catenoid) -> Result<BoundMargins> {
    let r0 = c.necksize();
    let mut margins = Vec::new();
    let mut max_relative: f64 = 0.0;
    for x in c.checkpoint_radii(BranchKind::Upper).into_iter().skip(1) {
        let bound = r0 / ((x - r0) * (x + r0)).sqrt();
        let m = bound - c.slope_at(BranchKind::Upper, x)?;
        max_relative = max_relative.max(m.abs() / bound);
        margins.push((x, m));
    }
    let min_margin = margins.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    Ok(BoundMargins { all_positive: min_margin > 0.0, margins, min_margin, max_relative })
}

const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// `(x, ∫_{x_1}^x |f'|^p)` at the checkpoints, starting from the first one
/// past the waist. Integrates in `log(x - r0)`, where the integrand is
/// smooth near the waist and in the far field alike.
pub fn cumulative_slope_integral(
    c: &Catenoid,
    branch: BranchKind,
    p: f64,
) -> Result<Vec<(f64, f64)>> {
    let r0 = c.necksize();
    let xs: Vec<f64> = c.checkpoint_radii(branch).into_iter().skip(1).collect();
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    out.push((xs[0], 0.0));
    for w in xs.windows(2) {
        let (ta, tb) = ((w[0] - r0).ln(), (w[1] - r0).ln());
        let (mid, half) = (0.5 * (ta + tb), 0.5 * (tb - ta));
        let mut sum = 0.0;
        for (node, weight) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let tau = mid + half * node;
            let d = tau.exp();
            let x = (r0 + d).min(w[1]);
            sum += weight * c.slope_at(branch, x)?.abs().powf(p) * d;
        }
        acc += half * sum;
        out.push((w[1], acc));
    }
    Ok(out)
}

/// Extrapolated `∫_X^∞ |f'|^p` from a power-law fit of `|f'|` over the last
/// two decades; infinite when the fitted tail does not decay fast enough.
fn power_tail(c: &Catenoid, branch: BranchKind, p: f64) -> Result<f64> {
    let x_end = c.x_reached(branch);
    let mut pts = Vec::new();
    for x in c.checkpoint_radii(branch) {
        if x >= x_end / 100.0 {
            let s = c.slope_at(branch, x)?.abs();
            if s > 0.0 {
                pts.push((x.ln(), s.ln()));
            }
        }
    }
    if pts.len() < 2 {
        return Ok(if pts.is_empty() { 0.0 } else { f64::INFINITY });
    }
    let Some((slope, intercept)) = least_squares(&pts) else {
        return Ok(f64::INFINITY);
    };
    let decay = -slope * p;
    if decay <= 1.0 {
        return Ok(f64::INFINITY);
    }
    let a = intercept.exp();
    Ok(a.powf(p) * x_end.powf(1.0 - decay) / (decay - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailIntegral {
    pub p: f64,
    /// `∫ |f'|^p` from the first checkpoint to the last radius.
    pub integrated: f64,
    /// Power-law extrapolation beyond the last radius.
    pub tail: f64,
    pub total: f64,
    pub convergent: bool,
}

/// `∫ |f'(t)|^p dt` over the integrated range plus an extrapolated tail.
///
/// The lower limit is the first checkpoint `r0 (1 + 1e-3)` rather than `r0`:
/// near the waist `f' ~ (x - r0)^{-1/2}`, which is not integrable for
/// `p >= 2`. Convergence is only ever claimed for `p > 1`.
pub fn tail_integral(c: &Catenoid, branch: BranchKind, p: f64) -> Result<TailIntegral> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("exponent must be positive, got {p}")));
    }
    let integrated = cumulative_slope_integral(c, branch, p)?.last().unwrap().1;
    let tail = power_tail(c, branch, p)?;
    let convergent = p > 1.0 && tail < TAIL_TOL_FACTOR * c.necksize();
    Ok(TailIntegral { p, integrated, tail, total: integrated + tail, convergent })
}

/// Pointwise check of the two-sided estimate
///
/// ```text
/// exp(-I(x)) <= N(x) <= exp(-I(x) / 2),   I(x) = ∫_{x1}^x f'^{2 alpha - 1}
/// ```
///
/// for `N(x) = x f'/sqrt(1+f'^2) · sqrt(1+f'(x1)^2) / (x1 f'(x1))`, with the
/// normalisation at the first checkpoint `x1`. Only the lower estimate
/// follows from the equation: it reads `log N' = -2 (1+f'^2)^{1/2-alpha} f'^{2 alpha-1}`,
/// and the factor `2 (1+f'^2)^{1/2-alpha}` lies in `(0, 2]`, so the
/// provable window is `exp(-2 I) <= N <= 1`; that is reported too.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub alpha: f64,
    pub x1: f64,
    /// `(x, exp(-I), N, exp(-I/2))`
    pub rows: Vec<(f64, f64, f64, f64)>,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub max_lower_violation: f64,
    pub max_upper_violation: f64,
    /// `exp(-2 I) <= N <= 1` at every checkpoint.
    pub provable_ok: bool,
    pub slack: f64,
}

pub fn claim2_sandwich(
    c: &Catenoid,
    branch: BranchKind,
    alpha: f64,
    slack: f64,
) -> Result<SandwichReport> {
    let p = 2.0 * alpha - 1.0;
    let cum = cumulative_slope_integral(c, branch, p)?;
    let norm = |x: f64| -> Result<f64> {
        let s = c.slope_at(branch, x)?.abs();
        Ok(x * s / (1.0 + s * s).sqrt())
    };
    let x1 = cum[0].0;
    let n1 = norm(x1)?;
    let mut rows = Vec::with_capacity(cum.len());
    let (mut lo_v, mut up_v) = (0.0f64, 0.0f64);
    let mut provable_ok = true;
    for &(x, i) in &cum {
        let n = norm(x)? / n1;
        let (lower, upper) = ((-i).exp(), (-0.5 * i).exp());
        lo_v = lo_v.max(lower - n);
        up_v = up_v.max(n - upper);
        if (-2.0 * i).exp() - n > slack || n - 1.0 > slack {
            provable_ok = false;
        }
        rows.push((x, lower, n, upper));
    }
    Ok(SandwichReport {
        alpha,
        x1,
        rows,
        lower_ok: lo_v <= slack,
        upper_ok: up_v <= slack,
        max_lower_violation: lo_v,
        max_upper_violation: up_v,
        provable_ok,
        slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prescribed::PrescribedFunction;
    use crate::profile::{integrate_catenoid, IntegratorConfig};

    fn cat(h: PrescribedFunction, r0: f64, xmax: f64) -> Catenoid {
        integrate_catenoid(&h, r0, &IntegratorConfig::default().with_x_max(xmax)).unwrap()
    }

    #[test]
    fn minimal_growth_constant_is_one() {
        let c = cat(PrescribedFunction::zero(), 1.0, 1e6);
        for b in [BranchKind::Upper, BranchKind::Lower] {
            let k = classify_end(&c, b).unwrap();
            assert_eq!(k.verdict, Verdict::Unbounded);
            assert!((k.c0.unwrap() - 1.0).abs() < 1e-6);
            assert!(k.monotone, "{b:?} max increase {}", k.max_increase);
        }
        let fit = estimate_c0(&c, BranchKind::Upper).unwrap();
        assert!(fit.fit_residual < 1e-8, "{}", fit.fit_residual);
        assert!((fit.log_fit.intercept - 2f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn too_short_branch_is_an_error() {
        let c = cat(PrescribedFunction::zero(), 1.0, 100.0);
        assert!(matches!(classify_end(&c, BranchKind::Upper), Err(Error::BranchTooShort { .. })));
    }

    #[test]
    fn minimal_claim1_equality() {
        let c = cat(PrescribedFunction::zero(), 1.0, 1e3);
        let m = verify_claim1_bound(&c).unwrap();
        assert!(m.max_relative < 1e-8, "{}", m.max_relative);
    }

    #[test]
    fn tail_integrals_of_minimal_catenoid() {
        let c = cat(PrescribedFunction::zero(), 1.0, 1e6);
        // ∫_{1.001}^∞ (t^2 - 1)^{-3/2} dt = 1 - x / sqrt(x^2 - 1) |_{1.001}^∞ ... closed form
        let t = tail_integral(&c, BranchKind::Upper, 3.0).unwrap();
        let x1: f64 = 1.001;
        let exact = x1 / ((x1 - 1.0) * (x1 + 1.0)).sqrt() - 1.0;
        assert!(t.convergent);
        assert!((t.total - exact).abs() / exact < 1e-8, "{} vs {exact}", t.total);
        let t1 = tail_integral(&c, BranchKind::Upper, 1.0).unwrap();
        assert!(!t1.convergent);
        assert!(tail_integral(&c, BranchKind::Upper, 0.0).is_err());
    }
}
