//! Prescriptions `H: [-1, 1] -> R` of the mean curvature in terms of the
//! angle function, plus the endpoint analysis used throughout the crate:
//! class membership, vanishing order and limit-ratio equivalence.

mod expr;
mod table;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

pub use expr::Expr;
pub use table::MonotoneCubic;

/// Tolerance for "vanishes at the endpoint".
pub const TOL_END: f64 = 1e-9;
/// Accelerated limits smaller than this are treated as zero.
pub const TOL_ZERO: f64 = 1e-6;
/// Relative agreement required between the last accelerated ratio values.
pub const LIMIT_REL_TOL: f64 = 1e-5;
/// The raw ratio at the innermost sample must already be this close to the
/// accelerated limit; rejects divergent sequences that Aitken maps to zero.
pub const LIMIT_RAW_REL_TOL: f64 = 1e-3;

/// Ladder exponents `k` of the samples `y = ±(1 - 10^-k)` for limit ratios.
pub const LIMIT_LADDER: std::ops::RangeInclusive<i32> = 2..=10;
/// Ladder exponents for vanishing-order fits.
pub const ORDER_LADDER: std::ops::RangeInclusive<i32> = 2..=8;

/// One of the two poles `y = ±1` of the angle-function interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Endpoint {
    #[serde(rename = "+1")]
    Plus,
    #[serde(rename = "-1")]
    Minus,
}

impl Endpoint {
    pub fn sign(self) -> f64 {
        match self {
            Endpoint::Plus => 1.0,
            Endpoint::Minus => -1.0,
        }
    }

    /// Sample `y = ±(1 - 10^-k)`.
    pub fn ladder_point(self, k: i32) -> f64 {
        self.sign() * (1.0 - 10f64.powi(-k))
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Plus => write!(f, "+1"),
            Endpoint::Minus => write!(f, "-1"),
        }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    PowerLaw { alpha: f64 },
    Polynomial { coeffs: Vec<f64> },
    Scaled { base: Arc<PrescribedFunction>, factor: f64 },
    Expression { source: String, expr: Expr },
    Table(MonotoneCubic),
}

/// A prescription `H(y)` on `[-1, 1]`, with derivative access.
///
/// Values are immutable after construction and cheap to clone.
#[derive(Debug, Clone)]
pub struct PrescribedFunction {
    kind: Kind,
}

// 1 - y^2 without cancellation near |y| = 1.
#[inline]
pub(crate) fn one_minus_sq(y: f64) -> f64 {
    (1.0 - y) * (1.0 + y)
}

impl PrescribedFunction {
    /// `H_alpha(y) = -(1 - y^2)^alpha`.
    pub fn power_law(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "power-law exponent must be positive, got {alpha}"
            )));
        }
        Ok(PrescribedFunction { kind: Kind::PowerLaw { alpha } })
    }

    /// `sum_k coeffs[k] * y^k`.
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "polynomial needs at least one finite coefficient".into(),
            ));
        }
        Ok(PrescribedFunction { kind: Kind::Polynomial { coeffs } })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::polynomial(vec![c])
    }

    /// The minimal-surface prescription `H = 0`.
    pub fn zero() -> Self {
        PrescribedFunction { kind: Kind::Polynomial { coeffs: vec![0.0] } }
    }

    /// `factor * base(y)`.
    pub fn scaled(base: PrescribedFunction, factor: f64) -> Result<Self> {
        if factor == 0.0 || !factor.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "scale factor must be finite and nonzero, got {factor}"
            )));
        }
        Ok(PrescribedFunction { kind: Kind::Scaled { base: Arc::new(base), factor } })
    }

    /// Parses an expression in `y` and checks that it is finite on `[-1, 1]`.
    pub fn expression(source: &str) -> Result<Self> {
        let expr = Expr::parse(source)?;
        for i in 0..=400 {
            let y = -1.0 + i as f64 / 200.0;
            if !expr.eval(y).is_finite() {
                return Err(Error::NonFinite { y });
            }
        }
        Ok(PrescribedFunction {
            kind: Kind::Expression { source: source.trim().to_string(), expr },
        })
    }

    pub fn table(table: MonotoneCubic) -> Self {
        PrescribedFunction { kind: Kind::Table(table) }
    }

    /// `H(y)`; errors when `|y| > 1`.
    pub fn eval(&self, y: f64) -> Result<f64> {
        if !(y.abs() <= 1.0) {
            return Err(Error::Domain(y));
        }
        Ok(self.value(y))
    }

    /// `H'(y)`, one-sided at the endpoints.
    pub fn derivative(&self, y: f64) -> Result<f64> {
        if !(y.abs() <= 1.0) {
            return Err(Error::Domain(y));
        }
        Ok(self.slope(y))
    }

    /// Unchecked evaluation for `y` already known to lie in `[-1, 1]`.
    pub(crate) fn value(&self, y: f64) -> f64 {
        match &self.kind {
            Kind::PowerLaw { alpha } => -one_minus_sq(y).max(0.0).powf(*alpha),
            Kind::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * y + c),
            Kind::Scaled { base, factor } => factor * base.value(y),
            Kind::Expression { expr, .. } => expr.eval(y),
            Kind::Table(t) => t.eval(y.clamp(-1.0, 1.0)).unwrap_or(f64::NAN),
        }
    }

    fn slope(&self, y: f64) -> f64 {
        match &self.kind {
            Kind::PowerLaw { alpha } => {
                let w = one_minus_sq(y).max(0.0);
                if y == 0.0 {
                    0.0
                } else {
                    2.0 * alpha * y * w.powf(alpha - 1.0)
                }
            }
            Kind::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * y + k as f64 * c),
            Kind::Scaled { base, factor } => factor * base.slope(y),
            Kind::Expression { expr, .. } => expr.derivative(y),
            Kind::Table(t) => t.derivative(y.clamp(-1.0, 1.0)).unwrap_or(f64::NAN),
        }
    }

    /// The power-law exponent when this is exactly `H_alpha`.
    pub fn power_law_exponent(&self) -> Option<f64> {
        match self.kind {
            Kind::PowerLaw { alpha } => Some(alpha),
            _ => None,
        }
    }

    /// A short textual descriptor, in the same syntax the CLI accepts where
    /// one exists.
    pub fn describe(&self) -> String {
        match &self.kind {
            Kind::PowerLaw { alpha } => format!("powerlaw:alpha={alpha}"),
            Kind::Polynomial { coeffs } if coeffs.len() == 1 => format!("expr:{}", coeffs[0]),
            Kind::Polynomial { coeffs } => {
                let terms: Vec<String> =
                    coeffs.iter().enumerate().map(|(k, c)| format!("{c}*y^{k}")).collect();
                format!("expr:{}", terms.join("+"))
            }
            Kind::Scaled { base, factor } => format!("scale:{factor}:{}", base.describe()),
            Kind::Expression { source, .. } => format!("expr:{source}"),
            Kind::Table(t) => format!("table:<{} samples>", t.nodes().len()),
        }
    }
}

impl fmt::Display for PrescribedFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

impl Serialize for PrescribedFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.describe())
    }
}

/// Membership verdict for the class of prescriptions negative on `(-1, 1)`
/// and vanishing at both endpoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMembership {
    pub is_member: bool,
    pub interior_max: f64,
    pub endpoint_values: (f64, f64),
    pub grid_size: usize,
}

/// Checks class membership on an interior Chebyshev grid of `grid_size`
/// nodes plus the two endpoints.
pub fn check_frak_c1(h: &PrescribedFunction, grid_size: usize) -> Result<ClassMembership> {
    if grid_size < 16 {
        return Err(Error::InvalidParameter(format!(
            "grid_size must be at least 16, got {grid_size}"
        )));
    }
    let n = grid_size as f64;
    let interior_max = (0..grid_size)
        .map(|j| {
            let y = ((2 * j + 1) as f64 * std::f64::consts::PI / (2.0 * n)).cos();
            h.value(y)
        })
        .fold(f64::NEG_INFINITY, |m, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v) });
    let endpoint_values = (h.value(-1.0), h.value(1.0));
    let is_member = interior_max < 0.0
        && endpoint_values.0.abs() <= TOL_END
        && endpoint_values.1.abs() <= TOL_END;
    Ok(ClassMembership { is_member, interior_max, endpoint_values, grid_size })
}

/// Estimated exponent of `-H(y) ~ C (1 - y^2)^alpha` at one endpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerLawOrder {
    pub endpoint: Endpoint,
    pub alpha_hat: f64,
    pub fit_residual: f64,
    pub window: Vec<f64>,
    pub converged: bool,
}

/// Least-squares slope of `log(-H)` against `log(1 - y^2)` on the ladder
/// `y = ±(1 - 10^-k)`, `k = 2..=8`.
pub fn vanishing_order(h: &PrescribedFunction, endpoint: Endpoint) -> Result<PowerLawOrder> {
    let samples: Vec<(f64, f64)> = ORDER_LADDER
        .map(|k| {
            let y = endpoint.ladder_point(k);
            (y, h.value(y))
        })
        .collect();
    fit_vanishing_order(endpoint, &samples)
}

/// Vanishing-order fit from precomputed `(y, H(y))` samples.
pub fn fit_vanishing_order(endpoint: Endpoint, samples: &[(f64, f64)]) -> Result<PowerLawOrder> {
    let mut pts = Vec::with_capacity(samples.len());
    for &(y, v) in samples {
        if !(v < 0.0) {
            return Err(Error::Precondition(format!(
                "prescription must be negative near the endpoint, H({y}) = {v}"
            )));
        }
        pts.push((one_minus_sq(y).ln(), (-v).ln()));
    }
    let window: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let degenerate = PowerLawOrder {
        endpoint,
        alpha_hat: f64::NAN,
        fit_residual: f64::NAN,
        window: window.clone(),
        converged: false,
    };
    if pts.len() < 2 {
        return Ok(degenerate);
    }
    let Some((slope, intercept)) = least_squares(&pts) else {
        return Ok(degenerate);
    };
    let fit_residual = pts
        .iter()
        .map(|(x, y)| (y - (intercept + slope * x)).abs())
        .fold(0.0, f64::max);
    Ok(PowerLawOrder {
        endpoint,
        alpha_hat: slope,
        fit_residual,
        window,
        converged: slope.is_finite() && slope > 0.0,
    })
}

/// Ordinary least squares line `y = a + b x`; returns `(b, a)`.
pub(crate) fn least_squares(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) || !sxy.is_finite() {
        return None;
    }
    let b = sxy / sxx;
    Some((b, my - b * mx))
}

/// Numeric estimate of `lim H(y) / F(y)` at one endpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub endpoint: Endpoint,
    pub ratio_limit: f64,
    pub converged: bool,
    /// `(y, H(y) / F(y))` on the ladder, approaching the endpoint.
    pub samples: Vec<(f64, f64)>,
    /// Aitken-accelerated values of the ratio sequence.
    pub accelerated: Vec<f64>,
    /// Ladder points dropped because `F` vanished or the ratio was not finite.
    pub skipped: Vec<f64>,
    /// Constants with `M H(y) <= F(y) <= M' H(y)` on the half-interval towards
    /// the endpoint: `M = max F/H`, `M' = min F/H`.
    pub bounds: RatioBounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioBounds {
    pub m: f64,
    pub m_prime: f64,
}

fn aitken(x0: f64, x1: f64, x2: f64) -> f64 {
    let denom = x2 - 2.0 * x1 + x0;
    let scale = x0.abs().max(x1.abs()).max(x2.abs());
    if denom.abs() <= 1e-14 * scale || !denom.is_finite() {
        x2
    } else {
        x2 - (x2 - x1).powi(2) / denom
    }
}

/// Estimates `lim_{y -> ±1} H(y) / F(y)` from the ladder `y = ±(1 - 10^-k)`,
/// `k = 2..=10`, with Aitken acceleration.
pub fn limit_ratio(
    h: &PrescribedFunction,
    f: &PrescribedFunction,
    endpoint: Endpoint,
) -> Result<EquivalenceReport> {
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for k in LIMIT_LADDER {
        let y = endpoint.ladder_point(k);
        let fv = f.value(y);
        let r = h.value(y) / fv;
        if fv == 0.0 || !r.is_finite() {
            skipped.push(y);
        } else {
            samples.push((y, r));
        }
    }
    if samples.is_empty() {
        return Err(Error::NoSamples(format!(
            "F vanishes or the ratio is not finite at every sample towards {endpoint}"
        )));
    }
    let raw: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let accelerated: Vec<f64> = if raw.len() >= 3 {
        raw.windows(3).map(|w| aitken(w[0], w[1], w[2])).collect()
    } else {
        raw.clone()
    };
    let limit = *accelerated.last().unwrap();
    let tail = &accelerated[accelerated.len().saturating_sub(3)..];
    let agree = tail.iter().all(|a| (a - limit).abs() <= LIMIT_REL_TOL * limit.abs());
    let raw_close = (raw.last().unwrap() - limit).abs() <= LIMIT_RAW_REL_TOL * limit.abs();
    let converged = accelerated.len() >= 3
        && limit.is_finite()
        && limit.abs() > TOL_ZERO
        && agree
        && raw_close;

    // F/H over the half-interval between 0 and the endpoint, closed off by
    // the ladder samples.
    let mut m = f64::NEG_INFINITY;
    let mut m_prime = f64::INFINITY;
    let half = (0..64)
        .map(|i| endpoint.sign() * 0.99 * i as f64 / 63.0)
        .chain(samples.iter().map(|s| s.0));
    for y in half {
        let q = f.value(y) / h.value(y);
        if q.is_finite() {
            m = m.max(q);
            m_prime = m_prime.min(q);
        }
    }

    Ok(EquivalenceReport {
        endpoint,
        ratio_limit: limit,
        converged,
        samples,
        accelerated,
        skipped,
        bounds: RatioBounds { m, m_prime },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h2() -> PrescribedFunction {
        PrescribedFunction::power_law(2.0).unwrap()
    }

    fn perturbed() -> PrescribedFunction {
        PrescribedFunction::expression("-(1 - y^2)^2 * (2 - y^2)").unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(h2().eval(0.0).unwrap(), -1.0);
        assert_eq!(h2().eval(1.0).unwrap(), 0.0);
        assert_eq!(h2().eval(-1.0).unwrap(), 0.0);
        let s = PrescribedFunction::scaled(h2(), 3.0).unwrap();
        assert_eq!(s.eval(0.0).unwrap(), -3.0);
        assert!(matches!(h2().eval(1.0 + 1e-15), Err(Error::Domain(_))));
        assert!(matches!(h2().derivative(-1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn power_law_examples() {
        assert_eq!(h2().eval(0.5).unwrap(), -0.5625);
        assert_eq!(PrescribedFunction::power_law(1.0).unwrap().eval(0.0).unwrap(), -1.0);
        assert_eq!(h2().derivative(0.0).unwrap(), 0.0);
        assert!(PrescribedFunction::power_law(0.0).is_err());
        assert!(PrescribedFunction::power_law(-1.0).is_err());
        assert!(PrescribedFunction::power_law(f64::NAN).is_err());
    }

    #[test]
    fn power_law_derivative_matches_finite_difference() {
        for &alpha in &[0.5, 1.0, 1.5, 2.0, 3.0] {
            let h = PrescribedFunction::power_law(alpha).unwrap();
            for &y in &[-0.9, -0.3, 0.2, 0.7] {
                let e = 1e-6;
                let fd = (h.value(y + e) - h.value(y - e)) / (2.0 * e);
                assert!((h.derivative(y).unwrap() - fd).abs() < 1e-7, "alpha {alpha} y {y}");
            }
        }
    }

    #[test]
    fn polynomial_and_constant() {
        let p = PrescribedFunction::polynomial(vec![1.0, 0.0, -1.0]).unwrap();
        assert_eq!(p.eval(0.5).unwrap(), 0.75);
        assert_eq!(p.derivative(0.5).unwrap(), -1.0);
        assert_eq!(PrescribedFunction::zero().eval(0.3).unwrap(), 0.0);
        assert!(PrescribedFunction::scaled(h2(), 0.0).is_err());
    }

    #[test]
    fn membership_examples() {
        assert!(check_frak_c1(&h2(), 64).unwrap().is_member);
        let c = check_frak_c1(&PrescribedFunction::constant(-1.0).unwrap(), 64).unwrap();
        assert!(!c.is_member);
        assert_eq!(c.endpoint_values, (-1.0, -1.0));
        let pos = PrescribedFunction::polynomial(vec![1.0, 0.0, -1.0]).unwrap();
        let p = check_frak_c1(&pos, 64).unwrap();
        assert!(!p.is_member);
        assert!(p.interior_max > 0.0);
        assert!(check_frak_c1(&h2(), 15).is_err());
        for &a in &[0.5, 1.0, 1.5, 2.0, 3.0] {
            let h = PrescribedFunction::power_law(a).unwrap();
            assert!(check_frak_c1(&h, 256).unwrap().is_member, "alpha {a}");
        }
    }

    #[test]
    fn limit_ratio_examples() {
        let s3 = PrescribedFunction::scaled(h2(), 3.0).unwrap();
        let r = limit_ratio(&h2(), &s3, Endpoint::Plus).unwrap();
        assert!(r.converged);
        assert!((r.ratio_limit - 1.0 / 3.0).abs() < 1e-12);

        let r = limit_ratio(&PrescribedFunction::power_law(1.5).unwrap(), &h2(), Endpoint::Plus)
            .unwrap();
        assert!(!r.converged);

        let r = limit_ratio(&h2(), &perturbed(), Endpoint::Plus).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.ratio_limit - 1.0).abs() < 1e-4);
    }

    #[test]
    fn limit_ratio_towards_zero_is_not_equivalence() {
        let r = limit_ratio(&h2(), &PrescribedFunction::power_law(1.5).unwrap(), Endpoint::Minus)
            .unwrap();
        assert!(!r.converged);
    }

    #[test]
    fn limit_ratio_samples_approach_endpoint() {
        let r = limit_ratio(&h2(), &perturbed(), Endpoint::Minus).unwrap();
        assert!(r.samples.windows(2).all(|w| w[1].0 < w[0].0));
        assert!(r.samples.iter().all(|s| s.0 > -1.0));
        // F/H = 2 - y^2 on [-0.99, 0]
        assert!((r.bounds.m - 2.0).abs() < 1e-12);
        assert!(r.bounds.m_prime > 1.0 && r.bounds.m_prime < 1.03);
    }

    #[test]
    fn limit_ratio_vanishing_denominator() {
        let z = PrescribedFunction::zero();
        assert!(matches!(limit_ratio(&h2(), &z, Endpoint::Plus), Err(Error::NoSamples(_))));
    }

    #[test]
    fn vanishing_order_examples() {
        let o = vanishing_order(&h2(), Endpoint::Plus).unwrap();
        assert!(o.converged);
        assert!((o.alpha_hat - 2.0).abs() < 1e-3);
        let o = vanishing_order(&PrescribedFunction::power_law(1.5).unwrap(), Endpoint::Minus)
            .unwrap();
        assert!((o.alpha_hat - 1.5).abs() < 1e-3);
        assert!(o.fit_residual < 1e-9);
        let o = vanishing_order(&perturbed(), Endpoint::Plus).unwrap();
        assert!((o.alpha_hat - 2.0).abs() < 1e-2);
        assert!(o.fit_residual > 0.0);
    }

    #[test]
    fn vanishing_order_requires_negative_values() {
        let pos = PrescribedFunction::polynomial(vec![1.0, 0.0, -1.0]).unwrap();
        assert!(matches!(vanishing_order(&pos, Endpoint::Plus), Err(Error::Precondition(_))));
    }

    #[test]
    fn describe_round_trips_cli_syntax() {
        assert_eq!(h2().describe(), "powerlaw:alpha=2");
        let s = PrescribedFunction::scaled(h2(), 0.5).unwrap();
        assert_eq!(s.describe(), "scale:0.5:powerlaw:alpha=2");
    }
}
