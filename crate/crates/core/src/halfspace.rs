//! Grid-verified certificates for the half-space theorem.
//!
//! A prescription on the sphere that dominates `F(<x, e3>)` on the closed
//! northern hemisphere, for some `F = -c (1 - y^2)^alpha` with `alpha > 1`,
//! rules out properly immersed nonplanar surfaces in lower half-spaces; the
//! same at the south pole rules out upper half-spaces. Everything here is
//! checked on finite grids and labelled accordingly.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::prescribed::{
    fit_vanishing_order, limit_ratio, one_minus_sq, Endpoint, PrescribedFunction, ORDER_LADDER,
};

pub const DEFAULT_GRID_SIZE: usize = 4096;
/// Allowed negative margin when re-verifying at double resolution.
pub const TOL_MARGIN: f64 = 1e-10;
/// Pole ladder `y = 1 - 10^-k`.
const POLE_LADDER: std::ops::RangeInclusive<i32> = 1..=10;
const LADDER_AZIMUTHS: usize = 16;
const EQUATOR_AZIMUTHS: usize = 64;
/// Azimuths used to take the minimum over a parallel for the axial profile.
const PROFILE_AZIMUTHS: usize = 128;
/// Candidate exponents may exceed the fitted order by this much.
const ALPHA_SLACK: f64 = 1e-3;
/// Relative increase of the amplitude over the grid supremum, so that
/// rounding in `c w^alpha` cannot produce a negative margin.
const AMPLITUDE_BUMP: f64 = 1e-14;
/// Largest relative increase of the pole ratio over the last ladder step.
const RATIO_GROWTH_TOL: f64 = 1e-6;
/// Grid nodes with the largest ratios that seed the local refinement.
const REFINE_STARTS: usize = 8;
/// The refinement stays this far from the pole, where the ratio is 0/0.
const REFINE_Y_MAX: f64 = 1.0 - 1e-12;

type GeneralFn = Arc<dyn Fn([f64; 3]) -> f64 + Send + Sync>;

/// A prescription on the unit sphere.
#[derive(Clone)]
pub enum SphereFunction {
    /// `H(x) = h(<x, e3>)`.
    Axisymmetric(PrescribedFunction),
    General { f: GeneralFn, label: String },
}

impl fmt::Debug for SphereFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl SphereFunction {
    pub fn axisymmetric(h: PrescribedFunction) -> Self {
        SphereFunction::Axisymmetric(h)
    }

    pub fn general(
        label: impl Into<String>,
        f: impl Fn([f64; 3]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        SphereFunction::General { f: Arc::new(f), label: label.into() }
    }

    pub fn eval(&self, p: [f64; 3]) -> f64 {
        match self {
            SphereFunction::Axisymmetric(h) => h.value(p[2].clamp(-1.0, 1.0)),
            SphereFunction::General { f, .. } => f(p),
        }
    }

    pub fn label(&self) -> String {
        match self {
            SphereFunction::Axisymmetric(h) => format!("axisymmetric({})", h.describe()),
            SphereFunction::General { label, .. } => label.clone(),
        }
    }

    /// `min` of the function over the parallel `<x, e3> = y`.
    fn axial_min(&self, y: f64) -> f64 {
        match self {
            SphereFunction::Axisymmetric(h) => h.value(y),
            SphereFunction::General { f, .. } => {
                let rho = one_minus_sq(y).max(0.0).sqrt();
                (0..PROFILE_AZIMUTHS)
                    .map(|j| {
                        let phi = 2.0 * PI * j as f64 / PROFILE_AZIMUTHS as f64;
                        f([rho * phi.cos(), rho * phi.sin(), y])
                    })
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

/// Grid on one closed hemisphere: a Fibonacci point set, the pole, a ladder
/// of parallels approaching the pole and the equator.
#[derive(Debug, Clone, PartialEq)]
pub struct HemisphereGrid {
    pub endpoint: Endpoint,
    pub size: usize,
    pub seed: u64,
    pub points: Vec<[f64; 3]>,
}

fn seed_phase(seed: u64) -> f64 {
    // golden-ratio sequence; deterministic, no RNG state
    let g = 0.618_033_988_749_894_9;
    2.0 * PI * (seed as f64 * g).fract()
}

pub fn hemisphere_grid(endpoint: Endpoint, size: usize, seed: u64) -> HemisphereGrid {
    let s = endpoint.sign();
    let golden_angle = PI * (3.0 - 5f64.sqrt());
    let phase = seed_phase(seed);
    let ring = |y: f64, m: usize, points: &mut Vec<[f64; 3]>| {
        let rho = one_minus_sq(y).max(0.0).sqrt();
        for j in 0..m {
            let phi = phase + 2.0 * PI * j as f64 / m as f64;
            points.push([rho * phi.cos(), rho * phi.sin(), y]);
        }
    };
    // ring densities follow the node count so that doubling the grid
    // refines every part of it
    let ladder_m = LADDER_AZIMUTHS.max(size / 256);
    let equator_m = EQUATOR_AZIMUTHS.max(size / 64);
    let mut points = Vec::with_capacity(size + 200);
    for i in 0..size {
        let z = 1.0 - (i as f64 + 0.5) / size as f64;
        let rho = ((1.0 - z) * (1.0 + z)).sqrt();
        let phi = phase + i as f64 * golden_angle;
        points.push([rho * phi.cos(), rho * phi.sin(), s * z]);
    }
    points.push([0.0, 0.0, s]);
    for k in POLE_LADDER {
        ring(endpoint.ladder_point(k), ladder_m, &mut points);
    }
    ring(0.0, equator_m, &mut points);
    HemisphereGrid { endpoint, size, seed, points }
}

/// `F(y) = -c (1 - y^2)^alpha` attached to one pole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Minorant {
    pub c: f64,
    pub alpha: f64,
    pub endpoint: Endpoint,
    /// `min (H(x) - F(<x, e3>))` over the hemisphere grid.
    pub margin: f64,
}

impl Minorant {
    pub fn value(&self, y: f64) -> f64 {
        -self.c * one_minus_sq(y).max(0.0).powf(self.alpha)
    }

    pub fn as_prescription(&self) -> Result<PrescribedFunction> {
        PrescribedFunction::scaled(PrescribedFunction::power_law(self.alpha)?, self.c)
    }
}

fn evaluate(hs: &SphereFunction, grid: &HemisphereGrid) -> Result<Vec<f64>> {
    let values: Vec<f64> = grid.points.par_iter().map(|&p| hs.eval(p)).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        let p = grid.points[i];
        return Err(Error::Integration(format!(
            "{} is not finite at ({}, {}, {})",
            hs.label(),
            p[0],
            p[1],
            p[2]
        )));
    }
    Ok(values)
}

/// `min (H - F)` over the grid, with the point where it is attained.
fn margin_on(
    grid: &HemisphereGrid,
    values: &[f64],
    c: f64,
    alpha: f64,
) -> (f64, [f64; 3]) {
    let m = Minorant { c, alpha, endpoint: grid.endpoint, margin: 0.0 };
    grid.points
        .iter()
        .zip(values)
        .map(|(p, v)| (v - m.value(p[2]), *p))
        .fold((f64::INFINITY, [0.0; 3]), |a, b| if b.0 < a.0 { b } else { a })
}

/// Fits `F = -c (1 - y^2)^alpha` under `H` on the hemisphere of `endpoint`.
///
/// `alpha` is the fitted vanishing order of the axial profile (minimum of
/// `H` over each parallel) rounded, or else truncated, to the coarsest of
/// 0..=3 decimals that stays in `(1, alpha_H + 1e-3]` and keeps
/// `(-H) / (1 - y^2)^alpha` from growing towards the pole; `c` is the
/// supremum of that ratio over the grid, refined locally around its largest
/// nodes.
pub fn fit_minorant(hs: &SphereFunction, grid: &HemisphereGrid) -> Result<Minorant> {
    let endpoint = grid.endpoint;
    let values = evaluate(hs, grid)?;
    let s = endpoint.sign();
    for (p, v) in grid.points.iter().zip(&values) {
        let y = p[2] * s;
        if y > 0.0 && y < 1.0 && *v >= 0.0 {
            return Err(Error::Precondition(format!(
                "{} is not negative on the open hemisphere: H({}, {}, {}) = {v}",
                hs.label(),
                p[0],
                p[1],
                p[2]
            )));
        }
    }
    let samples: Vec<(f64, f64)> = ORDER_LADDER
        .map(|k| {
            let y = endpoint.ladder_point(k);
            (y, hs.axial_min(y))
        })
        .collect();
    let order = fit_vanishing_order(endpoint, &samples)?;
    let alpha_h = order.alpha_hat;
    if !(alpha_h > 1.0) {
        return Err(Error::Precondition(format!(
            "vanishing order {alpha_h} at {endpoint} is not above 1"
        )));
    }
    // An exponent above the true order makes the ratio grow by a fixed
    // factor per ladder step; a bounded factor such as (1 + b y) only moves
    // it by amounts that shrink with the step, so the last step decides.
    let ratio_grows = |alpha: f64| {
        let r: Vec<f64> = samples
            .iter()
            .map(|&(y, v)| -v / one_minus_sq(y).powf(alpha))
            .collect();
        let n = r.len();
        r[n - 1] > r[n - 2] * (1.0 + RATIO_GROWTH_TOL)
    };
    let alpha = (0..=3)
        .flat_map(|d| {
            let f = 10f64.powi(d);
            [(alpha_h * f).round() / f, (alpha_h * f).floor() / f]
        })
        .find(|&a| a > 1.0 && a <= alpha_h + ALPHA_SLACK && !ratio_grows(a))
        .ok_or_else(|| {
            Error::Precondition(format!(
                "no exponent in (1, {alpha_h}] keeps the pole ratio bounded"
            ))
        })?;
    let ratio = |p: [f64; 3], v: f64| -v / one_minus_sq(p[2]).powf(alpha);
    let mut ranked: Vec<(f64, [f64; 3])> = grid
        .points
        .iter()
        .zip(&values)
        .filter(|(p, _)| p[2] * s < 1.0)
        .map(|(p, v)| (ratio(*p, *v), *p))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    let step = 2.0 / (grid.size as f64).sqrt();
    let sup = ranked
        .iter()
        .take(REFINE_STARTS)
        .map(|&(r, p)| r.max(refine_ratio(hs, endpoint, alpha, p, step)))
        .fold(0.0, f64::max);
    let c = sup * (1.0 + AMPLITUDE_BUMP);
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Precondition(format!("no finite amplitude for alpha = {alpha}")));
    }
    let (margin, _) = margin_on(grid, &values, c, alpha);
    Ok(Minorant { c, alpha, endpoint, margin })
}

/// Local maximum of `-H(p) / (1 - y^2)^alpha` near `start`, by compass
/// search in `(y, phi)` with halving steps. The grid supremum alone can sit
/// below the true one by the grid spacing squared.
fn refine_ratio(hs: &SphereFunction, endpoint: Endpoint, alpha: f64, start: [f64; 3], step: f64) -> f64 {
    let s = endpoint.sign();
    let point = |y: f64, phi: f64| {
        let rho = one_minus_sq(y).max(0.0).sqrt();
        [rho * phi.cos(), rho * phi.sin(), s * y]
    };
    let value = |y: f64, phi: f64| -> f64 {
        if !(0.0..=REFINE_Y_MAX).contains(&y) {
            return f64::NEG_INFINITY;
        }
        let v = -hs.eval(point(y, phi)) / one_minus_sq(y).powf(alpha);
        if v.is_finite() { v } else { f64::NEG_INFINITY }
    };
    let (mut y, mut phi) = ((s * start[2]).clamp(0.0, REFINE_Y_MAX), start[1].atan2(start[0]));
    let mut best = value(y, phi);
    let (mut dy, mut dphi) = (step, step * 2.0 * PI);
    while dy > 1e-15 {
        let moved = [(dy, 0.0), (-dy, 0.0), (0.0, dphi), (0.0, -dphi)]
            .iter()
            .map(|&(a, b)| (value(y + a, phi + b), y + a, phi + b))
            .fold(None, |acc: Option<(f64, f64, f64)>, c| match acc {
                Some(a) if a.0 >= c.0 => Some(a),
                _ => Some(c),
            })
            .filter(|c| c.0 > best);
        match moved {
            Some((v, ny, nphi)) => (best, y, phi) = (v, ny, nphi),
            None => (dy, dphi) = (0.5 * dy, 0.5 * dphi),
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitConstant {
    pub value: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridInfo {
    pub nodes_per_hemisphere: usize,
    pub total_points_per_hemisphere: usize,
    pub seed: u64,
    pub pole_ladder: [i32; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reverification {
    pub nodes_per_hemisphere: usize,
    pub margin_north: Option<f64>,
    pub margin_south: Option<f64>,
    pub tol_margin: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfSpaceCertificate {
    pub tool: String,
    pub version: String,
    pub status: String,
    pub prescription: String,
    /// Subset of `["lower", "upper"]`.
    pub excluded: Vec<String>,
    /// Excludes lower half-spaces.
    pub minorant_north: Option<Minorant>,
    /// Excludes upper half-spaces.
    pub minorant_south: Option<Minorant>,
    pub c1: Option<LimitConstant>,
    pub c2: Option<LimitConstant>,
    pub grid: GridInfo,
    pub reverification: Reverification,
    pub verdict_notes: Vec<String>,
    pub assumptions: Vec<String>,
}

impl HalfSpaceCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn excludes(&self, half: &str) -> bool {
        self.excluded.iter().any(|e| e == half)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    pub grid_size: usize,
    pub seed: u64,
    /// `(c, alpha)` to use at the north pole instead of fitting.
    pub north: Option<(f64, f64)>,
    pub south: Option<(f64, f64)>,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { grid_size: DEFAULT_GRID_SIZE, seed: 0, north: None, south: None }
    }
}

struct PoleOutcome {
    minorant: Option<Minorant>,
    limit: Option<LimitConstant>,
    certified: bool,
    notes: Vec<String>,
}

fn check_pole(
    hs: &SphereFunction,
    endpoint: Endpoint,
    supplied: Option<(f64, f64)>,
    opts: &CertifyOptions,
) -> Result<PoleOutcome> {
    let grid = hemisphere_grid(endpoint, opts.grid_size, opts.seed);
    let pole = if endpoint == Endpoint::Plus { "north" } else { "south" };
    let mut notes = Vec::new();
    let minorant = match supplied {
        Some((c, alpha)) => {
            if !(c > 0.0 && alpha > 1.0) {
                notes.push(format!("{pole}: supplied minorant needs c > 0 and alpha > 1"));
                None
            } else {
                let values = evaluate(hs, &grid)?;
                let (margin, _) = margin_on(&grid, &values, c, alpha);
                Some(Minorant { c, alpha, endpoint, margin })
            }
        }
        None => match fit_minorant(hs, &grid) {
            Ok(m) => Some(m),
            Err(Error::Precondition(msg)) => {
                notes.push(format!("{pole}: no minorant: {msg}"));
                None
            }
            Err(e) => return Err(e),
        },
    };
    let Some(m) = minorant else {
        return Ok(PoleOutcome { minorant: None, limit: None, certified: false, notes });
    };
    let dominated = m.margin >= 0.0;
    if !dominated {
        notes.push(format!("{pole}: minorant not dominated on the grid (margin {})", m.margin));
    }
    let rep = limit_ratio(&m.as_prescription()?, &PrescribedFunction::power_law(m.alpha)?, endpoint)?;
    let limit = LimitConstant { value: rep.ratio_limit, converged: rep.converged };
    if !limit.converged {
        notes.push(format!("{pole}: limit constant did not converge"));
    }
    let certified = dominated && limit.converged && m.alpha > 1.0;
    Ok(PoleOutcome { minorant: Some(m), limit: Some(limit), certified, notes })
}

/// Checks both poles and emits a certificate. An empty exclusion set means
/// the theorem could not be applied by this tool, not that a surface in a
/// half-space exists.
pub fn certify(hs: &SphereFunction, opts: &CertifyOptions) -> Result<HalfSpaceCertificate> {
    let (north, south) = rayon::join(
        || check_pole(hs, Endpoint::Plus, opts.north, opts),
        || check_pole(hs, Endpoint::Minus, opts.south, opts),
    );
    let (north, south) = (north?, south?);
    let mut excluded = Vec::new();
    if north.certified {
        excluded.push("lower".to_string());
    }
    if south.certified {
        excluded.push("upper".to_string());
    }
    let mut verdict_notes: Vec<String> =
        north.notes.into_iter().chain(south.notes).collect();
    verdict_notes.push(match excluded.len() {
        2 => "no properly immersed nonplanar surface lies in any horizontal half-space".into(),
        1 => format!("no properly immersed nonplanar surface lies in an {} half-space", excluded[0]),
        _ => "theorem not applicable by this tool".into(),
    });
    let mut cert = HalfSpaceCertificate {
        tool: "hcat".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        status: "grid-verified".into(),
        prescription: hs.label(),
        excluded,
        minorant_north: north.minorant.filter(|_| north.certified),
        minorant_south: south.minorant.filter(|_| south.certified),
        c1: north.limit,
        c2: south.limit,
        grid: GridInfo {
            nodes_per_hemisphere: opts.grid_size,
            total_points_per_hemisphere: hemisphere_grid(Endpoint::Plus, opts.grid_size, opts.seed)
                .points
                .len(),
            seed: opts.seed,
            pole_ladder: [*POLE_LADDER.start(), *POLE_LADDER.end()],
        },
        reverification: Reverification {
            nodes_per_hemisphere: 0,
            margin_north: None,
            margin_south: None,
            tol_margin: TOL_MARGIN,
            ok: true,
        },
        verdict_notes,
        assumptions: vec![
            "the prescription is C^1 on the whole sphere".into(),
            "the surface is properly immersed and nonplanar".into(),
            "hypotheses are checked on the stated grid only".into(),
        ],
    };
    cert.reverification = reverify(&cert, hs, opts.grid_size * 2, opts.seed)?;
    Ok(cert)
}

/// Recomputes the margins of the certified minorants on a grid with
/// `grid_size` nodes per hemisphere.
pub fn reverify(
    cert: &HalfSpaceCertificate,
    hs: &SphereFunction,
    grid_size: usize,
    seed: u64,
) -> Result<Reverification> {
    let margin = |m: &Minorant| -> Result<f64> {
        let grid = hemisphere_grid(m.endpoint, grid_size, seed);
        let values = evaluate(hs, &grid)?;
        Ok(margin_on(&grid, &values, m.c, m.alpha).0)
    };
    let margin_north = cert.minorant_north.as_ref().map(margin).transpose()?;
    let margin_south = cert.minorant_south.as_ref().map(margin).transpose()?;
    let ok = [margin_north, margin_south].iter().flatten().all(|&m| m >= -TOL_MARGIN);
    Ok(Reverification { nodes_per_hemisphere: grid_size, margin_north, margin_south, tol_margin: TOL_MARGIN, ok })
}
