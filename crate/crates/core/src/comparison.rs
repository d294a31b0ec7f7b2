//! Executable checks of the comparison, necksize-invariance, equivalence and
//! double-cover statements on computed profiles.

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{classify_end, Verdict};
use crate::error::{Error, Result};
use crate::ode::bracket_root;
use crate::prescribed::{limit_ratio, Endpoint, EquivalenceReport, PrescribedFunction};
use crate::profile::{integrate_catenoid, BranchKind, Catenoid, IntegratorConfig};

/// Radii per decade of the comparison grid.
pub const GRID_PER_DECADE: usize = 64;
/// First grid radius, in units of `r0`.
pub const GRID_START: f64 = 1.001;
/// Violations within this many integrator tolerances count as ties.
pub const TIE_FACTOR: f64 = 10.0;
/// Final double-cover height must drop below this fraction of the window.
pub const COVER_TOL_FACTOR: f64 = 0.05;

/// Log-spaced radii from `1.001 r0` to `x_max` inclusive.
pub fn comparison_grid(r0: f64, x_max: f64) -> Vec<f64> {
    let start = GRID_START * r0;
    let mut xs: Vec<f64> = (0..)
        .map(|i| start * 10f64.powf(i as f64 / GRID_PER_DECADE as f64))
        .take_while(|&x| x < x_max * (1.0 - 1e-12))
        .collect();
    xs.push(x_max);
    xs
}

/// Smallest `H(y) - F(y)` on a y-grid of the open interval: Chebyshev nodes
/// plus the ladders `±(1 - 10^-k)`, `k = 1..=8`. Returns `(y, margin)`.
pub fn ordering_margin(h: &PrescribedFunction, f: &PrescribedFunction) -> (f64, f64) {
    let n = 1024;
    let cheb = (0..n).map(|j| ((2 * j + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos());
    let ladder = (1..=8).flat_map(|k| {
        let d = 10f64.powi(-k);
        [1.0 - d, -1.0 + d]
    });
    cheb.chain(ladder)
        .map(|y| (y, h.value(y) - f.value(y)))
        .fold((f64::NAN, f64::INFINITY), |best, (y, m)| {
            if m < best.1 || m.is_nan() {
                (y, m)
            } else {
                best
            }
        })
}

fn require_ordered(h: &PrescribedFunction, f: &PrescribedFunction) -> Result<f64> {
    let (y, m) = ordering_margin(h, f);
    if !(m > 0.0) {
        return Err(Error::Precondition(format!(
            "H > F fails at y = {y}: H - F = {m} ({} vs {})",
            h.describe(),
            f.describe()
        )));
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub x: f64,
    pub h_plus: f64,
    pub f_plus: f64,
    pub h_plus_prime: f64,
    pub f_plus_prime: f64,
    pub h_minus: f64,
    pub f_minus: f64,
    pub h_minus_prime: f64,
    pub f_minus_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub x: f64,
    pub which: String,
    pub magnitude: f64,
}

/// The two readings of the lower-end derivative statement, each tested from
/// the first radius where `h_-' < f_-'` is observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerDerivativeReadings {
    pub x0: Option<f64>,
    /// `h_-' < f_-'` for all later radii.
    pub mirrored_holds: bool,
    /// `h_+' < f_+'` for all later radii (the statement as printed).
    pub literal_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub pair: [String; 2],
    pub r0: f64,
    /// Smallest `H - F` on the y-grid.
    pub ordering_margin: f64,
    pub grid: Vec<f64>,
    pub rows: Vec<ComparisonRow>,
    pub height_ok: bool,
    pub derivative_ok: bool,
    /// Radius from which the upper derivative ordering is asserted.
    pub x0_upper: Option<f64>,
    pub lower_readings: LowerDerivativeReadings,
    /// Strict inequalities that failed by less than the tie tolerance.
    pub ties: usize,
    pub violations: usize,
    pub first_violation: Option<Violation>,
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "x,h_plus,f_plus,h_plus_prime,f_plus_prime,h_minus,f_minus,h_minus_prime,f_minus_prime\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.x,
                r.h_plus,
                r.f_plus,
                r.h_plus_prime,
                r.f_plus_prime,
                r.h_minus,
                r.f_minus,
                r.h_minus_prime,
                r.f_minus_prime
            ));
        }
        out
    }
}

fn integrate_pair(
    h: &PrescribedFunction,
    f: &PrescribedFunction,
    r0: f64,
    cfg: &IntegratorConfig,
) -> Result<(Catenoid, Catenoid)> {
    let (a, b) = rayon::join(|| integrate_catenoid(h, r0, cfg), || integrate_catenoid(f, r0, cfg));
    Ok((a?, b?))
}

struct Tally<'a> {
    cfg: &'a IntegratorConfig,
    ties: usize,
    violations: usize,
    first: Option<Violation>,
}

impl Tally<'_> {
    /// Records `big > small` at `x`; returns whether it held strictly or as a tie.
    fn strict(&mut self, x: f64, which: &str, big: f64, small: f64) -> bool {
        let d = big - small;
        if d > 0.0 {
            return true;
        }
        let tol = TIE_FACTOR * self.cfg.tolerance_scale(big.abs().max(small.abs()));
        if d.abs() <= tol {
            self.ties += 1;
            return true;
        }
        self.violations += 1;
        if self.first.is_none() {
            self.first = Some(Violation { x, which: which.to_string(), magnitude: -d });
        }
        false
    }
}

fn comparison(
    h: &PrescribedFunction,
    f: &PrescribedFunction,
    r0: f64,
    cfg: &IntegratorConfig,
    x0: Option<f64>,
) -> Result<ComparisonReport> {
    let margin = require_ordered(h, f)?;
    let (ch, cf) = integrate_pair(h, f, r0, cfg)?;
    let x_hi = [&ch, &cf]
        .iter()
        .flat_map(|c| [c.x_reached(BranchKind::Upper), c.x_reached(BranchKind::Lower)])
        .fold(f64::INFINITY, f64::min);
    if let Some(x0) = x0 {
        if !(x0 > r0 && x0 < x_hi) {
            return Err(Error::InvalidParameter(format!(
                "x0 = {x0} must lie in ({r0}, {x_hi})"
            )));
        }
    }
    let grid: Vec<f64> = match x0 {
        Some(x0) => std::iter::once(x0)
            .chain(comparison_grid(r0, x_hi).into_iter().filter(|&x| x > x0))
            .collect(),
        None => comparison_grid(r0, x_hi),
    };
    let (u, l) = (BranchKind::Upper, BranchKind::Lower);
    let rows = grid
        .iter()
        .map(|&x| {
            Ok(ComparisonRow {
                x,
                h_plus: ch.height_at(u, x)?,
                f_plus: cf.height_at(u, x)?,
                h_plus_prime: ch.slope_at(u, x)?,
                f_plus_prime: cf.slope_at(u, x)?,
                h_minus: ch.height_at(l, x)?,
                f_minus: cf.height_at(l, x)?,
                h_minus_prime: ch.slope_at(l, x)?,
                f_minus_prime: cf.slope_at(l, x)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    if let Some(x0) = x0 {
        let r = &rows[0];
        if !(r.h_plus_prime > r.f_plus_prime) {
            return Err(Error::Precondition(format!(
                "h+'(x0) > f+'(x0) not observed at x0 = {x0}: {} vs {}",
                r.h_plus_prime, r.f_plus_prime
            )));
        }
    }

    let mut tally = Tally { cfg, ties: 0, violations: 0, first: None };
    let mut height_ok = true;
    for r in &rows {
        height_ok &= tally.strict(r.x, "h+ > f+", r.h_plus, r.f_plus);
        height_ok &= tally.strict(r.x, "h- < f-", r.f_minus, r.h_minus);
    }

    let x0_upper = rows.iter().find(|r| r.h_plus_prime > r.f_plus_prime).map(|r| r.x);
    let mut derivative_ok = x0_upper.is_some();
    for r in rows.iter().filter(|r| x0_upper.is_some_and(|x0| r.x > x0)) {
        derivative_ok &= tally.strict(r.x, "h+' > f+'", r.h_plus_prime, r.f_plus_prime);
    }
    let x0_lower = rows.iter().find(|r| r.h_minus_prime < r.f_minus_prime).map(|r| r.x);
    let later = || rows.iter().filter(move |r| x0_lower.is_some_and(|x0| r.x > x0));
    let mut mirrored = x0_lower.is_some();
    for r in later() {
        mirrored &= tally.strict(r.x, "h-' < f-'", r.f_minus_prime, r.h_minus_prime);
    }
    derivative_ok &= mirrored;
    let literal_holds = x0_lower.is_some() && later().all(|r| r.h_plus_prime < r.f_plus_prime);

    Ok(ComparisonReport {
        pair: [h.describe(), f.describe()],
        r0,
        ordering_margin: margin,
        grid,
        rows,
        height_ok,
        derivative_ok,
        x0_upper,
        lower_readings: LowerDerivativeReadings {
            x0: x0_lower,
            mirrored_holds: mirrored,
            literal_holds,
        },
        ties: tally.ties,
        violations: tally.violations,
        first_violation: tally.first,
    })
}

/// Height orderings `h+ > f+`, `h- < f-` on the comparison grid for `H > F`.
/// Derivative orderings are evaluated from the first radius where their
/// hypothesis is observed.
pub fn compare_heights(
    h: &PrescribedFunction,
    f: &PrescribedFunction,
    r0: f64,
    cfg: &IntegratorConfig,
) -> Result<ComparisonReport> {
    comparison(h, f, r0, cfg, None)
}

/// As [`compare_heights`], with the upper derivative hypothesis required at
/// `x0` and the grid starting there.
pub fn compare_derivatives(
    h: &PrescribedFunction,
    f: &PrescribedFunction,
    r0: f64,
    x0: f64,
    cfg: &IntegratorConfig,
) -> Result<ComparisonReport> {
    comparison(h, f, r0, cfg, Some(x0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NecksizeEntry {
    pub r0: f64,
    pub upper: Verdict,
    pub lower: Verdict,
    pub c0_upper: Option<f64>,
    pub c0_lower: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NecksizeReport {
    pub prescription: String,
    pub entries: Vec<NecksizeEntry>,
    pub upper_uniform: bool,
    pub lower_uniform: bool,
    pub pass: bool,
}

fn uniform(vs: impl Iterator<Item = Verdict>) -> bool {
    let decided: Vec<Verdict> = vs.filter(|v| *v != Verdict::Inconclusive).collect();
    decided.windows(2).all(|w| w[0] == w[1])
}

/// Classifies `Sigma_H(r)` for every `r` (in parallel, results in input
/// order). Leave `cfg.x_max` unset to integrate each to `1e6 r`.
pub fn behavior_across_necksizes(
    h: &PrescribedFunction,
    r_list: &[f64],
    cfg: &IntegratorConfig,
) -> Result<NecksizeReport> {
    let entries = r_list
        .par_iter()
        .map(|&r| {
            let c = integrate_catenoid(h, r, cfg)?;
            let up = classify_end(&c, BranchKind::Upper)?;
            let lo = classify_end(&c, BranchKind::Lower)?;
            Ok(NecksizeEntry {
                r0: r,
                upper: up.verdict,
                lower: lo.verdict,
                c0_upper: up.c0,
                c0_lower: lo.c0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let upper_uniform = uniform(entries.iter().map(|e| e.upper));
    let lower_uniform = uniform(entries.iter().map(|e| e.lower));
    Ok(NecksizeReport {
        prescription: h.describe(),
        entries,
        upper_uniform,
        lower_uniform,
        pass: upper_uniform && lower_uniform,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferReport {
    pub pair: [String; 2],
    pub r0: f64,
    pub endpoint: Endpoint,
    pub branch: BranchKind,
    pub ratio: EquivalenceReport,
    pub verdict_h: Verdict,
    pub verdict_f: Verdict,
    /// True when either verdict is inconclusive; such pairs do not count.
    pub excluded: bool,
    pub pass: bool,
}

/// Classifies the matched ends (upper for `+1`, lower for `-1`) of
/// `Sigma_H(r0)` and `Sigma_F(r0)` for prescriptions equivalent at the
/// endpoint.
pub fn equivalence_behavior(
    h: &PrescribedFunction,
    f: &PrescribedFunction,
    r0: f64,
    endpoint: Endpoint,
    cfg: &IntegratorConfig,
) -> Result<TransferReport> {
    let ratio = limit_ratio(h, f, endpoint)?;
    if !ratio.converged {
        return Err(Error::Precondition(format!(
            "{} and {} are not equivalent at {endpoint} (ratio estimate {}, not converged)",
            h.describe(),
            f.describe(),
            ratio.ratio_limit
        )));
    }
    let branch = match endpoint {
        Endpoint::Plus => BranchKind::Upper,
        Endpoint::Minus => BranchKind::Lower,
    };
    let (ch, cf) = integrate_pair(h, f, r0, cfg)?;
    let verdict_h = classify_end(&ch, branch)?.verdict;
    let verdict_f = classify_end(&cf, branch)?.verdict;
    let excluded = verdict_h == Verdict::Inconclusive || verdict_f == Verdict::Inconclusive;
    Ok(TransferReport {
        pair: [h.describe(), f.describe()],
        r0,
        endpoint,
        branch,
        ratio,
        verdict_h,
        verdict_f,
        excluded,
        pass: !excluded && verdict_h == verdict_f,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverEntry {
    pub r: f64,
    /// `sup |height|` over the window, both ends.
    pub sup_height: f64,
    pub x_at_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverReport {
    pub prescription: String,
    pub window: [f64; 2],
    pub entries: Vec<CoverEntry>,
    pub strictly_decreasing: bool,
    pub cover_tol: f64,
    pub pass: bool,
}

/// Heights over a fixed annulus `[lo, hi]` for shrinking necksizes.
pub fn double_cover_convergence(
    h: &PrescribedFunction,
    r_sequence: &[f64],
    window: [f64; 2],
    cfg: &IntegratorConfig,
) -> Result<CoverReport> {
    let [lo, hi] = window;
    let r_max = r_sequence.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo > r_max && hi > lo) {
        return Err(Error::InvalidParameter(format!(
            "window [{lo}, {hi}] must lie outside every waist disk (largest necksize {r_max})"
        )));
    }
    let entries = r_sequence
        .par_iter()
        .map(|&r| {
            let c = integrate_catenoid(h, r, &cfg.with_x_max(hi))?;
            let mut best = CoverEntry { r, sup_height: 0.0, x_at_sup: lo };
            for branch in [BranchKind::Upper, BranchKind::Lower] {
                let top = c.x_reached(branch);
                if top < hi * (1.0 - 1e-12) {
                    return Err(Error::Integration(format!(
                        "{} branch of r = {r} stopped at x = {top} inside the window",
                        branch.as_str()
                    )));
                }
                let xs = std::iter::once(lo)
                    .chain(c.checkpoint_radii(branch).into_iter().filter(|&x| x > lo && x < top))
                    .chain(std::iter::once(top));
                for x in xs {
                    let z = c.height_at(branch, x)?.abs();
                    if z > best.sup_height {
                        best.sup_height = z;
                        best.x_at_sup = x;
                    }
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?;
    let strictly_decreasing = entries.windows(2).all(|w| w[1].sup_height < w[0].sup_height);
    let cover_tol = COVER_TOL_FACTOR * hi;
    let last_ok = entries.last().is_some_and(|e| e.sup_height < cover_tol);
    Ok(CoverReport {
        prescription: h.describe(),
        window,
        entries,
        strictly_decreasing,
        cover_tol,
        pass: strictly_decreasing && last_ok,
    })
}

/// `4 (2 + sqrt 2)`, the uniform bound on `|sigma|^2` beyond `x_n`.
pub const SFF_UNIFORM_BOUND: f64 = 4.0 * (2.0 + std::f64::consts::SQRT_2);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SffScheduleEntry {
    pub n: u32,
    pub x_n: f64,
    pub nu_n: f64,
    /// Necksize with `nu(x_n) = nu_n` on the upper end.
    pub r_n: f64,
    pub nu_at_x_n: f64,
    pub sff_at_x_n: f64,
    /// Largest `|sigma|^2` at the checkpoints beyond `x_n`.
    pub sff_max_beyond: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SffScheduleReport {
    pub prescription: String,
    pub bound: f64,
    pub entries: Vec<SffScheduleEntry>,
    pub pass: bool,
}

/// Necksize `r < x` for which the upper end has angle function `nu` at `x`.
pub fn necksize_for_angle(
    h: &PrescribedFunction,
    x: f64,
    nu: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    if !(nu > 0.0 && nu < 1.0 && x > 0.0) {
        return Err(Error::InvalidParameter(format!("need 0 < nu < 1 and x > 0, got {nu}, {x}")));
    }
    let angle = |r: f64| -> f64 {
        integrate_catenoid(h, r, &cfg.with_x_max(x))
            .and_then(|c| c.state_at(BranchKind::Upper, x))
            .map_or(f64::NAN, |s| s.nu - nu)
    };
    let (mut a, b) = (x * 1e-3 * (1.0 - nu), x * (1.0 - 1e-9));
    while angle(a) < 0.0 {
        a *= 0.1;
        if a < 1e-12 * x {
            return Err(Error::Integration(format!("no necksize reaches nu = {nu} at x = {x}")));
        }
    }
    let r = bracket_root(angle, a, b, 1e-15 * x);
    if !angle(r).is_finite() {
        return Err(Error::Integration(format!("shooting for nu = {nu} at x = {x} failed")));
    }
    Ok(r)
}

/// For `x_n = 1/n`, `nu_n = 1 - 1/n^2`: the catenoid through `(x_n, nu_n)`
/// and the largest `|sigma|^2` on its upper end beyond `x_n` (up to
/// `x_max`, in absolute units).
pub fn sff_schedule(
    h: &PrescribedFunction,
    ns: &[u32],
    x_max: f64,
    cfg: &IntegratorConfig,
) -> Result<SffScheduleReport> {
    let entries = ns
        .par_iter()
        .map(|&n| {
            let x_n = 1.0 / n as f64;
            let nu_n = 1.0 - 1.0 / (n as f64 * n as f64);
            let r_n = necksize_for_angle(h, x_n, nu_n, cfg)?;
            let c = integrate_catenoid(h, r_n, &cfg.with_x_max(x_max))?;
            let at = c.curvature_at(BranchKind::Upper, x_n)?;
            let mut sff_max = at.sff_norm_sq;
            for x in c.checkpoint_radii(BranchKind::Upper).into_iter().filter(|&x| x > x_n) {
                sff_max = sff_max.max(c.curvature_at(BranchKind::Upper, x)?.sff_norm_sq);
            }
            Ok(SffScheduleEntry {
                n,
                x_n,
                nu_n,
                r_n,
                nu_at_x_n: at.nu,
                sff_at_x_n: at.sff_norm_sq,
                sff_max_beyond: sff_max,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pass = entries.iter().all(|e| e.sff_max_beyond < SFF_UNIFORM_BOUND);
    Ok(SffScheduleReport {
        prescription: h.describe(),
        bound: SFF_UNIFORM_BOUND,
        entries,
        pass,
    })
}
