//! Profile curves of rotational H-catenoids.
//!
//! The meridian is integrated in arc length `s` with tangent angle `theta`:
//!
//! ```text
//! x' = cos(theta),  z' = sin(theta),  theta' = 2 H(cos theta) - sin(theta) / x
//! ```
//!
//! starting at the waist `(x, z, theta) = (r0, 0, pi/2)`. The upper branch is
//! integrated forward in `s`, the lower branch backward. The unit normal
//! `(-sin theta, cos theta)` points inwards at the waist, upwards along the
//! upper end and downwards along the lower end, so the angle function is
//! `nu = cos(theta)` on both branches.
//!
//! Beyond `FAR_FIELD_FACTOR * r0`, while the branch is still a graph with
//! moderate slope, the independent variable switches to `t = ln x` with state
//! `(s, z, u)` where `u = x f'(x)`. The far field varies on a logarithmic
//! scale and `u` converges to the growth constant, so relative tolerances
//! stay meaningful there.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::{bracket_root, step_factor, trial_step, DenseSegment, StepControl, Vector};
use crate::prescribed::PrescribedFunction;

/// Radius (in units of `r0`) beyond which the log-radius variable is used.
pub const FAR_FIELD_FACTOR: f64 = 1e3;
/// Enter the log-radius phase only when `|cos theta|` is at least this.
const ENTER_LOG_COS: f64 = 0.7;
/// Leave it again (back to arc length) below this.
const LEAVE_LOG_COS: f64 = 0.5;
// Step caps keep the dense-output derivative accurate enough for the
// residual oracle; the error estimate alone controls only the state. Arc
// steps are capped relative to the smaller of x and the radius of curvature.
const MAX_ARC_STEP: f64 = 0.005;
const MAX_LOG_STEP: f64 = 0.05;
/// Smallest relative checkpoint offset `(x - r0) / r0`.
pub const FIRST_CHECKPOINT_OFFSET: f64 = 1e-3;

/// Integrator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Termination radius; `None` means `1e6 * r0`.
    pub x_max: Option<f64>,
    pub max_steps: usize,
    /// Log-spaced output checkpoints per decade.
    pub dense_spacing: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            x_max: None,
            max_steps: 1_000_000,
            dense_spacing: 32,
        }
    }
}

impl IntegratorConfig {
    pub fn with_x_max(mut self, x_max: f64) -> Self {
        self.x_max = Some(x_max);
        self
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    /// The termination radius for necksize `r0`, validating all settings.
    pub fn resolve_x_max(&self, r0: f64) -> Result<f64> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerances must be positive (rel_tol = {}, abs_tol = {})",
                self.rel_tol, self.abs_tol
            )));
        }
        if self.dense_spacing == 0 || self.max_steps == 0 {
            return Err(Error::InvalidParameter(
                "dense_spacing and max_steps must be positive".into(),
            ));
        }
        let x_max = self.x_max.unwrap_or(1e6 * r0);
        if !(x_max > r0) || !x_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "x_max = {x_max} must exceed the necksize {r0}"
            )));
        }
        Ok(x_max)
    }

    /// Integrator tolerance scale used for "numerically indistinguishable".
    pub fn tolerance_scale(&self, value: f64) -> f64 {
        self.abs_tol + self.rel_tol * value.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchKind {
    Upper,
    Lower,
}

impl BranchKind {
    /// Direction of integration in arc length.
    fn direction(self) -> f64 {
        match self {
            BranchKind::Upper => 1.0,
            BranchKind::Lower => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BranchKind::Upper => "upper",
            BranchKind::Lower => "lower",
        }
    }
}

/// Why a branch stopped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    ReachedXMax,
    /// `x` stopped increasing away from the waist.
    TurningPoint { s: f64, x: f64, z: f64 },
    StepFailure { s: f64, x: f64 },
    MaxSteps { s: f64, x: f64 },
}

/// A point on the meridian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileState {
    pub s: f64,
    pub x: f64,
    pub z: f64,
    pub theta: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// independent `s`, state `[x, z, theta]`
    Arc,
    /// independent `ln x`, state `[s, z, u]`
    LogRadius,
}

#[derive(Debug, Clone, PartialEq)]
struct Piece {
    phase: Phase,
    seg: DenseSegment<3>,
    /// The piece is valid on `[seg.t0, t_end]` (in the direction of `seg.h`).
    t_end: f64,
    x_start: f64,
    x_end: f64,
}

/// Full local data at one radius, including the dense-output derivative.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalData {
    pub state: ProfileState,
    /// `f'(x)`.
    pub slope: f64,
    /// `x f'(x)`.
    pub u: f64,
    /// `d theta / ds` from differentiating the dense output.
    pub theta_s_dense: f64,
    /// `f''(x)` from differentiating the dense output.
    pub f2_dense: f64,
}

/// One end of the catenoid as a chain of dense-output pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    kind: BranchKind,
    r0: f64,
    pieces: Vec<Piece>,
    states: Vec<ProfileState>,
    termination: Termination,
}

impl Branch {
    pub fn kind(&self) -> BranchKind {
        self.kind
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    /// Largest radius covered by the dense output.
    pub fn x_reached(&self) -> f64 {
        self.pieces.last().map_or(self.r0, |p| p.x_end)
    }

    /// Step-end states, waist first.
    pub fn states(&self) -> &[ProfileState] {
        &self.states
    }

    pub fn step_count(&self) -> usize {
        self.pieces.len()
    }

    fn sign(&self) -> f64 {
        self.kind.direction()
    }

    pub(crate) fn local(&self, h: &PrescribedFunction, x: f64) -> Result<LocalData> {
        let hi = self.x_reached();
        if !(x >= self.r0 && x <= hi) {
            return Err(Error::OutOfRange { x, lo: self.r0, hi });
        }
        let sgn = self.sign();
        if x == self.r0 {
            let theta_s = 2.0 * h.value(0.0) - 1.0 / self.r0;
            return Ok(LocalData {
                state: ProfileState { s: 0.0, x, z: 0.0, theta: FRAC_PI_2, nu: 0.0 },
                slope: sgn * f64::INFINITY,
                u: sgn * f64::INFINITY,
                theta_s_dense: theta_s,
                f2_dense: f64::NAN,
            });
        }
        let idx = self.pieces.partition_point(|p| p.x_end < x).min(self.pieces.len() - 1);
        let piece = &self.pieces[idx];
        match piece.phase {
            Phase::Arc => {
                let seg = &piece.seg;
                let t = bracket_root(
                    |t| seg.eval_component(t, 0) - x,
                    seg.t0,
                    piece.t_end,
                    1e-16,
                );
                let y = seg.eval(t);
                let d = seg.derivative(t);
                let theta = y[2];
                let (sin, cos) = theta.sin_cos();
                let slope = sin / cos;
                Ok(LocalData {
                    state: ProfileState { s: t, x, z: y[1], theta, nu: cos },
                    slope,
                    u: x * slope,
                    theta_s_dense: d[2],
                    f2_dense: d[2] / (cos * cos * cos),
                })
            }
            Phase::LogRadius => {
                let seg = &piece.seg;
                let t = x.ln().clamp(seg.t0.min(piece.t_end), seg.t0.max(piece.t_end));
                let y = seg.eval(t);
                let d = seg.derivative(t);
                let u = y[2];
                let slope = u / x;
                let theta = angle_from_slope(slope, sgn);
                let q = 1.0 + slope * slope;
                let nu = sgn / q.sqrt();
                // f'' = d(u/x)/dx = (u_t / x - f') / x
                let f2 = (d[2] / x - slope) / x;
                // theta_s = theta_x cos(theta), theta_x = f'' / (1 + f'^2)
                let theta_s = f2 / q * nu;
                Ok(LocalData {
                    state: ProfileState { s: y[0], x, z: y[1], theta, nu },
                    slope,
                    u,
                    theta_s_dense: theta_s,
                    f2_dense: f2,
                })
            }
        }
    }
}

fn angle_from_slope(slope: f64, sgn: f64) -> f64 {
    if sgn > 0.0 {
        slope.atan()
    } else {
        std::f64::consts::PI + slope.atan()
    }
}

/// Principal curvatures and the squared norm of the second fundamental form
/// at one radius, with respect to the inward/upward/downward normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureSample {
    pub x: f64,
    /// meridian curvature `d theta / ds`, from the profile equation
    pub kappa1: f64,
    /// parallel curvature `sin(theta) / x`
    pub kappa2: f64,
    /// `|sigma|^2` from the angle function and `H(nu)` alone
    pub sff_norm_sq: f64,
    pub nu: f64,
}

/// An integrated H-catenoid `Sigma_H(r0)`.
#[derive(Debug, Clone)]
pub struct Catenoid {
    prescription: PrescribedFunction,
    necksize: f64,
    upper: Branch,
    lower: Branch,
    config: IntegratorConfig,
}

/// Integrates both ends of `Sigma_H(r0)` from the waist.
pub fn integrate_catenoid(
    h: &PrescribedFunction,
    r0: f64,
    cfg: &IntegratorConfig,
) -> Result<Catenoid> {
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::InvalidParameter(format!("necksize must be positive, got {r0}")));
    }
    let x_max = cfg.resolve_x_max(r0)?;
    for i in 0..=200 {
        let y = -1.0 + i as f64 / 100.0;
        if !h.value(y).is_finite() {
            return Err(Error::NonFinite { y });
        }
    }
    let upper = integrate_branch(h, r0, x_max, cfg, BranchKind::Upper)?;
    let lower = integrate_branch(h, r0, x_max, cfg, BranchKind::Lower)?;
    Ok(Catenoid { prescription: h.clone(), necksize: r0, upper, lower, config: *cfg })
}

fn arc_rhs<'a>(h: &'a PrescribedFunction) -> impl Fn(f64, &Vector<3>) -> Vector<3> + 'a {
    move |_s, y| {
        let (sin, cos) = y[2].sin_cos();
        [cos, sin, 2.0 * h.value(cos.clamp(-1.0, 1.0)) - sin / y[0]]
    }
}

fn log_rhs<'a>(h: &'a PrescribedFunction, sgn: f64) -> impl Fn(f64, &Vector<3>) -> Vector<3> + 'a {
    move |t, y| {
        let x = t.exp();
        let u = y[2];
        let slope = u / x;
        let q = 1.0 + slope * slope;
        let sq = q.sqrt();
        let nu = (sgn / sq).clamp(-1.0, 1.0);
        [
            sgn * x * sq,
            u,
            -u * slope * slope + 2.0 * sgn * x * x * q * sq * h.value(nu),
        ]
    }
}

fn integrate_branch(
    h: &PrescribedFunction,
    r0: f64,
    x_max: f64,
    cfg: &IntegratorConfig,
    kind: BranchKind,
) -> Result<Branch> {
    let ctl = StepControl::new(cfg.rel_tol, cfg.abs_tol);
    let dir = kind.direction();
    let sgn = dir;
    let arc = arc_rhs(h);
    let logf = log_rhs(h, sgn);
    let switch_radius = FAR_FIELD_FACTOR * r0;
    let t_log_max = x_max.ln();

    let mut pieces: Vec<Piece> = Vec::new();
    let mut states = vec![ProfileState { s: 0.0, x: r0, z: 0.0, theta: FRAC_PI_2, nu: 0.0 }];
    let mut phase = Phase::Arc;
    // arc: t = s, y = [x, z, theta]; log: t = ln x, y = [s, z, u]
    let mut t = 0.0;
    let mut y: Vector<3> = [r0, 0.0, FRAC_PI_2];
    let mut f = arc(t, &y);
    let mut hstep = dir * 1e-3 * r0;
    let mut steps = 0usize;

    let termination = loop {
        if steps >= cfg.max_steps {
            let (s, x) = current_s_x(phase, t, &y);
            break Termination::MaxSteps { s, x };
        }
        steps += 1;
        let trial = match phase {
            Phase::Arc => trial_step(&arc, &ctl, t, &y, &f, hstep),
            Phase::LogRadius => {
                if t + hstep > t_log_max {
                    hstep = t_log_max - t;
                }
                trial_step(&logf, &ctl, t, &y, &f, hstep)
            }
        };
        let fac = step_factor(&ctl, trial.err);
        let finite = trial.y_new.iter().all(|v| v.is_finite());
        if !(trial.err <= 1.0) || !finite {
            hstep *= fac.min(0.5);
            let scale = match phase {
                Phase::Arc => t.abs().max(r0),
                Phase::LogRadius => t.abs().max(1.0),
            };
            if hstep.abs() < 1e-14 * scale {
                let (s, x) = current_s_x(phase, t, &y);
                break Termination::StepFailure { s, x };
            }
            continue;
        }

        let seg = trial.segment;
        let t_new = t + hstep;
        match phase {
            Phase::Arc => {
                let x_new = trial.y_new[0];
                let radial_rate_end = trial.y_new[2].cos() * dir;
                // first event inside the step: turning point or x_max
                let mut event: Option<(f64, bool)> = None;
                if radial_rate_end <= 0.0 {
                    let tc = bracket_root(
                        |tt| seg.eval_component(tt, 2).cos() * dir,
                        t,
                        t_new,
                        1e-16,
                    );
                    event = Some((tc, true));
                }
                if x_new >= x_max {
                    let tx = bracket_root(|tt| seg.eval_component(tt, 0) - x_max, t, t_new, 1e-16);
                    if event.map_or(true, |(tc, _)| (tx - t).abs() < (tc - t).abs()) {
                        event = Some((tx, false));
                    }
                }
                if let Some((te, turning)) = event {
                    let ye = seg.eval(te);
                    let x_end = if turning { ye[0] } else { x_max };
                    pieces.push(Piece {
                        phase,
                        x_start: y[0],
                        x_end,
                        t_end: te,
                        seg,
                    });
                    states.push(arc_state(te, &ye));
                    break if turning {
                        Termination::TurningPoint { s: te, x: ye[0], z: ye[1] }
                    } else {
                        Termination::ReachedXMax
                    };
                }
                pieces.push(Piece { phase, x_start: y[0], x_end: x_new, t_end: t_new, seg });
                t = t_new;
                y = trial.y_new;
                f = trial.f_new;
                states.push(arc_state(t, &y));
                if y[0] >= switch_radius && (y[2].cos()).abs() >= ENTER_LOG_COS {
                    // t = ln x, state [s, z, u]
                    let x = y[0];
                    let u = x * y[2].tan();
                    let s = t;
                    t = x.ln();
                    y = [s, y[1], u];
                    f = logf(t, &y);
                    phase = Phase::LogRadius;
                    hstep = 1e-3;
                }
            }
            Phase::LogRadius => {
                pieces.push(Piece {
                    phase,
                    x_start: t.exp(),
                    x_end: if t_new >= t_log_max { x_max } else { t_new.exp() },
                    t_end: t_new,
                    seg,
                });
                t = t_new;
                y = trial.y_new;
                f = trial.f_new;
                states.push(log_state(t, &y, sgn));
                if t >= t_log_max {
                    break Termination::ReachedXMax;
                }
                let x = t.exp();
                let slope = y[2] / x;
                if 1.0 / (1.0 + slope * slope).sqrt() < LEAVE_LOG_COS {
                    let st = log_state(t, &y, sgn);
                    t = st.s;
                    y = [x, st.z, st.theta];
                    f = arc(t, &y);
                    phase = Phase::Arc;
                    hstep = dir * 1e-3 * x;
                }
            }
        }
        hstep *= fac;
        match phase {
            Phase::Arc => {
                // f[2] = theta', the meridian curvature
                let cap = MAX_ARC_STEP * y[0].min(1.0 / f[2].abs());
                if hstep.abs() > cap {
                    hstep = dir * cap;
                }
            }
            Phase::LogRadius => hstep = hstep.min(MAX_LOG_STEP),
        }
    };

    if pieces.is_empty() {
        return Err(Error::Integration(format!(
            "{} branch: no step accepted ({termination:?})",
            kind.as_str()
        )));
    }
    Ok(Branch { kind, r0, pieces, states, termination })
}

fn current_s_x(phase: Phase, t: f64, y: &Vector<3>) -> (f64, f64) {
    match phase {
        Phase::Arc => (t, y[0]),
        Phase::LogRadius => (y[0], t.exp()),
    }
}

fn arc_state(s: f64, y: &Vector<3>) -> ProfileState {
    ProfileState { s, x: y[0], z: y[1], theta: y[2], nu: y[2].cos() }
}

fn log_state(t: f64, y: &Vector<3>, sgn: f64) -> ProfileState {
    let x = t.exp();
    let slope = y[2] / x;
    ProfileState {
        s: y[0],
        x,
        z: y[1],
        theta: angle_from_slope(slope, sgn),
        nu: sgn / (1.0 + slope * slope).sqrt(),
    }
}

impl Catenoid {
    pub fn prescription(&self) -> &PrescribedFunction {
        &self.prescription
    }

    pub fn necksize(&self) -> f64 {
        self.necksize
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.config
    }

    pub fn branch(&self, kind: BranchKind) -> &Branch {
        match kind {
            BranchKind::Upper => &self.upper,
            BranchKind::Lower => &self.lower,
        }
    }

    pub fn x_reached(&self, kind: BranchKind) -> f64 {
        self.branch(kind).x_reached()
    }

    pub(crate) fn local(&self, kind: BranchKind, x: f64) -> Result<LocalData> {
        self.branch(kind).local(&self.prescription, x)
    }

    /// Profile state at radius `x`.
    pub fn state_at(&self, kind: BranchKind, x: f64) -> Result<ProfileState> {
        Ok(self.local(kind, x)?.state)
    }

    /// Height `f_±(x)` by dense-output interpolation.
    pub fn height_at(&self, kind: BranchKind, x: f64) -> Result<f64> {
        Ok(self.local(kind, x)?.state.z)
    }

    /// `f_±'(x) = tan(theta)`; infinite at the waist.
    pub fn slope_at(&self, kind: BranchKind, x: f64) -> Result<f64> {
        Ok(self.local(kind, x)?.slope)
    }

    /// `x f'(x)`; read directly from the state in the far field.
    pub fn growth_at(&self, kind: BranchKind, x: f64) -> Result<f64> {
        Ok(self.local(kind, x)?.u)
    }

    pub fn curvature_at(&self, kind: BranchKind, x: f64) -> Result<CurvatureSample> {
        let d = self.local(kind, x)?;
        Ok(curvature_sample(&self.prescription, &d))
    }

    /// Graph-form residual of the mean curvature equation at radius `x`,
    /// with `f''` taken from the derivative of the dense output.
    ///
    /// Upper end: `|2H(nu_f) - f''/(1+f'^2)^{3/2} - f'/(x sqrt(1+f'^2))|`
    /// with `nu_f = 1/sqrt(1+f'^2)`. The graph parametrisation of the lower
    /// end carries the upward normal, opposite to the catenoid's, so there
    /// the equation reads `-2H(-nu_f) = f''/(1+f'^2)^{3/2} + f'/(x sqrt(1+f'^2))`.
    pub fn residual(&self, kind: BranchKind, x: f64) -> Result<f64> {
        let d = self.local(kind, x)?;
        if x == self.necksize {
            // arc-length form at the waist: theta' = 2H(0) - 1/r0
            let rhs = 2.0 * self.prescription.value(0.0) - 1.0 / x;
            return Ok((d.theta_s_dense - rhs).abs());
        }
        let fp = d.slope;
        let q = 1.0 + fp * fp;
        let sq = q.sqrt();
        let nu_f = 1.0 / sq;
        let meridian = d.f2_dense / (q * sq);
        let parallel = fp / (x * sq);
        Ok(match kind {
            BranchKind::Upper => (2.0 * self.prescription.value(nu_f) - meridian - parallel).abs(),
            BranchKind::Lower => (2.0 * self.prescription.value(-nu_f) + meridian + parallel).abs(),
        })
    }

    /// Checkpoint radii: the waist, then `r0 (1 + delta)` with `delta`
    /// log-spaced from `1e-3` at `dense_spacing` points per decade, then the
    /// final radius.
    pub fn checkpoint_radii(&self, kind: BranchKind) -> Vec<f64> {
        checkpoint_radii(self.necksize, self.x_reached(kind), self.config.dense_spacing)
    }

    pub fn checkpoints(&self, kind: BranchKind) -> Vec<ProfileState> {
        self.checkpoint_radii(kind)
            .into_iter()
            .filter_map(|x| self.state_at(kind, x).ok())
            .collect()
    }

    /// The homothetic image `lambda * Sigma`, which is the catenoid of the
    /// prescription `H / lambda` with necksize `lambda r0`.
    pub fn scale(&self, lambda: f64) -> Result<Catenoid> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "homothety factor must be positive, got {lambda}"
            )));
        }
        if lambda == 1.0 {
            return Ok(self.clone());
        }
        let prescription = PrescribedFunction::scaled(self.prescription.clone(), 1.0 / lambda)?;
        let mut config = self.config;
        config.x_max = self.config.x_max.map(|x| lambda * x);
        Ok(Catenoid {
            prescription,
            necksize: lambda * self.necksize,
            upper: scale_branch(&self.upper, lambda),
            lower: scale_branch(&self.lower, lambda),
            config,
        })
    }

    pub fn mesh(&self, rings: usize, segments: usize) -> Result<SurfaceMesh> {
        mesh(self, rings, segments)
    }
}

pub(crate) fn curvature_sample(h: &PrescribedFunction, d: &LocalData) -> CurvatureSample {
    let st = d.state;
    let hv = h.value(st.nu.clamp(-1.0, 1.0));
    // sin(theta) from the slope: near theta = pi the direct sine keeps
    // only an absolute accuracy of about 1e-16
    let k = sin_from_nu(st, d.slope) / st.x;
    let kappa2 = if st.theta.sin() < 0.0 { -k } else { k };
    // theta'(s) from the arc-length equation at the interpolated state; the
    // dense-output derivative is kept for the residual oracle, where an
    // independent route is the point
    let kappa1 = 2.0 * hv - kappa2;
    // |sigma|^2 = 4H^2 + 2 k (k - 2H), k = sqrt(1 - nu^2) / x
    let sff_norm_sq = 4.0 * hv * hv + 2.0 * k * (k - 2.0 * hv);
    CurvatureSample { x: st.x, kappa1, kappa2, sff_norm_sq, nu: st.nu }
}

// sqrt(1 - nu^2) without cancellation when |nu| is close to 1.
fn sin_from_nu(st: ProfileState, slope: f64) -> f64 {
    if st.nu.abs() < 0.5 || !slope.is_finite() {
        ((1.0 - st.nu) * (1.0 + st.nu)).max(0.0).sqrt()
    } else {
        // 1 - nu^2 = f'^2 / (1 + f'^2)
        slope.abs() / (1.0 + slope * slope).sqrt()
    }
}

pub(crate) fn checkpoint_radii(r0: f64, x_hi: f64, per_decade: usize) -> Vec<f64> {
    let mut out = vec![r0];
    let top = (x_hi - r0) / r0;
    let mut j = 0usize;
    loop {
        let delta = FIRST_CHECKPOINT_OFFSET * 10f64.powf(j as f64 / per_decade as f64);
        if delta >= top {
            break;
        }
        out.push(r0 * (1.0 + delta));
        j += 1;
    }
    if x_hi > *out.last().unwrap() {
        out.push(x_hi);
    }
    out
}

fn scale_branch(b: &Branch, lambda: f64) -> Branch {
    let lnl = lambda.ln();
    let pieces = b
        .pieces
        .iter()
        .map(|p| match p.phase {
            Phase::Arc => Piece {
                phase: p.phase,
                seg: p.seg.affine(lambda, 0.0, &[lambda, lambda, 1.0], &[0.0; 3]),
                t_end: lambda * p.t_end,
                x_start: lambda * p.x_start,
                x_end: lambda * p.x_end,
            },
            Phase::LogRadius => Piece {
                phase: p.phase,
                // z and u = x f' both scale with lambda
                seg: p.seg.affine(1.0, lnl, &[lambda; 3], &[0.0; 3]),
                t_end: p.t_end + lnl,
                x_start: lambda * p.x_start,
                x_end: lambda * p.x_end,
            },
        })
        .collect();
    let states = b
        .states
        .iter()
        .map(|s| ProfileState { s: lambda * s.s, x: lambda * s.x, z: lambda * s.z, ..*s })
        .collect();
    let termination = match b.termination {
        Termination::ReachedXMax => Termination::ReachedXMax,
        Termination::TurningPoint { s, x, z } => {
            Termination::TurningPoint { s: lambda * s, x: lambda * x, z: lambda * z }
        }
        Termination::StepFailure { s, x } => {
            Termination::StepFailure { s: lambda * s, x: lambda * x }
        }
        Termination::MaxSteps { s, x } => Termination::MaxSteps { s: lambda * s, x: lambda * x },
    };
    Branch { kind: b.kind, r0: lambda * b.r0, pieces, states, termination }
}

/// Quad mesh of a surface of revolution.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    pub vertices: Vec<[f64; 3]>,
    /// zero-based vertex indices, counter-clockwise seen from the normal
    pub faces: Vec<[usize; 4]>,
}

impl SurfaceMesh {
    /// Wavefront OBJ text (one-based indices).
    pub fn to_obj(&self) -> String {
        let mut out = String::with_capacity(self.vertices.len() * 48 + self.faces.len() * 32);
        for v in &self.vertices {
            out.push_str(&format!("v {} {} {}\n", v[0], v[1], v[2]));
        }
        for f in &self.faces {
            out.push_str(&format!("f {} {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1, f[3] + 1));
        }
        out
    }
}

fn mesh(c: &Catenoid, rings: usize, segments: usize) -> Result<SurfaceMesh> {
    if rings < 2 || segments < 3 {
        return Err(Error::InvalidParameter(format!(
            "mesh needs rings >= 2 and segments >= 3, got {rings} and {segments}"
        )));
    }
    let r0 = c.necksize();
    let mut vertices = Vec::with_capacity(2 * rings * segments);
    let mut faces = Vec::with_capacity(2 * (rings - 1) * segments);
    for kind in [BranchKind::Upper, BranchKind::Lower] {
        let x_hi = c.x_reached(kind);
        if !(x_hi > r0) {
            return Err(Error::Integration(format!("{} branch is empty", kind.as_str())));
        }
        let base = vertices.len();
        for i in 0..rings {
            let x = if i == 0 {
                r0
            } else {
                r0 * (x_hi / r0).powf(i as f64 / (rings - 1) as f64)
            }
            .min(x_hi);
            let z = if i == 0 { 0.0 } else { c.height_at(kind, x)? };
            for j in 0..segments {
                let phi = 2.0 * std::f64::consts::PI * j as f64 / segments as f64;
                vertices.push([x * phi.cos(), x * phi.sin(), z]);
            }
        }
        for i in 0..rings - 1 {
            for j in 0..segments {
                let a = base + i * segments + j;
                let b = base + (i + 1) * segments + j;
                let b1 = base + (i + 1) * segments + (j + 1) % segments;
                let a1 = base + i * segments + (j + 1) % segments;
                // d/dx x d/dphi is the upward normal of the graph; the lower
                // end is oriented downward, so its quads run the other way
                match kind {
                    BranchKind::Upper => faces.push([a, b, b1, a1]),
                    BranchKind::Lower => faces.push([a, a1, b1, b]),
                }
            }
        }
    }
    Ok(SurfaceMesh { vertices, faces })
}

/// CSV export, one row per checkpoint, branches in the given order.
pub fn profile_csv(c: &Catenoid, branches: &[BranchKind]) -> String {
    let mut out = String::from("s,x,z,theta,nu,kappa1,kappa2,sff_norm_sq,branch\n");
    for &kind in branches {
        for x in c.checkpoint_radii(kind) {
            let Ok(d) = c.local(kind, x) else { continue };
            let k = curvature_sample(c.prescription(), &d);
            let st = d.state;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                st.s,
                st.x,
                st.z,
                st.theta,
                st.nu,
                k.kappa1,
                k.kappa2,
                k.sff_norm_sq,
                kind.as_str()
            ));
        }
    }
    out
}

/// A profile re-read from CSV, interpolated by cubic Hermite in `x` using
/// the tangent angle for slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTable {
    upper: Vec<(f64, f64, f64)>,
    lower: Vec<(f64, f64, f64)>,
}

impl ProfileTable {
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Table("empty profile".into()))?;
        if header.trim() != "s,x,z,theta,nu,kappa1,kappa2,sff_norm_sq,branch" {
            return Err(Error::Table(format!("unexpected header '{header}'")));
        }
        let mut upper = Vec::new();
        let mut lower = Vec::new();
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 9 {
                return Err(Error::Table(format!("row {}: expected 9 columns", n + 2)));
            }
            let num = |i: usize| -> Result<f64> {
                cols[i]
                    .parse::<f64>()
                    .map_err(|_| Error::Table(format!("row {}: bad number '{}'", n + 2, cols[i])))
            };
            let row = (num(1)?, num(2)?, num(3)?);
            match cols[8] {
                "upper" => upper.push(row),
                "lower" => lower.push(row),
                other => return Err(Error::Table(format!("row {}: bad branch '{other}'", n + 2))),
            }
        }
        Ok(ProfileTable { upper, lower })
    }

    pub fn radii(&self, kind: BranchKind) -> Vec<f64> {
        self.rows(kind).iter().map(|r| r.0).collect()
    }

    fn rows(&self, kind: BranchKind) -> &[(f64, f64, f64)] {
        match kind {
            BranchKind::Upper => &self.upper,
            BranchKind::Lower => &self.lower,
        }
    }

    pub fn height_at(&self, kind: BranchKind, x: f64) -> Result<f64> {
        let rows = self.rows(kind);
        let (lo, hi) = match (rows.first(), rows.last()) {
            (Some(a), Some(b)) => (a.0, b.0),
            _ => return Err(Error::Table("empty branch".into())),
        };
        if !(x >= lo && x <= hi) {
            return Err(Error::OutOfRange { x, lo, hi });
        }
        let i = rows.partition_point(|r| r.0 < x);
        if rows[i.min(rows.len() - 1)].0 == x {
            return Ok(rows[i.min(rows.len() - 1)].1);
        }
        let (a, b) = (rows[i - 1], rows[i]);
        let w = b.0 - a.0;
        let t = (x - a.0) / w;
        let ma = if a.2 == FRAC_PI_2 { 0.0 } else { a.2.tan() };
        let mb = b.2.tan();
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        Ok(h00 * a.1 + h10 * w * ma + h01 * b.1 + h11 * w * mb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(x_max: f64) -> Catenoid {
        integrate_catenoid(
            &PrescribedFunction::zero(),
            1.0,
            &IntegratorConfig::default().with_x_max(x_max),
        )
        .unwrap()
    }

    fn g(x: f64) -> f64 {
        (x + ((x - 1.0) * (x + 1.0)).sqrt()).ln()
    }

    #[test]
    fn waist_state() {
        let c = minimal(10.0);
        for kind in [BranchKind::Upper, BranchKind::Lower] {
            let st = c.state_at(kind, 1.0).unwrap();
            assert_eq!((st.x, st.z, st.nu, st.s), (1.0, 0.0, 0.0, 0.0));
            assert_eq!(c.branch(kind).states()[0].theta, FRAC_PI_2);
        }
    }

    #[test]
    fn minimal_height_closed_form() {
        let c = minimal(100.0);
        assert!((c.height_at(BranchKind::Upper, 2.0).unwrap() - 1.3169578969248166).abs() < 1e-9);
        let h10 = c.height_at(BranchKind::Upper, 10.0).unwrap();
        assert!((h10 - g(10.0)).abs() / g(10.0) <= 1e-8);
        assert!((c.height_at(BranchKind::Lower, 10.0).unwrap() + g(10.0)).abs() <= 1e-8 * g(10.0));
        assert_eq!(c.branch(BranchKind::Upper).termination(), Termination::ReachedXMax);
        assert!((c.x_reached(BranchKind::Upper) - 100.0).abs() < 1e-12);
    }

    #[test]
    fn height_near_waist_tends_to_zero() {
        let c = minimal(10.0);
        let z = c.height_at(BranchKind::Upper, 1.0 + 1e-10).unwrap();
        assert!(z > 0.0 && z < 2e-5);
        let z = c.height_at(BranchKind::Lower, 1.0 + 1e-10).unwrap();
        assert!(z < 0.0 && z > -2e-5);
    }

    #[test]
    fn slope_examples() {
        let c = minimal(10.0);
        let s = c.slope_at(BranchKind::Upper, 2.0).unwrap();
        assert!((s - 1.0 / 3f64.sqrt()).abs() < 1e-9);
        let nu = c.state_at(BranchKind::Upper, 2.0).unwrap().nu;
        assert!((1.0 / (1.0 + s * s).sqrt() - nu).abs() < 1e-12);
        assert!(c.slope_at(BranchKind::Upper, 1.0 + 1e-9).unwrap() > 1e4);
        assert!(c.slope_at(BranchKind::Lower, 2.0).unwrap() < 0.0);
    }

    #[test]
    fn out_of_range_queries() {
        let c = minimal(10.0);
        assert!(matches!(c.height_at(BranchKind::Upper, 0.5), Err(Error::OutOfRange { .. })));
        assert!(matches!(c.height_at(BranchKind::Upper, 10.5), Err(Error::OutOfRange { .. })));
        assert!(matches!(c.curvature_at(BranchKind::Lower, 11.0), Err(Error::OutOfRange { .. })));
        assert!(matches!(c.residual(BranchKind::Lower, 0.0), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn initial_curvature_rate() {
        let h2 = PrescribedFunction::power_law(2.0).unwrap();
        let c = integrate_catenoid(&h2, 1.0, &IntegratorConfig::default().with_x_max(10.0)).unwrap();
        let d = c.local(BranchKind::Upper, 1.0).unwrap();
        assert_eq!(d.theta_s_dense, -3.0);
        // the first step's dense derivative agrees with the waist value
        let first = c.branch(BranchKind::Upper).pieces[0].seg.derivative(0.0);
        assert!((first[2] + 3.0).abs() < 1e-9);
        assert!(c.residual(BranchKind::Upper, 1.0).unwrap() < 1e-9);
    }

    #[test]
    fn minimal_curvatures_cancel() {
        let c = minimal(50.0);
        for &x in &[1.01, 1.5, 3.0, 20.0] {
            let k = c.curvature_at(BranchKind::Upper, x).unwrap();
            assert!((k.kappa1 + k.kappa2).abs() < 1e-8, "x = {x}: {k:?}");
        }
        let k = c.curvature_at(BranchKind::Upper, 1.0).unwrap();
        assert_eq!(k.kappa2, 1.0);
    }

    #[test]
    fn far_field_switches_variables() {
        let c = minimal(1e5);
        let b = c.branch(BranchKind::Upper);
        assert!(b.pieces.iter().any(|p| p.phase == Phase::LogRadius));
        assert!(b.step_count() < 5000, "{} steps", b.step_count());
        for &x in &[999.0, 1001.0, 1e4, 9.9e4] {
            let z = c.height_at(BranchKind::Upper, x).unwrap();
            assert!((z - g(x)).abs() / g(x) < 1e-8, "x = {x}");
            let u = c.growth_at(BranchKind::Upper, x).unwrap();
            let exact = x / ((x - 1.0) * (x + 1.0)).sqrt();
            assert!((u - exact).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_prescription_hits_turning_point() {
        let h = PrescribedFunction::constant(-1.0).unwrap();
        let c = integrate_catenoid(&h, 1.0, &IntegratorConfig::default().with_x_max(100.0)).unwrap();
        let t = c.branch(BranchKind::Upper).termination();
        match t {
            Termination::TurningPoint { x, .. } => {
                assert!(x > 1.0 && x < 100.0);
                assert!((c.x_reached(BranchKind::Upper) - x).abs() < 1e-12);
            }
            other => panic!("expected turning point, got {other:?}"),
        }
        let xs: Vec<f64> = c.checkpoints(BranchKind::Upper).iter().map(|s| s.x).collect();
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rejects_bad_input() {
        let h = PrescribedFunction::zero();
        let cfg = IntegratorConfig::default();
        assert!(integrate_catenoid(&h, 0.0, &cfg).is_err());
        assert!(integrate_catenoid(&h, 1.0, &cfg.with_x_max(0.5)).is_err());
        assert!(integrate_catenoid(&h, 1.0, &cfg.with_tolerances(0.0, 1e-12)).is_err());
        let nan = PrescribedFunction::expression("log(y)").unwrap_err();
        assert!(matches!(nan, Error::NonFinite { .. }));
    }

    #[test]
    fn checkpoint_layout() {
        let xs = checkpoint_radii(2.0, 2e3, 4);
        assert_eq!(xs[0], 2.0);
        assert!((xs[1] - 2.002).abs() < 1e-15);
        assert_eq!(*xs.last().unwrap(), 2e3);
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
        // 3 decades below delta = 1, 3 decades above: 4 per decade
        assert_eq!(xs.len(), 1 + 24 + 1);
    }

    #[test]
    fn mesh_counts_and_orientation() {
        let c = minimal(10.0);
        let m = c.mesh(2, 3).unwrap();
        assert_eq!(m.vertices.len(), 12);
        assert_eq!(m.faces.len(), 6);
        assert!(c.mesh(1, 3).is_err());
        assert!(c.mesh(2, 2).is_err());
        let m = c.mesh(5, 16).unwrap();
        for v in &m.vertices {
            assert!(v[0].hypot(v[1]) >= 1.0 - 1e-12);
        }
        for v in &m.vertices[..16] {
            assert_eq!(v[2], 0.0);
        }
        // the face normal at the first upper quad points inwards (waist)
        let f = m.faces[0];
        let p: Vec<[f64; 3]> = f.iter().map(|&i| m.vertices[i]).collect();
        let e1 = [p[1][0] - p[0][0], p[1][1] - p[0][1], p[1][2] - p[0][2]];
        let e2 = [p[3][0] - p[0][0], p[3][1] - p[0][1], p[3][2] - p[0][2]];
        let n = [
            e1[1] * e2[2] - e1[2] * e2[1],
            e1[2] * e2[0] - e1[0] * e2[2],
            e1[0] * e2[1] - e1[1] * e2[0],
        ];
        let radial = [p[0][0], p[0][1], 0.0];
        assert!(n[0] * radial[0] + n[1] * radial[1] < 0.0);
        let obj = m.to_obj();
        assert!(obj.starts_with("v 1 0 0\n"));
        assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), m.faces.len());
    }

    #[test]
    fn csv_round_trip_at_checkpoints() {
        let c = minimal(50.0);
        let csv = profile_csv(&c, &[BranchKind::Upper, BranchKind::Lower]);
        let t = ProfileTable::from_csv(&csv).unwrap();
        for kind in [BranchKind::Upper, BranchKind::Lower] {
            for x in t.radii(kind) {
                let a = t.height_at(kind, x).unwrap();
                let b = c.height_at(kind, x).unwrap();
                assert!((a - b).abs() <= 1e-9);
            }
        }
        assert!(ProfileTable::from_csv("a,b\n").is_err());
    }
}
