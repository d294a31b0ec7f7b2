//! Command-line driver for `hcat-core`.
//!
//! Exit codes: 0 success, 1 property-check failure or runtime error, 2 usage
//! error. Every message on standard error starts with one of the prefixes
//! `hcat: usage:`, `hcat: error:` or `hcat: check failed:`.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use hcat_core::asymptotics::{classify_end, EndClassification};
use hcat_core::comparison::{
    behavior_across_necksizes, compare_heights, double_cover_convergence, equivalence_behavior,
    CoverReport, NecksizeReport, TransferReport,
};
use hcat_core::halfspace::{certify, CertifyOptions, SphereFunction};
use hcat_core::prescribed::{Endpoint, MonotoneCubic, PrescribedFunction};
use hcat_core::profile::{integrate_catenoid, profile_csv, BranchKind, IntegratorConfig};

#[derive(Debug, Parser)]
#[command(name = "hcat", version, about = "Rotational catenoids of prescribed mean curvature")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a catenoid and write its profile as CSV
    Profile(Common),
    /// Classify the ends as bounded or unbounded (JSON)
    Classify(Common),
    /// Check the comparison inequalities for H > F (JSON or CSV)
    Compare(Common),
    /// Check that equivalent prescriptions share their behaviour at infinity
    Equiv(Common),
    /// Emit a half-space certificate (JSON)
    Certify(Common),
    /// Write a quad mesh of the catenoid (OBJ)
    Mesh(Common),
    /// Classify over a list of necksizes in parallel (JSON)
    Sweep(Common),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchSel {
    Upper,
    Lower,
    Both,
}

impl BranchSel {
    fn kinds(self) -> Vec<BranchKind> {
        match self {
            BranchSel::Upper => vec![BranchKind::Upper],
            BranchSel::Lower => vec![BranchKind::Lower],
            BranchSel::Both => vec![BranchKind::Upper, BranchKind::Lower],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Flags shared by every subcommand. Each subcommand reads the ones it needs.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Prescription: powerlaw:alpha=<a> | expr:<expression> | table:<path> | scale:<f>:<spec>
    #[arg(long = "h", value_name = "SPEC")]
    pub h: Option<String>,
    /// Second prescription
    #[arg(long = "f", value_name = "SPEC")]
    pub f: Option<String>,
    #[arg(long)]
    pub r0: Option<f64>,
    /// Comma-separated necksizes
    #[arg(long = "r-list", value_name = "R1,R2,...")]
    pub r_list: Option<String>,
    #[arg(long)]
    pub xmax: Option<f64>,
    #[arg(long = "rel-tol")]
    pub rel_tol: Option<f64>,
    #[arg(long = "abs-tol")]
    pub abs_tol: Option<f64>,
    #[arg(long, value_enum)]
    pub branch: Option<BranchSel>,
    /// Annulus for the double-cover check
    #[arg(long, value_name = "LO,HI")]
    pub window: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub rings: Option<usize>,
    #[arg(long)]
    pub segments: Option<usize>,
    /// TOML file with the same keys as the flags; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// TOML mirror of [`Common`].
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub h: Option<String>,
    pub f: Option<String>,
    pub r0: Option<f64>,
    pub r_list: Option<Vec<f64>>,
    pub xmax: Option<f64>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub branch: Option<BranchSel>,
    pub window: Option<[f64; 2]>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub rings: Option<usize>,
    pub segments: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) | CliError::Check(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "hcat: usage: {m}"),
            CliError::Runtime(m) => write!(f, "hcat: error: {m}"),
            CliError::Check(m) => write!(f, "hcat: check failed: {m}"),
        }
    }
}

impl From<hcat_core::Error> for CliError {
    fn from(e: hcat_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `powerlaw:alpha=<a>`, `expr:<expression>`, `table:<path>` or
/// `scale:<factor>:<spec>`.
pub fn parse_prescription(spec: &str) -> hcat_core::Result<PrescribedFunction> {
    use hcat_core::Error;
    let spec = spec.trim();
    if let Some(rest) = spec.strip_prefix("powerlaw:") {
        let value = rest.strip_prefix("alpha=").ok_or_else(|| Error::Parse {
            position: "powerlaw:".len(),
            message: "expected 'alpha=<float>'".into(),
        })?;
        let alpha = value.parse::<f64>().map_err(|_| Error::Parse {
            position: "powerlaw:alpha=".len(),
            message: format!("'{value}' is not a number"),
        })?;
        PrescribedFunction::power_law(alpha)
    } else if let Some(rest) = spec.strip_prefix("expr:") {
        PrescribedFunction::expression(rest).map_err(|e| match e {
            Error::Parse { position, message } => {
                Error::Parse { position: position + "expr:".len(), message }
            }
            other => other,
        })
    } else if let Some(path) = spec.strip_prefix("table:") {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Table(format!("cannot read '{path}': {e}")))?;
        Ok(PrescribedFunction::table(MonotoneCubic::from_csv_str(&text)?))
    } else if let Some(rest) = spec.strip_prefix("scale:") {
        let (factor, inner) = rest.split_once(':').ok_or_else(|| Error::Parse {
            position: spec.len(),
            message: "expected 'scale:<factor>:<spec>'".into(),
        })?;
        let f = factor.parse::<f64>().map_err(|_| Error::Parse {
            position: "scale:".len(),
            message: format!("'{factor}' is not a number"),
        })?;
        let base = parse_prescription(inner).map_err(|e| match e {
            Error::Parse { position, message } => Error::Parse {
                position: position + "scale:".len() + factor.len() + 1,
                message,
            },
            other => other,
        })?;
        PrescribedFunction::scaled(base, f)
    } else {
        Err(Error::Parse {
            position: 0,
            message: "expected one of powerlaw:, expr:, table:, scale:".into(),
        })
    }
}

/// Flags merged over the optional config file.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub h: Option<String>,
    pub f: Option<String>,
    pub r0: Option<f64>,
    pub r_list: Option<Vec<f64>>,
    pub xmax: Option<f64>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub branch: Option<BranchSel>,
    pub window: Option<[f64; 2]>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub rings: Option<usize>,
    pub segments: Option<usize>,
}

fn parse_floats(flag: &str, text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("{flag}: '{t}' is not a number")))
        })
        .collect()
}

pub fn merge(common: &Common) -> CliResult<Settings> {
    let file: FileConfig = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config '{}': {e}", path.display()))
            })?;
            toml::from_str(&text)
                .map_err(|e| CliError::Usage(format!("config '{}': {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    let r_list = match &common.r_list {
        Some(t) => Some(parse_floats("--r-list", t)?),
        None => file.r_list,
    };
    let window = match &common.window {
        Some(t) => {
            let v = parse_floats("--window", t)?;
            let [lo, hi] = v[..] else {
                return Err(CliError::Usage("--window expects LO,HI".into()));
            };
            Some([lo, hi])
        }
        None => file.window,
    };
    Ok(Settings {
        h: common.h.clone().or(file.h),
        f: common.f.clone().or(file.f),
        r0: common.r0.or(file.r0),
        r_list,
        xmax: common.xmax.or(file.xmax),
        rel_tol: common.rel_tol.or(file.rel_tol),
        abs_tol: common.abs_tol.or(file.abs_tol),
        branch: common.branch.or(file.branch),
        window,
        out: common.out.clone().or(file.out),
        format: common.format.or(file.format),
        rings: common.rings.or(file.rings),
        segments: common.segments.or(file.segments),
    })
}

impl Settings {
    fn prescription(&self, which: &str) -> CliResult<PrescribedFunction> {
        let spec = match which {
            "--h" => self.h.as_deref(),
            _ => self.f.as_deref(),
        }
        .ok_or_else(|| CliError::Usage(format!("{which} <spec> is required")))?;
        parse_prescription(spec).map_err(|e| CliError::Usage(format!("{which} '{spec}': {e}")))
    }

    fn r0(&self) -> CliResult<f64> {
        let r0 = self.r0.unwrap_or(1.0);
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(CliError::Usage(format!("--r0 must be positive, got {r0}")));
        }
        Ok(r0)
    }

    fn integrator(&self, r0: Option<f64>) -> CliResult<IntegratorConfig> {
        let mut cfg = IntegratorConfig::default();
        if let Some(t) = self.rel_tol {
            cfg.rel_tol = t;
        }
        if let Some(t) = self.abs_tol {
            cfg.abs_tol = t;
        }
        cfg.x_max = self.xmax;
        if !(cfg.rel_tol > 0.0 && cfg.abs_tol > 0.0) {
            return Err(CliError::Usage("--rel-tol and --abs-tol must be positive".into()));
        }
        if let (Some(x), Some(r0)) = (cfg.x_max, r0) {
            if !(x > r0 && x.is_finite()) {
                return Err(CliError::Usage(format!("--xmax {x} must exceed --r0 {r0}")));
            }
        }
        Ok(cfg)
    }

    fn branches(&self) -> Vec<BranchKind> {
        self.branch.unwrap_or(BranchSel::Both).kinds()
    }

    fn emit(&self, text: &str) -> CliResult<()> {
        match &self.out {
            Some(path) => write_file(path, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Runtime(format!("cannot write '{}': {e}", path.display())))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct ClassifyOutput<'a> {
    prescription: String,
    r0: f64,
    reports: &'a [EndClassification],
}

#[derive(Serialize)]
struct EquivOutput<'a> {
    reports: &'a [TransferReport],
    pass: bool,
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    necksizes: &'a NecksizeReport,
    double_cover: Option<&'a CoverReport>,
    pass: bool,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Profile(c) => profile(&merge(&c)?),
        Command::Classify(c) => classify(&merge(&c)?),
        Command::Compare(c) => compare(&merge(&c)?),
        Command::Equiv(c) => equiv(&merge(&c)?),
        Command::Certify(c) => certify_cmd(&merge(&c)?),
        Command::Mesh(c) => mesh(&merge(&c)?),
        Command::Sweep(c) => sweep(&merge(&c)?),
    }
}

fn profile(s: &Settings) -> CliResult<()> {
    let h = s.prescription("--h")?;
    let r0 = s.r0()?;
    let cfg = s.integrator(Some(r0))?;
    if s.format == Some(Format::Json) {
        return Err(CliError::Usage("profile writes CSV only".into()));
    }
    let c = integrate_catenoid(&h, r0, &cfg)?;
    s.emit(&profile_csv(&c, &s.branches()))
}

fn classify(s: &Settings) -> CliResult<()> {
    let h = s.prescription("--h")?;
    let r0 = s.r0()?;
    let cfg = s.integrator(Some(r0))?;
    let c = integrate_catenoid(&h, r0, &cfg)?;
    let reports = s
        .branches()
        .into_iter()
        .map(|b| classify_end(&c, b))
        .collect::<hcat_core::Result<Vec<_>>>()?;
    s.emit(&json(&ClassifyOutput { prescription: h.describe(), r0, reports: &reports }))
}

fn compare(s: &Settings) -> CliResult<()> {
    let h = s.prescription("--h")?;
    let f = s.prescription("--f")?;
    let r0 = s.r0()?;
    let cfg = s.integrator(Some(r0))?;
    let rep = compare_heights(&h, &f, r0, &cfg)?;
    let text = match s.format.unwrap_or(Format::Json) {
        Format::Json => json(&rep),
        Format::Csv => rep.to_csv(),
    };
    s.emit(&text)?;
    if rep.height_ok && rep.derivative_ok {
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "comparison: {} violation(s), first {:?}",
            rep.violations, rep.first_violation
        )))
    }
}

fn equiv(s: &Settings) -> CliResult<()> {
    let h = s.prescription("--h")?;
    let f = s.prescription("--f")?;
    let r0 = s.r0()?;
    let cfg = s.integrator(Some(r0))?;
    let reports = s
        .branches()
        .into_iter()
        .map(|b| {
            let e = match b {
                BranchKind::Upper => Endpoint::Plus,
                BranchKind::Lower => Endpoint::Minus,
            };
            equivalence_behavior(&h, &f, r0, e, &cfg)
        })
        .collect::<hcat_core::Result<Vec<_>>>()?;
    let pass = reports.iter().all(|r| r.pass || r.excluded);
    s.emit(&json(&EquivOutput { reports: &reports, pass }))?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Check("equivalent prescriptions behave differently".into()))
    }
}

fn certify_cmd(s: &Settings) -> CliResult<()> {
    let h = s.prescription("--h")?;
    let cert = certify(&SphereFunction::axisymmetric(h), &CertifyOptions::default())?;
    let mut text = cert.to_json();
    text.push('\n');
    s.emit(&text)?;
    if cert.reverification.ok {
        Ok(())
    } else {
        Err(CliError::Check("certificate failed re-verification at double resolution".into()))
    }
}

fn mesh(s: &Settings) -> CliResult<()> {
    let h = s.prescription("--h")?;
    let r0 = s.r0()?;
    let cfg = s.integrator(Some(r0))?;
    let (rings, segments) = (s.rings.unwrap_or(32), s.segments.unwrap_or(32));
    if rings < 2 || segments < 3 {
        return Err(CliError::Usage("--rings must be >= 2 and --segments >= 3".into()));
    }
    let c = integrate_catenoid(&h, r0, &cfg)?;
    s.emit(&c.mesh(rings, segments)?.to_obj())
}

fn sweep(s: &Settings) -> CliResult<()> {
    let h = s.prescription("--h")?;
    let rs = s.r_list.clone().ok_or_else(|| CliError::Usage("--r-list is required".into()))?;
    if rs.is_empty() || rs.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(CliError::Usage("--r-list entries must be positive".into()));
    }
    let cfg = s.integrator(rs.iter().copied().reduce(f64::max))?;
    let necks = behavior_across_necksizes(&h, &rs, &cfg)?;
    let cover = match s.window {
        Some(w) => Some(double_cover_convergence(&h, &rs, w, &IntegratorConfig { x_max: None, ..cfg })?),
        None => None,
    };
    let pass = necks.pass && cover.as_ref().map_or(true, |c| c.pass);
    s.emit(&json(&SweepOutput { necksizes: &necks, double_cover: cover.as_ref(), pass }))?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Check("necksize sweep: verdicts disagree or double cover not reached".into()))
    }
}
