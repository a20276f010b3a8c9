//! Flat `key = value` experiment files.
//!
//! ```text
//! # Example 1 ladder
//! problem = example1
//! alpha = 1.5
//! h_exp = -8..-10
//! tau_exp = -10
//! solver = pgmres-t
//! ```
//!
//! Ladders are single exponents, comma lists or inclusive ranges `a..b`
//! (either direction); step sizes are `2^exp`. Tables are `x:v` pairs
//! separated by commas, interpolated linearly.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use osfde::ResidualBaseline;

use crate::error::{HarnessError, Result};

pub const MAX_NODES_1D: usize = 1 << 15;
pub const MAX_NODES_2D: usize = 1 << 18;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub points: Vec<(f64, f64)>,
}

impl Table {
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        let mut points = Vec::new();
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (x, v) = item.split_once(':').ok_or_else(|| format!("table entry '{item}' is not x:v"))?;
            let x: f64 = x.trim().parse().map_err(|_| format!("bad abscissa '{x}'"))?;
            let v: f64 = v.trim().parse().map_err(|_| format!("bad value '{v}'"))?;
            if !x.is_finite() || !v.is_finite() {
                return Err(format!("non-finite table entry '{item}'"));
            }
            points.push((x, v));
        }
        if points.is_empty() {
            return Err("empty table".into());
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err("table abscissae must increase strictly".into());
        }
        Ok(Self { points })
    }

    pub fn constant(v: f64) -> Self {
        Self { points: vec![(0.0, v)] }
    }

    /// Piecewise-linear interpolation, constant beyond the ends.
    pub fn eval(&self, x: f64) -> f64 {
        let p = &self.points;
        if x <= p[0].0 {
            return p[0].1;
        }
        if x >= p[p.len() - 1].0 {
            return p[p.len() - 1].1;
        }
        let k = p.partition_point(|&(xi, _)| xi <= x);
        let (x0, v0) = p[k - 1];
        let (x1, v1) = p[k];
        v0 + (v1 - v0) * (x - x0) / (x1 - x0)
    }

    fn min_value(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    }
}

/// One-dimensional problem given by tables instead of expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedProblem {
    pub x_left: f64,
    pub x_right: f64,
    pub t_end: f64,
    pub diffusion: Table,
    pub initial: Table,
    pub source: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemId {
    Example1,
    Example2,
    /// `u = 0`.
    Zero,
    Custom(TabulatedProblem),
}

impl ProblemId {
    pub fn is_2d(&self) -> bool {
        matches!(self, Self::Example2)
    }

    pub fn has_exact(&self) -> bool {
        !matches!(self, Self::Custom(_))
    }

    fn extent(&self) -> f64 {
        match self {
            Self::Example1 | Self::Zero => 1.0,
            Self::Example2 => 2.0,
            Self::Custom(c) => c.x_right - c.x_left,
        }
    }

    fn t_end(&self) -> f64 {
        match self {
            Self::Custom(c) => c.t_end,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    #[default]
    PgmresT,
    Plu,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::PgmresT => "pgmres-t",
            Self::Plu => "plu",
        }
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pgmres-t" | "pgmres" => Ok(Self::PgmresT),
            "plu" => Ok(Self::Plu),
            _ => Err(format!("unknown solver '{s}' (pgmres-t | plu)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(format!("unknown format '{s}' (csv | json)")),
        }
    }
}

/// Axis along which `rate` is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refine {
    Space,
    Time,
}

/// Energy-estimate weight for two-dimensional runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StabilityChoice {
    #[default]
    None,
    Identity,
    InverseD,
    InverseE,
    /// First of identity, `D^-1`, `E^-1` certified on a coarse grid.
    Auto,
}

impl FromStr for StabilityChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(Self::None),
            "identity" => Ok(Self::Identity),
            "inverse-d" => Ok(Self::InverseD),
            "inverse-e" => Ok(Self::InverseE),
            "auto" => Ok(Self::Auto),
            _ => Err(format!("unknown stability weight '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemId,
    pub alpha: f64,
    pub beta: Option<f64>,
    pub h_exps: Vec<i32>,
    pub tau_exps: Vec<i32>,
    pub refine: Option<Refine>,
    pub solver: SolverKind,
    pub gmres_tol: f64,
    pub gmres_max_iter: usize,
    pub baseline: ResidualBaseline,
    pub mg_cycles: usize,
    pub stability: StabilityChoice,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemId::Example1,
            alpha: 1.5,
            beta: None,
            h_exps: vec![-6],
            tau_exps: vec![-6],
            refine: None,
            solver: SolverKind::PgmresT,
            gmres_tol: 1e-7,
            gmres_max_iter: 500,
            baseline: ResidualBaseline::InitialResidual,
            mg_cycles: 1,
            stability: StabilityChoice::None,
            out: None,
            format: Format::Csv,
            seed: 0,
            threads: None,
        }
    }
}

/// `-4..-6`, `-8,-9`, or `-7`.
pub fn parse_ladder(s: &str) -> std::result::Result<Vec<i32>, String> {
    let s = s.trim();
    let int = |t: &str| t.trim().parse::<i32>().map_err(|_| format!("bad exponent '{}'", t.trim()));
    let v: Vec<i32> = if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (int(a)?, int(b)?);
        if a <= b {
            (a..=b).collect()
        } else {
            (b..=a).rev().collect()
        }
    } else {
        s.split(',').filter(|t| !t.trim().is_empty()).map(int).collect::<std::result::Result<_, _>>()?
    };
    if v.is_empty() {
        return Err("empty ladder".into());
    }
    Ok(v)
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("bad value '{value}' for {key}"))
}

#[derive(Default)]
struct CustomDraft {
    x_left: Option<f64>,
    x_right: Option<f64>,
    t_end: Option<f64>,
    diffusion: Option<Table>,
    initial: Option<Table>,
    source: Option<f64>,
}

/// Accumulates assignments; `finish` validates.
#[derive(Default)]
pub struct ConfigBuilder {
    cfg: ExperimentConfig,
    problem: Option<String>,
    custom: CustomDraft,
}

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let (key, value) = (key.trim(), value.trim());
        let c = &mut self.cfg;
        match key {
            "problem" => self.problem = Some(value.to_string()),
            "alpha" => c.alpha = parse_value(key, value)?,
            "beta" => c.beta = Some(parse_value(key, value)?),
            "h_exp" => c.h_exps = parse_ladder(value)?,
            "tau_exp" => c.tau_exps = parse_ladder(value)?,
            "refine" => {
                c.refine = Some(match value {
                    "h" | "space" => Refine::Space,
                    "tau" | "time" => Refine::Time,
                    _ => return Err(format!("refine must be h or tau, got '{value}'")),
                })
            }
            "solver" => c.solver = value.parse()?,
            "gmres_tol" => c.gmres_tol = parse_value(key, value)?,
            "gmres_max_iter" => c.gmres_max_iter = parse_value(key, value)?,
            "gmres_baseline" => {
                c.baseline = match value {
                    "r0" => ResidualBaseline::InitialResidual,
                    "b" | "rhs" => ResidualBaseline::RightHandSide,
                    _ => return Err(format!("gmres_baseline must be r0 or b, got '{value}'")),
                }
            }
            "mg_cycles" => c.mg_cycles = parse_value(key, value)?,
            "stability" => c.stability = value.parse()?,
            "out" => c.out = Some(PathBuf::from(value)),
            "format" => c.format = value.parse()?,
            "seed" => c.seed = parse_value(key, value)?,
            "threads" => c.threads = Some(parse_value(key, value)?),
            "x_left" => self.custom.x_left = Some(parse_value(key, value)?),
            "x_right" => self.custom.x_right = Some(parse_value(key, value)?),
            "t_end" => self.custom.t_end = Some(parse_value(key, value)?),
            "diffusion" => self.custom.diffusion = Some(Table::parse(value)?),
            "initial" => self.custom.initial = Some(Table::parse(value)?),
            "source" => self.custom.source = Some(parse_value(key, value)?),
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// `key = value` lines; `#` starts a comment.
    pub fn read_str(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| HarnessError::Parse {
                path: origin.to_string(),
                line: i + 1,
                msg,
            };
            let (k, v) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
            self.set(k, v).map_err(err)?;
        }
        Ok(())
    }

    pub fn read_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.read_str(&text, &path.display().to_string())
    }

    /// `key=value` from the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("override '{assignment}' is not key=value")))?;
        self.set(k, v).map_err(HarnessError::Config)
    }

    pub fn finish(self) -> Result<ExperimentConfig> {
        let mut cfg = self.cfg;
        let cust = self.custom;
        let has_custom_keys = cust.x_left.is_some()
            || cust.x_right.is_some()
            || cust.t_end.is_some()
            || cust.diffusion.is_some()
            || cust.initial.is_some()
            || cust.source.is_some();
        cfg.problem = match self.problem.as_deref().unwrap_or("example1") {
            "example1" => ProblemId::Example1,
            "example2" => ProblemId::Example2,
            "zero" => ProblemId::Zero,
            "custom" => ProblemId::Custom(TabulatedProblem {
                x_left: cust.x_left.unwrap_or(0.0),
                x_right: cust.x_right.unwrap_or(1.0),
                t_end: cust.t_end.unwrap_or(1.0),
                diffusion: cust
                    .diffusion
                    .ok_or_else(|| HarnessError::Config("custom problem needs a diffusion table".into()))?,
                initial: cust.initial.unwrap_or_else(|| Table::constant(0.0)),
                source: cust.source.unwrap_or(0.0),
            }),
            other => return Err(HarnessError::Config(format!("unknown problem '{other}'"))),
        };
        if has_custom_keys && !matches!(cfg.problem, ProblemId::Custom(_)) {
            return Err(HarnessError::Config(
                "x_left, x_right, t_end, diffusion, initial and source apply to problem = custom only".into(),
            ));
        }
        validate(&cfg)?;
        Ok(cfg)
    }
}

/// Number of interior nodes per direction for `h = 2^exp`.
pub fn interior_nodes(extent: f64, h_exp: i32) -> Option<usize> {
    let cells = extent * 2f64.powi(-h_exp);
    let rounded = cells.round();
    if (cells - rounded).abs() > 1e-9 * cells.max(1.0) || rounded < 2.0 {
        None
    } else {
        Some(rounded as usize - 1)
    }
}

pub fn time_steps(t_end: f64, tau_exp: i32) -> Option<usize> {
    interior_nodes(t_end, tau_exp).map(|n| n + 1)
}

fn validate(cfg: &ExperimentConfig) -> Result<()> {
    let bad = |m: String| Err(HarnessError::Config(m));
    if !(cfg.alpha > 1.0 && cfg.alpha < 2.0) {
        return bad(format!("alpha = {} outside (1, 2)", cfg.alpha));
    }
    if cfg.problem.is_2d() {
        match cfg.beta {
            Some(b) if b > 1.0 && b < 2.0 => {}
            Some(b) => return bad(format!("beta = {b} outside (1, 2)")),
            None => return bad("example2 needs beta".into()),
        }
    } else if cfg.beta.is_some() {
        return bad("beta applies to two-dimensional problems only".into());
    }
    if cfg.h_exps.is_empty() || cfg.tau_exps.is_empty() {
        return bad("ladders must be nonempty".into());
    }
    if !(cfg.gmres_tol > 0.0 && cfg.gmres_tol < 1.0) {
        return bad(format!("gmres_tol = {} outside (0, 1)", cfg.gmres_tol));
    }
    if cfg.gmres_max_iter == 0 || cfg.mg_cycles == 0 {
        return bad("gmres_max_iter and mg_cycles must be positive".into());
    }
    if cfg.threads == Some(0) {
        return bad("threads must be positive".into());
    }
    if let ProblemId::Custom(c) = &cfg.problem {
        if !(c.x_right > c.x_left) || !(c.t_end > 0.0) {
            return bad("custom problem needs x_left < x_right and t_end > 0".into());
        }
        if !(c.diffusion.min_value() > 0.0) {
            return bad("tabulated diffusion must be strictly positive".into());
        }
        if !c.source.is_finite() {
            return bad("source must be finite".into());
        }
    }
    let extent = cfg.problem.extent();
    for &e in &cfg.h_exps {
        let m = interior_nodes(extent, e)
            .ok_or_else(|| HarnessError::Config(format!("h = 2^{e} does not divide the domain into >= 2 cells")))?;
        let total = if cfg.problem.is_2d() { m.saturating_mul(m) } else { m };
        let limit = if cfg.problem.is_2d() { MAX_NODES_2D } else { MAX_NODES_1D };
        if total > limit {
            return bad(format!("h = 2^{e} gives {total} unknowns, above the guard {limit}"));
        }
    }
    let t_end = cfg.problem.t_end();
    for &e in &cfg.tau_exps {
        if time_steps(t_end, e).is_none() {
            return bad(format!("tau = 2^{e} does not divide [0, {t_end}] into >= 2 steps"));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn extent(&self) -> f64 {
        self.problem.extent()
    }

    pub fn t_end(&self) -> f64 {
        self.problem.t_end()
    }

    /// Explicit `refine`, else space when the h ladder has several entries.
    pub fn refine_axis(&self) -> Refine {
        self.refine.unwrap_or(if self.h_exps.len() > 1 || self.tau_exps.len() == 1 {
            Refine::Space
        } else {
            Refine::Time
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(text: &str) -> Result<ExperimentConfig> {
        let mut b = ConfigBuilder::new();
        b.read_str(text, "test")?;
        b.finish()
    }

    #[test]
    fn ladders() {
        assert_eq!(parse_ladder("-4..-6").unwrap(), vec![-4, -5, -6]);
        assert_eq!(parse_ladder("-6..-4").unwrap(), vec![-6, -5, -4]);
        assert_eq!(parse_ladder("-8, -9").unwrap(), vec![-8, -9]);
        assert_eq!(parse_ladder(" -7 ").unwrap(), vec![-7]);
        assert!(parse_ladder("").is_err());
        assert!(parse_ladder("a..b").is_err());
    }

    #[test]
    fn parses_example_file() {
        let cfg = build("# comment\nproblem = example2\nalpha=1.5\nbeta = 1.8 # trailing\nh_exp = -4..-5\ntau_exp=-7\nsolver = plu\ngmres_baseline = b\n")
            .unwrap();
        assert_eq!(cfg.problem, ProblemId::Example2);
        assert_eq!(cfg.beta, Some(1.8));
        assert_eq!(cfg.h_exps, vec![-4, -5]);
        assert_eq!(cfg.solver, SolverKind::Plu);
        assert_eq!(cfg.baseline, ResidualBaseline::RightHandSide);
        assert_eq!(cfg.refine_axis(), Refine::Space);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(build("alpha = 2.5"), Err(HarnessError::Config(_))));
        assert!(matches!(build("nonsense = 1"), Err(HarnessError::Parse { line: 1, .. })));
        assert!(matches!(build("alpha"), Err(HarnessError::Parse { .. })));
        assert!(build("problem = example2\nalpha = 1.5").is_err());
        assert!(build("beta = 1.5").is_err());
        assert!(build("diffusion = 0:1").is_err());
        assert!(build("problem = custom").is_err());
        assert!(build("problem = custom\ndiffusion = 0:1, 1:-1").is_err());
    }

    #[test]
    fn memory_guard() {
        assert!(build("h_exp = -15").is_ok());
        assert!(build("h_exp = -16").is_err());
        assert!(build("problem = example2\nalpha=1.5\nbeta=1.5\nh_exp = -8").is_ok());
        assert!(build("problem = example2\nalpha=1.5\nbeta=1.5\nh_exp = -9").is_err());
        assert!(build("h_exp = 0").is_err());
    }

    #[test]
    fn node_counts() {
        assert_eq!(interior_nodes(1.0, -8), Some(255));
        assert_eq!(interior_nodes(2.0, -4), Some(31));
        assert_eq!(interior_nodes(1.5, -1), Some(2));
        assert_eq!(interior_nodes(1.3, -1), None);
        assert_eq!(time_steps(1.0, -10), Some(1024));
    }

    #[test]
    fn tables_interpolate() {
        let t = Table::parse("0:1, 0.5:3, 1:2").unwrap();
        assert_eq!(t.eval(-1.0), 1.0);
        assert_eq!(t.eval(0.25), 2.0);
        assert_eq!(t.eval(0.75), 2.5);
        assert_eq!(t.eval(2.0), 2.0);
        assert!(Table::parse("1:1, 0:2").is_err());
        assert!(Table::parse("1;1").is_err());
    }

    #[test]
    fn custom_problem_and_overrides() {
        let mut b = ConfigBuilder::new();
        b.read_str("problem = custom\ndiffusion = 0:2, 1:2\nsource = 1", "t").unwrap();
        b.apply_override("tau_exp=-3..-5").unwrap();
        assert!(b.apply_override("tau_exp").is_err());
        let cfg = b.finish().unwrap();
        assert!(!cfg.problem.has_exact());
        assert_eq!(cfg.tau_exps, vec![-3, -4, -5]);
        assert_eq!(cfg.refine_axis(), Refine::Time);
    }
}
