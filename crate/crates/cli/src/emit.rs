//! Result tables and their CSV / JSON encodings.
//!
//! CSV floats use C's `%g` with six significant digits, so identical inputs
//! give identical bytes (apart from the timing column).

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Format;
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub alpha: f64,
    pub beta: Option<f64>,
    pub h_exp: i32,
    pub tau_exp: i32,
    pub solver: String,
    /// Mean GMRES iterations per step; absent for direct solves.
    pub iter_mean: Option<f64>,
    pub cpu_s: f64,
    pub error: Option<f64>,
    /// Against the previous row on the refinement axis.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralRow {
    pub alpha: f64,
    pub beta: Option<f64>,
    pub h_exp: i32,
    pub tau_exp: i32,
    pub s_check: Option<f64>,
    pub s_hat: Option<f64>,
    /// Extremes of the squared singular values of `A P^-1`.
    pub sigma2_min: f64,
    pub sigma2_max: f64,
    pub contained: Option<bool>,
    pub fov_holds: Option<bool>,
    pub assumptions_hold: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectralTable {
    pub rows: Vec<SpectralRow>,
}

/// Header plus stringified rows.
pub trait Tabular: Serialize {
    fn header(&self) -> &'static [&'static str];
    fn cells(&self) -> Vec<Vec<String>>;
}

/// `printf("%g")` with six significant digits.
pub fn format_g(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{v:.*}", (5 - exp) as usize)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_g).unwrap_or_default()
}

fn opt_bool(v: Option<bool>) -> String {
    v.map(|b| b.to_string()).unwrap_or_default()
}

impl Tabular for ResultTable {
    fn header(&self) -> &'static [&'static str] {
        &["alpha", "beta", "h_exp", "tau_exp", "solver", "iter_mean", "cpu_s", "error", "rate"]
    }

    fn cells(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    format_g(r.alpha),
                    opt(r.beta),
                    r.h_exp.to_string(),
                    r.tau_exp.to_string(),
                    r.solver.clone(),
                    opt(r.iter_mean),
                    format_g(r.cpu_s),
                    opt(r.error),
                    opt(r.rate),
                ]
            })
            .collect()
    }
}

impl Tabular for SpectralTable {
    fn header(&self) -> &'static [&'static str] {
        &[
            "alpha",
            "beta",
            "h_exp",
            "tau_exp",
            "s_check",
            "s_hat",
            "sigma2_min",
            "sigma2_max",
            "contained",
            "fov_holds",
            "assumptions_hold",
        ]
    }

    fn cells(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    format_g(r.alpha),
                    opt(r.beta),
                    r.h_exp.to_string(),
                    r.tau_exp.to_string(),
                    opt(r.s_check),
                    opt(r.s_hat),
                    format_g(r.sigma2_min),
                    format_g(r.sigma2_max),
                    opt_bool(r.contained),
                    opt_bool(r.fov_holds),
                    r.assumptions_hold.to_string(),
                ]
            })
            .collect()
    }
}

pub fn to_csv<T: Tabular>(table: &T) -> String {
    let mut out = table.header().join(",");
    out.push('\n');
    for row in table.cells() {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn to_json<T: Tabular>(table: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(table)?;
    s.push('\n');
    Ok(s)
}

pub fn result_table_from_json(s: &str) -> Result<ResultTable> {
    Ok(serde_json::from_str(s)?)
}

pub fn render<T: Tabular>(table: &T, format: Format) -> Result<String> {
    match format {
        Format::Csv => Ok(to_csv(table)),
        Format::Json => to_json(table),
    }
}

/// Writes to `path`, or to stdout when `None`.
pub fn emit<T: Tabular>(table: &T, format: Format, path: Option<&Path>) -> Result<()> {
    let text = render(table, format)?;
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| HarnessError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|source| HarnessError::Io {
                path: "<stdout>".into(),
                source,
            })
        }
    }
}
