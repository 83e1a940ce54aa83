//! Flat JSON and CSV records with a fixed field order.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde_json::Value;

use crate::run::Outcome;
use crate::HarnessError;

/// Significant digits kept for every real field.
pub const SIG_DIGITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(HarnessError::Usage(format!("unknown format '{s}', expected json or csv"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
        })
    }
}

/// Rounds to [`SIG_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

fn real(x: f64) -> Value {
    serde_json::Number::from_f64(round_sig(x)).map_or(Value::Null, Value::Number)
}

fn opt_real(x: Option<f64>) -> Value {
    x.map_or(Value::Null, real)
}

fn grain_fields(law: Option<&hypervis_core::closedform::GrainLaw>) -> [(&'static str, Value); 2] {
    match law {
        Some(l) => {
            let params: Vec<String> = l.params().into_iter().map(|p| real(p).to_string()).collect();
            [
                ("grain_kind", Value::from(l.kind_label())),
                ("grain_params", Value::from(params.join(";"))),
            ]
        }
        None => [("grain_kind", Value::Null), ("grain_params", Value::Null)],
    }
}

/// The outcome as ordered `(field, value)` pairs.
pub fn fields(outcome: &Outcome, runtime_ms: Option<u128>) -> Vec<(&'static str, Value)> {
    let mut out: Vec<(&'static str, Value)> = match outcome {
        Outcome::Estimate(r) => {
            let mut v = vec![
                ("quantity", Value::from(r.quantity.as_str())),
                ("dim", Value::from(r.dim)),
                ("gamma", real(r.gamma)),
            ];
            v.extend(grain_fields(r.grain.as_ref()));
            v.extend([
                ("estimate", real(r.estimate)),
                ("stderr", real(r.stderr)),
                ("n_reps", Value::from(r.n_reps)),
                ("n_rays", Value::from(r.n_rays)),
                ("censored_fraction", real(r.censored_fraction)),
                ("closed_form", opt_real(r.closed_form)),
                ("z_score", opt_real(r.z_score)),
                ("seed", Value::from(r.seed)),
            ]);
            v
        }
        Outcome::Ks(k) => {
            let mut v = vec![
                ("quantity", Value::from(k.quantity.name())),
                ("dim", Value::from(k.dim)),
                ("gamma", real(k.gamma)),
            ];
            v.extend(grain_fields(k.grain.as_ref()));
            v.extend([
                ("rate", real(k.rate)),
                ("statistic", real(k.ks.statistic)),
                ("n", Value::from(k.ks.n)),
                ("critical_1pct", real(k.ks.critical_1pct)),
                ("pass", Value::from(k.ks.pass)),
                ("censored_fraction", real(k.censored_fraction)),
                ("seed", Value::from(k.seed)),
            ]);
            v
        }
        Outcome::Formula(f) => vec![
            ("quantity", Value::from("formula_check")),
            ("ell_residual", real(f.ell_residual)),
            ("integral_rel_error", real(f.integral_rel_error)),
            ("steiner_residual", real(f.steiner_residual)),
            ("pass", Value::from(f.pass)),
        ],
    };
    out.push(("runtime_ms", runtime_ms.map_or(Value::Null, |ms| Value::from(ms as u64))));
    out
}

pub fn to_json(outcome: &Outcome, runtime_ms: Option<u128>) -> String {
    let body: Vec<String> = fields(outcome, runtime_ms)
        .into_iter()
        .map(|(k, v)| format!("{}:{}", Value::from(k), v))
        .collect();
    format!("{{{}}}\n", body.join(","))
}

fn csv_cell(v: &Value) -> String {
    let raw = match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    if raw.contains([',', '"', '\n']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw
    }
}

/// Header line and one data line.
pub fn to_csv(outcome: &Outcome, runtime_ms: Option<u128>) -> String {
    let f = fields(outcome, runtime_ms);
    let header: Vec<&str> = f.iter().map(|(k, _)| *k).collect();
    let row: Vec<String> = f.iter().map(|(_, v)| csv_cell(v)).collect();
    format!("{}\n{}\n", header.join(","), row.join(","))
}

pub fn render(outcome: &Outcome, format: Format, runtime_ms: Option<u128>) -> String {
    match format {
        Format::Json => to_json(outcome, runtime_ms),
        Format::Csv => to_csv(outcome, runtime_ms),
    }
}

pub fn emit<W: Write>(outcome: &Outcome, format: Format, runtime_ms: Option<u128>, out: &mut W) -> Result<(), HarnessError> {
    out.write_all(render(outcome, format, runtime_ms).as_bytes())?;
    Ok(())
}
