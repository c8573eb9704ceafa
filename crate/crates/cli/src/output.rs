//! CSV and JSON writers. Floats in CSV use 17 significant digits so files
//! round-trip exactly and diff cleanly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use rkadapt::integrator::{IntegrationTrace, Snapshot};

pub fn float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn opt_float(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, &text)
}

pub const TRACE_COLUMNS: [&str; 15] = [
    "t",
    "dt",
    "status",
    "adapted",
    "order",
    "delta",
    "delta_max",
    "err_t",
    "err",
    "weight_change",
    "min_unadapted",
    "min_adapted",
    "bound_slack",
    "lp_solves",
    "active_enlargements",
];

/// One row per attempted step, followed by one `drift_<label>` column per
/// invariant.
pub fn trace_csv(trace: &IntegrationTrace) -> String {
    let mut out = TRACE_COLUMNS.join(",");
    for label in &trace.invariant_labels {
        write!(out, ",drift_{label}").unwrap();
    }
    out.push('\n');
    for r in &trace.steps {
        let cells = [
            float(r.t),
            float(r.dt),
            r.status.as_str().to_string(),
            u8::from(r.adapted).to_string(),
            r.order.to_string(),
            float(r.delta),
            float(r.delta_max),
            opt_float(r.err_t),
            opt_float(r.err),
            float(r.weight_change),
            float(r.min_unadapted),
            float(r.min_adapted),
            float(r.bound_slack),
            r.lp_solves.to_string(),
            r.active_enlargements.to_string(),
        ];
        out.push_str(&cells.join(","));
        for d in &r.invariant_drift {
            out.push(',');
            out.push_str(&float(*d));
        }
        out.push('\n');
    }
    out
}

pub fn snapshot_name(t: f64) -> String {
    format!("solution_{t}.csv")
}

pub fn snapshot_csv(s: &Snapshot) -> String {
    let mut out = String::from("index,value\n");
    for (i, v) in s.state.iter().enumerate() {
        writeln!(out, "{i},{}", float(*v)).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(float(0.1), "1.0000000000000001e-1");
        assert_eq!(float(-2.5), "-2.5000000000000000e0");
        assert_eq!(float(f64::NEG_INFINITY), "-inf");
        for x in [std::f64::consts::PI, 1e-300, 123456.789] {
            assert_eq!(float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn snapshot_names() {
        assert_eq!(snapshot_name(0.5), "solution_0.5.csv");
        assert_eq!(snapshot_name(302400.0), "solution_302400.csv");
    }
}
