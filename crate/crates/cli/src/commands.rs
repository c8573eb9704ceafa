use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use rkadapt::integrator::{integrate, IntegrationError, IntegrationTrace, IntegratorConfig, StepMode};
use rkadapt::order::{dof_table, dof_table_csv};
use rkadapt::problems::reference_solution;
use rkadapt::stability::sample_region;

use crate::config::{ExperimentConfig, Sweep, WeightSpec};
use crate::output::{self, float};

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Contents of `summary.json`. Every key is listed in `docs/output-schema.md`.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub problem: String,
    pub method: String,
    pub adaptation: String,
    pub mode: String,
    pub dt: Option<f64>,
    pub tol: Option<f64>,
    pub completed: bool,
    pub error: Option<String>,
    pub t0: f64,
    pub t_end: f64,
    pub final_time: f64,
    pub steps_total: usize,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub rejections: BTreeMap<String, usize>,
    pub steps_adapted: usize,
    pub min_unadapted: Option<f64>,
    pub min_accepted: Option<f64>,
    pub states_below_bound: usize,
    pub max_invariant_drift: BTreeMap<String, f64>,
    pub lp_solves: usize,
    pub max_active_enlargements: usize,
    pub min_adapted_order: Option<usize>,
    pub max_delta_over_err_t: Option<f64>,
    pub snapshots: Vec<String>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn summarize(
    trace: &IntegrationTrace,
    cfg: &IntegratorConfig,
    span: (f64, f64),
    error: Option<String>,
    snapshots: Vec<String>,
) -> RunSummary {
    let (mode, dt, tol) = match cfg.mode {
        StepMode::Fixed { dt } => ("fixed", Some(dt), None),
        StepMode::Adaptive { tol, .. } => ("adaptive", None, Some(tol)),
    };
    let mut rejections = BTreeMap::new();
    for r in trace.steps.iter().filter(|r| !r.accepted()) {
        *rejections.entry(r.status.as_str().to_string()).or_insert(0) += 1;
    }
    let adapted = || trace.accepted().filter(|r| r.adapted);
    let ratios = adapted().filter_map(|r| r.err_t.filter(|e| *e > 0.0).map(|e| r.delta / e));
    RunSummary {
        problem: trace.problem.clone(),
        method: trace.method.clone(),
        adaptation: cfg.adaptation.as_str().into(),
        mode: mode.into(),
        dt,
        tol,
        completed: trace.completed,
        error,
        t0: span.0,
        t_end: span.1,
        final_time: trace.final_time,
        steps_total: trace.steps.len(),
        steps_accepted: trace.accepted_count(),
        steps_rejected: trace.rejected_count(),
        rejections,
        steps_adapted: trace.adapted_count(),
        min_unadapted: finite(trace.min_unadapted_component()),
        min_accepted: finite(trace.min_accepted_component()),
        states_below_bound: trace.accepted().filter(|r| r.min_adapted < -r.bound_slack).count(),
        max_invariant_drift: trace
            .invariant_labels
            .iter()
            .cloned()
            .zip(trace.max_relative_invariant_drift())
            .collect(),
        lp_solves: trace.steps.iter().map(|r| r.lp_solves).sum(),
        max_active_enlargements: trace.steps.iter().map(|r| r.active_enlargements).max().unwrap_or(0),
        min_adapted_order: adapted().map(|r| r.order).min(),
        max_delta_over_err_t: ratios.reduce(f64::max),
        snapshots,
    }
}

pub struct RunOutcome {
    pub summary: RunSummary,
    pub dir: PathBuf,
}

/// Integrate once and write `trace.csv`, `solution_<t>.csv` and
/// `summary.json`. On integration failure the partial trace is written
/// before the error is returned.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let problem = cfg.problem()?;
    let tableau = cfg.tableau()?;
    let mut icfg = cfg.integrator(cfg.dt, cfg.tol)?;
    // the final state is always stored
    if !icfg.output_times.contains(&problem.t_end) {
        icfg.output_times.push(problem.t_end);
    }
    let dir = cfg.out_dir();
    prepare_dir(&dir)?;
    let result = integrate(&problem, &tableau, &icfg);
    let (trace, error) = match &result {
        Ok(t) => (t, None),
        Err(IntegrationError::Config(m)) => bail!("invalid configuration: {m}"),
        Err(e) => (e.partial_trace().expect("failures carry a trace"), Some(e.to_string())),
    };
    output::write(&dir.join("trace.csv"), &output::trace_csv(trace))?;
    let mut names = Vec::new();
    for s in &trace.snapshots {
        let name = output::snapshot_name(s.t);
        output::write(&dir.join(&name), &output::snapshot_csv(s))?;
        names.push(name);
    }
    let summary = summarize(trace, &icfg, (problem.t0, problem.t_end), error.clone(), names);
    output::write_json(&dir.join("summary.json"), &summary)?;
    if let Some(e) = error {
        bail!("{e} (partial trace written to {})", dir.display());
    }
    Ok(RunOutcome { summary, dir })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergencePoint {
    pub dt: Option<f64>,
    pub tol: Option<f64>,
    pub error: Option<f64>,
    pub steps_accepted: usize,
    pub steps_adapted: usize,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceSummary {
    pub problem: String,
    pub method: String,
    pub adaptation: String,
    pub points: Vec<ConvergencePoint>,
    /// Points in the unadapted tail, smallest parameters last.
    pub tail_points: usize,
    pub tail_slope: Option<f64>,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Sweep step sizes or tolerances and measure the final-time error against
/// the problem's reference. Writes `convergence.csv` and
/// `convergence.json`.
pub fn convergence(cfg: &ExperimentConfig) -> Result<ConvergenceSummary> {
    let problem = cfg.problem()?;
    let tableau = cfg.tableau()?;
    let sweep = match &cfg.sweep {
        Some(s) => s.clone(),
        None => bail!("convergence needs a sweep (\"sweep\": {{\"dt\": [...]}} or {{\"tol\": [...]}} in the config)"),
    };
    let params: Vec<(Option<f64>, Option<f64>)> = match &sweep {
        Sweep::Dt(v) => v.iter().map(|&d| (Some(d), None)).collect(),
        Sweep::Tol(v) => v.iter().map(|&t| (None, Some(t))).collect(),
    };
    if params.is_empty() {
        bail!("empty sweep");
    }
    let reference = reference_solution(&problem, problem.t_end)?;
    let configs = params.iter().map(|&(d, t)| cfg.integrator(d, t)).collect::<Result<Vec<_>>>()?;
    let mut points: Vec<ConvergencePoint> = configs
        .par_iter()
        .zip(&params)
        .map(|(icfg, &(dt, tol))| match integrate(&problem, &tableau, icfg) {
            Ok(tr) => ConvergencePoint {
                dt,
                tol,
                error: Some((tr.final_state() - &reference).amax()),
                steps_accepted: tr.accepted_count(),
                steps_adapted: tr.adapted_count(),
                failure: None,
            },
            Err(e) => ConvergencePoint {
                dt,
                tol,
                error: None,
                steps_accepted: e.partial_trace().map_or(0, |t| t.accepted_count()),
                steps_adapted: e.partial_trace().map_or(0, |t| t.adapted_count()),
                failure: Some(e.to_string()),
            },
        })
        .collect();
    let key = |p: &ConvergencePoint| p.dt.or(p.tol).unwrap_or(0.0);
    points.sort_by(|a, b| key(b).total_cmp(&key(a)));

    let tail: Vec<(f64, f64)> = points
        .iter()
        .rev()
        .take_while(|p| p.steps_adapted == 0 && p.error.is_some_and(|e| e > 0.0))
        .map(|p| (key(p), p.error.unwrap()))
        .collect();
    let summary = ConvergenceSummary {
        problem: problem.name.clone(),
        method: tableau.name.clone(),
        adaptation: cfg.adaptation()?.as_str().into(),
        tail_points: tail.len(),
        tail_slope: loglog_slope(&tail),
        points,
    };

    let dir = cfg.out_dir();
    prepare_dir(&dir)?;
    let mut csv = String::from("parameter,value,error,steps_accepted,steps_adapted,adapted\n");
    let name = if matches!(sweep, Sweep::Dt(_)) { "dt" } else { "tol" };
    for p in &summary.points {
        writeln!(
            csv,
            "{name},{},{},{},{},{}",
            float(key(p)),
            p.error.map(float).unwrap_or_default(),
            p.steps_accepted,
            p.steps_adapted,
            u8::from(p.steps_adapted > 0)
        )
        .unwrap();
    }
    output::write(&dir.join("convergence.csv"), &csv)?;
    output::write_json(&dir.join("convergence.json"), &summary)?;
    Ok(summary)
}

/// Degrees-of-freedom table as CSV; written to `dof_table.csv` when an
/// output directory is configured.
pub fn dof(cfg: &ExperimentConfig) -> Result<String> {
    let csv = dof_table_csv(&dof_table());
    if cfg.out.is_some() {
        let dir = cfg.out_dir();
        prepare_dir(&dir)?;
        output::write(&dir.join("dof_table.csv"), &csv)?;
    }
    Ok(csv)
}

/// Sample `|R(z)|` on the configured grid and write `stability.csv`.
pub fn stability(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let tableau = cfg.tableau()?;
    let (grid, rect) = cfg.stability_grid()?;
    let w = match &grid.weights {
        None => tableau.b.clone(),
        Some(WeightSpec::Label(l)) if l == "b" => tableau.b.clone(),
        Some(WeightSpec::Label(l)) => match tableau.embedded_by_label(l) {
            Some(e) => e.weights.clone(),
            None => bail!("{} has no embedded weights labelled '{l}'", tableau.name),
        },
        Some(WeightSpec::Values(v)) => {
            if v.len() != tableau.stages() {
                bail!("{} weights given for {} stages", v.len(), tableau.stages());
            }
            nalgebra::DVector::from_vec(v.clone())
        }
    };
    let sample = sample_region(&tableau, &w, rect, grid.nx, grid.ny);
    let mut csv = String::from("re,im,abs_r,stable\n");
    for (z, v) in sample.iter() {
        writeln!(csv, "{},{},{},{}", float(z.re), float(z.im), float(v), u8::from(v <= 1.0 + rkadapt::stability::REGION_SLACK)).unwrap();
    }
    let dir = cfg.out_dir();
    prepare_dir(&dir)?;
    let path = dir.join("stability.csv");
    output::write(&path, &csv)?;
    Ok(path)
}
