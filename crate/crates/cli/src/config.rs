//! Experiment configuration: a JSON file merged with command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use rkadapt::integrator::{AdaptationMode, IntegratorConfig};
use rkadapt::problems::{self, OdeProblem};
use rkadapt::stability::{Rectangle, DEFAULT_RESOLUTION};
use rkadapt::tableau::{builtin_by_name, ButcherTableau};

/// Values swept by `convergence`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    Dt(Vec<f64>),
    Tol(Vec<f64>),
}

/// Grid and weights for `stability`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityGrid {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    #[serde(default = "default_resolution")]
    pub nx: usize,
    #[serde(default = "default_resolution")]
    pub ny: usize,
    /// `"b"`, the label of an embedded vector, or explicit weights.
    #[serde(default)]
    pub weights: Option<WeightSpec>,
}

fn default_resolution() -> usize {
    DEFAULT_RESOLUTION
}

impl Default for StabilityGrid {
    fn default() -> Self {
        StabilityGrid {
            re_min: -6.0,
            re_max: 2.0,
            im_min: -4.0,
            im_max: 4.0,
            nx: DEFAULT_RESOLUTION,
            ny: DEFAULT_RESOLUTION,
            weights: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Label(String),
    Values(Vec<f64>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub problem: Option<String>,
    /// Grid size for the semidiscretized problems.
    pub n: Option<usize>,
    /// Overrides the problem's final time.
    pub t_end: Option<f64>,
    pub method: Option<String>,
    pub dt: Option<f64>,
    pub tol: Option<f64>,
    pub adaptation: Option<String>,
    pub p_start: Option<usize>,
    pub p_min: Option<usize>,
    pub tol_delta: Option<f64>,
    pub atol: Option<f64>,
    pub rtol: Option<f64>,
    pub output_times: Vec<f64>,
    pub max_attempts: Option<usize>,
    pub out: Option<PathBuf>,
    pub sweep: Option<Sweep>,
    pub seed: Option<u64>,
    /// Random draws per property in `selftest`.
    pub draws: Option<usize>,
    pub stability: Option<StabilityGrid>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn problem(&self) -> Result<OdeProblem> {
        let name = self.problem.as_deref().context("no problem given (use --problem)")?;
        let mut p = match (name, self.n) {
            (_, None) => problems::by_name(name)?,
            ("advection-decay", Some(n)) => problems::advection_decay(n),
            ("diffusion", Some(n)) => problems::diffusion(n),
            ("adr", Some(n)) => problems::adr(n),
            (_, Some(_)) => bail!("problem '{name}' has no grid size"),
        };
        if let Some(t) = self.t_end {
            if !(t > p.t0) {
                bail!("t_end {t} must exceed the initial time {}", p.t0);
            }
            let t0 = p.t0;
            p = p.with_time_span(t0, t);
        }
        Ok(p)
    }

    pub fn tableau(&self) -> Result<ButcherTableau> {
        let name = self.method.as_deref().context("no method given (use --method)")?;
        Ok(builtin_by_name(name)?)
    }

    pub fn adaptation(&self) -> Result<AdaptationMode> {
        match &self.adaptation {
            None => Ok(AdaptationMode::Off),
            Some(s) => s.parse().map_err(anyhow::Error::msg),
        }
    }

    /// Integrator settings with the given step size or tolerance. Exactly
    /// one of the two must be set.
    pub fn integrator(&self, dt: Option<f64>, tol: Option<f64>) -> Result<IntegratorConfig> {
        let mut cfg = match (dt, tol) {
            (Some(dt), None) => IntegratorConfig::fixed(dt),
            (None, Some(tol)) => IntegratorConfig::adaptive(tol),
            (Some(_), Some(_)) => bail!("give either a step size or a tolerance, not both"),
            (None, None) => bail!("give a step size (--dt) or a tolerance (--tol)"),
        };
        cfg.adaptation = self.adaptation()?;
        cfg.p_start = self.p_start;
        if let Some(p) = self.p_min {
            cfg.p_min = p;
        }
        cfg.tol_delta = self.tol_delta;
        cfg.atol = self.atol;
        cfg.rtol = self.rtol;
        cfg.output_times = self.output_times.clone();
        if let Some(m) = self.max_attempts {
            cfg.max_attempts = m;
        }
        Ok(cfg)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn stability_grid(&self) -> Result<(StabilityGrid, Rectangle)> {
        let g = self.stability.clone().unwrap_or_default();
        if g.nx < 2 || g.ny < 2 {
            bail!("stability grid needs at least 2 nodes per axis");
        }
        if !(g.re_min < g.re_max && g.im_min < g.im_max) {
            bail!("empty stability rectangle");
        }
        let rect = Rectangle::new(g.re_min, g.re_max, g.im_min, g.im_max);
        Ok((g, rect))
    }
}
