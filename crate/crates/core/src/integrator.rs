//! Time stepping with bound-preserving weight adaptation.
//!
//! Each step computes the stages, forms the unadapted update and accepts it
//! when it is within bounds. Otherwise the target order `p~` is lowered from
//! `p_start` to `p_min`, solving an adaptation LP at each order, and the first
//! feasible solution whose perturbation stays below `tol_delta` is taken. If
//! no order works the step is halved. In adaptive mode the accepted candidate
//! must then pass error control with `err = err_T + delta`, where `err_T` is
//! the embedded estimate for the original weights and `delta` the size of the
//! perturbation `dt F (b~ - b)`.

use nalgebra::{DMatrix, DVector};

use crate::adapt::{
    bound_tolerance, convex_adapt, detection_tolerance, free_adapt, AdaptError, AdaptationRequest, AdaptationStatus,
    CandidateSet,
};
use crate::order::{assemble, OrderConditionSystem, MAX_ORDER};
use crate::problems::OdeProblem;
use crate::stepper::{combine, compute_stages_cached, NewtonCache};
use crate::tableau::{ButcherTableau, EmbeddedWeights};

/// Safety factor of the step-size controller.
pub const SAFETY: f64 = 0.9;
pub const MIN_FACTOR: f64 = 0.2;
pub const MAX_FACTOR: f64 = 5.0;
/// Default cap on step attempts (accepted plus rejected).
pub const MAX_ATTEMPTS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepMode {
    Fixed { dt: f64 },
    Adaptive { dt0: f64, tol: f64, dt_min: f64, dt_max: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AdaptationMode {
    Off,
    Free,
    Convex,
}

impl AdaptationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AdaptationMode::Off => "off",
            AdaptationMode::Free => "free",
            AdaptationMode::Convex => "convex",
        }
    }
}

impl std::str::FromStr for AdaptationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "off" | "none" => Ok(AdaptationMode::Off),
            "free" => Ok(AdaptationMode::Free),
            "convex" => Ok(AdaptationMode::Convex),
            _ => Err(format!("unknown adaptation mode '{s}' (expected off, free or convex)")),
        }
    }
}

/// Vector norm used for error control.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Norm {
    Max,
    /// `sqrt(mean((v_i / sc_i)^2))` with `sc_i = atol + rtol max(|u_i|, |u~_i|)`.
    WeightedRms { atol: f64, rtol: f64 },
}

impl Norm {
    pub fn measure(&self, v: &DVector<f64>, u_old: &DVector<f64>, u_new: &DVector<f64>) -> f64 {
        match *self {
            Norm::Max => v.amax(),
            Norm::WeightedRms { atol, rtol } => {
                let n = v.len().max(1) as f64;
                let sum: f64 = (0..v.len())
                    .map(|i| {
                        let sc = atol + rtol * u_old[i].abs().max(u_new[i].abs());
                        (v[i] / sc).powi(2)
                    })
                    .sum();
                (sum / n).sqrt()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub mode: StepMode,
    pub adaptation: AdaptationMode,
    /// Defaults to the tableau's order (capped at the highest supported).
    pub p_start: Option<usize>,
    pub p_min: usize,
    /// Perturbation cap in solution units (max norm). Defaults to `tol` in
    /// adaptive mode and `1e-2 ||u||_inf` in fixed mode.
    pub tol_delta: Option<f64>,
    pub atol: Option<f64>,
    pub rtol: Option<f64>,
    /// Times at which to store the solution.
    pub output_times: Vec<f64>,
    /// Candidate weights for convex adaptation; defaults to `b` plus every
    /// embedded vector.
    pub candidates: Option<CandidateSet>,
    pub max_attempts: usize,
}

impl IntegratorConfig {
    pub fn fixed(dt: f64) -> Self {
        IntegratorConfig {
            mode: StepMode::Fixed { dt },
            adaptation: AdaptationMode::Off,
            p_start: None,
            p_min: 1,
            tol_delta: None,
            atol: None,
            rtol: None,
            output_times: Vec::new(),
            candidates: None,
            max_attempts: MAX_ATTEMPTS,
        }
    }

    /// Adaptive stepping with `dt0 = tol`, `dt_min = 1e-14` and no upper
    /// limit. Adjust `mode` for other choices.
    pub fn adaptive(tol: f64) -> Self {
        IntegratorConfig {
            mode: StepMode::Adaptive { dt0: tol, tol, dt_min: 1e-14, dt_max: f64::INFINITY },
            ..IntegratorConfig::fixed(0.0)
        }
    }

    pub fn with_adaptation(mut self, mode: AdaptationMode) -> Self {
        self.adaptation = mode;
        self
    }

    pub fn with_orders(mut self, p_start: usize, p_min: usize) -> Self {
        self.p_start = Some(p_start);
        self.p_min = p_min;
        self
    }

    pub fn with_output_times(mut self, times: Vec<f64>) -> Self {
        self.output_times = times;
        self
    }

    pub fn with_dt0(mut self, dt: f64) -> Self {
        if let StepMode::Adaptive { dt0, .. } = &mut self.mode {
            *dt0 = dt;
        }
        self
    }

    pub fn with_dt_limits(mut self, min: f64, max: f64) -> Self {
        if let StepMode::Adaptive { dt_min, dt_max, .. } = &mut self.mode {
            *dt_min = min;
            *dt_max = max;
        }
        self
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self.mode, StepMode::Adaptive { .. })
    }

    pub fn norm(&self) -> Norm {
        match self.mode {
            StepMode::Fixed { .. } => Norm::Max,
            StepMode::Adaptive { tol, .. } => {
                Norm::WeightedRms { atol: self.atol.unwrap_or(tol), rtol: self.rtol.unwrap_or(tol) }
            }
        }
    }

    fn validate(&self, tableau: &ButcherTableau) -> Result<(), IntegrationError> {
        let bad = |m: String| Err(IntegrationError::Config(m));
        if !tableau.structure.is_runnable() {
            return bad(format!("{} is fully implicit; only explicit and diagonally implicit tableaux run", tableau.name));
        }
        if self.p_min < 1 {
            return bad("p_min must be at least 1".into());
        }
        if let Some(p) = self.p_start {
            if p < self.p_min {
                return bad(format!("p_start {p} is below p_min {}", self.p_min));
            }
            if p > MAX_ORDER {
                return bad(format!("p_start {p} exceeds the supported maximum {MAX_ORDER}"));
            }
        }
        if let Some(t) = self.tol_delta {
            if !(t > 0.0) {
                return bad("tol_delta must be positive".into());
            }
        }
        match self.mode {
            StepMode::Fixed { dt } => {
                if !(dt > 0.0) || !dt.is_finite() {
                    return bad(format!("step size {dt} must be positive"));
                }
            }
            StepMode::Adaptive { dt0, tol, dt_min, dt_max } => {
                if !(tol > 0.0) || !(dt0 > 0.0) || !(dt_min > 0.0) {
                    return bad("tol, dt0 and dt_min must be positive".into());
                }
                if dt_min >= dt_max {
                    return bad(format!("dt_min {dt_min} must be below dt_max {dt_max}"));
                }
                if tableau.error_estimator().is_none() {
                    return bad(format!("{} has no embedded weights for error control", tableau.name));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StepStatus {
    Accepted,
    RejectedError,
    RejectedPerturbation,
    RejectedInfeasible,
    /// A stage equation could not be solved.
    RejectedStageFailure,
}

impl StepStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            StepStatus::Accepted => "accepted",
            StepStatus::RejectedError => "rejected_error",
            StepStatus::RejectedPerturbation => "rejected_perturbation",
            StepStatus::RejectedInfeasible => "rejected_infeasible",
            StepStatus::RejectedStageFailure => "rejected_stage_failure",
        }
    }
}

/// One attempted step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    /// Start of the step.
    pub t: f64,
    pub dt: f64,
    pub status: StepStatus,
    pub adapted: bool,
    /// Order of the weights used (the design order when unadapted).
    pub order: usize,
    /// Perturbation size in the error norm.
    pub delta: f64,
    /// Perturbation size in the max norm.
    pub delta_max: f64,
    /// Embedded estimate for the original weights, when available.
    pub err_t: Option<f64>,
    /// `err_t + delta`, when `err_t` is available.
    pub err: Option<f64>,
    /// `||b~ - b||_1`.
    pub weight_change: f64,
    /// Smallest component of the unadapted update.
    pub min_unadapted: f64,
    /// Smallest component of the update that was accepted or rejected.
    pub min_adapted: f64,
    /// Slack `eps_LP` allowed when adapted updates are checked against the bounds.
    pub bound_slack: f64,
    /// `m^T u - m^T u0` per declared invariant, after the step.
    pub invariant_drift: Vec<f64>,
    /// Linear programs solved this attempt.
    pub lp_solves: usize,
    /// Largest number of active-set enlargements over this attempt's solves.
    pub active_enlargements: usize,
}

impl StepRecord {
    pub fn t_end(&self) -> f64 {
        self.t + self.dt
    }

    pub fn accepted(&self) -> bool {
        self.status == StepStatus::Accepted
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub state: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegrationTrace {
    pub problem: String,
    pub method: String,
    pub steps: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    pub initial_invariants: Vec<f64>,
    pub invariant_labels: Vec<String>,
    pub final_time: f64,
    final_state: DVector<f64>,
    pub completed: bool,
}

impl IntegrationTrace {
    pub fn final_state(&self) -> &DVector<f64> {
        &self.final_state
    }

    pub fn accepted(&self) -> impl Iterator<Item = &StepRecord> {
        self.steps.iter().filter(|r| r.accepted())
    }

    pub fn accepted_count(&self) -> usize {
        self.accepted().count()
    }

    pub fn rejected_count(&self) -> usize {
        self.steps.len() - self.accepted_count()
    }

    pub fn adapted_count(&self) -> usize {
        self.accepted().filter(|r| r.adapted).count()
    }

    /// Smallest component over all accepted states, excluding the initial one.
    pub fn min_accepted_component(&self) -> f64 {
        self.accepted().map(|r| r.min_adapted).fold(f64::INFINITY, f64::min)
    }

    /// Smallest component of any unadapted update of an accepted step.
    pub fn min_unadapted_component(&self) -> f64 {
        self.accepted().map(|r| r.min_unadapted).fold(f64::INFINITY, f64::min)
    }

    /// Largest `|m^T u - m^T u0| / |m^T u0|` per invariant over accepted steps.
    pub fn max_relative_invariant_drift(&self) -> Vec<f64> {
        (0..self.initial_invariants.len())
            .map(|k| {
                let scale = self.initial_invariants[k].abs().max(f64::MIN_POSITIVE);
                self.accepted().map(|r| r.invariant_drift[k].abs() / scale).fold(0.0, f64::max)
            })
            .collect()
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.t == t)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IntegrationError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("integration failed at t = {t}: {reason}")]
    Failure { t: f64, reason: String, trace: Box<IntegrationTrace> },
}

impl IntegrationError {
    pub fn partial_trace(&self) -> Option<&IntegrationTrace> {
        match self {
            IntegrationError::Failure { trace, .. } => Some(trace),
            IntegrationError::Config(_) => None,
        }
    }
}

/// Error estimate of one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorEstimate {
    pub err_t: f64,
    pub delta: f64,
    pub err: f64,
}

/// `err_T = ||dt F (b - b^)||`, `delta = ||dt F (b~ - b)||`, `err = err_T + delta`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_error(
    norm: &Norm,
    dt: f64,
    derivatives: &DMatrix<f64>,
    b: &DVector<f64>,
    b_hat: &DVector<f64>,
    b_tilde: &DVector<f64>,
    u_old: &DVector<f64>,
    u_new: &DVector<f64>,
) -> ErrorEstimate {
    let err_t = norm.measure(&(derivatives * (b - b_hat) * dt), u_old, u_new);
    let delta = if b_tilde == b {
        0.0
    } else {
        norm.measure(&(derivatives * (b_tilde - b) * dt), u_old, u_new)
    };
    ErrorEstimate { err_t, delta, err: err_t + delta }
}

/// PI step-size controller on scaled errors `e_n = err/tol`.
///
/// `dt * clamp(0.2, 5, 0.9 e_n^(-0.7/p) e_prev^(0.4/p))`, or the pure
/// I-controller `0.9 e_n^(-1/p)` when there is no previous error.
pub fn pi_step_control(e_n: f64, e_prev: Option<f64>, dt: f64, p_hat: usize) -> f64 {
    let p = p_hat as f64;
    let e_n = e_n.max(1e-10);
    let factor = match e_prev {
        Some(e_prev) => SAFETY * e_n.powf(-0.7 / p) * e_prev.max(1e-10).powf(0.4 / p),
        None => SAFETY * e_n.powf(-1.0 / p),
    };
    dt * factor.clamp(MIN_FACTOR, MAX_FACTOR)
}

struct OrderLevel {
    system: OrderConditionSystem,
    candidates: Option<CandidateSet>,
}

fn order_levels(
    tableau: &ButcherTableau,
    cfg: &IntegratorConfig,
) -> Result<Vec<OrderLevel>, IntegrationError> {
    if cfg.adaptation == AdaptationMode::Off {
        return Ok(Vec::new());
    }
    let p_start = cfg.p_start.unwrap_or(tableau.order.min(MAX_ORDER));
    let all = match cfg.adaptation {
        AdaptationMode::Convex => Some(cfg.candidates.clone().unwrap_or_else(|| CandidateSet::from_tableau(tableau))),
        _ => None,
    };
    let mut levels = Vec::new();
    for p in (cfg.p_min..=p_start).rev() {
        let system = assemble(tableau, p).map_err(|e| IntegrationError::Config(e.to_string()))?;
        let candidates = match &all {
            Some(set) => {
                let keep: Vec<usize> = (0..set.len()).filter(|&k| set.orders[k] >= p).collect();
                if keep.is_empty() {
                    continue;
                }
                Some(CandidateSet::new(
                    keep.iter()
                        .map(|&k| (set.labels[k].clone(), set.columns.column(k).into_owned(), set.orders[k]))
                        .collect(),
                ))
            }
            None => None,
        };
        levels.push(OrderLevel { system, candidates });
    }
    Ok(levels)
}

struct Candidate {
    state: DVector<f64>,
    weights: DVector<f64>,
    order: usize,
    weight_change: f64,
    adapted: bool,
}

enum AdaptOutcome {
    Accept(Candidate, usize, usize),
    Reject(StepStatus, usize, usize),
}

/// Integrate `problem` over `[t0, t_end]`.
pub fn integrate(
    problem: &OdeProblem,
    tableau: &ButcherTableau,
    cfg: &IntegratorConfig,
) -> Result<IntegrationTrace, IntegrationError> {
    cfg.validate(tableau)?;
    let levels = order_levels(tableau, cfg)?;
    let norm = cfg.norm();
    let embedded: Option<&EmbeddedWeights> = tableau.error_estimator();
    let t0 = problem.t0;
    let t_end = problem.t_end;
    let mut outputs: Vec<f64> = cfg.output_times.iter().copied().filter(|&x| x >= t0 && x <= t_end).collect();
    outputs.sort_by(f64::total_cmp);
    outputs.dedup();

    let mut trace = IntegrationTrace {
        problem: problem.name.clone(),
        method: tableau.name.clone(),
        steps: Vec::new(),
        snapshots: Vec::new(),
        initial_invariants: problem.invariants.iter().map(|m| m.value(&problem.u0)).collect(),
        invariant_labels: problem.invariants.iter().map(|m| m.label.clone()).collect(),
        final_time: t0,
        final_state: problem.u0.clone(),
        completed: false,
    };
    let mut next_output = 0;
    while next_output < outputs.len() && outputs[next_output] <= t0 {
        trace.snapshots.push(Snapshot { t: outputs[next_output], state: problem.u0.clone() });
        next_output += 1;
    }

    let fail = |mut trace: IntegrationTrace, t: f64, u: DVector<f64>, reason: String| {
        trace.final_time = t;
        trace.final_state = u;
        IntegrationError::Failure { t, reason, trace: Box::new(trace) }
    };

    let mut t = t0;
    let mut u = problem.u0.clone();
    let (mut dt_next, dt_min, dt_max) = match cfg.mode {
        StepMode::Fixed { dt } => (dt, dt * 1e-12, dt),
        StepMode::Adaptive { dt0, dt_min, dt_max, .. } => (dt0, dt_min, dt_max),
    };
    let mut grid_index: u64 = 0;
    let mut e_prev: Option<f64> = None;
    let mut attempts = 0;
    let mut newton_cache = NewtonCache::new();

    while t < t_end {
        let grid_stop = match cfg.mode {
            StepMode::Fixed { dt } => {
                let g = t0 + (grid_index + 1) as f64 * dt;
                if g >= t_end || t_end - g <= 1e-9 * dt {
                    t_end
                } else {
                    g
                }
            }
            StepMode::Adaptive { .. } => t_end,
        };
        let stop = match outputs.get(next_output) {
            Some(&o) if o < grid_stop => o,
            _ => grid_stop,
        };
        let mut h = dt_next.min(dt_max);
        let mut rejected_before = false;

        loop {
            attempts += 1;
            if attempts > cfg.max_attempts {
                return Err(fail(trace, t, u, format!("exceeded {} step attempts", cfg.max_attempts)));
            }
            let lands = if cfg.is_adaptive() { t + 1.01 * h >= stop } else { t + h * (1.0 + 1e-9) >= stop };
            if lands {
                h = stop - t;
            }
            if h < dt_min {
                return Err(fail(trace, t, u, format!("step size {h:e} fell below the minimum {dt_min:e}")));
            }

            let mut record = StepRecord {
                t,
                dt: h,
                status: StepStatus::Accepted,
                adapted: false,
                order: tableau.order,
                delta: 0.0,
                delta_max: 0.0,
                err_t: None,
                err: None,
                weight_change: 0.0,
                min_unadapted: f64::NAN,
                min_adapted: f64::NAN,
                bound_slack: 0.0,
                invariant_drift: Vec::new(),
                lp_solves: 0,
                active_enlargements: 0,
            };

            let stages = match compute_stages_cached(problem, tableau, t, &u, h, &mut newton_cache) {
                Ok(s) => s,
                Err(_) => {
                    record.status = StepStatus::RejectedStageFailure;
                    trace.steps.push(record);
                    h *= 0.5;
                    rejected_before = true;
                    continue;
                }
            };
            let f = &stages.derivatives;
            let unadapted = combine(&u, h, f, &tableau.b);
            record.min_unadapted = unadapted.min();
            record.bound_slack = bound_tolerance(&u, &unadapted);
            if !unadapted.iter().all(|v| v.is_finite()) {
                record.status = StepStatus::RejectedStageFailure;
                trace.steps.push(record);
                h *= 0.5;
                rejected_before = true;
                continue;
            }

            let outcome = if cfg.adaptation == AdaptationMode::Off || problem.bounds.satisfied(&unadapted, detection_tolerance(&u, &unadapted)) {
                AdaptOutcome::Accept(
                    Candidate {
                        state: unadapted,
                        weights: tableau.b.clone(),
                        order: tableau.order,
                        weight_change: 0.0,
                        adapted: false,
                    },
                    0,
                    0,
                )
            } else {
                let tol_delta = cfg.tol_delta.unwrap_or(match cfg.mode {
                    StepMode::Fixed { .. } => 1e-2 * u.amax().max(f64::MIN_POSITIVE),
                    StepMode::Adaptive { tol, .. } => tol,
                });
                match adapt_step(problem, tableau, &levels, &u, h, f, tol_delta, cfg.adaptation) {
                    Ok(o) => o,
                    Err(e) => return Err(fail(trace, t, u, format!("weight adaptation failed: {e}"))),
                }
            };

            let (cand, lp_solves, enlargements) = match outcome {
                AdaptOutcome::Accept(c, n, e) => (c, n, e),
                AdaptOutcome::Reject(status, n, e) => {
                    record.status = status;
                    record.lp_solves = n;
                    record.active_enlargements = e;
                    trace.steps.push(record);
                    h *= 0.5;
                    rejected_before = true;
                    continue;
                }
            };
            record.lp_solves = lp_solves;
            record.active_enlargements = enlargements;
            record.adapted = cand.adapted;
            record.order = cand.order;
            record.weight_change = cand.weight_change;
            record.min_adapted = cand.state.min();
            if cand.adapted {
                let pert = f * (&cand.weights - &tableau.b) * h;
                record.delta_max = pert.amax();
                record.delta = norm.measure(&pert, &u, &cand.state);
            }

            if let Some(emb) = embedded {
                let est = estimate_error(&norm, h, f, &tableau.b, &emb.weights, &cand.weights, &u, &cand.state);
                record.err_t = Some(est.err_t);
                record.err = Some(est.err);
                if cfg.is_adaptive() {
                    let p_hat = cand.order.min(emb.order) + 1;
                    if est.err > 1.0 {
                        record.status = StepStatus::RejectedError;
                        trace.steps.push(record);
                        h = pi_step_control(est.err, None, h, p_hat).min(SAFETY * h);
                        rejected_before = true;
                        continue;
                    }
                    let mut proposal = pi_step_control(est.err, e_prev, h, p_hat);
                    if rejected_before {
                        proposal = proposal.min(h);
                    }
                    dt_next = proposal.min(dt_max);
                    e_prev = Some(est.err.max(1e-4));
                }
            }

            record.invariant_drift = problem
                .invariants
                .iter()
                .zip(&trace.initial_invariants)
                .map(|(m, v0)| m.value(&cand.state) - v0)
                .collect();
            trace.steps.push(record);
            t = if h == stop - t { stop } else { t + h };
            u = cand.state;
            if t == grid_stop && !cfg.is_adaptive() {
                grid_index += 1;
            }
            while next_output < outputs.len() && outputs[next_output] <= t {
                trace.snapshots.push(Snapshot { t: outputs[next_output], state: u.clone() });
                next_output += 1;
            }
            break;
        }
    }
    trace.final_time = t;
    trace.final_state = u;
    trace.completed = true;
    Ok(trace)
}

#[allow(clippy::too_many_arguments)]
fn adapt_step(
    problem: &OdeProblem,
    tableau: &ButcherTableau,
    levels: &[OrderLevel],
    u: &DVector<f64>,
    h: f64,
    f: &DMatrix<f64>,
    tol_delta: f64,
    mode: AdaptationMode,
) -> Result<AdaptOutcome, AdaptError> {
    let mut lp_solves = 0;
    let mut enlargements = 0;
    let mut any_feasible = false;
    for level in levels {
        let req = AdaptationRequest {
            stage_derivatives: f,
            state: u,
            dt: h,
            bounds: &problem.bounds,
            order_system: &level.system,
            base_weights: &tableau.b,
        };
        let res = match (mode, &level.candidates) {
            (AdaptationMode::Convex, Some(c)) => convex_adapt(&req, c)?,
            _ => free_adapt(&req)?,
        };
        lp_solves += res.active_iterations;
        enlargements = enlargements.max(res.enlargements());
        match res.status {
            AdaptationStatus::Infeasible => continue,
            AdaptationStatus::Unmodified => {
                let state = req.update(&tableau.b);
                let cand = Candidate { state, weights: tableau.b.clone(), order: tableau.order, weight_change: 0.0, adapted: false };
                return Ok(AdaptOutcome::Accept(cand, lp_solves, enlargements));
            }
            AdaptationStatus::Adapted => {
                any_feasible = true;
                if res.delta() < tol_delta {
                    let state = req.update(&res.weights);
                    let cand = Candidate {
                        state,
                        order: res.order,
                        weight_change: res.weight_change,
                        weights: res.weights,
                        adapted: true,
                    };
                    return Ok(AdaptOutcome::Accept(cand, lp_solves, enlargements));
                }
            }
        }
    }
    let status = if any_feasible { StepStatus::RejectedPerturbation } else { StepStatus::RejectedInfeasible };
    Ok(AdaptOutcome::Reject(status, lp_solves, enlargements))
}
