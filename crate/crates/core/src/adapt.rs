//! Weight adaptation: choosing new weights `b~` after the stage derivatives
//! are known so that `u + dt F b~` respects the bounds.
//!
//! Two linear programs are provided.
//!
//! * **Free adaptation** minimizes `||b~ - b||_1` subject to the order
//!   conditions `Q b~ = r` and the bound rows. Writing `b~ = b + d+ - d-`
//!   with `d+, d- >= 0` turns the 1-norm into a linear objective.
//! * **Convex adaptation** restricts `b~ = B g` to convex combinations of
//!   candidate weight vectors (the columns of `B`); the order conditions
//!   then hold by linearity. The 1-norm is encoded with one slack per stage.
//!
//! Bound checks allow a slack proportional to the size of the state: a
//! roundoff-level one when deciding whether to adapt
//! ([`detection_tolerance`]) and `eps_LP` when checking the adapted update
//! ([`bound_tolerance`]).
//!
//! Bound rows are only generated for an *active set* of components. The set
//! starts with the components the unadapted update violates and grows with
//! every component the adapted update still violates, until the full update
//! is admissible. Lower and upper bound sets are tracked separately and
//! grown together.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::linprog::{self, LinearProgram, LpError, LpStatus};
use crate::order::OrderConditionSystem;
use crate::problems::Bounds;
use crate::tableau::ButcherTableau;

/// Relative feasibility slack applied when checking an adapted update.
pub const BOUND_TOLERANCE: f64 = 1e-9;

/// Relative slack below which a violation of the unadapted update is
/// treated as roundoff and left alone.
pub const DETECTION_TOLERANCE: f64 = 1e-12;

/// Maximum number of active-set enlargements before giving up.
pub const MAX_ENLARGEMENTS: usize = 10;

/// Threshold above which a convex coefficient counts as used.
pub const CONVEX_SUPPORT: f64 = 1e-12;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AdaptError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("active set still growing after {0} enlargements")]
    ActiveSetCap(usize),
    #[error("active set stopped growing but the update violates bounds by {0:e}")]
    ActiveSetStuck(f64),
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
}

fn update_scale(state: &DVector<f64>, unadapted: &DVector<f64>) -> f64 {
    state.amax().max(unadapted.amax()).max(f64::MIN_POSITIVE)
}

/// Slack `eps_LP` for checking adapted updates: `BOUND_TOLERANCE` times the
/// larger of `||u||_inf` and `||unadapted||_inf`.
pub fn bound_tolerance(state: &DVector<f64>, unadapted: &DVector<f64>) -> f64 {
    BOUND_TOLERANCE * update_scale(state, unadapted)
}

/// Slack for deciding whether the unadapted update needs adaptation.
pub fn detection_tolerance(state: &DVector<f64>, unadapted: &DVector<f64>) -> f64 {
    DETECTION_TOLERANCE * update_scale(state, unadapted)
}

/// Everything needed to re-weight one step.
#[derive(Clone, Copy, Debug)]
pub struct AdaptationRequest<'a> {
    /// `m x s`, column `j` is `f(t + c_j dt, y_j)`.
    pub stage_derivatives: &'a DMatrix<f64>,
    pub state: &'a DVector<f64>,
    pub dt: f64,
    pub bounds: &'a Bounds,
    /// Conditions at the target order.
    pub order_system: &'a OrderConditionSystem,
    pub base_weights: &'a DVector<f64>,
}

impl AdaptationRequest<'_> {
    pub fn update(&self, w: &DVector<f64>) -> DVector<f64> {
        self.state + self.stage_derivatives * w * self.dt
    }

    /// Absolute slack used for every bound check of this request.
    pub fn tolerance(&self) -> f64 {
        bound_tolerance(self.state, &self.update(self.base_weights))
    }

    fn validate(&self) -> Result<(), AdaptError> {
        let (m, s) = self.stage_derivatives.shape();
        if self.state.len() != m {
            return Err(AdaptError::Dimensions(format!("F has {m} rows, state has {}", self.state.len())));
        }
        if self.base_weights.len() != s || self.order_system.q.ncols() != s {
            return Err(AdaptError::Dimensions(format!(
                "F has {s} columns, weights {}, Q {}",
                self.base_weights.len(),
                self.order_system.q.ncols()
            )));
        }
        for v in [&self.bounds.lower, &self.bounds.upper].into_iter().flatten() {
            if v.len() != m {
                return Err(AdaptError::Dimensions(format!("bound vector of length {}", v.len())));
            }
        }
        Ok(())
    }
}

/// Candidate weight vectors for convex adaptation.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    /// `s x K`.
    pub columns: DMatrix<f64>,
    /// Order of each column.
    pub orders: Vec<usize>,
    pub labels: Vec<String>,
}

impl CandidateSet {
    pub fn new(columns: Vec<(String, DVector<f64>, usize)>) -> Self {
        let s = columns.first().map_or(0, |c| c.1.len());
        let mut m = DMatrix::zeros(s, columns.len());
        let mut orders = Vec::new();
        let mut labels = Vec::new();
        for (k, (label, w, p)) in columns.into_iter().enumerate() {
            m.set_column(k, &w);
            orders.push(p);
            labels.push(label);
        }
        CandidateSet { columns: m, orders, labels }
    }

    /// The method's own weights followed by every embedded vector.
    pub fn from_tableau(t: &ButcherTableau) -> Self {
        let mut cols = vec![("b".to_string(), t.b.clone(), t.order)];
        cols.extend(t.embedded.iter().map(|e| (e.label.clone(), e.weights.clone(), e.order)));
        CandidateSet::new(cols)
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Strategy<'a> {
    Free,
    Convex(&'a CandidateSet),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdaptationStatus {
    /// The unadapted update already satisfies the bounds.
    Unmodified,
    Adapted,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptationResult {
    pub status: AdaptationStatus,
    /// Adapted weights (the base weights unless `Adapted`).
    pub weights: DVector<f64>,
    /// Order the weights are certified for.
    pub order: usize,
    /// `dt F (b~ - b)`.
    pub perturbation: DVector<f64>,
    /// `||b~ - b||_1`.
    pub weight_change: f64,
    /// Number of linear programs solved.
    pub active_iterations: usize,
    pub active_lower: Vec<usize>,
    pub active_upper: Vec<usize>,
    /// Convex coefficients `g`, for convex adaptation.
    pub convex_coefficients: Option<DVector<f64>>,
}

impl AdaptationResult {
    /// `||dt F (b~ - b)||_inf`.
    pub fn delta(&self) -> f64 {
        self.perturbation.amax()
    }

    /// Active-set enlargements after the initial solve.
    pub fn enlargements(&self) -> usize {
        self.active_iterations.saturating_sub(1)
    }

    fn unmodified(req: &AdaptationRequest<'_>, iterations: usize, status: AdaptationStatus) -> Self {
        AdaptationResult {
            status,
            weights: req.base_weights.clone(),
            order: req.order_system.order,
            perturbation: DVector::zeros(req.state.len()),
            weight_change: 0.0,
            active_iterations: iterations,
            active_lower: Vec::new(),
            active_upper: Vec::new(),
            convex_coefficients: None,
        }
    }
}

/// Free adaptation with active-set reduction.
pub fn free_adapt(req: &AdaptationRequest<'_>) -> Result<AdaptationResult, AdaptError> {
    reduce_active_set(req, Strategy::Free)
}

/// Convex adaptation over the columns of `candidates`, with active-set
/// reduction.
pub fn convex_adapt(
    req: &AdaptationRequest<'_>,
    candidates: &CandidateSet,
) -> Result<AdaptationResult, AdaptError> {
    reduce_active_set(req, Strategy::Convex(candidates))
}

/// Solve the adaptation LP on a growing active set of bound constraints.
pub fn reduce_active_set(
    req: &AdaptationRequest<'_>,
    strategy: Strategy<'_>,
) -> Result<AdaptationResult, AdaptError> {
    req.validate()?;
    let unadapted = req.update(req.base_weights);
    let tol = bound_tolerance(req.state, &unadapted);
    let (lo, hi) = req.bounds.violations(&unadapted, detection_tolerance(req.state, &unadapted));
    if lo.is_empty() && hi.is_empty() {
        return Ok(AdaptationResult::unmodified(req, 0, AdaptationStatus::Unmodified));
    }
    let mut active_lo: BTreeSet<usize> = lo.into_iter().collect();
    let mut active_hi: BTreeSet<usize> = hi.into_iter().collect();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let lo_vec: Vec<usize> = active_lo.iter().copied().collect();
        let hi_vec: Vec<usize> = active_hi.iter().copied().collect();
        let Some(mut result) = solve_on_active_set(req, strategy, &lo_vec, &hi_vec)? else {
            let mut r = AdaptationResult::unmodified(req, iterations, AdaptationStatus::Infeasible);
            r.active_lower = lo_vec;
            r.active_upper = hi_vec;
            return Ok(r);
        };
        result.active_iterations = iterations;
        let adapted = req.update(&result.weights);
        let (new_lo, new_hi) = req.bounds.violations(&adapted, tol);
        if new_lo.is_empty() && new_hi.is_empty() {
            return Ok(result);
        }
        let before = active_lo.len() + active_hi.len();
        active_lo.extend(new_lo);
        active_hi.extend(new_hi);
        if active_lo.len() + active_hi.len() == before {
            return Err(AdaptError::ActiveSetStuck(req.bounds.max_violation(&adapted)));
        }
        if iterations > MAX_ENLARGEMENTS {
            return Err(AdaptError::ActiveSetCap(iterations - 1));
        }
    }
}

/// Solve the adaptation LP with bound rows for exactly the given component
/// sets. `Ok(None)` means the LP is infeasible.
pub fn solve_on_active_set(
    req: &AdaptationRequest<'_>,
    strategy: Strategy<'_>,
    lower: &[usize],
    upper: &[usize],
) -> Result<Option<AdaptationResult>, AdaptError> {
    req.validate()?;
    match strategy {
        Strategy::Free => solve_free(req, lower, upper),
        Strategy::Convex(c) => solve_convex(req, c, lower, upper),
    }
}

fn solve_free(
    req: &AdaptationRequest<'_>,
    lower: &[usize],
    upper: &[usize],
) -> Result<Option<AdaptationResult>, AdaptError> {
    let f = req.stage_derivatives;
    let s = f.ncols();
    let b = req.base_weights;
    let q = &req.order_system.q;
    let unadapted = req.update(b);

    // variables: d+ (s), d- (s)
    let mut lp = LinearProgram::new(vec![1.0; 2 * s]);
    let qb = q * b;
    for i in 0..q.nrows() {
        let mut row = Vec::with_capacity(2 * s);
        row.extend(q.row(i).iter().copied());
        row.extend(q.row(i).iter().map(|v| -v));
        lp.eq(row, req.order_system.r[i] - qb[i]);
    }
    let bound_row = |k: usize| -> Vec<f64> {
        let mut row = Vec::with_capacity(2 * s);
        row.extend(f.row(k).iter().map(|v| req.dt * v));
        row.extend(f.row(k).iter().map(|v| -req.dt * v));
        row
    };
    if let Some(alpha) = &req.bounds.lower {
        for &k in lower {
            lp.ge(bound_row(k), alpha[k] - unadapted[k]);
        }
    }
    if let Some(beta) = &req.bounds.upper {
        for &k in upper {
            lp.le(bound_row(k), beta[k] - unadapted[k]);
        }
    }
    let sol = linprog::solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Ok(None);
    }
    let delta_w = DVector::from_fn(s, |j, _| sol.x[j] - sol.x[s + j]);
    let weights = b + &delta_w;
    Ok(Some(AdaptationResult {
        status: AdaptationStatus::Adapted,
        perturbation: f * &delta_w * req.dt,
        weight_change: delta_w.lp_norm(1),
        weights,
        order: req.order_system.order,
        active_iterations: 1,
        active_lower: lower.to_vec(),
        active_upper: upper.to_vec(),
        convex_coefficients: None,
    }))
}

fn solve_convex(
    req: &AdaptationRequest<'_>,
    cands: &CandidateSet,
    lower: &[usize],
    upper: &[usize],
) -> Result<Option<AdaptationResult>, AdaptError> {
    let f = req.stage_derivatives;
    let s = f.ncols();
    let kk = cands.len();
    if kk == 0 || cands.columns.nrows() != s {
        return Err(AdaptError::Dimensions(format!(
            "candidate matrix is {}x{kk} for {s} stages",
            cands.columns.nrows()
        )));
    }
    let b = req.base_weights;
    let bmat = &cands.columns;
    // variables: g (K), t (s)
    let n = kk + s;
    let mut objective = vec![0.0; n];
    objective[kk..].iter_mut().for_each(|v| *v = 1.0);
    let mut lp = LinearProgram::new(objective);

    let mut sum_row = vec![0.0; n];
    sum_row[..kk].iter_mut().for_each(|v| *v = 1.0);
    lp.eq(sum_row, 1.0);
    for k in 0..kk {
        let mut row = vec![0.0; n];
        row[k] = 1.0;
        lp.le(row, 1.0);
    }
    // |B g - b| <= t, row by row
    for j in 0..s {
        let mut plus = vec![0.0; n];
        let mut minus = vec![0.0; n];
        for k in 0..kk {
            plus[k] = bmat[(j, k)];
            minus[k] = -bmat[(j, k)];
        }
        plus[kk + j] = -1.0;
        minus[kk + j] = -1.0;
        lp.le(plus, b[j]);
        lp.le(minus, -b[j]);
    }
    // u + dt F B g within bounds
    let fb = f * bmat * req.dt;
    let bound_row = |k: usize| -> Vec<f64> {
        let mut row = vec![0.0; n];
        for c in 0..kk {
            row[c] = fb[(k, c)];
        }
        row
    };
    if let Some(alpha) = &req.bounds.lower {
        for &k in lower {
            lp.ge(bound_row(k), alpha[k] - req.state[k]);
        }
    }
    if let Some(beta) = &req.bounds.upper {
        for &k in upper {
            lp.le(bound_row(k), beta[k] - req.state[k]);
        }
    }
    let sol = linprog::solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Ok(None);
    }
    let g = DVector::from_fn(kk, |k, _| sol.x[k].max(0.0));
    let weights = bmat * &g;
    let delta_w = &weights - b;
    let order = (0..kk)
        .filter(|&k| g[k] > CONVEX_SUPPORT)
        .map(|k| cands.orders[k])
        .min()
        .unwrap_or(req.order_system.order);
    Ok(Some(AdaptationResult {
        status: AdaptationStatus::Adapted,
        perturbation: f * &delta_w * req.dt,
        weight_change: delta_w.lp_norm(1),
        weights,
        order,
        active_iterations: 1,
        active_lower: lower.to_vec(),
        active_upper: upper.to_vec(),
        convex_coefficients: Some(g),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::order::assemble;
    use crate::tableau::{builtin, Method};

    fn example_one() -> (DMatrix<f64>, DVector<f64>) {
        let f = DMatrix::from_column_slice(2, 3, &[-5.0, 5.0, 5.0, -5.0, -5.0, 5.0]);
        (f, DVector::from_vec(vec![1.0, 0.0]))
    }

    #[test]
    fn example_one_second_order() {
        let t = builtin(Method::Ssp33);
        let (f, u) = example_one();
        let sys = assemble(&t, 2).unwrap();
        let bounds = Bounds::nonnegative(2);
        let req = AdaptationRequest {
            stage_derivatives: &f,
            state: &u,
            dt: 1.0 / 3.0,
            bounds: &bounds,
            order_system: &sys,
            base_weights: &t.b,
        };
        let r = free_adapt(&req).unwrap();
        assert_eq!(r.status, AdaptationStatus::Adapted);
        // b~ = b + a (1/2, 1/2, -1) moves u1 by a dt F (1/2, 1/2, -1) = a (5/3, -5/3),
        // so the feasible range is a in [1/15, 2/3] and the 1-norm optimum is a = 1/15
        let want = [0.2, 0.2, 0.6];
        for j in 0..3 {
            assert!((r.weights[j] - want[j]).abs() < 1e-12, "{}", r.weights);
        }
        assert!((r.weight_change - 2.0 / 15.0).abs() < 1e-12);
        let u1 = req.update(&r.weights);
        assert!(u1[0].abs() < 1e-12 && (u1[1] - 1.0).abs() < 1e-12);
        assert!((r.delta() - 1.0 / 9.0).abs() < 1e-12);
        assert_eq!(r.active_lower, vec![0]);
        assert_eq!(r.active_iterations, 1);
    }

    #[test]
    fn example_one_third_order_is_infeasible() {
        let t = builtin(Method::Ssp33);
        let (f, u) = example_one();
        let sys = assemble(&t, 3).unwrap();
        let bounds = Bounds::nonnegative(2);
        let req = AdaptationRequest {
            stage_derivatives: &f,
            state: &u,
            dt: 1.0 / 3.0,
            bounds: &bounds,
            order_system: &sys,
            base_weights: &t.b,
        };
        let r = free_adapt(&req).unwrap();
        assert_eq!(r.status, AdaptationStatus::Infeasible);
        assert_eq!(r.weights, t.b);
    }

    #[test]
    fn nonnegative_update_is_left_alone() {
        let t = builtin(Method::Ssp33);
        let (f, u) = example_one();
        let sys = assemble(&t, 2).unwrap();
        let bounds = Bounds::nonnegative(2);
        let req = AdaptationRequest {
            stage_derivatives: &f,
            state: &u,
            dt: 0.01,
            bounds: &bounds,
            order_system: &sys,
            base_weights: &t.b,
        };
        for r in [free_adapt(&req).unwrap(), convex_adapt(&req, &CandidateSet::from_tableau(&t)).unwrap()] {
            assert_eq!(r.status, AdaptationStatus::Unmodified);
            assert_eq!(r.weights, t.b);
            assert_eq!(r.active_iterations, 0);
        }
    }

    #[test]
    fn upper_bounds_are_enforced() {
        // same data viewed as an upper bound problem on the second component
        let t = builtin(Method::Ssp33);
        let (f, u) = example_one();
        let sys = assemble(&t, 2).unwrap();
        let bounds = Bounds { lower: None, upper: Some(DVector::from_element(2, 1.0)) };
        let req = AdaptationRequest {
            stage_derivatives: &f,
            state: &u,
            dt: 1.0 / 3.0,
            bounds: &bounds,
            order_system: &sys,
            base_weights: &t.b,
        };
        let r = free_adapt(&req).unwrap();
        assert_eq!(r.status, AdaptationStatus::Adapted);
        assert_eq!(r.active_upper, vec![1]);
        let u1 = req.update(&r.weights);
        assert!(u1[1] <= 1.0 + 1e-12);
        assert!((r.weight_change - 2.0 / 15.0).abs() < 1e-12);
    }

    #[test]
    fn convex_single_candidate() {
        let t = builtin(Method::Ssp33);
        let (f, u) = example_one();
        let sys = assemble(&t, 3).unwrap();
        let bounds = Bounds::nonnegative(2);
        let cands = CandidateSet::new(vec![("b".into(), t.b.clone(), 3)]);
        let req = AdaptationRequest {
            stage_derivatives: &f,
            state: &u,
            dt: 1.0 / 3.0,
            bounds: &bounds,
            order_system: &sys,
            base_weights: &t.b,
        };
        // b alone cannot fix the negative update
        assert_eq!(convex_adapt(&req, &cands).unwrap().status, AdaptationStatus::Infeasible);
        // neither does forward Euler, which moves u1 the same way
        let fe = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let cands = CandidateSet::new(vec![("b".into(), t.b.clone(), 3), ("euler".into(), fe, 1)]);
        assert_eq!(convex_adapt(&req, &cands).unwrap().status, AdaptationStatus::Infeasible);
        // the second stage alone overshoots in the other direction, so a mixture works
        let e2 = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        let cands = CandidateSet::new(vec![("b".into(), t.b.clone(), 3), ("stage-2".into(), e2, 1)]);
        let r = convex_adapt(&req, &cands).unwrap();
        assert_eq!(r.status, AdaptationStatus::Adapted);
        assert_eq!(r.order, 1);
        let g = r.convex_coefficients.as_ref().unwrap();
        assert!((g.sum() - 1.0).abs() < 1e-12);
        assert!(req.update(&r.weights).min() >= -req.tolerance());
    }

    #[test]
    fn dimension_errors() {
        let t = builtin(Method::Ssp33);
        let (f, _) = example_one();
        let u = DVector::zeros(3);
        let sys = assemble(&t, 2).unwrap();
        let bounds = Bounds::nonnegative(3);
        let req = AdaptationRequest {
            stage_derivatives: &f,
            state: &u,
            dt: 1.0,
            bounds: &bounds,
            order_system: &sys,
            base_weights: &t.b,
        };
        assert!(matches!(free_adapt(&req), Err(AdaptError::Dimensions(_))));
    }
}
