//! Stage computation for explicit and diagonally implicit tableaux.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::problems::OdeProblem;
use crate::tableau::{ButcherTableau, Structure};

/// Newton increment tolerance in the weighted norm with scale `1 + |y|`.
pub const NEWTON_TOLERANCE: f64 = 1e-12;
pub const NEWTON_MAX_ITERATIONS: usize = 25;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum StageError {
    #[error("fully implicit tableaux are not supported")]
    Unsupported,
    #[error("Newton iteration for stage {stage} did not converge in {iterations} iterations")]
    NewtonFailure { stage: usize, iterations: usize },
    #[error("singular Newton matrix in stage {0}")]
    Singular(usize),
    #[error("non-finite value in stage {0}")]
    NonFinite(usize),
}

/// Stage values and derivatives of one step.
#[derive(Clone, Debug)]
pub struct StageData {
    /// `m x s`, column `j` is `y_j`.
    pub values: DMatrix<f64>,
    /// `m x s`, column `j` is `f(t + c_j dt, y_j)`.
    pub derivatives: DMatrix<f64>,
    /// Newton iterations per stage (0 for explicit stages).
    pub newton_iterations: Vec<usize>,
}

fn weighted_rms(d: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let m = d.len().max(1) as f64;
    let sum: f64 = d.iter().zip(y.iter()).map(|(di, yi)| (di / (1.0 + yi.abs())).powi(2)).sum();
    (sum / m).sqrt()
}

/// Jacobian and factorizations of `I - h J`, keyed by `h`, kept across
/// steps. For a nonlinear problem the Jacobian is re-evaluated when a new
/// factorization is needed in a later step, when Newton convergence stalls,
/// and after a stage failure.
#[derive(Default)]
pub struct NewtonCache {
    jacobian: Option<DMatrix<f64>>,
    entries: Vec<(f64, LU<f64, Dyn, Dyn>)>,
    /// The Jacobian was evaluated in an earlier step.
    stale: bool,
}

impl NewtonCache {
    const CAPACITY: usize = 16;
    /// Relative difference in `h` up to which a factorization is reused.
    const MATCH: f64 = 1e-10;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Drop the Jacobian and all factorizations.
    pub fn clear(&mut self) {
        self.jacobian = None;
        self.entries.clear();
        self.stale = false;
    }

    fn begin_step(&mut self, problem: &OdeProblem) {
        self.stale = !problem.has_constant_jacobian();
    }

    fn index(&mut self, problem: &OdeProblem, t: f64, y: &DVector<f64>, h: f64) -> usize {
        // grid steps differ from one another by roundoff
        if let Some(i) = self.entries.iter().position(|(k, _)| (k - h).abs() <= Self::MATCH * h.abs()) {
            return i;
        }
        if self.stale || self.entries.len() == Self::CAPACITY {
            self.clear();
        }
        let j = self.jacobian.get_or_insert_with(|| problem.jacobian(t, y));
        let m = y.len();
        self.entries.push((h, (DMatrix::identity(m, m) - &*j * h).lu()));
        self.entries.len() - 1
    }

    fn refresh(&mut self, problem: &OdeProblem, t: f64, y: &DVector<f64>, h: f64) -> usize {
        self.clear();
        self.index(problem, t, y, h)
    }
}

#[derive(Debug)]
enum NewtonError {
    Diverged,
    Singular,
    NonFinite,
}

impl NewtonError {
    fn at(self, stage: usize) -> StageError {
        match self {
            NewtonError::Diverged => StageError::NewtonFailure { stage, iterations: NEWTON_MAX_ITERATIONS },
            NewtonError::Singular => StageError::Singular(stage),
            NewtonError::NonFinite => StageError::NonFinite(stage),
        }
    }
}

/// Contraction factor above which the Newton matrix is refreshed.
const REFRESH_RATE: f64 = 0.25;

/// Solve `y - h f(t, y) = known` starting from `y` with simplified Newton,
/// taking the matrix from `cache`.
fn newton(
    problem: &OdeProblem,
    t: f64,
    known: &DVector<f64>,
    h: f64,
    mut y: DVector<f64>,
    cache: &mut NewtonCache,
) -> Result<(DVector<f64>, usize), NewtonError> {
    let m = y.len();
    let mut fy = DVector::zeros(m);
    let mut idx = cache.index(problem, t, &y, h);
    let mut prev = f64::INFINITY;
    let can_refresh = !problem.has_constant_jacobian();
    for it in 1..=NEWTON_MAX_ITERATIONS {
        problem.rhs_into(t, y.as_slice(), fy.as_mut_slice());
        let residual = &y - &fy * h - known;
        let step = cache.entries[idx].1.solve(&residual).ok_or(NewtonError::Singular)?;
        y -= &step;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(NewtonError::NonFinite);
        }
        let norm = weighted_rms(&step, &y);
        // with contraction rate theta the remaining error is about
        // theta / (1 - theta) times the last increment
        let theta = norm / prev;
        if norm <= NEWTON_TOLERANCE || (prev.is_finite() && theta < 1.0 && theta / (1.0 - theta) * norm <= NEWTON_TOLERANCE) {
            return Ok((y, it));
        }
        if can_refresh && theta > REFRESH_RATE {
            idx = cache.refresh(problem, t, &y, h);
            prev = f64::INFINITY;
        } else {
            prev = norm;
        }
    }
    Err(NewtonError::Diverged)
}

/// Compute all stages of one step of size `dt` from `(t, u)`.
///
/// Implicit diagonal entries are solved with simplified Newton from the
/// predictor (the previous stage value). The Newton matrices come from a
/// [`NewtonCache`]; a fresh cache takes the Jacobian at the first implicit
/// stage's predictor.
pub fn compute_stages(
    problem: &OdeProblem,
    tableau: &ButcherTableau,
    t: f64,
    u: &DVector<f64>,
    dt: f64,
) -> Result<StageData, StageError> {
    compute_stages_cached(problem, tableau, t, u, dt, &mut NewtonCache::new())
}

/// As [`compute_stages`], reusing the Jacobian and factorizations held in
/// `cache` from earlier steps.
pub fn compute_stages_cached(
    problem: &OdeProblem,
    tableau: &ButcherTableau,
    t: f64,
    u: &DVector<f64>,
    dt: f64,
    cache: &mut NewtonCache,
) -> Result<StageData, StageError> {
    if tableau.structure == Structure::FullyImplicit {
        return Err(StageError::Unsupported);
    }
    let m = u.len();
    let s = tableau.stages();
    let mut values = DMatrix::zeros(m, s);
    let mut derivs = DMatrix::zeros(m, s);
    let mut iters = vec![0; s];
    let mut fy = DVector::zeros(m);
    cache.begin_step(problem);
    for j in 0..s {
        let tj = t + tableau.c[j] * dt;
        let mut known = u.clone();
        for k in 0..j {
            let a = tableau.a[(j, k)];
            if a != 0.0 {
                known.axpy(dt * a, &derivs.column(k), 1.0);
            }
        }
        let gamma = tableau.a[(j, j)];
        let y = if gamma == 0.0 {
            known
        } else {
            let y0: DVector<f64> = if j == 0 { u.clone() } else { values.column(j - 1).into_owned() };
            let h = dt * gamma;
            let (y, n) = match newton(problem, tj, &known, h, y0, cache) {
                Ok(r) => r,
                Err(e) => {
                    if !problem.has_constant_jacobian() {
                        cache.clear();
                    }
                    return Err(e.at(j));
                }
            };
            iters[j] = n;
            y
        };
        problem.rhs_into(tj, y.as_slice(), fy.as_mut_slice());
        if !fy.iter().all(|v| v.is_finite()) || !y.iter().all(|v| v.is_finite()) {
            return Err(StageError::NonFinite(j));
        }
        values.set_column(j, &y);
        derivs.set_column(j, &fy);
    }
    Ok(StageData { values, derivatives: derivs, newton_iterations: iters })
}

/// `u + dt F w`.
pub fn combine(u: &DVector<f64>, dt: f64, derivatives: &DMatrix<f64>, w: &DVector<f64>) -> DVector<f64> {
    u + derivatives * w * dt
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{linear2x2, RhsFn};
    use crate::tableau::{builtin, extrapolation_be, Method};
    use std::sync::Arc;

    fn decay() -> OdeProblem {
        let rhs: RhsFn = Arc::new(|_t, u, out| out[0] = -u[0]);
        OdeProblem::new("decay", DVector::from_element(1, 1.0), 0.0, 1.0, rhs)
    }

    #[test]
    fn backward_euler_chains_on_decay() {
        let t = extrapolation_be(2).unwrap();
        let st = compute_stages(&decay(), &t, 0.0, &DVector::from_element(1, 1.0), 0.1).unwrap();
        let want = [1.0 / 1.1, 1.0 / 1.05, 1.0 / (1.05 * 1.05)];
        for j in 0..3 {
            assert!((st.values[(0, j)] - want[j]).abs() < 1e-14, "stage {j}: {}", st.values[(0, j)]);
            assert!((st.derivatives[(0, j)] + want[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn explicit_rk4_on_decay() {
        let t = builtin(Method::Rk4);
        let u = DVector::from_element(1, 1.0);
        let st = compute_stages(&decay(), &t, 0.0, &u, 0.1).unwrap();
        let u1 = combine(&u, 0.1, &st.derivatives, &t.b);
        let h: f64 = 0.1;
        let taylor = 1.0 - h + h * h / 2.0 - h.powi(3) / 6.0 + h.powi(4) / 24.0;
        assert!((u1[0] - taylor).abs() < 1e-15);
        assert!(st.newton_iterations.iter().all(|&n| n == 0));
    }

    #[test]
    fn cached_factorizations_match() {
        let t = extrapolation_be(3).unwrap();
        let p = crate::problems::diffusion(21);
        let mut cache = NewtonCache::new();
        let a = compute_stages(&p, &t, 0.0, &p.u0, 1e-3).unwrap();
        let b = compute_stages_cached(&p, &t, 0.0, &p.u0, 1e-3, &mut cache).unwrap();
        let c = compute_stages_cached(&p, &t, 0.0, &p.u0, 1e-3, &mut cache).unwrap();
        assert_eq!(cache.len(), 3);
        assert_eq!(a.derivatives, b.derivatives);
        assert_eq!(b.derivatives, c.derivatives);
    }

    #[test]
    fn fully_implicit_rejected() {
        let t = builtin(Method::RadauIia3);
        let p = linear2x2();
        assert_eq!(compute_stages(&p, &t, 0.0, &p.u0, 0.1).unwrap_err(), StageError::Unsupported);
    }

    #[test]
    fn linear_newton_converges_fast() {
        let t = builtin(Method::Sdirk54);
        let p = linear2x2();
        let st = compute_stages(&p, &t, 0.0, &p.u0, 0.5).unwrap();
        assert!(st.newton_iterations.iter().all(|&n| n <= 3), "{:?}", st.newton_iterations);
        // each stage satisfies its defining equation
        for j in 0..t.stages() {
            let mut rhs = p.u0.clone();
            for k in 0..=j {
                rhs.axpy(0.5 * t.a[(j, k)], &st.derivatives.column(k), 1.0);
            }
            assert!((rhs - st.values.column(j)).amax() < 1e-12);
        }
    }
}
