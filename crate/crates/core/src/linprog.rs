//! Dense two-phase simplex for small linear programs.
//!
//! Problems are stated as
//!
//! ```text
//! minimize    c^T x
//! subject to  E x  = h
//!             G x <= w
//!             x_j >= l_j   (or x_j free)
//! ```
//!
//! Internally every variable is shifted to a nonnegative one (free variables
//! are split into positive and negative parts), every row is scaled by its
//! largest coefficient, and inequality rows receive slack columns.
//! Phase 1 minimizes the sum of artificial variables; phase 2 optimizes the
//! real objective from the feasible basis found. Entering columns follow
//! Dantzig's rule with lowest-index tie-breaking until 50 consecutive
//! pivots without objective progress have been made, after which Bland's
//! rule takes over.

/// Pivot elements smaller than this are treated as zero.
pub const PIVOT_TOLERANCE: f64 = 1e-10;
/// Constraint residual accepted on scaled rows.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;
/// Hard cap on simplex pivots per solve.
pub const MAX_PIVOTS: usize = 10_000;
/// Consecutive pivots without objective progress before switching to
/// Bland's rule.
pub const BLAND_AFTER: usize = 50;

const COST_TOLERANCE: f64 = 1e-10;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LpError {
    #[error("simplex made {0} pivots without terminating")]
    Stalled(usize),
    #[error("malformed linear program: {0}")]
    Malformed(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Meaningful only when `status == Optimal`.
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub pivots: usize,
}

/// A linear program in inequality form. Variables default to `x >= 0`.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub eq_rows: Vec<(Vec<f64>, f64)>,
    pub ub_rows: Vec<(Vec<f64>, f64)>,
    /// `None` marks a free variable.
    pub lower: Vec<Option<f64>>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram { objective, eq_rows: Vec::new(), ub_rows: Vec::new(), lower: vec![Some(0.0); n] }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Add `row . x = rhs`.
    pub fn eq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.eq_rows.push((row, rhs));
        self
    }

    /// Add `row . x <= rhs`.
    pub fn le(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.ub_rows.push((row, rhs));
        self
    }

    /// Add `row . x >= rhs`.
    pub fn ge(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        let neg = row.into_iter().map(|v| -v).collect();
        self.ub_rows.push((neg, -rhs));
        self
    }

    pub fn set_lower(&mut self, j: usize, bound: Option<f64>) -> &mut Self {
        self.lower[j] = bound;
        self
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n {
            return Err(LpError::Malformed(format!("{} lower bounds for {n} variables", self.lower.len())));
        }
        let finite = |v: &f64| v.is_finite();
        if !self.objective.iter().all(finite) {
            return Err(LpError::Malformed("non-finite objective".into()));
        }
        for (row, rhs) in self.eq_rows.iter().chain(&self.ub_rows) {
            if row.len() != n {
                return Err(LpError::Malformed(format!("row of length {} for {n} variables", row.len())));
            }
            if !row.iter().all(finite) || !rhs.is_finite() {
                return Err(LpError::Malformed("non-finite constraint entry".into()));
            }
        }
        if !self.lower.iter().flatten().all(finite) {
            return Err(LpError::Malformed("non-finite lower bound".into()));
        }
        Ok(())
    }

    /// Largest violation of any constraint by `x`, measured on rows scaled
    /// by their largest coefficient.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let scaled = |row: &[f64], rhs: f64| {
            let s = row.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
            (dot(row, x) - rhs) / s
        };
        let mut worst = 0.0f64;
        for (row, rhs) in &self.eq_rows {
            worst = worst.max(scaled(row, *rhs).abs());
        }
        for (row, rhs) in &self.ub_rows {
            worst = worst.max(scaled(row, *rhs));
        }
        for (xj, l) in x.iter().zip(&self.lower) {
            if let Some(l) = l {
                worst = worst.max(l - xj);
            }
        }
        worst
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// How an original variable maps onto nonnegative tableau columns.
#[derive(Clone, Copy)]
enum VarMap {
    Shifted { col: usize, lower: f64 },
    Split { pos: usize, neg: usize },
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows` constraint rows followed by the cost row; the last column is
    /// the right-hand side (for the cost row: minus the objective value).
    data: Vec<f64>,
    basis: Vec<usize>,
    artificial_start: usize,
    pivots: usize,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.cols + 1) + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let w = self.cols + 1;
        &mut self.data[i * w..(i + 1) * w]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.cols + 1;
        let p = self.at(r, c);
        for v in self.row_mut(r) {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.data[r * w..(r + 1) * w].to_vec();
        for i in 0..=self.rows {
            if i == r {
                continue;
            }
            let f = self.at(i, c);
            if f != 0.0 {
                let row = self.row_mut(i);
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Replace the cost row with reduced costs of `cost` w.r.t. the basis.
    fn set_cost(&mut self, cost: &[f64]) {
        let w = self.cols + 1;
        let mut z = vec![0.0; w];
        z[..cost.len()].copy_from_slice(cost);
        for i in 0..self.rows {
            let cb = z[self.basis[i]];
            if cb != 0.0 {
                for j in 0..w {
                    z[j] -= cb * self.at(i, j);
                }
            }
        }
        let last = self.rows;
        self.row_mut(last).copy_from_slice(&z);
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.cols + 1;
        self.data.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.rows -= 1;
    }

    /// Run simplex iterations on the current cost row. Columns at or beyond
    /// `col_limit` may not enter.
    fn optimize(&mut self, col_limit: usize) -> Result<bool, LpError> {
        let mut degenerate = 0usize;
        let mut bland = false;
        loop {
            if self.pivots >= MAX_PIVOTS {
                return Err(LpError::Stalled(self.pivots));
            }
            let cost_row = self.rows;
            let mut enter = None;
            let mut best = -COST_TOLERANCE;
            for j in 0..col_limit {
                let d = self.at(cost_row, j);
                if d < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(c) = enter else { return Ok(true) };

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, c);
                if a > PIVOT_TOLERANCE {
                    let ratio = self.rhs(i).max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best_ratio)) => {
                            let eps = 1e-12 * best_ratio.abs().max(1.0);
                            if ratio < best_ratio - eps
                                || (ratio <= best_ratio + eps && self.basis[i] < self.basis[k])
                            {
                                Some((i, ratio))
                            } else {
                                Some((k, best_ratio))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else { return Ok(false) };
            // Progress is judged on the objective: rounding leaves basic
            // values of order 1e-14 that would otherwise pass as progress.
            let gain = -ratio * self.at(cost_row, c);
            if gain <= 1e-12 * (1.0 + self.rhs(cost_row).abs()) {
                degenerate += 1;
                if degenerate > BLAND_AFTER {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            self.pivot(r, c);
        }
    }
}

/// Solve a linear program with the two-phase simplex method.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let n = lp.num_vars();

    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0;
    for l in &lp.lower {
        maps.push(match l {
            Some(lower) => {
                ncols += 1;
                VarMap::Shifted { col: ncols - 1, lower: *lower }
            }
            None => {
                ncols += 2;
                VarMap::Split { pos: ncols - 2, neg: ncols - 1 }
            }
        });
    }
    let structural = ncols;

    let infeasible = || LpSolution {
        status: LpStatus::Infeasible,
        x: vec![0.0; n],
        objective_value: f64::NAN,
        pivots: 0,
    };

    // Rows in the shifted/split variables, scaled by their largest entry.
    struct Row {
        coeffs: Vec<f64>,
        rhs: f64,
        is_eq: bool,
    }
    let mut rows = Vec::new();
    let convert = |row: &[f64], rhs: f64, is_eq: bool| -> Option<Row> {
        let mut coeffs = vec![0.0; structural];
        let mut rhs = rhs;
        for (j, &a) in row.iter().enumerate() {
            match maps[j] {
                VarMap::Shifted { col, lower } => {
                    coeffs[col] = a;
                    rhs -= a * lower;
                }
                VarMap::Split { pos, neg } => {
                    coeffs[pos] = a;
                    coeffs[neg] = -a;
                }
            }
        }
        let scale = coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return None;
        }
        coeffs.iter_mut().for_each(|v| *v /= scale);
        Some(Row { coeffs, rhs: rhs / scale, is_eq })
    };
    for (row, rhs) in &lp.eq_rows {
        match convert(row, *rhs, true) {
            Some(r) => rows.push(r),
            None if rhs.abs() <= FEASIBILITY_TOLERANCE => {}
            None => return Ok(infeasible()),
        }
    }
    for (row, rhs) in &lp.ub_rows {
        match convert(row, *rhs, false) {
            Some(r) => rows.push(r),
            None if *rhs >= -FEASIBILITY_TOLERANCE => {}
            None => return Ok(infeasible()),
        }
    }

    // Column layout: structural | slacks | artificials | rhs.
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| !r.is_eq).count();
    let needs_artificial: Vec<bool> = rows.iter().map(|r| r.is_eq || r.rhs < 0.0).collect();
    let n_art = needs_artificial.iter().filter(|&&b| b).count();
    let artificial_start = structural + n_slack;
    let cols = artificial_start + n_art;
    let mut t = Tableau {
        rows: m,
        cols,
        data: vec![0.0; (m + 1) * (cols + 1)],
        basis: vec![0; m],
        artificial_start,
        pivots: 0,
    };
    let mut slack = structural;
    let mut art = artificial_start;
    for (i, row) in rows.iter().enumerate() {
        let sign = if row.rhs < 0.0 { -1.0 } else { 1.0 };
        let r = t.row_mut(i);
        for (j, &a) in row.coeffs.iter().enumerate() {
            r[j] = sign * a;
        }
        r[cols] = sign * row.rhs;
        if !row.is_eq {
            r[slack] = sign;
        }
        if needs_artificial[i] {
            r[art] = 1.0;
            t.basis[i] = art;
            art += 1;
        } else {
            t.basis[i] = slack;
        }
        if !row.is_eq {
            slack += 1;
        }
    }

    // Phase 1.
    if n_art > 0 {
        let mut phase1 = vec![0.0; cols];
        phase1[artificial_start..].iter_mut().for_each(|v| *v = 1.0);
        t.set_cost(&phase1);
        t.optimize(cols)?;
        let infeasibility = -t.rhs(t.rows);
        if infeasibility > FEASIBILITY_TOLERANCE {
            return Ok(LpSolution { pivots: t.pivots, ..infeasible() });
        }
        // Drive remaining artificials out of the basis; rows where that is
        // impossible are redundant.
        let mut i = 0;
        while i < t.rows {
            if t.basis[i] >= t.artificial_start {
                let col = (0..t.artificial_start)
                    .filter(|&j| t.at(i, j).abs() > PIVOT_TOLERANCE)
                    .max_by(|&a, &b| t.at(i, a).abs().total_cmp(&t.at(i, b).abs()));
                match col {
                    Some(j) => t.pivot(i, j),
                    None => {
                        t.remove_row(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    // Phase 2.
    let cmax = lp.objective.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cscale = if cmax > 0.0 { cmax } else { 1.0 };
    let mut cost = vec![0.0; cols];
    for (j, &cj) in lp.objective.iter().enumerate() {
        match maps[j] {
            VarMap::Shifted { col, .. } => cost[col] = cj / cscale,
            VarMap::Split { pos, neg } => {
                cost[pos] = cj / cscale;
                cost[neg] = -cj / cscale;
            }
        }
    }
    t.set_cost(&cost);
    let bounded = t.optimize(artificial_start)?;
    if !bounded {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: vec![0.0; n],
            objective_value: f64::NEG_INFINITY,
            pivots: t.pivots,
        });
    }

    let mut y = vec![0.0; cols];
    for i in 0..t.rows {
        y[t.basis[i]] = t.rhs(i).max(0.0);
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|m| match *m {
            VarMap::Shifted { col, lower } => lower + y[col],
            VarMap::Split { pos, neg } => y[pos] - y[neg],
        })
        .collect();
    let objective_value = dot(&lp.objective, &x);
    Ok(LpSolution { status: LpStatus::Optimal, x, objective_value, pivots: t.pivots })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_lower_bound() {
        // minimize x s.t. x >= 3
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.set_lower(0, None).ge(vec![1.0], 3.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] - 3.0).abs() < 1e-12);
        assert!((sol.objective_value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_bounds() {
        let mut lp = LinearProgram::new(vec![0.0]);
        lp.set_lower(0, None).ge(vec![1.0], 1.0).le(vec![1.0], 0.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn segment_of_optima_returns_vertex() {
        let mut lp = LinearProgram::new(vec![-1.0, -1.0]);
        lp.le(vec![1.0, 1.0], 1.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value + 1.0).abs() < 1e-12);
        assert!((sol.x[0] + sol.x[1] - 1.0).abs() < 1e-12);
        // a vertex: one coordinate is zero
        assert!(sol.x[0].abs() < 1e-12 || sol.x[1].abs() < 1e-12);
    }

    #[test]
    fn unbounded_direction() {
        let mut lp = LinearProgram::new(vec![-1.0, 0.0]);
        lp.le(vec![-1.0, 1.0], 1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_equalities() {
        // x + y = 1 twice, minimize x
        let mut lp = LinearProgram::new(vec![1.0, 0.0]);
        lp.eq(vec![1.0, 1.0], 1.0).eq(vec![2.0, 2.0], 2.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(sol.x[0].abs() < 1e-12);
        assert!((sol.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shifted_lower_bounds() {
        // minimize x + y with x >= -2, y >= 5, x + y >= 4
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.set_lower(0, Some(-2.0)).set_lower(1, Some(5.0)).ge(vec![1.0, 1.0], 4.0);
        let sol = solve(&lp).unwrap();
        assert!((sol.objective_value - 4.0).abs() < 1e-12, "{sol:?}");
        assert!(lp.max_violation(&sol.x) <= FEASIBILITY_TOLERANCE);
    }

    #[test]
    fn zero_rows() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.le(vec![0.0], 1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Optimal);
        lp.le(vec![0.0], -1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn malformed_rejected() {
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.le(vec![1.0], 1.0);
        assert!(matches!(solve(&lp), Err(LpError::Malformed(_))));
        let mut lp = LinearProgram::new(vec![f64::NAN]);
        lp.le(vec![1.0], 1.0);
        assert!(matches!(solve(&lp), Err(LpError::Malformed(_))));
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's classic cycling LP (in <= form); Dantzig without
        // anti-cycling loops forever on it.
        let mut lp = LinearProgram::new(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.le(vec![0.25, -60.0, -0.04, 9.0], 0.0)
            .le(vec![0.5, -90.0, -0.02, 3.0], 0.0)
            .le(vec![0.0, 0.0, 1.0, 0.0], 1.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value + 0.05).abs() < 1e-10, "{sol:?}");
    }
}
