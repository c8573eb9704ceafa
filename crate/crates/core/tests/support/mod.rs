//! Shared helpers for the integration tests: a brute-force LP oracle and
//! seeded random problem generators.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rkadapt::linprog::{LinearProgram, LpStatus};

/// Result of the vertex-enumeration oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution {
    pub status: LpStatus,
    pub objective: f64,
}

const FEAS: f64 = 1e-9;

/// `min c.y` subject to `eq` rows (`a.y = b`), `le` rows (`a.y <= b`) and
/// `y >= 0`, by enumerating every basic solution. `None` if no vertex is
/// feasible. The region is pointed because `y >= 0`.
fn best_vertex(c: &[f64], eq: &[(Vec<f64>, f64)], le: &[(Vec<f64>, f64)]) -> Option<f64> {
    let n = c.len();
    let mut ineq: Vec<(Vec<f64>, f64)> = le.to_vec();
    for j in 0..n {
        let mut row = vec![0.0; n];
        row[j] = -1.0;
        ineq.push((row, 0.0));
    }
    if eq.len() > n {
        return None;
    }
    let pick = n - eq.len();
    let mut best: Option<f64> = None;
    for subset in combinations(ineq.len(), pick) {
        let rows: Vec<&(Vec<f64>, f64)> = eq.iter().chain(subset.iter().map(|&i| &ineq[i])).collect();
        let a = DMatrix::from_fn(n, n, |i, j| rows[i].0[j]);
        let b = DVector::from_fn(n, |i, _| rows[i].1);
        let lu = a.lu();
        if lu.determinant().abs() < 1e-10 {
            continue;
        }
        let Some(y) = lu.solve(&b) else { continue };
        let feasible = eq.iter().all(|(r, rhs)| (dot(r, y.as_slice()) - rhs).abs() <= FEAS * (1.0 + rhs.abs()))
            && ineq.iter().all(|(r, rhs)| dot(r, y.as_slice()) - rhs <= FEAS * (1.0 + rhs.abs()));
        if feasible {
            let v = dot(c, y.as_slice());
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    }
    best
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Solve `lp` by vertex enumeration. Free variables are split into two
/// nonnegative parts and shifted bounds are substituted, so the search runs
/// over a pointed region. Unboundedness is decided on the recession cone
/// normalized by `sum d = 1`, which is a polytope.
pub fn vertex_oracle(lp: &LinearProgram) -> OracleSolution {
    let n = lp.num_vars();
    // x_j = shift_j + sum_k map[j][k] y_k
    let mut columns: Vec<(usize, f64)> = Vec::new();
    let mut shift = vec![0.0; n];
    for j in 0..n {
        match lp.lower[j] {
            Some(l) => {
                shift[j] = l;
                columns.push((j, 1.0));
            }
            None => {
                columns.push((j, 1.0));
                columns.push((j, -1.0));
            }
        }
    }
    let ny = columns.len();
    let lift = |row: &[f64]| -> Vec<f64> { columns.iter().map(|&(j, s)| row[j] * s).collect() };
    let offset = |row: &[f64]| -> f64 { dot(row, &shift) };
    let c = lift(&lp.objective);
    let c0 = offset(&lp.objective);
    let eq: Vec<(Vec<f64>, f64)> = lp.eq_rows.iter().map(|(r, b)| (lift(r), b - offset(r))).collect();
    let le: Vec<(Vec<f64>, f64)> = lp.ub_rows.iter().map(|(r, b)| (lift(r), b - offset(r))).collect();

    let Some(best) = best_vertex(&c, &eq, &le) else {
        return OracleSolution { status: LpStatus::Infeasible, objective: f64::NAN };
    };
    let mut cone_eq: Vec<(Vec<f64>, f64)> = eq.iter().map(|(r, _)| (r.clone(), 0.0)).collect();
    cone_eq.push((vec![1.0; ny], 1.0));
    let cone_le: Vec<(Vec<f64>, f64)> = le.iter().map(|(r, _)| (r.clone(), 0.0)).collect();
    if let Some(ray) = best_vertex(&c, &cone_eq, &cone_le) {
        if ray < -1e-9 {
            return OracleSolution { status: LpStatus::Unbounded, objective: f64::NEG_INFINITY };
        }
    }
    OracleSolution { status: LpStatus::Optimal, objective: best + c0 }
}

/// A small LP with integer data: 2 or 3 variables, 1 to 4 inequality rows,
/// at most one equality row, occasional free or shifted variables.
pub fn random_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.gen_range(2..=3);
    let int = |rng: &mut ChaCha8Rng, lo: i32, hi: i32| rng.gen_range(lo..=hi) as f64;
    let obj = (0..n).map(|_| int(rng, -5, 5)).collect();
    let mut lp = LinearProgram::new(obj);
    for _ in 0..rng.gen_range(1..=4) {
        let row: Vec<f64> = (0..n).map(|_| int(rng, -4, 4)).collect();
        if row.iter().all(|v| *v == 0.0) {
            continue;
        }
        let rhs = int(rng, -3, 8);
        lp.le(row, rhs);
    }
    if rng.gen_bool(0.3) {
        let mut row: Vec<f64> = (0..n).map(|_| int(rng, -3, 3)).collect();
        if row.iter().all(|v| *v == 0.0) {
            row[0] = 1.0;
        }
        let rhs = int(rng, -2, 6);
        lp.eq(row, rhs);
    }
    for j in 0..n {
        let roll: f64 = rng.gen();
        if roll < 0.15 {
            lp.set_lower(j, None);
        } else if roll < 0.3 {
            lp.set_lower(j, Some(int(rng, -2, 2)));
        }
    }
    lp
}

/// Uniform point of the probability simplex in `k` dimensions.
pub fn random_simplex_point(rng: &mut ChaCha8Rng, k: usize) -> DVector<f64> {
    let e: Vec<f64> = (0..k).map(|_| -rng.gen_range(f64::MIN_POSITIVE..1.0f64).ln()).collect();
    let s: f64 = e.iter().sum();
    DVector::from_iterator(k, e.into_iter().map(|v| v / s))
}
