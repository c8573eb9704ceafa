//! Seeded property checks that run from the command line.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use rkadapt::linprog::{self, LinearProgram, LpStatus};
use rkadapt::order::dof_table;
use rkadapt::stability::{perturbation_bound_check, stability_function, verify_convex_containment};
use rkadapt::tableau::{builtin, ButcherTableau, Method};

#[derive(Clone, Debug, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub draws: usize,
    pub violations: usize,
    pub detail: String,
}

impl PropertyResult {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn random_weights(rng: &mut ChaCha8Rng, b: &DVector<f64>, size: f64) -> DVector<f64> {
    let mut d = DVector::from_fn(b.len(), |_, _| rng.gen_range(-size..size));
    let mean = d.mean();
    d.add_scalar_mut(-mean);
    b + d
}

fn random_z(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-6.0..0.5), rng.gen_range(-4.0..4.0))
}

fn pick(rng: &mut ChaCha8Rng, catalog: &[ButcherTableau]) -> ButcherTableau {
    catalog[rng.gen_range(0..catalog.len())].clone()
}

fn containment(rng: &mut ChaCha8Rng, catalog: &[ButcherTableau], draws: usize) -> PropertyResult {
    let (mut violations, mut inside) = (0, 0);
    for _ in 0..draws {
        let t = pick(rng, catalog);
        let mut cols = vec![t.b.clone(), random_weights(rng, &t.b, 0.2)];
        cols.extend(t.embedded.iter().map(|e| e.weights.clone()));
        let raw: Vec<f64> = (0..cols.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let sum: f64 = raw.iter().sum();
        let g = DVector::from_iterator(raw.len(), raw.iter().map(|v| v / sum));
        let rep = verify_convex_containment(&t, &DMatrix::from_columns(&cols), &g, &[random_z(rng)]);
        violations += rep.violations;
        inside += rep.in_intersection;
    }
    PropertyResult { name: "convex containment".into(), draws, violations, detail: format!("{inside} samples in all regions") }
}

fn perturbation(rng: &mut ChaCha8Rng, catalog: &[ButcherTableau], draws: usize) -> PropertyResult {
    let mut violations = 0;
    for _ in 0..draws {
        let t = pick(rng, catalog);
        let bt = random_weights(rng, &t.b, 0.5);
        if perturbation_bound_check(&t, &t.b, &bt, random_z(rng)).is_some_and(|r| !r.holds()) {
            violations += 1;
        }
    }
    PropertyResult { name: "perturbation bound".into(), draws, violations, detail: String::new() }
}

fn affinity(rng: &mut ChaCha8Rng, catalog: &[ButcherTableau], draws: usize) -> PropertyResult {
    let (mut violations, mut worst) = (0, 0.0f64);
    for _ in 0..draws {
        let t = pick(rng, catalog);
        let (w1, w2) = (random_weights(rng, &t.b, 1.0), random_weights(rng, &t.b, 1.0));
        let theta = rng.gen_range(-2.0..3.0);
        let z = random_z(rng);
        let mixed = stability_function(&t, &(&w1 * theta + &w2 * (1.0 - theta)), z);
        let split = stability_function(&t, &w1, z) * theta + stability_function(&t, &w2, z) * (1.0 - theta);
        if !(mixed.is_finite() && split.is_finite()) {
            continue;
        }
        let dev = (mixed - split).norm() / (1.0 + split.norm());
        worst = worst.max(dev);
        if dev > 1e-12 {
            violations += 1;
        }
    }
    PropertyResult { name: "affinity in the weights".into(), draws, violations, detail: format!("max deviation {worst:.3e}") }
}

/// `min c.x, G x <= h, x >= 0` against its dual `min h.y, -G^T y <= c, y >= 0`:
/// optimal values are negatives of each other, and an unbounded primal has
/// an infeasible dual.
fn duality(rng: &mut ChaCha8Rng, draws: usize) -> PropertyResult {
    let mut violations = 0;
    let mut counts = [0usize; 3];
    for _ in 0..draws {
        let n = rng.gen_range(2..=4);
        let m = rng.gen_range(1..=5);
        let g: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(-4..=4) as f64).collect()).collect();
        let h: Vec<f64> = (0..m).map(|_| rng.gen_range(-3..=8) as f64).collect();
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-5..=5) as f64).collect();
        let mut primal = LinearProgram::new(c.clone());
        for (row, rhs) in g.iter().zip(&h) {
            primal.le(row.clone(), *rhs);
        }
        let mut dual = LinearProgram::new(h.clone());
        for j in 0..n {
            dual.le((0..m).map(|i| -g[i][j]).collect(), c[j]);
        }
        let (Ok(p), Ok(d)) = (linprog::solve(&primal), linprog::solve(&dual)) else {
            violations += 1;
            continue;
        };
        counts[p.status as usize] += 1;
        let ok = match p.status {
            LpStatus::Optimal => {
                d.status == LpStatus::Optimal && (p.objective_value + d.objective_value).abs() <= 1e-8
            }
            LpStatus::Unbounded => d.status == LpStatus::Infeasible,
            LpStatus::Infeasible => d.status != LpStatus::Optimal,
        };
        if !ok {
            violations += 1;
        }
    }
    PropertyResult {
        name: "simplex strong duality".into(),
        draws,
        violations,
        detail: format!("{} optimal, {} infeasible, {} unbounded", counts[0], counts[1], counts[2]),
    }
}

fn dof() -> PropertyResult {
    let want: [&[usize]; 12] = [
        &[3, 2, 0, 0],
        &[9, 8, 6, 4],
        &[5, 4, 2, 1, 0],
        &[6, 5, 3, 1, 0],
        &[0],
        &[3, 2, 1, 0, 0],
        &[2, 1, 0, 0, 0],
        &[4, 3, 1, 0],
        &[2, 1],
        &[2, 1],
        &[5, 4, 2],
        &[9, 8, 6, 3],
    ];
    let rows = dof_table();
    let violations = rows.iter().zip(want).filter(|(r, w)| r.dof.as_slice() != *w).count();
    PropertyResult { name: "degrees-of-freedom table".into(), draws: rows.len(), violations, detail: String::new() }
}

/// Run every property with `draws` random draws each.
pub fn run(seed: u64, draws: usize) -> Vec<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let catalog: Vec<ButcherTableau> = Method::ALL.iter().map(|&m| builtin(m)).collect();
    let ssp = builtin(Method::Ssp33);
    let r = stability_function(&ssp, &ssp.b, Complex64::new(-2.5, 0.0)).norm();
    vec![
        dof(),
        containment(&mut rng, &catalog, draws),
        perturbation(&mut rng, &catalog, draws),
        affinity(&mut rng, &catalog, draws),
        duality(&mut rng, draws),
        PropertyResult {
            name: "SSP33 |R(-2.5)| <= 1".into(),
            draws: 1,
            violations: usize::from(r > 1.0),
            detail: format!("|R(-2.5)| = {r:.6}"),
        },
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn small_run_passes() {
        for r in super::run(7, 200) {
            assert!(r.passed(), "{r:?}");
        }
    }
}
