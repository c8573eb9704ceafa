//! Linear stability of Runge–Kutta weights.
//!
//! For the test equation `y' = z y` one step multiplies by
//! `R_w(z) = 1 + z w^T (I - zA)^{-1} e`, which is affine in `w`. Convex
//! combinations of weights therefore give `|R_{Bg}| <= sum g_i |R_{b^i}|`,
//! so their stability region contains the intersection of the components'
//! regions. For free adaptation the change is bounded by
//! `||b~ - b||_1 ||z (I - zA)^{-1} e||_inf`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::tableau::ButcherTableau;

/// Slack for region membership and the bound checks.
pub const REGION_SLACK: f64 = 1e-12;
/// Default grid resolution per axis.
pub const DEFAULT_RESOLUTION: usize = 400;

/// `(I - zA)^{-1} e`, or `None` when `I - zA` is singular.
pub fn resolvent(tableau: &ButcherTableau, z: Complex64) -> Option<DVector<Complex64>> {
    let s = tableau.stages();
    let m = DMatrix::from_fn(s, s, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        Complex64::new(id, 0.0) - z * tableau.a[(i, j)]
    });
    let lu = m.lu();
    let det = lu.determinant();
    if det.norm() <= 1e-14 {
        return None;
    }
    lu.solve(&DVector::from_element(s, Complex64::new(1.0, 0.0)))
}

fn apply(w: &DVector<f64>, z: Complex64, v: &DVector<Complex64>) -> Complex64 {
    let dot: Complex64 = w.iter().zip(v.iter()).map(|(wi, vi)| vi * *wi).sum();
    Complex64::new(1.0, 0.0) + z * dot
}

/// `R_w(z)`. At a pole the result has infinite magnitude.
pub fn stability_function(tableau: &ButcherTableau, w: &DVector<f64>, z: Complex64) -> Complex64 {
    match resolvent(tableau, z) {
        Some(v) => apply(w, z, &v),
        None => Complex64::new(f64::INFINITY, 0.0),
    }
}

/// Coefficients `[1, w^T e, w^T A e, w^T A^2 e, ...]` of `R_w` for an
/// explicit tableau (a polynomial of degree at most `s`).
pub fn explicit_polynomial(tableau: &ButcherTableau, w: &DVector<f64>) -> Vec<f64> {
    let s = tableau.stages();
    let mut coeffs = vec![1.0];
    let mut v = DVector::from_element(s, 1.0);
    for _ in 0..s {
        coeffs.push(w.dot(&v));
        v = &tableau.a * v;
    }
    coeffs
}

pub fn evaluate_polynomial(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
}

/// Axis-aligned rectangle in the complex plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rectangle {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rectangle {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Rectangle { re_min, re_max, im_min, im_max }
    }
}

/// `|R(z)|` on a regular grid, stored row by row (imaginary part outer).
#[derive(Clone, Debug, PartialEq)]
pub struct StabilitySample {
    pub rect: Rectangle,
    pub resolution: (usize, usize),
    pub values: Vec<f64>,
    pub weights: DVector<f64>,
}

impl StabilitySample {
    pub fn node(&self, i_re: usize, i_im: usize) -> Complex64 {
        grid_node(&self.rect, self.resolution, i_re, i_im)
    }

    pub fn value(&self, i_re: usize, i_im: usize) -> f64 {
        self.values[i_im * self.resolution.0 + i_re]
    }

    pub fn stable(&self, i_re: usize, i_im: usize) -> bool {
        self.value(i_re, i_im) <= 1.0 + REGION_SLACK
    }

    /// Membership mask in storage order.
    pub fn mask(&self) -> Vec<bool> {
        self.values.iter().map(|v| *v <= 1.0 + REGION_SLACK).collect()
    }

    /// `(z, |R(z)|)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (Complex64, f64)> + '_ {
        let (nx, ny) = self.resolution;
        (0..ny).flat_map(move |j| (0..nx).map(move |i| (self.node(i, j), self.value(i, j))))
    }
}

fn grid_node(rect: &Rectangle, (nx, ny): (usize, usize), i: usize, j: usize) -> Complex64 {
    let re = rect.re_min + (rect.re_max - rect.re_min) * i as f64 / (nx - 1) as f64;
    let im = rect.im_min + (rect.im_max - rect.im_min) * j as f64 / (ny - 1) as f64;
    Complex64::new(re, im)
}

/// Sample `|R_w|` on an `nx x ny` grid. Both resolutions must be at least 2.
pub fn sample_region(
    tableau: &ButcherTableau,
    w: &DVector<f64>,
    rect: Rectangle,
    nx: usize,
    ny: usize,
) -> StabilitySample {
    assert!(nx >= 2 && ny >= 2, "grid resolution must be at least 2 per axis");
    let mut values = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            values.push(stability_function(tableau, w, grid_node(&rect, (nx, ny), i, j)).norm());
        }
    }
    StabilitySample { rect, resolution: (nx, ny), values, weights: w.clone() }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContainmentReport {
    pub samples: usize,
    /// Samples inside every component region.
    pub in_intersection: usize,
    pub violations: usize,
    /// Largest `|R_{Bg}| - min(1, sum g_i |R_i|)` over the intersection.
    pub max_excess: f64,
}

impl ContainmentReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Check `|R_{Bg}(z)| <= sum g_i |R_{b^i}(z)| <= 1` at every sample `z` that
/// lies in all component regions. `b_columns` is `s x K`.
pub fn verify_convex_containment(
    tableau: &ButcherTableau,
    b_columns: &DMatrix<f64>,
    g: &DVector<f64>,
    zs: &[Complex64],
) -> ContainmentReport {
    let combined = b_columns * g;
    let mut report = ContainmentReport { samples: zs.len(), ..Default::default() };
    for &z in zs {
        let Some(v) = resolvent(tableau, z) else { continue };
        let mags: Vec<f64> = (0..b_columns.ncols())
            .map(|k| apply(&b_columns.column(k).into_owned(), z, &v).norm())
            .collect();
        if mags.iter().any(|m| *m > 1.0 + REGION_SLACK) {
            continue;
        }
        report.in_intersection += 1;
        let bound: f64 = mags.iter().zip(g.iter()).map(|(m, gi)| m * gi).sum();
        let r = apply(&combined, z, &v).norm();
        let excess = r - bound.min(1.0);
        report.max_excess = report.max_excess.max(excess);
        if r > bound + REGION_SLACK || r > 1.0 + REGION_SLACK {
            report.violations += 1;
        }
    }
    report
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbationBound {
    /// `|R_{b~}(z)|`.
    pub adapted: f64,
    /// `|R_b(z)| + ||b~ - b||_1 ||z (I - zA)^{-1} e||_inf`.
    pub bound: f64,
}

impl PerturbationBound {
    pub fn holds(&self) -> bool {
        self.adapted <= self.bound + REGION_SLACK
    }

    pub fn slack(&self) -> f64 {
        self.bound - self.adapted
    }
}

/// Evaluate both sides of the free-adaptation bound. `None` at a pole.
pub fn perturbation_bound_check(
    tableau: &ButcherTableau,
    b: &DVector<f64>,
    b_tilde: &DVector<f64>,
    z: Complex64,
) -> Option<PerturbationBound> {
    let v = resolvent(tableau, z)?;
    let zv = v.iter().map(|x| (z * x).norm()).fold(0.0, f64::max);
    Some(PerturbationBound {
        adapted: apply(b_tilde, z, &v).norm(),
        bound: apply(b, z, &v).norm() + (b_tilde - b).lp_norm(1) * zv,
    })
}
