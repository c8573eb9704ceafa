//! Test problems: right-hand sides, bounds, linear invariants and
//! reference solutions.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::tableau::Method;

pub type RhsFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync>;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProblemError {
    #[error("problem `{0}` has no reference solution")]
    NoReference(String),
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("reference integration failed: {0}")]
    ReferenceFailed(String),
}

/// Componentwise bounds `lower <= u <= upper`; either side may be absent.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bounds {
    pub lower: Option<DVector<f64>>,
    pub upper: Option<DVector<f64>>,
}

impl Bounds {
    pub fn none() -> Self {
        Bounds::default()
    }

    pub fn nonnegative(m: usize) -> Self {
        Bounds { lower: Some(DVector::zeros(m)), upper: None }
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_none() && self.upper.is_none()
    }

    /// Indices with `u_i < lower_i - tol` and with `u_i > upper_i + tol`.
    pub fn violations(&self, u: &DVector<f64>, tol: f64) -> (Vec<usize>, Vec<usize>) {
        let below = match &self.lower {
            Some(l) => (0..u.len()).filter(|&i| u[i] < l[i] - tol).collect(),
            None => Vec::new(),
        };
        let above = match &self.upper {
            Some(h) => (0..u.len()).filter(|&i| u[i] > h[i] + tol).collect(),
            None => Vec::new(),
        };
        (below, above)
    }

    pub fn satisfied(&self, u: &DVector<f64>, tol: f64) -> bool {
        let (a, b) = self.violations(u, tol);
        a.is_empty() && b.is_empty()
    }

    /// Largest amount by which `u` leaves the bounds (0 if inside).
    pub fn max_violation(&self, u: &DVector<f64>) -> f64 {
        let mut worst = 0.0f64;
        if let Some(l) = &self.lower {
            for i in 0..u.len() {
                worst = worst.max(l[i] - u[i]);
            }
        }
        if let Some(h) = &self.upper {
            for i in 0..u.len() {
                worst = worst.max(u[i] - h[i]);
            }
        }
        worst
    }
}

/// A vector `m` with `m^T f(t, u) = 0` for all `(t, u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearInvariant {
    pub label: String,
    pub weights: DVector<f64>,
}

impl LinearInvariant {
    pub fn new(label: impl Into<String>, weights: DVector<f64>) -> Self {
        LinearInvariant { label: label.into(), weights }
    }

    pub fn value(&self, u: &DVector<f64>) -> f64 {
        self.weights.dot(u)
    }
}

/// `u' = M u + g`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineSystem {
    pub matrix: DMatrix<f64>,
    pub forcing: DVector<f64>,
}

impl AffineSystem {
    /// Exact flow over `t` via the exponential of the augmented matrix
    /// `[[M, g], [0, 0]]`.
    pub fn propagate(&self, u0: &DVector<f64>, t: f64) -> DVector<f64> {
        let m = self.matrix.nrows();
        let mut aug = DMatrix::zeros(m + 1, m + 1);
        aug.view_mut((0, 0), (m, m)).copy_from(&(&self.matrix * t));
        aug.view_mut((0, m), (m, 1)).copy_from(&(&self.forcing * t));
        let e = aug.exp();
        let mut x = DVector::zeros(m + 1);
        x.rows_mut(0, m).copy_from(u0);
        x[m] = 1.0;
        (e * x).rows(0, m).into_owned()
    }
}

/// Settings for references computed by a fine unadapted integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FineSpec {
    pub method: Method,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Reference {
    MatrixExponential(AffineSystem),
    FineIntegration(FineSpec),
    None,
}

/// An initial value problem together with the metadata the integrator and
/// the experiments need.
#[derive(Clone)]
pub struct OdeProblem {
    pub name: String,
    pub dim: usize,
    rhs: RhsFn,
    jacobian: Option<JacobianFn>,
    constant_jacobian: bool,
    pub bounds: Bounds,
    pub invariants: Vec<LinearInvariant>,
    pub u0: DVector<f64>,
    pub t0: f64,
    pub t_end: f64,
    pub reference: Reference,
    /// The right-hand side satisfies `u_i = 0, u >= 0 => f_i >= 0`.
    pub positive: bool,
}

impl fmt::Debug for OdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeProblem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("t0", &self.t0)
            .field("t_end", &self.t_end)
            .field("invariants", &self.invariants.len())
            .finish_non_exhaustive()
    }
}

impl OdeProblem {
    pub fn new(name: impl Into<String>, u0: DVector<f64>, t0: f64, t_end: f64, rhs: RhsFn) -> Self {
        let dim = u0.len();
        OdeProblem {
            name: name.into(),
            dim,
            rhs,
            jacobian: None,
            constant_jacobian: false,
            bounds: Bounds::none(),
            invariants: Vec::new(),
            u0,
            t0,
            t_end,
            reference: Reference::None,
            positive: false,
        }
    }

    pub fn with_jacobian(mut self, jac: JacobianFn) -> Self {
        self.jacobian = Some(jac);
        self.constant_jacobian = false;
        self
    }

    /// Declare `f` affine with Jacobian `jac`. Solvers may then reuse
    /// factorizations across stages and steps.
    pub fn with_constant_jacobian(mut self, jac: DMatrix<f64>) -> Self {
        self.jacobian = Some(Arc::new(move |_t, _u| jac.clone()));
        self.constant_jacobian = true;
        self
    }

    pub fn has_constant_jacobian(&self) -> bool {
        self.constant_jacobian
    }

    pub fn with_bounds(mut self, bounds: Bounds) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn with_invariant(mut self, inv: LinearInvariant) -> Self {
        self.invariants.push(inv);
        self
    }

    pub fn with_reference(mut self, reference: Reference) -> Self {
        self.reference = reference;
        self
    }

    pub fn positive(mut self) -> Self {
        self.positive = true;
        self
    }

    pub fn with_time_span(mut self, t0: f64, t_end: f64) -> Self {
        self.t0 = t0;
        self.t_end = t_end;
        self
    }

    pub fn rhs_into(&self, t: f64, u: &[f64], out: &mut [f64]) {
        (self.rhs)(t, u, out)
    }

    pub fn rhs(&self, t: f64, u: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        (self.rhs)(t, u.as_slice(), out.as_mut_slice());
        out
    }

    pub fn has_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn analytic_jacobian(&self, t: f64, u: &DVector<f64>) -> Option<DMatrix<f64>> {
        self.jacobian.as_ref().map(|j| j(t, u.as_slice()))
    }

    /// Forward-difference Jacobian with increments `sqrt(eps) (1 + |u_i|)`.
    pub fn fd_jacobian(&self, t: f64, u: &DVector<f64>) -> DMatrix<f64> {
        let m = self.dim;
        let f0 = self.rhs(t, u);
        let mut jac = DMatrix::zeros(m, m);
        let mut x = u.clone();
        let mut f = DVector::zeros(m);
        let sqrt_eps = f64::EPSILON.sqrt();
        for j in 0..m {
            let h = sqrt_eps * (1.0 + u[j].abs());
            x[j] = u[j] + h;
            let h = x[j] - u[j];
            (self.rhs)(t, x.as_slice(), f.as_mut_slice());
            for i in 0..m {
                jac[(i, j)] = (f[i] - f0[i]) / h;
            }
            x[j] = u[j];
        }
        jac
    }

    /// Analytic Jacobian when available, finite differences otherwise.
    pub fn jacobian(&self, t: f64, u: &DVector<f64>) -> DMatrix<f64> {
        self.analytic_jacobian(t, u).unwrap_or_else(|| self.fd_jacobian(t, u))
    }
}

fn affine_problem(name: &str, sys: AffineSystem, u0: DVector<f64>, t_end: f64) -> OdeProblem {
    let sys = Arc::new(sys);
    let s1 = Arc::clone(&sys);
    let rhs: RhsFn = Arc::new(move |_t, u, out| {
        let m = s1.matrix.nrows();
        for i in 0..m {
            let mut acc = s1.forcing[i];
            for j in 0..m {
                let a = s1.matrix[(i, j)];
                if a != 0.0 {
                    acc += a * u[j];
                }
            }
            out[i] = acc;
        }
    });
    OdeProblem::new(name, u0, 0.0, t_end, rhs)
        .with_constant_jacobian(sys.matrix.clone())
        .with_reference(Reference::MatrixExponential((*sys).clone()))
}

/// `u' = L u` with `L = [[-5, 1], [5, -1]]`, `u(0) = (1, 0)`.
pub fn linear2x2() -> OdeProblem {
    let l = DMatrix::from_row_slice(2, 2, &[-5.0, 1.0, 5.0, -1.0]);
    let sys = AffineSystem { matrix: l, forcing: DVector::zeros(2) };
    affine_problem("linear2x2", sys, DVector::from_vec(vec![1.0, 0.0]), 1.0)
        .with_bounds(Bounds::nonnegative(2))
        .with_invariant(LinearInvariant::new("total", DVector::from_element(2, 1.0)))
        .positive()
}

/// Michaelis-Menten type term `u1 u2 / (0.01 + u1)`. It has a pole at
/// `u1 = -0.01`, which unadapted runs can approach after going negative.
fn uptake(u1: f64, u2: f64) -> f64 {
    u1 * u2 / (0.01 + u1)
}

/// The four-species production-destruction kinetics, written into `out`.
/// `decay_sign` is `-1` for the mass-conserving form and `+1` for the
/// sign printed in the literature's first statement of the system.
fn reaction_terms(u: &[f64], decay_sign: f64, out: &mut [f64]) {
    let (u1, u2, u3, u4) = (u[0], u[1], u[2], u[3]);
    let m = uptake(u1, u2);
    let g = 0.5 * (1.0 - (-1.21 * u2 * u2).exp()) * u3;
    out[0] = 0.01 * u2 + 0.01 * u3 + 0.003 * u4 - m;
    out[1] = m - 0.01 * u2 - g - 0.05 * u2;
    out[2] = g - 0.01 * u3 - 0.02 * u3;
    out[3] = 0.05 * u2 + 0.02 * u3 + decay_sign * 0.003 * u4;
}

/// Jacobian of [`reaction_terms`], row-major.
fn reaction_jacobian(u: &[f64], decay_sign: f64) -> [[f64; 4]; 4] {
    let (u1, u2, u3) = (u[0], u[1], u[2]);
    let den = 0.01 + u1;
    let m1 = 0.01 * u2 / (den * den);
    let m2 = u1 / den;
    let e = (-1.21 * u2 * u2).exp();
    let g2 = 1.21 * u2 * e * u3;
    let g3 = 0.5 * (1.0 - e);
    [
        [-m1, 0.01 - m2, 0.01, 0.003],
        [m1, m2 - 0.06 - g2, -g3, 0.0],
        [0.0, g2, g3 - 0.03, 0.0],
        [0.0, 0.05, 0.02, decay_sign * 0.003],
    ]
}

/// Four-species reaction system, `u(0) = (8, 2, 1, 4)`, `t in [0, 3]`.
///
/// With `conservative = true` the last equation carries `-0.003 u4`, which
/// makes `sum(u)` invariant; `false` gives the variant with `+0.003 u4`,
/// which does not conserve it.
pub fn reaction4(conservative: bool) -> OdeProblem {
    let sign = if conservative { -1.0 } else { 1.0 };
    let rhs: RhsFn = Arc::new(move |_t, u, out| reaction_terms(u, sign, out));
    let jac: JacobianFn = Arc::new(move |_t, u| {
        let local = reaction_jacobian(u, sign);
        DMatrix::from_fn(4, 4, |i, j| local[i][j])
    });
    let name = if conservative { "reaction4" } else { "reaction4-printed" };
    let mut p = OdeProblem::new(name, DVector::from_vec(vec![8.0, 2.0, 1.0, 4.0]), 0.0, 3.0, rhs)
        .with_jacobian(jac)
        .with_bounds(Bounds::nonnegative(4))
        .with_reference(Reference::FineIntegration(FineSpec { method: Method::CashKarp, dt: 5e-5 }))
        .positive();
    if conservative {
        p = p.with_invariant(LinearInvariant::new("mass", DVector::from_element(4, 1.0)));
    }
    p
}

/// Upwind semidiscretization of `u_t = -a u_x - K u` on `(0, 1)` with
/// inflow value 1 and zero initial data; `n` interior points, `dx = 1/n`.
pub fn advection_decay_with(n: usize, a: f64, k: f64) -> OdeProblem {
    let dx = 1.0 / n as f64;
    let nu = a / dx;
    let mut mat = DMatrix::zeros(n, n);
    for i in 0..n {
        mat[(i, i)] = -(nu + k);
        if i > 0 {
            mat[(i, i - 1)] = nu;
        }
    }
    let mut g = DVector::zeros(n);
    g[0] = nu;
    let sys = AffineSystem { matrix: mat, forcing: g };
    let sys = Arc::new(sys);
    let rhs: RhsFn = Arc::new(move |_t, u, out| {
        out[0] = nu * (1.0 - u[0]) - k * u[0];
        for i in 1..u.len() {
            out[i] = nu * (u[i - 1] - u[i]) - k * u[i];
        }
    });
    OdeProblem::new("advection-decay", DVector::zeros(n), 0.0, 1.0, rhs)
        .with_constant_jacobian(sys.matrix.clone())
        .with_reference(Reference::MatrixExponential((*sys).clone()))
        .with_bounds(Bounds::nonnegative(n))
        .positive()
}

pub fn advection_decay(n: usize) -> OdeProblem {
    advection_decay_with(n, 1.0, 1.0)
}

/// Index of the unit spike in the diffusion initial data.
pub fn diffusion_spike_index(n: usize) -> usize {
    n / 2
}

/// Three-point discretization of `u_t = D u_xx` on `[-0.5, 0.5]` with
/// homogeneous Dirichlet data. The `n` unknowns sit at
/// `x_i = -0.5 + (i + 1) dx`, `dx = 1/(n + 1)`; the initial data is a unit
/// spike at index `n / 2` (the exact center when `n` is odd).
pub fn diffusion_with(n: usize, d: f64) -> OdeProblem {
    let dx = 1.0 / (n as f64 + 1.0);
    let nu = d / (dx * dx);
    let mut mat = DMatrix::zeros(n, n);
    for i in 0..n {
        mat[(i, i)] = -2.0 * nu;
        if i > 0 {
            mat[(i, i - 1)] = nu;
        }
        if i + 1 < n {
            mat[(i, i + 1)] = nu;
        }
    }
    let mut u0 = DVector::zeros(n);
    u0[diffusion_spike_index(n)] = 1.0;
    let sys = AffineSystem { matrix: mat, forcing: DVector::zeros(n) };
    let rhs: RhsFn = Arc::new(move |_t, u, out| {
        let m = u.len();
        for i in 0..m {
            let left = if i > 0 { u[i - 1] } else { 0.0 };
            let right = if i + 1 < m { u[i + 1] } else { 0.0 };
            out[i] = nu * (left - 2.0 * u[i] + right);
        }
    });
    OdeProblem::new("diffusion", u0, 0.0, 0.1, rhs)
        .with_constant_jacobian(sys.matrix.clone())
        .with_reference(Reference::MatrixExponential(sys))
        .with_bounds(Bounds::nonnegative(n))
        .positive()
}

pub fn diffusion(n: usize) -> OdeProblem {
    diffusion_with(n, 1.0)
}

/// Initial data for the advection-diffusion-reaction problem at `x`.
///
/// The literature leaves this profile unspecified; this is a smooth,
/// strictly positive periodic profile with the same species scales as the
/// well-mixed reaction system's `(8, 2, 1, 4)`.
pub fn adr_initial_profile(x: f64) -> [f64; 4] {
    let s = (PI * x).sin();
    [
        8.0 + 2.0 * s * s,
        2.0 + 0.5 * (2.0 * PI * x).cos(),
        1.0 + 0.5 * (2.0 * PI * x).sin().powi(2),
        4.0 + (2.0 * PI * x).cos(),
    ]
}

/// Periodic advection-diffusion with the conservative reaction kinetics at
/// every grid point. State layout is interleaved: species `s` at cell `i`
/// is component `4 i + s`. Upwind advection with speed `a > 0`, central
/// diffusion with coefficient `d`, `dx = 1/n`.
pub fn adr_with(n: usize, a: f64, d: f64) -> OdeProblem {
    let dx = 1.0 / n as f64;
    let adv = a / dx;
    let dif = d / (dx * dx);
    let rhs: RhsFn = Arc::new(move |_t, u, out| {
        let mut r = [0.0; 4];
        for i in 0..n {
            let left = (i + n - 1) % n;
            let right = (i + 1) % n;
            reaction_terms(&u[4 * i..4 * i + 4], -1.0, &mut r);
            for s in 0..4 {
                let c = u[4 * i + s];
                let l = u[4 * left + s];
                let rr = u[4 * right + s];
                out[4 * i + s] = adv * (l - c) + dif * (l - 2.0 * c + rr) + r[s];
            }
        }
    });
    let jac: JacobianFn = Arc::new(move |_t, u| {
        let mut j = DMatrix::zeros(4 * n, 4 * n);
        for i in 0..n {
            let left = (i + n - 1) % n;
            let right = (i + 1) % n;
            let local = reaction_jacobian(&u[4 * i..4 * i + 4], -1.0);
            for s in 0..4 {
                let row = 4 * i + s;
                for q in 0..4 {
                    j[(row, 4 * i + q)] += local[s][q];
                }
                j[(row, 4 * i + s)] -= adv + 2.0 * dif;
                j[(row, 4 * left + s)] += adv + dif;
                j[(row, 4 * right + s)] += dif;
            }
        }
        j
    });
    let mut u0 = DVector::zeros(4 * n);
    for i in 0..n {
        let x = i as f64 * dx;
        let prof = adr_initial_profile(x);
        for s in 0..4 {
            u0[4 * i + s] = prof[s];
        }
    }
    OdeProblem::new("adr", u0, 0.0, 50.0, rhs)
        .with_jacobian(jac)
        .with_bounds(Bounds::nonnegative(4 * n))
        .with_invariant(LinearInvariant::new("mass", DVector::from_element(4 * n, 1.0)))
        .with_reference(Reference::FineIntegration(FineSpec { method: Method::ExtrapolationBe3, dt: 1e-3 }))
        .positive()
}

pub fn adr(n: usize) -> OdeProblem {
    adr_with(n, 1e-2, 1e-6)
}

/// Species order of the stratospheric system.
pub const STRATOSPHERIC_SPECIES: [&str; 6] = ["O1D", "O", "O3", "O2", "NO", "NO2"];

/// Unscaled initial concentrations at noon.
pub const STRATOSPHERIC_U0: [f64; 6] = [9.906e1, 6.624e8, 5.326e11, 1.697e16, 4.000e6, 1.093e9];

const AIR_DENSITY: f64 = 8.120e16;

/// Normalized solar intensity; `t` in seconds.
pub fn solar_intensity(t: f64) -> f64 {
    let hour = (t / 3600.0).rem_euclid(24.0);
    let (rise, set) = (4.5, 19.5);
    if (rise..=set).contains(&hour) {
        let x = (2.0 * hour - rise - set) / (set - rise);
        0.5 + 0.5 * (PI * x.abs() * x).cos()
    } else {
        0.0
    }
}

/// Right-hand side of the stratospheric chemistry in physical units.
pub fn stratospheric_rates(t: f64, u: &[f64], out: &mut [f64]) {
    let sigma = solar_intensity(t);
    let (o1d, o, o3, o2, no, no2) = (u[0], u[1], u[2], u[3], u[4], u[5]);
    let r1 = 2.643e-10 * sigma.powi(3) * o2;
    let r2 = 8.018e-17 * o * o2;
    let r3 = 6.120e-4 * sigma * o3;
    let r4 = 1.567e-15 * o3 * o;
    let r5 = 1.070e-3 * sigma * sigma * o3;
    let r6 = 7.110e-11 * AIR_DENSITY * o1d;
    let r7 = 1.200e-10 * o1d * o3;
    let r8 = 6.062e-15 * o3 * no;
    let r9 = 1.069e-11 * no2 * o;
    let r10 = 1.289e-2 * sigma * no2;
    let r11 = 1.0e-8 * no * o;
    out[0] = r5 - r6 - r7;
    out[1] = 2.0 * r1 - r2 + r3 - r4 + r6 - r9 + r10 - r11;
    out[2] = r2 - r3 - r4 - r5 - r7 - r8;
    out[3] = -r1 - r2 + r3 + 2.0 * r4 + r5 + 2.0 * r7 + r8 + r9;
    out[4] = -r8 + r9 + r10 - r11;
    out[5] = r8 - r9 - r10 + r11;
}

/// Jacobian of [`stratospheric_rates`] in physical units.
pub fn stratospheric_rate_jacobian(t: f64, u: &[f64]) -> DMatrix<f64> {
    let sigma = solar_intensity(t);
    let (o1d, o, o3, o2, no, no2) = (u[0], u[1], u[2], u[3], u[4], u[5]);
    let k = [
        2.643e-10 * sigma.powi(3),
        8.018e-17,
        6.120e-4 * sigma,
        1.567e-15,
        1.070e-3 * sigma * sigma,
        7.110e-11 * AIR_DENSITY,
        1.200e-10,
        6.062e-15,
        1.069e-11,
        1.289e-2 * sigma,
        1.0e-8,
    ];
    // d r_j / d u_i, species order O1D, O, O3, O2, NO, NO2
    let mut g = DMatrix::<f64>::zeros(11, 6);
    g[(0, 3)] = k[0];
    g[(1, 1)] = k[1] * o2;
    g[(1, 3)] = k[1] * o;
    g[(2, 2)] = k[2];
    g[(3, 2)] = k[3] * o;
    g[(3, 1)] = k[3] * o3;
    g[(4, 2)] = k[4];
    g[(5, 0)] = k[5];
    g[(6, 0)] = k[6] * o3;
    g[(6, 2)] = k[6] * o1d;
    g[(7, 2)] = k[7] * no;
    g[(7, 4)] = k[7] * o3;
    g[(8, 5)] = k[8] * o;
    g[(8, 1)] = k[8] * no2;
    g[(9, 5)] = k[9];
    g[(10, 4)] = k[10] * o;
    g[(10, 1)] = k[10] * no;
    #[rustfmt::skip]
    let stoich = DMatrix::from_row_slice(6, 11, &[
        0.0, 0.0, 0.0, 0.0, 1.0, -1.0, -1.0, 0.0, 0.0, 0.0, 0.0,
        2.0, -1.0, 1.0, -1.0, 0.0, 1.0, 0.0, 0.0, -1.0, 1.0, -1.0,
        0.0, 1.0, -1.0, -1.0, -1.0, 0.0, -1.0, -1.0, 0.0, 0.0, 0.0,
        -1.0, -1.0, 1.0, 2.0, 1.0, 0.0, 2.0, 1.0, 1.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 1.0, 1.0, -1.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, -1.0, -1.0, 1.0,
    ]);
    stoich * g
}

/// Stratospheric ozone chemistry from 12 h to 84 h (time in seconds),
/// scaled so every component starts at 1. Invariants are transformed to
/// the scaled variables: `m^T u = (D m)^T v` with `u = D v`.
pub fn stratospheric() -> OdeProblem {
    let scale = STRATOSPHERIC_U0;
    let rhs: RhsFn = Arc::new(move |t, v, out| {
        let mut u = [0.0; 6];
        for i in 0..6 {
            u[i] = v[i] * scale[i];
        }
        stratospheric_rates(t, &u, out);
        for i in 0..6 {
            out[i] /= scale[i];
        }
    });
    let jac: JacobianFn = Arc::new(move |t, v| {
        let u: Vec<f64> = v.iter().zip(scale.iter()).map(|(vi, si)| vi * si).collect();
        let mut j = stratospheric_rate_jacobian(t, &u);
        for r in 0..6 {
            for c in 0..6 {
                j[(r, c)] *= scale[c] / scale[r];
            }
        }
        j
    });
    let d = DVector::from_row_slice(&scale);
    let m_o = DVector::from_vec(vec![1.0, 1.0, 3.0, 2.0, 1.0, 2.0]);
    let m_n = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
    OdeProblem::new("stratospheric", DVector::from_element(6, 1.0), 12.0 * 3600.0, 84.0 * 3600.0, rhs)
        .with_jacobian(jac)
        .with_bounds(Bounds::nonnegative(6))
        .with_invariant(LinearInvariant::new("oxygen", m_o.component_mul(&d)))
        .with_invariant(LinearInvariant::new("nitrogen", m_n.component_mul(&d)))
        .with_reference(Reference::FineIntegration(FineSpec { method: Method::ExtrapolationBe3, dt: 60.0 }))
        .positive()
}

/// Build a problem by name with default parameters.
pub fn by_name(name: &str) -> Result<OdeProblem, ProblemError> {
    Ok(match name {
        "linear2x2" => linear2x2(),
        "reaction4" => reaction4(true),
        "reaction4-printed" => reaction4(false),
        "advection-decay" => advection_decay(100),
        "diffusion" => diffusion(100),
        "adr" => adr(100),
        "stratospheric" => stratospheric(),
        _ => return Err(ProblemError::UnknownProblem(name.to_string())),
    })
}

pub const PROBLEM_NAMES: [&str; 7] =
    ["linear2x2", "reaction4", "reaction4-printed", "advection-decay", "diffusion", "adr", "stratospheric"];

/// Exact or high-accuracy solution at time `t`.
pub fn reference_solution(problem: &OdeProblem, t: f64) -> Result<DVector<f64>, ProblemError> {
    match &problem.reference {
        Reference::MatrixExponential(sys) => Ok(sys.propagate(&problem.u0, t - problem.t0)),
        Reference::FineIntegration(spec) => Ok(fine_reference(problem, t, *spec)?.0),
        Reference::None => Err(ProblemError::NoReference(problem.name.clone())),
    }
}

/// Unadapted fixed-step integration with `spec`, plus a Richardson
/// estimate of its error from a second run at twice the step.
pub fn fine_reference(
    problem: &OdeProblem,
    t: f64,
    spec: FineSpec,
) -> Result<(DVector<f64>, f64), ProblemError> {
    use crate::integrator::{integrate, IntegratorConfig};
    let tableau = spec.method.tableau();
    let p = problem.clone().with_time_span(problem.t0, t);
    let run = |dt: f64| -> Result<DVector<f64>, ProblemError> {
        let cfg = IntegratorConfig::fixed(dt);
        integrate(&p, &tableau, &cfg)
            .map(|tr| tr.final_state().clone())
            .map_err(|e| ProblemError::ReferenceFailed(e.to_string()))
    };
    let fine = run(spec.dt)?;
    let coarse = run(2.0 * spec.dt)?;
    let factor = 2f64.powi(tableau.order as i32) - 1.0;
    let estimate = (&fine - &coarse).amax() / factor;
    Ok((fine, estimate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(rng: &mut ChaCha8Rng, m: usize, lo: f64, hi: f64) -> DVector<f64> {
        DVector::from_fn(m, |_, _| rng.gen_range(lo..hi))
    }

    fn all_problems() -> Vec<OdeProblem> {
        vec![linear2x2(), reaction4(true), advection_decay(20), diffusion(21), adr(10), stratospheric()]
    }

    #[test]
    fn linear2x2_data() {
        let p = linear2x2();
        let f = p.rhs(0.0, &p.u0);
        assert_eq!(f.as_slice(), &[-5.0, 5.0]);
        let Reference::MatrixExponential(sys) = &p.reference else { panic!() };
        let mut eig: Vec<f64> = sys.matrix.clone().eigenvalues().unwrap().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        assert!((eig[0] + 6.0).abs() < 1e-12 && eig[1].abs() < 1e-12, "{eig:?}");
    }

    #[test]
    fn linear2x2_reference_tends_to_null_vector() {
        let p = linear2x2();
        assert_eq!(reference_solution(&p, 0.0).unwrap(), p.u0);
        let u = reference_solution(&p, 20.0).unwrap();
        assert!((u[0] - 1.0 / 6.0).abs() < 1e-12 && (u[1] - 5.0 / 6.0).abs() < 1e-12, "{u}");
    }

    #[test]
    fn declared_invariants_annihilate_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in all_problems() {
            for _ in 0..1000 {
                let u = random_state(&mut rng, p.dim, 0.0, 2.0);
                let t = p.t0 + rng.gen_range(0.0..1.0) * (p.t_end - p.t0);
                let f = p.rhs(t, &u);
                // scale by the magnitude of the individual terms
                for inv in &p.invariants {
                    let terms: f64 = inv.weights.iter().zip(f.iter()).map(|(m, x)| (m * x).abs()).sum();
                    let v = inv.weights.dot(&f);
                    assert!(v.abs() <= 1e-12 * terms.max(f64::MIN_POSITIVE), "{} {}: {v} vs {terms}", p.name, inv.label);
                }
            }
        }
    }

    #[test]
    fn positivity_on_boundary_faces() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in all_problems() {
            assert!(p.positive);
            for _ in 0..200 {
                let mut u = random_state(&mut rng, p.dim, 0.0, 3.0);
                let i = rng.gen_range(0..p.dim);
                u[i] = 0.0;
                let t = p.t0 + rng.gen_range(0.0..1.0) * (p.t_end - p.t0);
                let f = p.rhs(t, &u);
                let scale = f.amax().max(1.0);
                assert!(f[i] >= -1e-12 * scale, "{}: f_{i} = {}", p.name, f[i]);
            }
        }
    }

    #[test]
    fn finite_for_negative_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in all_problems() {
            for _ in 0..200 {
                let u = random_state(&mut rng, p.dim, -1.0, 1.0);
                let f = p.rhs(p.t0, &u);
                assert!(f.iter().all(|x| x.is_finite()), "{}", p.name);
            }
        }
    }

    #[test]
    fn reaction4_mass_balance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cons = reaction4(true);
        let printed = reaction4(false);
        assert!(printed.invariants.is_empty());
        for _ in 0..100 {
            let u = random_state(&mut rng, 4, 0.0, 10.0);
            assert!(cons.rhs(0.0, &u).sum().abs() < 1e-13);
            let s = printed.rhs(0.0, &u).sum();
            assert!((s - 0.006 * u[3]).abs() < 1e-13);
        }
        let mut u = random_state(&mut rng, 4, 0.0, 10.0);
        u[2] = 0.0;
        assert_eq!(cons.rhs(0.0, &u)[2], 0.0);
    }

    #[test]
    fn advection_decay_structure() {
        let p = advection_decay(100);
        let Reference::MatrixExponential(sys) = &p.reference else { panic!() };
        assert_eq!(sys.matrix[(5, 5)], -101.0);
        assert_eq!(sys.matrix[(5, 4)], 100.0);
        assert_eq!(sys.matrix[(4, 5)], 0.0);
        let f0 = p.rhs(0.0, &p.u0);
        assert_eq!(f0, sys.forcing);
        assert!(f0.iter().all(|&x| x >= 0.0));
        // analytic and matrix forms agree
        let u = DVector::from_fn(100, |i, _| (i as f64 * 0.1).sin());
        assert!((p.rhs(0.0, &u) - (&sys.matrix * &u + &sys.forcing)).amax() < 1e-12);
    }

    #[test]
    fn advection_decay_steady_state_is_geometric() {
        let p = advection_decay(100);
        let u = reference_solution(&p, 5.0).unwrap();
        let ratio = 100.0 / 101.0;
        assert!((u[0] - ratio).abs() < 1e-10);
        for i in 1..100 {
            assert!((u[i] / u[i - 1] - ratio).abs() < 1e-8, "{i}");
        }
    }

    #[test]
    fn diffusion_stencil_and_symmetry() {
        let p = diffusion(101);
        let Reference::MatrixExponential(sys) = &p.reference else { panic!() };
        let nu = 102.0f64.powi(2);
        assert!((sys.matrix[(10, 9)] - nu).abs() < 1e-9);
        assert!((sys.matrix[(10, 10)] + 2.0 * nu).abs() < 1e-9);
        assert!((sys.matrix[(10, 11)] - nu).abs() < 1e-9);
        assert!(p.invariants.is_empty());
        let u = reference_solution(&p, 0.1).unwrap();
        for i in 0..101 {
            assert!((u[i] - u[100 - i]).abs() < 1e-12);
        }
        // Dirichlet loss
        assert!(u.sum() < 1.0 - 1e-6);
    }

    #[test]
    fn adr_advection_scale() {
        let p = adr(100);
        assert_eq!(p.dim, 400);
        assert!(p.u0.min() > 0.0);
        // linear part on a single-species bump: advection coefficient a/dx = 1
        let mut u = DVector::zeros(400);
        u[4 * 10] = 1.0;
        let f = p.rhs(0.0, &u);
        // reaction term at cell 10: 0.01 u2... all zero apart from u1; uptake(1, 0) = 0
        assert!((f[4 * 11] - (1.0 + 1e-6 * 1e4)).abs() < 1e-12, "{}", f[44]);
    }

    #[test]
    fn solar_intensity_profile() {
        assert_eq!(solar_intensity(12.0 * 3600.0), 1.0);
        assert_eq!(solar_intensity(2.0 * 3600.0), 0.0);
        assert!(solar_intensity(4.5 * 3600.0).abs() < 1e-15);
        assert!(solar_intensity(19.5 * 3600.0).abs() < 1e-15);
        // next day
        assert_eq!(solar_intensity(36.0 * 3600.0), 1.0);
        let morning = solar_intensity(8.0 * 3600.0);
        let evening = solar_intensity(16.0 * 3600.0);
        assert!((morning - evening).abs() < 1e-15);
    }

    #[test]
    fn stratospheric_normalization() {
        let p = stratospheric();
        assert_eq!(p.u0, DVector::from_element(6, 1.0));
        assert_eq!(p.t0, 43200.0);
        assert_eq!(p.t_end, 302400.0);
        let mut phys = [0.0; 6];
        stratospheric_rates(p.t0, &STRATOSPHERIC_U0, &mut phys);
        let scaled = p.rhs(p.t0, &p.u0);
        for i in 0..6 {
            assert!((scaled[i] * STRATOSPHERIC_U0[i] - phys[i]).abs() <= 1e-12 * phys[i].abs());
        }
        let m_o = &p.invariants[0];
        let total: f64 = [1.0, 1.0, 3.0, 2.0, 1.0, 2.0].iter().zip(STRATOSPHERIC_U0).map(|(m, u)| m * u).sum();
        assert!((m_o.value(&p.u0) - total).abs() <= 1e-15 * total);
    }

    #[test]
    fn analytic_jacobians_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for p in [reaction4(true), reaction4(false), adr(6), stratospheric()] {
            assert!(p.has_jacobian(), "{}", p.name);
            for _ in 0..20 {
                let u = random_state(&mut rng, p.dim, 0.2, 3.0);
                let t = p.t0 + rng.gen_range(0.0..1.0) * (p.t_end - p.t0);
                let j = p.analytic_jacobian(t, &u).unwrap();
                for c in 0..p.dim {
                    let h = 1e-4 * u[c];
                    let mut up = u.clone();
                    let mut dn = u.clone();
                    up[c] += h;
                    dn[c] -= h;
                    let col = (p.rhs(t, &up) - p.rhs(t, &dn)) / (2.0 * h);
                    let scale = col.amax().max(j.column(c).amax()).max(1e-300);
                    let err = (&col - j.column(c)).amax();
                    assert!(err <= 1e-6 * scale, "{} column {c}: {err:e} of {scale:e}", p.name);
                }
            }
        }
    }

    #[test]
    fn unknown_names() {
        assert!(matches!(by_name("lorenz"), Err(ProblemError::UnknownProblem(_))));
        for n in PROBLEM_NAMES {
            assert!(by_name(n).is_ok());
        }
    }
}
