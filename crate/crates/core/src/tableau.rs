//! Butcher tableaux and the built-in method catalog.
//!
//! Coefficients that the literature gives as rationals are written as
//! `num / den` pairs so each entry is the correctly rounded double of the
//! exact value. Irrational entries (TR-BDF2, Lobatto IIIC, Radau IIA) are
//! evaluated from their closed forms in `f64`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_rational::Rational64;

/// Sparsity class of the coefficient matrix `A`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Structure {
    /// `A` strictly lower triangular.
    Explicit,
    /// `A` lower triangular with at least one nonzero diagonal entry.
    DiagonallyImplicit,
    /// Anything else.
    FullyImplicit,
}

impl Structure {
    /// Classify a square coefficient matrix by its sparsity pattern.
    pub fn of(a: &DMatrix<f64>) -> Structure {
        let s = a.nrows();
        let mut upper = false;
        let mut diag = false;
        for i in 0..s {
            for j in i..s {
                if a[(i, j)] != 0.0 {
                    if i == j {
                        diag = true;
                    } else {
                        upper = true;
                    }
                }
            }
        }
        match (upper, diag) {
            (true, _) => Structure::FullyImplicit,
            (false, true) => Structure::DiagonallyImplicit,
            (false, false) => Structure::Explicit,
        }
    }

    pub fn is_runnable(self) -> bool {
        !matches!(self, Structure::FullyImplicit)
    }
}

/// An alternative weight vector sharing the tableau's `A` and `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedWeights {
    pub label: String,
    pub weights: DVector<f64>,
    pub order: usize,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CatalogError {
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("extrapolation depth {0} is not supported (expected 2, 3 or 4)")]
    UnsupportedDepth(usize),
    #[error("inconsistent tableau dimensions: {0}")]
    Dimensions(String),
}

/// Coefficients `(A, b, c)` of a Runge-Kutta method plus metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct ButcherTableau {
    pub name: String,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    /// Design order of `b`.
    pub order: usize,
    pub structure: Structure,
    pub embedded: Vec<EmbeddedWeights>,
}

impl ButcherTableau {
    pub fn new(
        name: impl Into<String>,
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: DVector<f64>,
        order: usize,
    ) -> Result<Self, CatalogError> {
        let s = b.len();
        if a.nrows() != s || a.ncols() != s || c.len() != s || s == 0 {
            return Err(CatalogError::Dimensions(format!(
                "A is {}x{}, b has {}, c has {}",
                a.nrows(),
                a.ncols(),
                s,
                c.len()
            )));
        }
        if order == 0 {
            return Err(CatalogError::Dimensions("order must be >= 1".into()));
        }
        let structure = Structure::of(&a);
        Ok(ButcherTableau { name: name.into(), a, b, c, order, structure, embedded: Vec::new() })
    }

    /// Attach an embedded weight vector.
    pub fn with_embedded(
        mut self,
        label: impl Into<String>,
        weights: DVector<f64>,
        order: usize,
    ) -> Result<Self, CatalogError> {
        if weights.len() != self.stages() {
            return Err(CatalogError::Dimensions(format!(
                "embedded weights have {} entries, tableau has {} stages",
                weights.len(),
                self.stages()
            )));
        }
        self.embedded.push(EmbeddedWeights { label: label.into(), weights, order });
        Ok(self)
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// Embedded vector used for truncation-error estimation: the one of
    /// highest order.
    pub fn error_estimator(&self) -> Option<&EmbeddedWeights> {
        self.embedded.iter().max_by_key(|e| e.order)
    }

    pub fn embedded_by_label(&self, label: &str) -> Option<&EmbeddedWeights> {
        self.embedded.iter().find(|e| e.label == label)
    }
}

/// Identifiers of the built-in methods.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Ssp33,
    Rk4,
    Ssprk104,
    CashKarp,
    DormandPrince,
    BackwardEuler,
    Sdirk54,
    TrBdf2,
    LobattoIiic4,
    RadauIia3,
    ExtrapolationBe2,
    ExtrapolationBe3,
    ExtrapolationBe4,
}

impl Method {
    pub const ALL: [Method; 13] = [
        Method::Ssp33,
        Method::Rk4,
        Method::Ssprk104,
        Method::CashKarp,
        Method::DormandPrince,
        Method::BackwardEuler,
        Method::Sdirk54,
        Method::TrBdf2,
        Method::LobattoIiic4,
        Method::RadauIia3,
        Method::ExtrapolationBe2,
        Method::ExtrapolationBe3,
        Method::ExtrapolationBe4,
    ];

    /// Stable lowercase identifier used on the command line.
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ssp33 => "ssp33",
            Method::Rk4 => "rk4",
            Method::Ssprk104 => "ssprk104",
            Method::CashKarp => "cashkarp",
            Method::DormandPrince => "dormandprince",
            Method::BackwardEuler => "backwardeuler",
            Method::Sdirk54 => "sdirk54",
            Method::TrBdf2 => "trbdf2",
            Method::LobattoIiic4 => "lobattoiiic4",
            Method::RadauIia3 => "radauiia3",
            Method::ExtrapolationBe2 => "extrapolation-be2",
            Method::ExtrapolationBe3 => "extrapolation-be3",
            Method::ExtrapolationBe4 => "extrapolation-be4",
        }
    }

    pub fn tableau(self) -> ButcherTableau {
        builtin(self)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = CatalogError;

    /// Accepts the canonical identifiers and a few spellings with
    /// punctuation removed (`dopri5`, `extrapolation_be3`, `be3`, ...).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        let m = match key.as_str() {
            "ssp33" | "ssprk33" => Method::Ssp33,
            "rk4" | "classicalrk4" => Method::Rk4,
            "ssprk104" => Method::Ssprk104,
            "cashkarp" | "ck5" => Method::CashKarp,
            "dormandprince" | "dopri5" | "dp5" => Method::DormandPrince,
            "backwardeuler" | "be" => Method::BackwardEuler,
            "sdirk54" => Method::Sdirk54,
            "trbdf2" => Method::TrBdf2,
            "lobattoiiic4" => Method::LobattoIiic4,
            "radauiia3" => Method::RadauIia3,
            "extrapolationbe2" | "be2" => Method::ExtrapolationBe2,
            "extrapolationbe3" | "be3" => Method::ExtrapolationBe3,
            "extrapolationbe4" | "be4" => Method::ExtrapolationBe4,
            _ => return Err(CatalogError::UnknownMethod(s.to_string())),
        };
        Ok(m)
    }
}

/// Look up a built-in method by its command-line identifier.
pub fn builtin_by_name(name: &str) -> Result<ButcherTableau, CatalogError> {
    Ok(builtin(name.parse::<Method>()?))
}

/// Return the published tableau for a catalog method.
pub fn builtin(method: Method) -> ButcherTableau {
    let t = match method {
        Method::Ssp33 => ssp33(),
        Method::Rk4 => rk4(),
        Method::Ssprk104 => ssprk104(),
        Method::CashKarp => cash_karp(),
        Method::DormandPrince => dormand_prince(),
        Method::BackwardEuler => backward_euler(),
        Method::Sdirk54 => sdirk54(),
        Method::TrBdf2 => trbdf2(),
        Method::LobattoIiic4 => lobatto_iiic4(),
        Method::RadauIia3 => radau_iia3(),
        Method::ExtrapolationBe2 => extrapolation_be(2),
        Method::ExtrapolationBe3 => extrapolation_be(3),
        Method::ExtrapolationBe4 => extrapolation_be(4),
    };
    t.expect("catalog tableaux are well-formed")
}

fn q(n: i64, d: i64) -> f64 {
    n as f64 / d as f64
}

fn lower(s: usize, rows: &[&[f64]]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(s, s);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            a[(i, j)] = v;
        }
    }
    a
}

fn row_sums(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(a.nrows(), a.row_iter().map(|r| r.sum()))
}

// Shu & Osher (1988).
fn ssp33() -> Result<ButcherTableau, CatalogError> {
    let a = lower(3, &[&[], &[1.0], &[q(1, 4), q(1, 4)]]);
    let b = DVector::from_vec(vec![q(1, 6), q(1, 6), q(2, 3)]);
    let c = DVector::from_vec(vec![0.0, 1.0, 0.5]);
    ButcherTableau::new("SSP(3,3)", a, b, c, 3)
}

fn rk4() -> Result<ButcherTableau, CatalogError> {
    let a = lower(4, &[&[], &[0.5], &[0.0, 0.5], &[0.0, 0.0, 1.0]]);
    let b = DVector::from_vec(vec![q(1, 6), q(1, 3), q(1, 3), q(1, 6)]);
    let c = DVector::from_vec(vec![0.0, 0.5, 0.5, 1.0]);
    ButcherTableau::new("Classical RK4", a, b, c, 4)
}

// Ketcheson (2008): two blocks of five forward-Euler substeps of size dt/6,
// joined by the convex combination 3/5 u^n + 2/5 y_5.
fn ssprk104() -> Result<ButcherTableau, CatalogError> {
    let s = 10;
    let mut a = DMatrix::zeros(s, s);
    for i in 0..s {
        for j in 0..i {
            a[(i, j)] = if i < 5 || j >= 5 { q(1, 6) } else { q(1, 15) };
        }
    }
    let b = DVector::from_element(s, q(1, 10));
    let c = row_sums(&a);
    ButcherTableau::new("SSPRK(10,4)", a, b, c, 4)
}

// Cash & Karp (1990), RK5(4)6.
fn cash_karp() -> Result<ButcherTableau, CatalogError> {
    let a = lower(
        6,
        &[
            &[],
            &[q(1, 5)],
            &[q(3, 40), q(9, 40)],
            &[q(3, 10), q(-9, 10), q(6, 5)],
            &[q(-11, 54), q(5, 2), q(-70, 27), q(35, 27)],
            &[q(1631, 55296), q(175, 512), q(575, 13824), q(44275, 110592), q(253, 4096)],
        ],
    );
    let b = DVector::from_vec(vec![q(37, 378), 0.0, q(250, 621), q(125, 594), 0.0, q(512, 1771)]);
    let c = DVector::from_vec(vec![0.0, q(1, 5), q(3, 10), q(3, 5), 1.0, q(7, 8)]);
    let bhat = DVector::from_vec(vec![
        q(2825, 27648),
        0.0,
        q(18575, 48384),
        q(13525, 55296),
        q(277, 14336),
        q(1, 4),
    ]);
    ButcherTableau::new("Cash-Karp RK5(4)6", a, b, c, 5)?.with_embedded("order-4", bhat, 4)
}

// Dormand & Prince (1980), RK5(4)7 FSAL.
fn dormand_prince() -> Result<ButcherTableau, CatalogError> {
    let b = [q(35, 384), 0.0, q(500, 1113), q(125, 192), q(-2187, 6784), q(11, 84), 0.0];
    let a = lower(
        7,
        &[
            &[],
            &[q(1, 5)],
            &[q(3, 40), q(9, 40)],
            &[q(44, 45), q(-56, 15), q(32, 9)],
            &[q(19372, 6561), q(-25360, 2187), q(64448, 6561), q(-212, 729)],
            &[q(9017, 3168), q(-355, 33), q(46732, 5247), q(49, 176), q(-5103, 18656)],
            &b[..6],
        ],
    );
    let c = DVector::from_vec(vec![0.0, q(1, 5), q(3, 10), q(4, 5), q(8, 9), 1.0, 1.0]);
    let bhat = DVector::from_vec(vec![
        q(5179, 57600),
        0.0,
        q(7571, 16695),
        q(393, 640),
        q(-92097, 339200),
        q(187, 2100),
        q(1, 40),
    ]);
    ButcherTableau::new("Dormand-Prince RK5(4)7", a, DVector::from_row_slice(&b), c, 5)?
        .with_embedded("order-4", bhat, 4)
}

fn backward_euler() -> Result<ButcherTableau, CatalogError> {
    let one = DVector::from_element(1, 1.0);
    ButcherTableau::new("Backward Euler", DMatrix::from_element(1, 1, 1.0), one.clone(), one, 1)
}

// Hairer & Wanner, Solving ODEs II: the five-stage SDIRK method of order 4, gamma = 1/4.
fn sdirk54() -> Result<ButcherTableau, CatalogError> {
    let last = [q(25, 24), q(-49, 48), q(125, 16), q(-85, 12), q(1, 4)];
    let a = lower(
        5,
        &[
            &[q(1, 4)],
            &[q(1, 2), q(1, 4)],
            &[q(17, 50), q(-1, 25), q(1, 4)],
            &[q(371, 1360), q(-137, 2720), q(15, 544), q(1, 4)],
            &last,
        ],
    );
    let c = DVector::from_vec(vec![q(1, 4), q(3, 4), q(11, 20), q(1, 2), 1.0]);
    let bhat = DVector::from_vec(vec![q(59, 48), q(-17, 96), q(225, 32), q(-85, 12), 0.0]);
    ButcherTableau::new("SDIRK(5,4)", a, DVector::from_row_slice(&last), c, 4)?
        .with_embedded("order-3", bhat, 3)
}

// Bank et al. (1985), gamma = 2 - sqrt(2), written as an ESDIRK.
fn trbdf2() -> Result<ButcherTableau, CatalogError> {
    let gamma = 2.0 - 2f64.sqrt();
    let d = gamma / 2.0;
    let w = 2f64.sqrt() / 4.0;
    let a = lower(3, &[&[0.0], &[d, d], &[w, w, d]]);
    let b = DVector::from_vec(vec![w, w, d]);
    let c = DVector::from_vec(vec![0.0, gamma, 1.0]);
    let bhat = DVector::from_vec(vec![(1.0 - w) / 3.0, (3.0 * w + 1.0) / 3.0, d / 3.0]);
    ButcherTableau::new("TR-BDF2", a, b, c, 2)?.with_embedded("order-3-companion", bhat, 3)
}

// Chipman (1971), four-stage Lobatto IIIC (order 6).
fn lobatto_iiic4() -> Result<ButcherTableau, CatalogError> {
    let r5 = 5f64.sqrt();
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0 / 12.0,
            -r5 / 12.0,
            r5 / 12.0,
            -1.0 / 12.0,
            1.0 / 12.0,
            0.25,
            (10.0 - 7.0 * r5) / 60.0,
            r5 / 60.0,
            1.0 / 12.0,
            (10.0 + 7.0 * r5) / 60.0,
            0.25,
            -r5 / 60.0,
            1.0 / 12.0,
            5.0 / 12.0,
            5.0 / 12.0,
            1.0 / 12.0,
        ],
    );
    let b = DVector::from_vec(vec![1.0 / 12.0, 5.0 / 12.0, 5.0 / 12.0, 1.0 / 12.0]);
    let c = DVector::from_vec(vec![0.0, (5.0 - r5) / 10.0, (5.0 + r5) / 10.0, 1.0]);
    ButcherTableau::new("Lobatto IIIC4", a, b, c, 6)
}

// Ehle (1969), three-stage Radau IIA (order 5).
fn radau_iia3() -> Result<ButcherTableau, CatalogError> {
    let r6 = 6f64.sqrt();
    let a = DMatrix::from_row_slice(
        3,
        3,
        &[
            (88.0 - 7.0 * r6) / 360.0,
            (296.0 - 169.0 * r6) / 1800.0,
            (-2.0 + 3.0 * r6) / 225.0,
            (296.0 + 169.0 * r6) / 1800.0,
            (88.0 + 7.0 * r6) / 360.0,
            (-2.0 - 3.0 * r6) / 225.0,
            (16.0 - r6) / 36.0,
            (16.0 + r6) / 36.0,
            1.0 / 9.0,
        ],
    );
    let b = DVector::from_vec(vec![(16.0 - r6) / 36.0, (16.0 + r6) / 36.0, 1.0 / 9.0]);
    let c = DVector::from_vec(vec![(4.0 - r6) / 10.0, (4.0 + r6) / 10.0, 1.0]);
    ButcherTableau::new("Radau IIA3", a, b, c, 5)
}

/// Aitken-Neville weights for extrapolating values at step sizes
/// `h_j = 1/n_j` to `h = 0`, assuming an error expansion in powers of `h`.
pub fn extrapolation_coefficients(steps: &[i64]) -> Vec<Rational64> {
    let h: Vec<Rational64> = steps.iter().map(|&n| Rational64::new(1, n)).collect();
    (0..h.len())
        .map(|j| {
            h.iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .fold(Rational64::from_integer(1), |acc, (_, &hi)| acc * hi / (hi - h[j]))
        })
        .collect()
}

/// Build the backward-Euler extrapolation method of depth `k` over the
/// harmonic step sequence `1, 2, ..., k`.
///
/// Chain `j` takes `j` backward-Euler substeps of size `dt/j`; its stages
/// are laid out consecutively, chain 1 first. The embedded vector
/// `"BE-chain"` is the finest chain alone (order 1).
pub fn extrapolation_be(k: usize) -> Result<ButcherTableau, CatalogError> {
    if !(2..=4).contains(&k) {
        return Err(CatalogError::UnsupportedDepth(k));
    }
    let s = k * (k + 1) / 2;
    let mut a = DMatrix::zeros(s, s);
    let mut c = DVector::zeros(s);
    let mut chain_start = Vec::with_capacity(k);
    let mut row = 0;
    for j in 1..=k {
        chain_start.push(row);
        let h = q(1, j as i64);
        for m in 0..j {
            for l in 0..=m {
                a[(row + m, row + l)] = h;
            }
            c[row + m] = q(m as i64 + 1, j as i64);
        }
        row += j;
    }

    let spread = |steps: &[i64]| -> DVector<f64> {
        let lambda = extrapolation_coefficients(steps);
        let mut w = DVector::zeros(s);
        for (&n, lam) in steps.iter().zip(lambda) {
            let per_stage = lam / Rational64::from_integer(n);
            let start = chain_start[n as usize - 1];
            for i in 0..n as usize {
                w[start + i] = *per_stage.numer() as f64 / *per_stage.denom() as f64;
            }
        }
        w
    };

    let all: Vec<i64> = (1..=k as i64).collect();
    let b = spread(&all);
    let mut chain = DVector::zeros(s);
    for i in 0..k {
        chain[chain_start[k - 1] + i] = q(1, k as i64);
    }
    ButcherTableau::new(format!("Extrapolation BE {k}"), a, b, c, k)?
        .with_embedded("BE-chain", chain, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ssp33_matches_published_tableau() {
        let t = builtin(Method::Ssp33);
        assert_eq!(t.stages(), 3);
        assert_eq!(t.order, 3);
        assert_eq!(t.b.as_slice(), &[1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0]);
        assert_eq!(t.c.as_slice(), &[0.0, 1.0, 0.5]);
        assert_eq!(t.structure, Structure::Explicit);
    }

    #[test]
    fn backward_euler_is_one_by_one() {
        let t = builtin(Method::BackwardEuler);
        assert_eq!(t.a, DMatrix::from_element(1, 1, 1.0));
        assert_eq!(t.b[0], 1.0);
        assert_eq!(t.c[0], 1.0);
        assert_eq!(t.order, 1);
        assert_eq!(t.structure, Structure::DiagonallyImplicit);
    }

    #[test]
    fn stage_counts_and_structures() {
        let expect = [
            (Method::Rk4, 4, Structure::Explicit),
            (Method::Ssprk104, 10, Structure::Explicit),
            (Method::CashKarp, 6, Structure::Explicit),
            (Method::DormandPrince, 7, Structure::Explicit),
            (Method::Sdirk54, 5, Structure::DiagonallyImplicit),
            (Method::TrBdf2, 3, Structure::DiagonallyImplicit),
            (Method::LobattoIiic4, 4, Structure::FullyImplicit),
            (Method::RadauIia3, 3, Structure::FullyImplicit),
            (Method::ExtrapolationBe2, 3, Structure::DiagonallyImplicit),
            (Method::ExtrapolationBe3, 6, Structure::DiagonallyImplicit),
            (Method::ExtrapolationBe4, 10, Structure::DiagonallyImplicit),
        ];
        for (m, s, st) in expect {
            let t = builtin(m);
            assert_eq!(t.stages(), s, "{m}");
            assert_eq!(t.structure, st, "{m}");
        }
        assert_eq!(builtin(Method::CashKarp).order, 5);
        assert_eq!(builtin(Method::CashKarp).embedded[0].order, 4);
        assert_eq!(builtin(Method::DormandPrince).embedded[0].order, 4);
    }

    #[test]
    fn row_sum_consistency() {
        for m in Method::ALL {
            let t = builtin(m);
            for i in 0..t.stages() {
                let sum: f64 = t.a.row(i).sum();
                assert!((sum - t.c[i]).abs() < 1e-14, "{m} row {i}: {sum} vs {}", t.c[i]);
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert_eq!("Dormand-Prince".parse::<Method>().unwrap(), Method::DormandPrince);
        assert!(matches!(builtin_by_name("rk45"), Err(CatalogError::UnknownMethod(_))));
    }

    #[test]
    fn extrapolation_be3_weights() {
        // lambda = (1/2, -4, 9/2) spread as lambda_j / j
        let t = extrapolation_be(3).unwrap();
        let want = [0.5, -2.0, -2.0, 1.5, 1.5, 1.5];
        assert_eq!(t.b.as_slice(), &want);
        assert_eq!(t.stages(), 6);
        assert_eq!(t.order, 3);
        assert_eq!(t.b.sum(), 1.0);
        let chain = t.embedded_by_label("BE-chain").unwrap();
        assert_eq!(chain.order, 1);
        assert_eq!(chain.weights.as_slice(), &[0.0, 0.0, 0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
    }

    #[test]
    fn extrapolation_chain_layout() {
        let t = extrapolation_be(3).unwrap();
        // chain 3 occupies stages 3..6 with entries 1/3 on and below the diagonal
        for m in 0..3 {
            for l in 0..3 {
                let v = t.a[(3 + m, 3 + l)];
                assert_eq!(v, if l <= m { 1.0 / 3.0 } else { 0.0 });
            }
            assert_eq!(t.c[3 + m], (m + 1) as f64 / 3.0);
        }
        // no coupling across chains
        assert_eq!(t.a[(3, 0)], 0.0);
        assert_eq!(t.a[(2, 1)], 0.5);
        assert_eq!(t.a[(2, 0)], 0.0);
    }

    #[test]
    fn extrapolation_coefficients_sum_to_one() {
        for k in 2..=4 {
            let steps: Vec<i64> = (1..=k).collect();
            let total: Rational64 = extrapolation_coefficients(&steps).into_iter().sum();
            assert_eq!(total, Rational64::from_integer(1));
            let t = extrapolation_be(k as usize).unwrap();
            assert_eq!(t.stages(), (k * (k + 1) / 2) as usize);
            assert!((t.b.sum() - 1.0).abs() < 1e-14);
        }
        assert_eq!(extrapolation_be(2).unwrap().stages(), 3);
    }

    #[test]
    fn unsupported_depth() {
        assert_eq!(extrapolation_be(1).unwrap_err(), CatalogError::UnsupportedDepth(1));
        assert_eq!(extrapolation_be(5).unwrap_err(), CatalogError::UnsupportedDepth(5));
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let a = DMatrix::zeros(2, 2);
        let err = ButcherTableau::new("x", a, DVector::zeros(3), DVector::zeros(3), 1);
        assert!(matches!(err, Err(CatalogError::Dimensions(_))));
    }
}
