//! Rooted trees and the linear order-condition systems `Q_p b = r_p`.
//!
//! With `A` and `c` fixed, every order condition `b^T psi(tau) = 1/gamma(tau)`
//! is linear in the weights. Stacking one row per rooted tree with at most
//! `p` nodes gives the system used to constrain adapted weights.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::tableau::{builtin, ButcherTableau, Method};

/// Highest order for which conditions are generated.
pub const MAX_ORDER: usize = 5;

/// Relative singular-value cutoff for numerical rank.
pub const RANK_TOLERANCE: f64 = 1e-8;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum OrderError {
    #[error("order {0} is not supported (expected 1..={MAX_ORDER})")]
    UnsupportedOrder(usize),
}

/// A rooted tree in canonical form: children sorted in descending order.
///
/// Because the children are kept sorted, derived equality coincides with
/// isomorphism.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RootedTree {
    children: Vec<RootedTree>,
    order: usize,
}

impl RootedTree {
    /// The single-node tree.
    pub fn leaf() -> Self {
        RootedTree { children: Vec::new(), order: 1 }
    }

    /// Graft the given subtrees onto a new root.
    pub fn graft(mut children: Vec<RootedTree>) -> Self {
        children.sort_by(|a, b| b.cmp(a));
        let order = 1 + children.iter().map(|c| c.order).sum::<usize>();
        RootedTree { children, order }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn children(&self) -> &[RootedTree] {
        &self.children
    }

    /// Density: `gamma(leaf) = 1`, `gamma([t_1..t_m]) = |t| prod gamma(t_k)`.
    pub fn density(&self) -> u64 {
        self.order as u64 * self.children.iter().map(RootedTree::density).product::<u64>()
    }

    /// Stage vector `psi(tau)`; the condition reads `b . psi = 1/gamma`.
    pub fn elementary_weight(&self, a: &DMatrix<f64>) -> DVector<f64> {
        let mut psi = DVector::from_element(a.nrows(), 1.0);
        for child in &self.children {
            psi.component_mul_assign(&(a * child.elementary_weight(a)));
        }
        psi
    }
}

impl Ord for RootedTree {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order.cmp(&other.order).then_with(|| self.children.cmp(&other.children))
    }
}

impl PartialOrd for RootedTree {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Bracket notation: `*` for a leaf, `[t1 t2]` otherwise.
impl fmt::Display for RootedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.children.is_empty() {
            return f.write_str("*");
        }
        f.write_str("[")?;
        for (i, c) in self.children.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("]")
    }
}

/// All non-isomorphic rooted trees with at most `p` nodes, sorted by
/// `(order, canonical form)`.
pub fn enumerate_trees(p: usize) -> Result<Vec<RootedTree>, OrderError> {
    if p == 0 || p > MAX_ORDER {
        return Err(OrderError::UnsupportedOrder(p));
    }
    let mut trees: Vec<RootedTree> = vec![RootedTree::leaf()];
    for n in 2..=p {
        let mut level = Vec::new();
        // Children are chosen as a non-increasing sequence of indices into
        // the trees found so far, so each multiset is produced exactly once.
        let pool = trees.clone();
        let mut stack = Vec::new();
        forests(&pool, n - 1, pool.len(), &mut stack, &mut level);
        level.sort();
        trees.extend(level);
    }
    Ok(trees)
}

fn forests(
    pool: &[RootedTree],
    remaining: usize,
    max_index: usize,
    stack: &mut Vec<usize>,
    out: &mut Vec<RootedTree>,
) {
    if remaining == 0 {
        out.push(RootedTree::graft(stack.iter().map(|&i| pool[i].clone()).collect()));
        return;
    }
    for i in 0..max_index {
        let size = pool[i].order;
        if size <= remaining {
            stack.push(i);
            forests(pool, remaining - size, i + 1, stack, out);
            stack.pop();
        }
    }
}

/// The stacked order conditions up to order `p` for fixed `A`.
#[derive(Clone, Debug)]
pub struct OrderConditionSystem {
    pub order: usize,
    pub q: DMatrix<f64>,
    pub r: DVector<f64>,
    pub trees: Vec<RootedTree>,
}

impl OrderConditionSystem {
    /// `max_i |(Q w - r)_i|`.
    pub fn residual(&self, w: &DVector<f64>) -> f64 {
        (&self.q * w - &self.r).amax()
    }

    pub fn rank(&self) -> usize {
        numerical_rank(&self.q)
    }
}

/// Assemble `Q_p`, `r_p` for the tableau's `A`.
pub fn assemble(tableau: &ButcherTableau, p: usize) -> Result<OrderConditionSystem, OrderError> {
    let trees = enumerate_trees(p)?;
    let s = tableau.stages();
    let mut q = DMatrix::zeros(trees.len(), s);
    let mut r = DVector::zeros(trees.len());
    for (i, t) in trees.iter().enumerate() {
        q.set_row(i, &t.elementary_weight(&tableau.a).transpose());
        r[i] = 1.0 / t.density() as f64;
    }
    Ok(OrderConditionSystem { order: p, q, r, trees })
}

/// Number of singular values above `RANK_TOLERANCE` times the largest.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let largest = sv.max();
    if largest == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&x| x > RANK_TOLERANCE * largest).count()
}

/// `s - rank(Q_p)`: how many weight directions remain free at order `p`.
pub fn degrees_of_freedom(tableau: &ButcherTableau, p: usize) -> Result<usize, OrderError> {
    let sys = assemble(tableau, p)?;
    Ok(tableau.stages() - sys.rank())
}

/// Highest `p <= MAX_ORDER` whose conditions `w` satisfies within `tol`.
pub fn satisfied_order(tableau: &ButcherTableau, w: &DVector<f64>, tol: f64) -> usize {
    let mut best = 0;
    for p in 1..=MAX_ORDER {
        let sys = assemble(tableau, p).expect("order in range");
        if sys.residual(w) <= tol {
            best = p;
        } else {
            break;
        }
    }
    best
}

/// Degrees of freedom of one method for `p = 1..=min(order, MAX_ORDER)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofRow {
    pub method: Method,
    pub stages: usize,
    pub dof: Vec<usize>,
}

/// Methods listed in the degrees-of-freedom tables, explicit ones first.
pub const DOF_TABLE_METHODS: [Method; 12] = [
    Method::Rk4,
    Method::Ssprk104,
    Method::CashKarp,
    Method::DormandPrince,
    Method::BackwardEuler,
    Method::LobattoIiic4,
    Method::RadauIia3,
    Method::Sdirk54,
    Method::TrBdf2,
    Method::ExtrapolationBe2,
    Method::ExtrapolationBe3,
    Method::ExtrapolationBe4,
];

pub fn dof_row(method: Method) -> DofRow {
    let t = builtin(method);
    let top = t.order.min(MAX_ORDER);
    let dof = (1..=top).map(|p| degrees_of_freedom(&t, p).expect("order in range")).collect();
    DofRow { method, stages: t.stages(), dof }
}

pub fn dof_table() -> Vec<DofRow> {
    DOF_TABLE_METHODS.iter().map(|&m| dof_row(m)).collect()
}

/// CSV with columns `method,s,p1,...,p5`; cells beyond a method's order are empty.
pub fn dof_table_csv(rows: &[DofRow]) -> String {
    let mut out = String::from("method,s,p1,p2,p3,p4,p5\n");
    for row in rows {
        out.push_str(row.method.as_str());
        out.push(',');
        out.push_str(&row.stages.to_string());
        for p in 0..MAX_ORDER {
            out.push(',');
            if let Some(d) = row.dof.get(p) {
                out.push_str(&d.to_string());
            }
        }
        out.push('\n');
    }
    out
}
