//! Runge–Kutta integration that keeps the solution inside bounds by
//! modifying the weights of individual steps.
//!
//! When an ordinary step would leave the admissible set, the weights `b` are
//! replaced by nearby weights found with a small linear program. The new
//! weights still satisfy the order conditions up to some order `p`, and they
//! sum to one, so linear invariants are conserved.
//!
//! - [`tableau`]: Butcher tableaux and the built-in methods.
//! - [`order`]: order-condition systems and degrees of freedom.
//! - [`linprog`]: a dense two-phase simplex solver.
//! - [`adapt`]: free and convex weight adaptation for one step.
//! - [`stepper`]: stage computation for explicit and implicit methods.
//! - [`integrator`]: fixed and adaptive integration with adaptation.
//! - [`stability`]: stability functions of modified weights.
//! - [`problems`]: test problems with bounds, invariants and references.

pub mod adapt;
pub mod integrator;
pub mod linprog;
pub mod order;
pub mod problems;
pub mod stability;
pub mod stepper;
pub mod tableau;
