//! Numerical laboratory for truncated dated-commodity exchange economies.
//!
//! Dates run `0..=N`; date 0 is the numeraire and the solver varies only the
//! future prices `p_1..p_N`. All agents discount at a common `beta` and carry
//! isoelastic (or log) period utilities with agent-specific taste weights.

// Negated comparisons such as `!(x > 0.0)` are used on purpose so NaN fails
// validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod audit;
pub mod corpus;
pub mod demand;
pub mod diversification;
pub mod economy;
pub mod equilibrium;
pub mod error;
pub mod ode;
pub mod scenarios;
pub mod stability;
pub mod sweep;

pub use economy::{AgentSpec, DiscountStructure, Economy, EconomySpec, KernelFamily, UtilityKernel};
pub use equilibrium::{solve_equilibrium, EquilibriumResult, SolveOptions};
pub use error::{LabError, Result};
