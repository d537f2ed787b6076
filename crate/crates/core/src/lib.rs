//! Cake cutting with single-peaked valuations.
//!
//! The cake is `[0, 1]`; each agent has a triangular value density normalized to
//! total value one. The crate provides:
//!
//! * [`valuation`]: closed-form densities, integrals and cut inversion;
//! * [`oracle`]: a Robertson–Webb query layer with a query transcript;
//! * [`allocation`]: allocations, value tables and fairness audits;
//! * [`mechanisms`]: Wang–Wu, modified Wang–Wu, leftmost leaves, the utilitarian
//!   mechanism and an upper-envelope variant for unequal slopes;
//! * [`efficiency`]: Pareto optimality audits, improving exchanges and an LP
//!   dominance check;
//! * [`experiments`]: instance generators, welfare-loss curves and mechanism
//!   comparison tables.

pub mod allocation;
pub mod efficiency;
pub mod error;
pub mod experiments;
pub mod mechanisms;
pub mod oracle;
pub mod valuation;

pub use allocation::{Allocation, AuditReport, Interval, StructureFlags};
pub use error::{Error, Result};
pub use mechanisms::{Mechanism, MechanismResult};
pub use oracle::{Oracle, QueryLog};
pub use valuation::{CakeInstance, SinglePeakedValuation};

/// Tolerance for exact closed-form arithmetic.
pub const ARITH_TOL: f64 = 1e-12;

/// Default tolerance for audits.
pub const AUDIT_TOL: f64 = 1e-9;
