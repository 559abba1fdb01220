//! Clearing, debt swaps and swap dynamics for financial networks with
//! monotone allocation rules.

pub mod classify;
pub mod clearing;
pub mod dynamics;
pub mod fixtures;
pub mod gadgets;
pub mod io;
pub mod money;
pub mod network;
pub mod reach;
pub mod transforms;

pub use clearing::{brute_force_clear, clear, is_feasible, pay, ClearingError, ClearingState};
pub use money::{Delta, Money};
pub use network::{
    AllocationRule, BankId, Direction, Edge, EdgeId, FinancialNetwork, IncidenceProfile,
    NetworkBuilder, RuleKind, Violation,
};
pub use transforms::{apply_swap, DebtSwap, TransformError};
