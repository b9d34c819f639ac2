//! Budget-feasible procurement for submodular valuations.
//!
//! A buyer with budget B faces n agents, each selling one item at a privately
//! known cost; the buyer's value for a bundle is a (possibly non-monotone)
//! submodular set function reached through a value oracle. The mechanisms in
//! [`mechanisms`] buy a bundle and pay each seller at least its declared
//! cost, never exceed the budget in total, and make truthful cost reports a
//! dominant strategy for every realization of their internal coin flips.
//! Offline, online (secretary-style), and independence-constrained variants
//! are provided, together with the greedy subroutines they share and a
//! verification harness that hunts for counterexamples to each of those
//! guarantees.

pub mod generate;
pub mod indep;
pub mod mechanisms;
pub mod model;
pub mod subroutines;
pub mod valuation;
pub mod verify;

pub use generate::{arrival_order, gen_constraint, gen_instance, ConstraintKind, Family, GenParams};
pub use indep::{ConstraintSpec, IndependenceOracle};
pub use mechanisms::{run_mechanism, MechanismError, MechanismId};
pub use model::{
    load_instance, mix_seed, save_instance, Instance, MechanismOutcome, RandomTape, RejectReason,
    Trace,
};
pub use subroutines::{brute_force_opt, SolverResult};
pub use valuation::{generate_xos_hard_pair, HardPair, ValuationSpec, ValueOracle};
pub use verify::{
    broken_control_suite, run_all, run_suite, Scale, VerificationReport, Violation,
};
