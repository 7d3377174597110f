//! Restricted isometry constants, error-bound constants and the stability
//! condition checkers.

mod bounds;
mod rip;
mod theorems;

pub use bounds::{c1_constant, estimate_spread, estimate_zeta, ls_error_bound, ls_error_coefficients, SpreadEstimate, ZetaEstimate, DELTA_STAR};
pub use rip::{
    binomial, ric_bruteforce, roc_bruteforce, AssertedRip, BruteForceRip, Provenance, RipEstimate, RipSource, RipValue, RocEstimate,
    DEFAULT_BUDGET,
};
pub use theorems::{
    check_claims, check_theorem, check_theorem_general, check_theorem_model1, check_theorem_model2, entry_magnitude, k1, k2, k3, Claim,
    Condition, ConditionReport, Conclusion, Relation, SignalTrace, TheoremId, TheoremParams, Verdict, MODCS_RADIUS,
};
