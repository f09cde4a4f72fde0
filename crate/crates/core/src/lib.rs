//! Constrained joint spectral radius of DFA-constrained switching systems.
//!
//! A constrained system is lifted to an arbitrary switching system by
//! Kronecker products ([`lift`]). Bounds on its spectral radius come from
//! enumeration, branch-and-bound and sum-of-squares programs ([`bounds`],
//! [`sos`]), and accepted high-growth switching sequences are generated from
//! dual pseudo-expectations or by branch-and-bound ([`seqgen`]).
//!
//! States and labels are 1-indexed. A word `σ_1 … σ_k` is read left to right
//! and its product is `A_{σ_k} ⋯ A_{σ_1}`.

pub mod automaton;
pub mod bounds;
pub mod error;
pub mod lift;
pub mod linalg;
pub mod sdp;
pub mod seqgen;
pub mod sos;

pub use automaton::{
    build_tsm, find_cycle_path, find_path, is_accepted, is_repeatable_cycle, word_product,
    AcceptancePath, Dfa, Tsm,
};
pub use bounds::{
    brute_force_rho_k, gripenberg_bounds, sos_primal_upper, word_value, BoundsMethod, BoundsReport,
    SosPrimalReport,
};
pub use error::{Error, Result};
pub use lift::{build_lift, lifted_word_product, LiftedSet, MatrixSet};
pub use linalg::{kron, spectral_norm, spectral_radius, veronese_lift, Mat, MonomialBasis};
pub use seqgen::{
    alg1_generate, alg2_generate, extract_cycles, growth_report, random_interior_poly, CycleReport,
    GramPoly, GrowthReport, Orientation, SwitchingWord, WordSource,
};
pub use sos::{
    max_feasible_gamma, moment_matrix, pushforward, solve_dual, verify_certificate, DualCertificate,
    DualOutcome, GammaSearch, PseudoExpectation,
};
