//! Exact-arithmetic engine for the homotopy algebra of polynomial
//! poly-vector fields and poly-differential operators.
//!
//! The crate provides, over exact rationals (optionally adjoined a
//! truncated formal deformation parameter):
//!
//! - brace operations, cup product, Hochschild differential and
//!   Gerstenhaber bracket on poly-differential operators;
//! - wedge product and Schouten-Nijenhuis bracket on poly-vector fields;
//! - the antisymmetrization quasi-isomorphism between them together with
//!   an explicit chain homotopy, built blockwise by exact linear solves;
//! - tree-indexed homotopy transfer of the operator structure onto
//!   poly-vector fields (minimal models), with machine-checked transfer
//!   identities;
//! - Maurer-Cartan twisting of the above, including the Moyal series as a
//!   regression source;
//! - descent along derivation actions on finite truncations;
//! - enumeration and evaluation of two-type admissible graphs and the
//!   comparison of their span with the affine-invariant operators;
//! - cofree tensor/Lie coalgebra combinatorics (shuffles, cobrackets,
//!   compatibility checks).
//!
//! All identities verified by the test and audit suites hold with
//! tolerance zero.





pub mod audit;
pub mod coalgebra;
pub mod config;
pub mod descent;
pub mod error;



pub mod graphs;
pub mod hkr;
pub mod json;
pub mod linalg;
pub mod polydiff;
pub mod polyvector;
pub mod scalar;
pub mod transfer;
pub mod twist;
pub mod sign;



pub use error::{EngineError, Result};
