//! Numerical and symbolic invariants of index-one block-shift Fredholm maps.
//!
//! The toolkit works with a concrete operator class — a finite dense block
//! plus an identity-aligned shift tail on l^2 — for which every Fredholm
//! question reduces to finite linear algebra. On top of that class it
//! provides:
//!
//! * stratified charts near the sets of operators with prescribed corank,
//! * smooth maps of surfaces and solid balls into the operator class,
//!   given by polynomial cores,
//! * an intersection parity `eta` counting chart zeros of a two-parameter
//!   family modulo 2, with transversality certificates,
//! * preimage-circle tracing and capping for index-one maps of 4-manifolds,
//! * the invariants `sigma` and `tau` and a coherence sign for stabilized
//!   kernel frames along paths,
//! * a fold audit for one-parameter homotopies, and
//! * a classifier that reduces an invariant record to a normal form under
//!   the allowed surgery moves.

pub mod audit;
pub mod classifier;
pub mod continuation;
pub mod error;
pub mod intersection;
pub mod invariants;
pub mod linalg;
pub mod maps;
pub mod models;
pub mod operator;
pub mod poly;
pub mod strata;
pub mod suite;
pub mod trace;

pub use error::{Error, Result};
