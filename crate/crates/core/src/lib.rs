//! Quantum sensitivity analysis for tree-structured business-risk models.
//!
//! A [`model::RiskModel`] is compiled into a state-preparation circuit
//! ([`compile`]), wrapped into amplitude estimation ([`qae`]) and used as an
//! imperfect oracle in a Grover search over parameter modifications
//! ([`sensitivity`]). Everything runs on the exact statevector engine in
//! [`sim`]; [`classical`] provides the brute-force ground truth.

pub mod circuit;
pub mod classical;
pub mod compile;
pub mod families;
pub mod model;
pub mod qae;
pub mod resources;
pub mod seed;
pub mod sensitivity;
pub mod sim;
pub mod theory;

pub use model::{parse_model, ModelError, RiskModel};
