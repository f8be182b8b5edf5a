//! Classical communication through quantum causal structures.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: labelled multi-subsystem operators (tensor product, partial
//!   trace and transpose, trace-and-replace, entropy).
//! - [`process`]: bipartite and multipartite process matrices, validity
//!   checks, causal-order tests and seeded samplers.
//! - [`link`]: Choi matrices, the link product, induced channels and the
//!   reduction of Alice's encoding to a state on Bob's input.
//! - [`capacity`]: Born-rule channels, mutual information, Blahut–Arimoto,
//!   Holevo quantities, capacity estimators and bound checkers.
//! - [`search`]: randomized search for violations of the entropic causal
//!   inequality.
//! - [`cli`]: the command-line frontend.
//!
//! All entropies and capacities are in bits.

#![forbid(unsafe_code)]
// `!(x > y)` comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod cli;
pub mod error;
pub mod link;
pub mod process;
pub mod sampling;
pub mod search;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{CMatrix, LabeledOperator, Subsystem, C64};
