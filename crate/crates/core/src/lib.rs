//! Equivariant flow models on permutation-symmetric inputs.

pub mod config;
pub mod cli;
pub mod control_families;
pub mod error;
pub mod flow;
pub mod hypothesis;
pub mod perm_group;
pub mod report;
pub mod seed;
pub mod verify;
pub mod well_functions;

pub use error::{Error, Result};
pub use report::{Verdict, VerificationReport, Witness};
