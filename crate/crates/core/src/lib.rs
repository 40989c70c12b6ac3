//! Finite black-box search, bias over information resources, and numerical
//! checks of the conservation and famine bounds that govern it.
//!
//! The crate is organised bottom-up:
//!
//! - [`search`]: search spaces, targets, probability vectors, seeded runs
//!   and the averaged distribution `P̄_f` behind per-query success.
//! - [`resources`]: fitness tables, toy classification ensembles and the
//!   built-in algorithms (uniform, greedy-exploit, genetic).
//! - [`bias`]: bias over sets and distributions, target divergence and the
//!   closed-form bounds, including a log-space path for huge spaces.
//! - [`harness`]: exact enumeration and simplex Monte Carlo checks that
//!   return [`harness::BoundCheckResult`] records.
//! - [`experiment`]: declarative configs, the `run`/`verify`/`bound`
//!   commands and their output files.
//!
//! Replicate runs and simplex sampling go through [`Execution`]; with the
//! `parallel` feature (default) they fan out over rayon, otherwise they run
//! serially. Both paths reduce in a fixed order and give identical results.

pub mod bias;
mod error;
mod exec;
pub mod experiment;
pub mod harness;
pub mod resources;
pub mod search;

pub use error::{Error, Result};
pub use exec::Execution;
