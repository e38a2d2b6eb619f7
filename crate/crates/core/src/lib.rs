//! Approximation resistance tooling for k-partite Boolean CSPs with even
//! predicates.
//!
//! The pipeline: build a [`predicate::Predicate`], enumerate the odd-degree
//! graphs on its relevant Fourier sets ([`multigraph`]), search for a vanishing
//! distribution or a separating hyperplane ([`vanishing`]), then either round
//! SDP solutions of partite instances ([`partite`]) or simulate the
//! dictatorship test ([`dicttest`]).

pub mod bits;
pub mod cli;
pub mod dicttest;
pub mod distribution;
pub mod error;
pub mod gaussian;
pub mod io;
pub mod lp;
pub mod multigraph;
pub mod partite;
pub mod predicate;
pub mod rng;
pub mod scalar;
pub mod vanishing;

pub use error::{Error, Result};
