//! Numerical toolkit for passivity-based thermodynamic bounds in small,
//! isolated quantum setups.
//!
//! A setup is a handful of "microbaths" (few-level subsystems prepared in
//! Gibbs states) and optionally driven subsystems, evolving under mixtures
//! of unitaries. The canonical passive operator of the initial state,
//! `B = -ln rho_0`, cannot decrease in expectation under any such channel.
//! Deforming `B` along a commuting observable `A` (i.e. `B + xi*A`) stays
//! passive up to sharp thresholds `xi_minus <= xi <= xi_plus`, which turn
//! into quantitative bounds on `A` in terms of subsystem energy changes —
//! often far tighter than the Clausius inequality, and compatible with
//! conservation laws by restricting the threshold scan to invariant
//! manifolds.
//!
//! The crate provides:
//!
//! * [`qstate`] — dense Hermitian/density-matrix primitives, thermal
//!   states, partial traces, Haar-random channels;
//! * [`passivity`] — `-ln rho_0` spectra, ordering functions, the
//!   `sign(alpha) * B^alpha` family;
//! * [`deformation`] — threshold scans (optionally manifold-restricted),
//!   bound-saturating processes, ultra-cold / erasure / athermal /
//!   correlated-state corollaries;
//! * [`hierarchy`] — truncated, binary and majorization layers of the
//!   inequality hierarchy, plus coarse-graining;
//! * [`protocols`] — optimal (full-sort and partial-sort) protocols for
//!   extremizing commuting observables;
//! * [`harness`] — scenario registry, setup files, demon injection,
//!   detection thresholds, CSV/JSON emission.

pub mod deformation;
pub mod error;
pub mod harness;
pub mod hierarchy;
pub mod passivity;
pub mod protocols;
pub mod qstate;

pub use error::{Error, Result};
