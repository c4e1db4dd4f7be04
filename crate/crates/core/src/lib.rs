//! Numerical laboratory for contract design under two-stage moral hazard:
//! hidden effort that shifts the profit distribution, followed by hidden,
//! costly manipulation of the realized profit.
//!
//! Everything is computed on finite grids. Manipulations move the
//! realization between grid points, so the stage-two problem is an exact
//! enumeration, the backward induction is exact, and the outer contract
//! search can be cross-checked against a brute-force oracle on small
//! instances.

pub mod manipulation;
pub mod model;
pub mod optimizer;
pub mod orders;
pub mod report;
pub mod sweeps;
pub mod templates;
pub mod verify;
