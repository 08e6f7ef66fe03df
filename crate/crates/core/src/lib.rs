//! Desk-scale toolkit for diffeological coarse moduli spaces.
//!
//! The crate is organized bottom-up:
//!
//! * [`euclid`]: open Euclidean domains, smooth maps, finite-difference jacobians, covers.
//! * [`expr`]: the closed catalog of scalar expressions used to author maps and forms.
//! * [`diffeology`]: diffeological spaces with witness-checked plots, quotients, D-topology.
//! * [`groupoid`]: action groupoids, orbit spaces, unit-bundle pullbacks and induced plots.
//! * [`bundleclass`]: locally / fiberwise isomorphic bundles and Čech cocycle classes.
//! * [`sheaf`]: finite probe sites, presheaf tables, concretization and sheafification.
//! * [`forms`]: Euclidean forms, diffeological forms, basic forms on action groupoids.
//!
//! Every check returns a [`Verdict`]. A `Pass` is always relative to the sample
//! resolution and tolerances in [`Tolerances`]; a `Refuted` carries a concrete witness.

pub mod bundleclass;
pub mod config;
pub mod diffeology;
pub mod euclid;
pub mod exec;
pub mod expr;
pub mod forms;
pub mod groupoid;
pub mod sheaf;
pub mod verdict;

pub use config::{SampleConfig, Tolerances};
pub use exec::Exec;
pub use verdict::{Refutation, Verdict};
