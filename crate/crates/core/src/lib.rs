//! Numerical core for the axisymmetric Boussinesq system with measure-valued
//! initial data.
//!
//! Everything here is pure computation over in-memory grids and measures. The
//! crate is `no_std` (with `alloc`) and takes its elementary functions from
//! `libm`; file formats, configuration and the command line live in the
//! companion `axibouss-lab` crate.
//!
//! Module map:
//!
//! * [`fields`] – half-plane grids, scalar/vector fields and their norms.
//! * [`measures`] – atomic + gridded Radon measures on the half-plane and
//!   axisymmetric measures on R³.
//! * [`semigroups`] – exact-kernel propagators `S1 = e^{t(Δ-1/r²)}` and
//!   `S2 = e^{tΔ}` together with their divergence-form variants.
//! * [`biot_savart`] – stream-function recovery of the swirl-free velocity.
//! * [`mild`] – Picard iteration of the Duhamel system.
//! * [`stepper`] – the finite-difference IMEX reference solver.
//! * [`diagnostics`] – decay functionals, power-law fits and estimate sweeps.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bessel;
pub mod biot_savart;
pub mod diagnostics;
mod error;
pub mod fields;
pub(crate) mod linalg;
pub mod measures;
pub mod mild;
pub(crate) mod quad;
pub mod semigroups;
pub mod stepper;

pub use error::{Error, Result};
pub use fields::{HalfPlaneGrid, MeasureFlag, ScalarField, VectorField};
