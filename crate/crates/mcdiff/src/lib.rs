//! Multicomponent isothermal diffusion closures and the transforms between them.
//!
//! Three equivalent descriptions of the diffusive mass fluxes of an N-species
//! mixture are supported:
//!
//! * the Fick-Onsager form `J = -L grad(mu/RT)` with a symmetric Onsager
//!   matrix annihilating constant shifts ([`closures::OnsagerClosure`]),
//! * the Maxwell-Stefan form `B(y) J = -R P grad(mu/RT)` built from binary
//!   friction coefficients ([`closures::MaxwellStefanClosure`]),
//! * a projected form `J = -P^T R [D + K X] M P grad(mu/RT)` carrying one
//!   diffusivity per species plus a symmetric interaction matrix
//!   ([`closures::ProjectedClosure`]).
//!
//! The [`transforms`] module converts each form into the next one exactly and
//! reports certified ellipticity constants. Singular matrix algebra (group
//! inverses of rank N-1 matrices with known one-dimensional kernels) lives in
//! [`groupinv`]; composition-dependent model builders (Darken, Vignes) in
//! [`darken`]; Fickian matrices, spectra, and sign diagnostics in [`fickian`];
//! a conservative one-dimensional relaxation solver in [`sim`].

pub mod closures;
pub mod darken;
pub mod error;
pub mod fickian;
pub mod groupinv;
pub mod mixture;
pub mod sim;
pub mod transforms;

pub use error::{Error, Result};
pub use mixture::{DerivedMatrices, GradientField, MixtureState, GAS_CONSTANT};
