//! Numerical construction of Bellman functions for integral functionals on
//! BMO over the parabolic strip, via extremal foliations.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: bracketed root finding, golden-section search, quadrature;
//! - [`term`] / [`boundary`]: closed-form boundary functions `f`, their
//!   derivatives, sign analysis of `f'''`, and weighted integrals;
//! - [`chords`]: chordal (cup) domains and their growth in the chord length;
//! - [`forces`]: force functions, tails, and balance equations;
//! - [`candidates`]: slope functions, tangent bands, and per-figure values;
//! - [`foliation`]: assembled candidate foliations at a fixed radius;
//! - [`evolution`]: evolution of the foliation in the radius through
//!   critical points;
//! - [`optimizers`]: explicit boundary optimizers and their verification;
//! - [`oracle`]: an independent grid construction of the minimal locally
//!   concave majorant;
//! - [`verify`]: deterministic property checks on an assembled candidate.

pub mod boundary;
pub mod candidates;
pub mod chords;
pub mod evolution;
pub mod foliation;
pub mod forces;
pub mod numerics;
pub mod optimizers;
pub mod oracle;
pub mod term;
pub mod verify;
