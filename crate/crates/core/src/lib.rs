//! Operator-valued pseudo-differential calculus on type I groups.
//!
//! Two concrete backends are provided: the finite cyclic group `Z_N`, where
//! every structural identity holds to rounding, and the affine group of the
//! real line `{(b, a) : a > 0}`, which is non-unimodular and is modelled by a
//! quadrature grid that is uniform in `b` and geometric in `a`.
//!
//! The crate is organised bottom-up:
//!
//! * [`group`]: group law, modular function, exponential coordinates, grids.
//! * [`lspace`]: sampled `L^2(G)` functions and integral operators.
//! * [`repfield`]: unitary dual, representations, Duflo–Moore operators.
//! * [`plancherel`]: Fourier and Plancherel transforms and their inverses.
//! * [`quantizer`]: left/right quantization, Wigner, Moyal, crossed products.
//! * [`expcalc`]: scalar quantization of `G x g*` through exponential coordinates.
//! * [`samples`]: smooth test data (wave packets, random symbols).
//! * [`checks`]: the named verification suites run by the `grouppdo` binary.

pub mod checks;
pub mod error;
pub mod expcalc;
pub mod group;
pub mod lspace;
pub mod plancherel;
pub mod quantizer;
pub mod repfield;
pub mod samples;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
