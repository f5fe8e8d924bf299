//! Nonlocal discrete partial derivatives on lattice graphs and solvers for the
//! linear, semilinear and quasilinear wave equations built from them.
//!
//! The infinite lattice `Z^d` is modeled by the discrete torus `(Z/LZ)^d`; see
//! [`lattice`]. The derivative `partial_j` is the Fourier multiplier
//! `2i sin(x_j/2)` ([`spectral`]) or, equivalently, convolution with the
//! periodized kernel ([`calculus`]).

pub mod calculus;
pub mod cli;
pub mod config;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod norms;
pub mod solvers;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use lattice::{Field, LatticeBox, WaveState};
