//! Combinatorial Conley-Morse analysis of iterated maps that are known only
//! through samples, such as the map sending a network's initial weights to its
//! weights after training.
//!
//! The pieces compose as follows: a [`grid::Grid`] discretizes a box of
//! parameter space; a box-image function (exact, or from a
//! [`surrogate::SurrogateModel`]) turns it into a
//! [`dynamics::MultivaluedMap`]; [`morse`] extracts the recurrent components,
//! their order, basins, and the lattice of reachable regions. [`harness`]
//! produces the sample pairs by training small classifiers.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dynamics;
pub mod error;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod morse;
pub mod surrogate;
pub mod systems;

pub use error::{Error, Result};
