//! Qubit-loss thresholds for 2D color codes under the twin recovery protocol.
//!
//! A lost qubit is repaired by sacrificing one neighboring "twin" qubit:
//! the pair and its four flanking links are cut out, two reconnection links
//! are added, and the adjacent plaquettes merge or shrink accordingly. The
//! code survives as long as no product of damaged plaquettes connects two
//! opposite boundaries. This crate builds the lattices, replays the protocol,
//! decides recoverability three increasingly complete ways, and locates the
//! loss rate where recoverability breaks down.

pub mod checks;
pub mod color;
pub mod gf2;
pub mod lattice;
pub mod montecarlo;
pub mod reconstruction;

pub use color::Color;
