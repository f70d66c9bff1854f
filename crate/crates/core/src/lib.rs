//! Controllability of forced particle chains on the line.
//!
//! Nearest-neighbour chains `H = ½Σp² + ΣΦ(q_j − q_{j+1})`, periodic or
//! open, driven by a force on one (or two) particles. The crate provides
//! conservative integration, Lie-bracket rank tests, the degenerate
//! counterexample systems with their invariant planes, a steering planner
//! built from forward-time flows only, and energy-box bounds.

pub mod analysis;
pub mod config;
pub mod control;
pub mod counterexamples;
pub mod dynamics;
pub mod error;
pub mod integrate;
pub mod jet;
pub mod lie;
pub mod oracle;
pub mod potential;
pub mod reference;
pub mod state;
pub mod steering;
pub mod system;
pub mod trajectory;

pub use control::{Channel, ControlSignal, Segment};
pub use dynamics::{control_field, drift, feedback_decouple, hamiltonian};
pub use error::{Error, Result};
pub use integrate::{controlled_flow, free_flow, IntegratorPolicy, Method};
pub use potential::{OddPolynomial, Potential, PotentialKind};
pub use state::{State, TangentVector};
pub use system::{LatticeConfig, LatticeSystem, Topology};
pub use trajectory::Trajectory;
