//! Maze generation from a bar-tipping QUBO.
//!
//! The crate is organised bottom-up:
//!
//! - [`maze`]: the cell grid, validation, shortest paths and text formats.
//! - [`bars`]: per-bar extension directions and their decoding into a [`Maze`].
//! - [`generate`]: the classical bar-tipping, wall-extending and hunt-and-kill generators.
//! - [`qubo`]: the penalty-form QUBO over bar directions and start/goal candidates.
//! - [`sampler`]: simulated annealing and path-integral quantum annealing samplers.
//! - [`adaptive`]: the player-adaptive update matrix and the next-maze loop.
//! - [`benchmark`]: time-to-solution, regression fits and the scaling runner.
//! - [`session`]: play sessions with a 5×5 view, persistence and a scripted bot.

pub mod adaptive;
pub mod bars;
pub mod benchmark;
pub mod generate;
pub mod maze;
pub mod qubo;
pub mod sampler;
pub mod seed;
pub mod session;

pub use adaptive::{next_maze, p_of_t, NextMaze, UpdateState};
pub use bars::{BarAssignment, ConstraintViolation, Direction};
pub use generate::Algorithm;
pub use maze::{Cell, Coord, Maze, ValidationReport};
pub use qubo::{Bitstring, QuboProblem};
pub use sampler::{AnnealParams, SampleSet, Sampler};
pub use session::{Session, SessionParams, ViewWindow};
