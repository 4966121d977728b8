//! Shared fixtures for the criterion benchmarks.

use qmaze_core::adaptive::UpdateState;
use qmaze_core::qubo::QuboProblem;
use qmaze_core::AnnealParams;

/// Grid sizes used by the generator benches.
pub const GENERATOR_SIZES: [usize; 4] = [5, 10, 20, 40];
/// Grid sizes used by the annealer benches.
pub const ANNEAL_SIZES: [usize; 3] = [2, 4, 6];

pub fn base_qubo(n: usize) -> QuboProblem {
    QuboProblem::base(n, 2.0, 2.0).expect("n is positive")
}

/// One read of the default sweep count, so a bench iteration times one anneal.
pub fn single_read(sweeps: usize) -> AnnealParams {
    AnnealParams {
        reads: 1,
        sweeps,
        ..AnnealParams::default()
    }
}

pub fn update_state(n: usize) -> UpdateState {
    UpdateState::init(n, 0.05, 0.15, 0.30, 1).expect("valid parameters")
}
