//! Player-adaptive difficulty.
//!
//! An [`UpdateState`] carries a dense matrix over the QUBO variables. After
//! each solved maze it is blended with a fresh uniform `[-1, 1]` matrix:
//!
//! ```text
//! M ← p(t)·M + (1 − p(t))·R,   p(t) = 1 / (1 + e^(−a·t))
//! ```
//!
//! so a slow solve keeps more of the matrix that produced the maze. The next
//! maze is sampled from the base QUBO plus the block-weighted matrix.

use std::time::{SystemTime, UNIX_EPOCH};

use rand::distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bars::BarAssignment;
use crate::maze::Maze;
use crate::qubo::{dim_for, QuboError, QuboProblem};
use crate::sampler::{best_feasible, AnnealParams, Sampler, SamplerError};
use crate::seed;

pub const DEFAULT_A: f64 = 0.05;
pub const DEFAULT_LAMBDA_UPDATE1: f64 = 0.15;
pub const DEFAULT_LAMBDA_UPDATE2: f64 = 0.30;
/// Halvings of the update weights tried before dropping the update term.
pub const MAX_HALVINGS: u8 = 5;
/// Fallback level at which the update term is removed entirely.
pub const BASE_ONLY_LEVEL: u8 = MAX_HALVINGS + 1;
/// Independent anneals of the bare base QUBO before giving up.
pub const BASE_ATTEMPTS: u64 = 3;

const LABEL_TAG: u64 = 0x1abe1;
const FALLBACK_TAG: u64 = 0xfa11;

#[derive(Debug, Error, PartialEq)]
pub enum AdaptiveError {
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("solve time must be a non-negative number of seconds, got {0}")]
    NegativeTime(f64),
    #[error("invalid update-state snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Qubo(#[from] QuboError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("base QUBO produced no feasible sample; increase reads or sweeps")]
    Unreachable,
}

/// Mixing weight of the previous matrix after a solve taking `t` seconds.
pub fn p_of_t(a: f64, t: f64) -> f64 {
    1.0 / (1.0 + (-a * t).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    /// Seconds taken to solve the previous maze.
    pub solve_time: f64,
    /// Unix time of the update, in seconds.
    pub timestamp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "UpdateSnapshot", into = "UpdateSnapshot")]
pub struct UpdateState {
    pub n: usize,
    /// Sigmoid steepness, per second.
    pub a: f64,
    /// Weight of the bar block and both cross blocks.
    pub lambda_update1: f64,
    /// Weight of the start/goal block.
    pub lambda_update2: f64,
    matrix: Vec<f64>,
    pub history: Vec<HistoryEntry>,
}

/// Wire form: `{n, a, lambdas: [update1, update2], matrix: [row-major], history}`.
#[derive(Serialize, Deserialize)]
struct UpdateSnapshot {
    n: usize,
    a: f64,
    lambdas: [f64; 2],
    matrix: Vec<f64>,
    history: Vec<HistoryEntry>,
}

impl From<UpdateState> for UpdateSnapshot {
    fn from(s: UpdateState) -> Self {
        UpdateSnapshot {
            n: s.n,
            a: s.a,
            lambdas: [s.lambda_update1, s.lambda_update2],
            matrix: s.matrix,
            history: s.history,
        }
    }
}

impl TryFrom<UpdateSnapshot> for UpdateState {
    type Error = AdaptiveError;

    fn try_from(s: UpdateSnapshot) -> Result<Self, Self::Error> {
        let mut state = UpdateState::from_matrix(s.n, s.a, s.lambdas[0], s.lambdas[1], s.matrix)?;
        state.history = s.history;
        Ok(state)
    }
}

fn check_params(n: usize, a: f64, l1: f64, l2: f64) -> Result<(), AdaptiveError> {
    if n == 0 {
        return Err(AdaptiveError::Param(
            "bar-grid size must be at least 1".into(),
        ));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(AdaptiveError::Param(format!("a must be positive, got {a}")));
    }
    if !(l1.is_finite() && l1 >= 0.0 && l2.is_finite() && l2 >= 0.0) {
        return Err(AdaptiveError::Param(format!(
            "update weights must be non-negative, got {l1}, {l2}"
        )));
    }
    Ok(())
}

/// A `dim × dim` row-major matrix of i.i.d. uniform `[-1, 1]` entries.
pub fn random_matrix(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed);
    let unit = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
    (0..dim * dim).map(|_| unit.sample(&mut rng)).collect()
}

impl UpdateState {
    /// A fresh state with a seeded random matrix and empty history.
    pub fn init(
        n: usize,
        a: f64,
        lambda_update1: f64,
        lambda_update2: f64,
        seed: u64,
    ) -> Result<Self, AdaptiveError> {
        check_params(n, a, lambda_update1, lambda_update2)?;
        let dim = dim_for(n);
        Ok(UpdateState {
            n,
            a,
            lambda_update1,
            lambda_update2,
            matrix: random_matrix(dim, seed),
            history: Vec::new(),
        })
    }

    pub fn from_matrix(
        n: usize,
        a: f64,
        lambda_update1: f64,
        lambda_update2: f64,
        matrix: Vec<f64>,
    ) -> Result<Self, AdaptiveError> {
        check_params(n, a, lambda_update1, lambda_update2)?;
        let dim = dim_for(n);
        if matrix.len() != dim * dim {
            return Err(AdaptiveError::Snapshot(format!(
                "matrix has {} entries, expected {}",
                matrix.len(),
                dim * dim
            )));
        }
        if let Some(bad) = matrix.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(AdaptiveError::Snapshot(format!(
                "entry {bad} outside [-1, 1]"
            )));
        }
        Ok(UpdateState {
            n,
            a,
            lambda_update1,
            lambda_update2,
            matrix,
            history: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        dim_for(self.n)
    }

    pub fn entry(&self, r: usize, c: usize) -> f64 {
        self.matrix[r * self.dim() + c]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn p(&self, t: f64) -> f64 {
        p_of_t(self.a, t)
    }

    /// Blends in a fresh random matrix drawn from `seed` after a solve of `t`
    /// seconds and records the solve in the history.
    pub fn update(&self, t: f64, seed: u64) -> Result<Self, AdaptiveError> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(AdaptiveError::NegativeTime(t));
        }
        let keep = self.p(t);
        let fresh = 1.0 - keep;
        let random = random_matrix(self.dim(), seed);
        let matrix = self
            .matrix
            .iter()
            .zip(&random)
            .map(|(old, r)| keep * old + fresh * r)
            .collect();
        let mut history = self.history.clone();
        history.push(HistoryEntry {
            solve_time: t,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs_f64())
                .unwrap_or(0.0),
        });
        Ok(UpdateState {
            matrix,
            history,
            ..self.clone_header()
        })
    }

    fn clone_header(&self) -> Self {
        UpdateState {
            n: self.n,
            a: self.a,
            lambda_update1: self.lambda_update1,
            lambda_update2: self.lambda_update2,
            matrix: Vec::new(),
            history: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("update state is serialisable")
    }

    pub fn from_json(text: &str) -> Result<Self, AdaptiveError> {
        serde_json::from_str(text).map_err(|e| AdaptiveError::Snapshot(e.to_string()))
    }
}

/// A generated maze together with how it was obtained.
#[derive(Clone, Debug, PartialEq)]
pub struct NextMaze {
    pub maze: Maze,
    pub assignment: BarAssignment,
    /// `0` for the full update weights, `1..=5` for successive halvings and
    /// [`BASE_ONLY_LEVEL`] when the update term was dropped.
    pub fallback_level: u8,
    /// QUBO energy of the chosen sample.
    pub energy: f64,
}

/// Samples the next maze from `base` plus the update term of `state`.
///
/// When no sample decodes to a feasible assignment, the update weights are
/// halved for this build only and sampling is retried, up to
/// [`MAX_HALVINGS`] times, and finally the bare base QUBO is annealed up to
/// [`BASE_ATTEMPTS`] times with fresh seeds. Passing `None` samples the base
/// QUBO directly.
pub fn next_maze(
    state: Option<&UpdateState>,
    base: &QuboProblem,
    sampler: Sampler,
    anneal: &AnnealParams,
) -> Result<NextMaze, AdaptiveError> {
    let levels: Vec<u8> = match state {
        Some(_) => (0..=BASE_ONLY_LEVEL).collect(),
        None => vec![BASE_ONLY_LEVEL],
    };
    for level in levels {
        let q = match state {
            Some(s) if level < BASE_ONLY_LEVEL => {
                let scale = 0.5f64.powi(level as i32);
                base.with_update_weights(s, s.lambda_update1 * scale, s.lambda_update2 * scale)?
            }
            _ => base.clone(),
        };
        let attempts = if level == BASE_ONLY_LEVEL {
            BASE_ATTEMPTS
        } else {
            1
        };
        for attempt in 0..attempts {
            let first = attempt == 0 && (level == 0 || state.is_none());
            let params = AnnealParams {
                seed: if first {
                    anneal.seed
                } else {
                    seed::derive(anneal.seed, FALLBACK_TAG, (level as u64) << 8 | attempt)
                },
                ..anneal.clone()
            };
            let set = sampler.sample(&q, &params)?;
            let (mut assignment, idx) = match best_feasible(&set, &q) {
                Ok(found) => found,
                Err(SamplerError::NotFound) => continue,
                Err(e) => return Err(e.into()),
            };
            assignment.shuffle_labels(&mut seed::rng(seed::derive(params.seed, LABEL_TAG, 0)));
            let maze = assignment
                .to_maze()
                .map_err(|e| AdaptiveError::Param(format!("decoded assignment rejected: {e}")))?;
            return Ok(NextMaze {
                maze,
                assignment,
                fallback_level: if state.is_some() { level } else { 0 },
                energy: set.records[idx].energy,
            });
        }
    }
    Err(AdaptiveError::Unreachable)
}
