//! The bar-tipping cost function as a QUBO.
//!
//! Variables are laid out in two blocks. The first `N(3N+1)` indices hold the
//! bar directions `x[i,j,d]` row by row (four directions in the first column,
//! three elsewhere); the remaining `(N+1)²` hold the start/goal selectors
//! `X[m,n]`. The energy is
//!
//! ```text
//! E = Σ overlap(x) + λ₁ Σ_bars (Σ_d x − 1)² + λ₂ (Σ X − 2)²
//! ```
//!
//! with the penalty constants kept in [`QuboProblem::offset`] so that every
//! feasible configuration has energy exactly `0`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adaptive::UpdateState;
use crate::bars::{BarAssignment, ConstraintViolation, Direction};

pub const DEFAULT_LAMBDA1: f64 = 2.0;
pub const DEFAULT_LAMBDA2: f64 = 2.0;

#[derive(Debug, Error, PartialEq)]
pub enum QuboError {
    #[error("bar-grid size must be at least 1")]
    ZeroSize,
    #[error("penalty weight {name} must be positive and finite, got {value}")]
    Penalty { name: &'static str, value: f64 },
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("bitstring has length {found}, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("update matrix covers {found} variables, problem has {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Number of bar-direction variables, `N(3N+1)`.
pub const fn bar_block_len(n: usize) -> usize {
    n * (3 * n + 1)
}

/// Total variable count, `N(3N+1) + (N+1)²`.
pub const fn dim_for(n: usize) -> usize {
    bar_block_len(n) + (n + 1) * (n + 1)
}

/// Flat index of `x[i,j,d]`.
pub fn index_of_bar(n: usize, i: usize, j: usize, d: Direction) -> Result<usize, QuboError> {
    if i >= n || j >= n {
        return Err(QuboError::OutOfRange(format!(
            "bar ({i}, {j}) with N = {n}"
        )));
    }
    let row = (3 * n + 1) * i;
    if j == 0 {
        Ok(d.code() + row)
    } else if d == Direction::Left {
        Err(QuboError::OutOfRange(format!(
            "bar ({i}, {j}) cannot extend left"
        )))
    } else {
        Ok(d.code() + 3 * j + 1 + row)
    }
}

/// Inverse of [`index_of_bar`].
pub fn bar_of_index(n: usize, k: usize) -> Option<(usize, usize, Direction)> {
    if k >= bar_block_len(n) {
        return None;
    }
    let stride = 3 * n + 1;
    let (i, rem) = (k / stride, k % stride);
    if rem < 4 {
        Some((i, 0, Direction::from_code(rem)?))
    } else {
        let rem = rem - 4;
        Some((i, rem / 3 + 1, Direction::from_code(rem % 3)?))
    }
}

/// Flat index of the start/goal selector `X[m,n2]`.
pub fn index_of_sg(n: usize, m: usize, n2: usize) -> Result<usize, QuboError> {
    if m > n || n2 > n {
        return Err(QuboError::OutOfRange(format!(
            "candidate ({m}, {n2}) with N = {n}"
        )));
    }
    Ok(bar_block_len(n) + (n + 1) * m + n2)
}

/// Inverse of [`index_of_sg`].
pub fn sg_of_index(n: usize, l: usize) -> Option<(usize, usize)> {
    let rel = l.checked_sub(bar_block_len(n))?;
    (l < dim_for(n)).then_some((rel / (n + 1), rel % (n + 1)))
}

/// A binary configuration, one `0`/`1` per variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bitstring(pub Vec<u8>);

impl Bitstring {
    pub fn zeros(len: usize) -> Self {
        Bitstring(vec![0; len])
    }

    /// The `len` low bits of `value`, least significant first.
    pub fn from_index(value: u64, len: usize) -> Self {
        Bitstring((0..len).map(|k| ((value >> k) & 1) as u8).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, k: usize) -> bool {
        self.0[k] != 0
    }

    pub fn set(&mut self, k: usize, on: bool) {
        self.0[k] = on as u8;
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b != 0 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Bitstring {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(format!("invalid bit {other:?}")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Bitstring)
    }
}

impl Serialize for Bitstring {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bitstring {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Sparse upper-triangular QUBO with a constant offset.
#[derive(Clone, Debug, PartialEq)]
pub struct QuboProblem {
    n: usize,
    dim: usize,
    lambda1: f64,
    lambda2: f64,
    offset: f64,
    coeffs: BTreeMap<(usize, usize), f64>,
}

impl QuboProblem {
    /// A problem over the `N` variable layout with no terms.
    pub fn empty(n: usize) -> Result<Self, QuboError> {
        if n == 0 {
            return Err(QuboError::ZeroSize);
        }
        Ok(QuboProblem {
            n,
            dim: dim_for(n),
            lambda1: 0.0,
            lambda2: 0.0,
            offset: 0.0,
            coeffs: BTreeMap::new(),
        })
    }

    /// Overlap couplings plus the one-direction-per-bar and two-endpoint
    /// penalties, expanded with their constants.
    pub fn base(n: usize, lambda1: f64, lambda2: f64) -> Result<Self, QuboError> {
        for (name, value) in [("lambda1", lambda1), ("lambda2", lambda2)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(QuboError::Penalty { name, value });
            }
        }
        let mut q = QuboProblem::empty(n)?;
        q.lambda1 = lambda1;
        q.lambda2 = lambda2;

        // Bar (i,j) tipped down and bar (i+1,j) tipped up fill the same cell.
        for i in 0..n.saturating_sub(1) {
            for j in 0..n {
                let down = index_of_bar(n, i, j, Direction::Down)?;
                let up = index_of_bar(n, i + 1, j, Direction::Up)?;
                q.add(down, up, 1.0);
            }
        }

        for i in 0..n {
            for j in 0..n {
                let vars: Vec<usize> = Direction::allowed(j)
                    .iter()
                    .map(|&d| index_of_bar(n, i, j, d))
                    .collect::<Result<_, _>>()?;
                add_count_penalty(&mut q, &vars, 1.0, lambda1);
            }
        }

        let selectors: Vec<usize> = (bar_block_len(n)..dim_for(n)).collect();
        add_count_penalty(&mut q, &selectors, 2.0, lambda2);
        Ok(q)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn add_offset(&mut self, value: f64) {
        self.offset += value;
    }

    /// Adds `weight · b[k1] · b[k2]`; `(k1, k2)` and `(k2, k1)` share one entry.
    pub fn add(&mut self, k1: usize, k2: usize, weight: f64) {
        assert!(
            k1 < self.dim && k2 < self.dim,
            "index ({k1}, {k2}) beyond dim {}",
            self.dim
        );
        let key = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
        *self.coeffs.entry(key).or_insert(0.0) += weight;
    }

    pub fn coefficient(&self, k1: usize, k2: usize) -> f64 {
        let key = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
        self.coeffs.get(&key).copied().unwrap_or(0.0)
    }

    /// Stored `(k1, k2, weight)` entries with `k1 ≤ k2`, in index order.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.coeffs.iter().map(|(&(a, b), &w)| (a, b, w))
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn energy(&self, b: &Bitstring) -> Result<f64, QuboError> {
        if b.len() != self.dim {
            return Err(QuboError::LengthMismatch {
                expected: self.dim,
                found: b.len(),
            });
        }
        Ok(self.energy_unchecked(&b.0))
    }

    /// Energy of a `0`/`1` slice of length `dim`.
    pub fn energy_unchecked(&self, bits: &[u8]) -> f64 {
        let quadratic: f64 = self
            .coeffs
            .iter()
            .filter(|(&(a, b), _)| bits[a] != 0 && bits[b] != 0)
            .map(|(_, &w)| w)
            .sum();
        quadratic + self.offset
    }

    /// Reads the bar directions and endpoints back out of a configuration.
    ///
    /// Succeeds only when every bar has exactly one direction, no vertical pair
    /// overlaps and exactly two selectors are set. The lower selector index
    /// becomes the start.
    pub fn decode(&self, b: &Bitstring) -> Result<BarAssignment, Vec<ConstraintViolation>> {
        let n = self.n;
        if b.len() != self.dim {
            return Err(vec![ConstraintViolation::BarCount {
                expected: self.dim,
                found: b.len(),
            }]);
        }
        let set = |i, j, d| index_of_bar(n, i, j, d).map(|k| b.get(k)).unwrap_or(false);
        let mut violations = Vec::new();
        let mut dirs = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let on: Vec<Direction> = Direction::allowed(j)
                    .iter()
                    .copied()
                    .filter(|&d| set(i, j, d))
                    .collect();
                if on.len() == 1 {
                    dirs.push(on[0]);
                } else {
                    violations.push(ConstraintViolation::DirectionCount {
                        bar: (i, j),
                        count: on.len(),
                    });
                }
                if i + 1 < n && set(i, j, Direction::Down) && set(i + 1, j, Direction::Up) {
                    violations.push(ConstraintViolation::Overlap {
                        upper: (i, j),
                        lower: (i + 1, j),
                    });
                }
            }
        }
        let selected: Vec<(usize, usize)> = (bar_block_len(n)..self.dim)
            .filter(|&l| b.get(l))
            .filter_map(|l| sg_of_index(n, l))
            .collect();
        if selected.len() != 2 {
            violations.push(ConstraintViolation::StartGoalCount {
                count: selected.len(),
            });
        }
        if !violations.is_empty() {
            return Err(violations);
        }
        Ok(BarAssignment {
            n,
            dirs,
            start_goal: [selected[0], selected[1]],
        })
    }

    /// The configuration representing `a`.
    pub fn encode(&self, a: &BarAssignment) -> Result<Bitstring, QuboError> {
        let mut b = Bitstring::zeros(self.dim);
        for i in 0..a.n {
            for j in 0..a.n {
                b.set(index_of_bar(self.n, i, j, a.dir(i, j))?, true);
            }
        }
        for &(m, n2) in &a.start_goal {
            b.set(index_of_sg(self.n, m, n2)?, true);
        }
        Ok(b)
    }

    /// This problem plus the update term of `u` at its own block weights.
    pub fn with_update(&self, u: &UpdateState) -> Result<Self, QuboError> {
        self.with_update_weights(u, u.lambda_update1, u.lambda_update2)
    }

    /// Adds the dense update matrix with the bar block, both cross blocks
    /// weighted by `w_bars` and the selector block by `w_endpoints`. The
    /// matrix is folded into upper-triangular form; exact zeros are skipped.
    pub fn with_update_weights(
        &self,
        u: &UpdateState,
        w_bars: f64,
        w_endpoints: f64,
    ) -> Result<Self, QuboError> {
        if u.dim() != self.dim {
            return Err(QuboError::DimMismatch {
                expected: self.dim,
                found: u.dim(),
            });
        }
        let mut q = self.clone();
        let split = bar_block_len(self.n);
        for r in 0..self.dim {
            for c in 0..self.dim {
                let weight = if r >= split && c >= split {
                    w_endpoints
                } else {
                    w_bars
                };
                let delta = weight * u.entry(r, c);
                if delta != 0.0 {
                    q.add(r, c, delta);
                }
            }
        }
        Ok(q)
    }

    /// COO text: a `n dim offset` header, a `# lambda1 .. lambda2 ..` comment
    /// and one `k1 k2 weight` line per stored entry.
    pub fn to_coo(&self) -> String {
        let mut out = format!("{} {} {}\n", self.n, self.dim, self.offset);
        out.push_str(&format!(
            "# lambda1 {} lambda2 {}\n",
            self.lambda1, self.lambda2
        ));
        for (&(a, b), &w) in &self.coeffs {
            out.push_str(&format!("{a} {b} {w}\n"));
        }
        out
    }

    pub fn from_coo(text: &str) -> Result<Self, QuboError> {
        let parse_err = |line: usize, msg: String| QuboError::Parse { line, msg };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());

        let (hline, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [n, dim, offset] = fields[..] else {
            return Err(parse_err(hline, "header must be `n dim offset`".into()));
        };
        let n: usize = n.parse().map_err(|e| parse_err(hline, format!("n: {e}")))?;
        let dim: usize = dim
            .parse()
            .map_err(|e| parse_err(hline, format!("dim: {e}")))?;
        let offset: f64 = offset
            .parse()
            .map_err(|e| parse_err(hline, format!("offset: {e}")))?;
        let mut q = QuboProblem::empty(n)?;
        if dim != q.dim {
            return Err(parse_err(
                hline,
                format!("dim {dim} does not match N = {n}"),
            ));
        }
        q.offset = offset;

        for (ln, line) in lines {
            if let Some(comment) = line.strip_prefix('#') {
                let words: Vec<&str> = comment.split_whitespace().collect();
                if let ["lambda1", l1, "lambda2", l2] = words[..] {
                    q.lambda1 = l1
                        .parse()
                        .map_err(|e| parse_err(ln, format!("lambda1: {e}")))?;
                    q.lambda2 = l2
                        .parse()
                        .map_err(|e| parse_err(ln, format!("lambda2: {e}")))?;
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [a, b, w] = fields[..] else {
                return Err(parse_err(ln, "expected `k1 k2 weight`".into()));
            };
            let a: usize = a.parse().map_err(|e| parse_err(ln, format!("k1: {e}")))?;
            let b: usize = b.parse().map_err(|e| parse_err(ln, format!("k2: {e}")))?;
            let w: f64 = w
                .parse()
                .map_err(|e| parse_err(ln, format!("weight: {e}")))?;
            if a >= dim || b >= dim {
                return Err(parse_err(ln, format!("index beyond dim {dim}")));
            }
            q.add(a, b, w);
        }
        Ok(q)
    }
}

/// Adds `λ (Σ vars − target)²` using `x² = x`.
fn add_count_penalty(q: &mut QuboProblem, vars: &[usize], target: f64, lambda: f64) {
    for (a, &ka) in vars.iter().enumerate() {
        q.add(ka, ka, lambda * (1.0 - 2.0 * target));
        for &kb in &vars[a + 1..] {
            q.add(ka, kb, 2.0 * lambda);
        }
    }
    q.offset += lambda * target * target;
}
