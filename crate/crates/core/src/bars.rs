//! Bar extension directions and their decoding into a grid.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::maze::{candidate_cell, Cell, Coord, Maze};

/// Extension direction of a bar, encoded up 0, right 1, down 2, left 3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up = 0,
    Right = 1,
    Down = 2,
    Left = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Up,
        Direction::Right,
        Direction::Down,
        Direction::Left,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    /// Directions a bar in column `j` may take: left only in the first column.
    pub fn allowed(j: usize) -> &'static [Direction] {
        if j == 0 {
            &Self::ALL
        } else {
            &Self::ALL[..3]
        }
    }

    /// Row/column step of this direction.
    pub fn delta(self) -> (isize, isize) {
        match self {
            Direction::Up => (-1, 0),
            Direction::Right => (0, 1),
            Direction::Down => (1, 0),
            Direction::Left => (0, -1),
        }
    }

    pub fn step(self, pos: Coord) -> Option<Coord> {
        let (dr, dc) = self.delta();
        Some((pos.0.checked_add_signed(dr)?, pos.1.checked_add_signed(dc)?))
    }

    pub fn opposite(self) -> Self {
        match self {
            Direction::Up => Direction::Down,
            Direction::Right => Direction::Left,
            Direction::Down => Direction::Up,
            Direction::Left => Direction::Right,
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "up" | "u" | "0" => Ok(Direction::Up),
            "right" | "r" | "1" => Ok(Direction::Right),
            "down" | "d" | "2" => Ok(Direction::Down),
            "left" | "l" | "3" => Ok(Direction::Left),
            other => Err(format!("unknown direction {other:?}")),
        }
    }
}

/// Grid cell of bar `(i, j)`.
pub const fn bar_cell(i: usize, j: usize) -> Coord {
    (2 * i + 2, 2 * j + 2)
}

/// Cell filled when bar `(i, j)` is extended in direction `d`.
pub fn extension_cell(i: usize, j: usize, d: Direction) -> Coord {
    let (r, c) = bar_cell(i, j);
    match d {
        Direction::Up => (r - 1, c),
        Direction::Right => (r, c + 1),
        Direction::Down => (r + 1, c),
        Direction::Left => (r, c - 1),
    }
}

/// A broken bar-tipping constraint, as reported by decoding or validation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintViolation {
    /// Bar does not have exactly one direction.
    DirectionCount { bar: Coord, count: usize },
    /// Left extension outside the first column.
    LeftOutsideFirstColumn { bar: Coord },
    /// Upper bar extended down while the bar below it is extended up.
    Overlap { upper: Coord, lower: Coord },
    /// Not exactly two start/goal candidates selected.
    StartGoalCount { count: usize },
    /// Bar or candidate coordinate beyond the grid.
    OutOfRange { coord: Coord },
    /// Wrong number of bars for the grid size.
    BarCount { expected: usize, found: usize },
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintViolation::DirectionCount { bar, count } => {
                write!(f, "bar {bar:?} has {count} directions")
            }
            ConstraintViolation::LeftOutsideFirstColumn { bar } => {
                write!(f, "bar {bar:?} extends left outside the first column")
            }
            ConstraintViolation::Overlap { upper, lower } => {
                write!(f, "overlap between bars {upper:?} and {lower:?}")
            }
            ConstraintViolation::StartGoalCount { count } => {
                write!(f, "start/goal count = {count}")
            }
            ConstraintViolation::OutOfRange { coord } => {
                write!(f, "coordinate {coord:?} out of range")
            }
            ConstraintViolation::BarCount { expected, found } => {
                write!(f, "expected {expected} bars, found {found}")
            }
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid assignment: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct InvalidAssignment(pub Vec<ConstraintViolation>);

/// One direction per bar plus the two selected start/goal candidates.
///
/// `dirs` is row-major: bar `(i, j)` is `dirs[i * n + j]`. The first entry of
/// `start_goal` becomes the start when decoded.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BarAssignment {
    pub n: usize,
    pub dirs: Vec<Direction>,
    pub start_goal: [Coord; 2],
}

impl BarAssignment {
    pub fn dir(&self, i: usize, j: usize) -> Direction {
        self.dirs[i * self.n + j]
    }

    /// Every broken constraint, empty when the assignment is feasible.
    pub fn violations(&self) -> Vec<ConstraintViolation> {
        let n = self.n;
        let mut out = Vec::new();
        if self.dirs.len() != n * n {
            out.push(ConstraintViolation::BarCount {
                expected: n * n,
                found: self.dirs.len(),
            });
            return out;
        }
        for i in 0..n {
            for j in 0..n {
                let d = self.dir(i, j);
                if d == Direction::Left && j > 0 {
                    out.push(ConstraintViolation::LeftOutsideFirstColumn { bar: (i, j) });
                }
                if i + 1 < n && d == Direction::Down && self.dir(i + 1, j) == Direction::Up {
                    out.push(ConstraintViolation::Overlap {
                        upper: (i, j),
                        lower: (i + 1, j),
                    });
                }
            }
        }
        for &sg in &self.start_goal {
            if sg.0 > n || sg.1 > n {
                out.push(ConstraintViolation::OutOfRange { coord: sg });
            }
        }
        if self.start_goal[0] == self.start_goal[1] {
            out.push(ConstraintViolation::StartGoalCount { count: 1 });
        }
        out
    }

    pub fn is_feasible(&self) -> bool {
        self.violations().is_empty()
    }

    /// Swaps start and goal with probability one half.
    pub fn shuffle_labels<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if rng.random_bool(0.5) {
            self.start_goal.swap(0, 1);
        }
    }

    /// Decodes the assignment: each bar fills its own cell and the neighbour
    /// in its direction; start and goal land on their candidate cells.
    pub fn to_maze(&self) -> Result<Maze, InvalidAssignment> {
        let violations = self.violations();
        if !violations.is_empty() {
            return Err(InvalidAssignment(violations));
        }
        let mut maze = Maze::with_bars(self.n).map_err(|_| {
            InvalidAssignment(vec![ConstraintViolation::BarCount {
                expected: 1,
                found: 0,
            }])
        })?;
        for i in 0..self.n {
            for j in 0..self.n {
                maze.set(extension_cell(i, j, self.dir(i, j)), Cell::Wall);
            }
        }
        let [s, g] = self.start_goal;
        maze.set_endpoints(candidate_cell(s.0, s.1), candidate_cell(g.0, g.1));
        Ok(maze)
    }

    /// Recovers the assignment that produced a bar-tipping maze, if the grid
    /// has exactly one extension per bar.
    pub fn from_maze(maze: &Maze) -> Option<Self> {
        let n = maze.n();
        let mut dirs = Vec::with_capacity(n * n);
        // A wall in the vertical gap below bar (i, j) may belong to the bar
        // beneath it, so "down" is only inferred when no other extension exists.
        let mut claimed = std::collections::HashSet::new();
        for i in 0..n {
            for j in 0..n {
                let found: Vec<_> = Direction::allowed(j)
                    .iter()
                    .copied()
                    .filter(|&d| d != Direction::Down)
                    .filter(|&d| {
                        let cell = extension_cell(i, j, d);
                        maze.cell(cell) == Cell::Wall && !claimed.contains(&cell)
                    })
                    .collect();
                let d = match found.as_slice() {
                    [d] => *d,
                    [] if maze.cell(extension_cell(i, j, Direction::Down)) == Cell::Wall => {
                        Direction::Down
                    }
                    _ => return None,
                };
                claimed.insert(extension_cell(i, j, d));
                dirs.push(d);
            }
        }
        let (s, g) = (maze.start(), maze.goal());
        if s.0 % 2 == 0 || s.1 % 2 == 0 || g.0 % 2 == 0 || g.1 % 2 == 0 {
            return None;
        }
        Some(BarAssignment {
            n,
            dirs,
            start_goal: [(s.0 / 2, s.1 / 2), (g.0 / 2, g.1 / 2)],
        })
    }
}

/// Enumerates every direction map satisfying the three constraints for `n`
/// bars per side, in lexicographic order of the row-major code sequence.
pub fn feasible_direction_maps(n: usize) -> Vec<Vec<Direction>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n * n);
    fn rec(n: usize, cur: &mut Vec<Direction>, out: &mut Vec<Vec<Direction>>) {
        let idx = cur.len();
        if idx == n * n {
            out.push(cur.clone());
            return;
        }
        let (i, j) = (idx / n, idx % n);
        for &d in Direction::allowed(j) {
            if d == Direction::Up && i > 0 && cur[(i - 1) * n + j] == Direction::Down {
                continue;
            }
            cur.push(d);
            rec(n, cur, out);
            cur.pop();
        }
    }
    rec(n, &mut cur, &mut out);
    out
}
