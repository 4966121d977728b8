//! The cell grid shared by every generator.
//!
//! For a bar-grid size `N` the grid is `(2N+3)×(2N+3)`. Row and column `0` and
//! `2N+2` form the outer wall, bar `(i, j)` sits at `(2i+2, 2j+2)` and the
//! start/goal candidates are the odd-odd cells `(2m+1, 2n+1)`, `m, n ∈ [0, N]`.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `(row, col)` position in the grid.
pub type Coord = (usize, usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cell {
    Wall,
    Path,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MazeError {
    #[error("bar-grid size must be at least 1")]
    ZeroSize,
    #[error("grid has {rows} rows of lengths {widths:?}, expected a {side}×{side} square")]
    Shape {
        side: usize,
        rows: usize,
        widths: Vec<usize>,
    },
    #[error("{what} {pos:?} lies outside the {side}×{side} grid")]
    OutOfGrid {
        what: &'static str,
        pos: Coord,
        side: usize,
    },
    #[error("unexpected character {0:?} in maze text")]
    BadChar(char),
    #[error("maze text must contain exactly one 'S' and one 'G'")]
    Markers,
    #[error("goal is unreachable from start")]
    NoPath,
    #[error("invalid maze json: {0}")]
    Json(String),
}

/// Side length of the cell grid for bar-grid size `n`.
pub const fn side_for(n: usize) -> usize {
    2 * n + 3
}

/// Grid position of start/goal candidate `(m, n)`.
pub const fn candidate_cell(m: usize, n: usize) -> Coord {
    (2 * m + 1, 2 * n + 1)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Maze {
    n: usize,
    side: usize,
    cells: Vec<Cell>,
    start: Coord,
    goal: Coord,
}

impl Maze {
    /// A grid with the outer ring and the `N²` bars set to wall and everything
    /// else open. Start and goal default to the two opposite corner candidates.
    pub fn with_bars(n: usize) -> Result<Self, MazeError> {
        if n == 0 {
            return Err(MazeError::ZeroSize);
        }
        let side = side_for(n);
        let mut cells = vec![Cell::Path; side * side];
        for r in 0..side {
            for c in 0..side {
                if r == 0 || c == 0 || r == side - 1 || c == side - 1 || (r % 2 == 0 && c % 2 == 0)
                {
                    cells[r * side + c] = Cell::Wall;
                }
            }
        }
        Ok(Maze {
            n,
            side,
            cells,
            start: (1, 1),
            goal: (side - 2, side - 2),
        })
    }

    /// A grid that is entirely wall.
    pub fn walled(n: usize) -> Result<Self, MazeError> {
        if n == 0 {
            return Err(MazeError::ZeroSize);
        }
        let side = side_for(n);
        Ok(Maze {
            n,
            side,
            cells: vec![Cell::Wall; side * side],
            start: (1, 1),
            goal: (side - 2, side - 2),
        })
    }

    /// Builds a maze from raw rows. Only the shape and the start/goal bounds
    /// are checked here; everything else is reported by [`Maze::validate`].
    pub fn from_rows(
        n: usize,
        rows: Vec<Vec<Cell>>,
        start: Coord,
        goal: Coord,
    ) -> Result<Self, MazeError> {
        if n == 0 {
            return Err(MazeError::ZeroSize);
        }
        let side = side_for(n);
        if rows.len() != side || rows.iter().any(|r| r.len() != side) {
            return Err(MazeError::Shape {
                side,
                rows: rows.len(),
                widths: rows.iter().map(Vec::len).collect(),
            });
        }
        for (what, pos) in [("start", start), ("goal", goal)] {
            if pos.0 >= side || pos.1 >= side {
                return Err(MazeError::OutOfGrid { what, pos, side });
            }
        }
        Ok(Maze {
            n,
            side,
            cells: rows.into_iter().flatten().collect(),
            start,
            goal,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn start(&self) -> Coord {
        self.start
    }

    pub fn goal(&self) -> Coord {
        self.goal
    }

    pub fn set_endpoints(&mut self, start: Coord, goal: Coord) {
        self.start = start;
        self.goal = goal;
    }

    pub fn get(&self, pos: Coord) -> Option<Cell> {
        (pos.0 < self.side && pos.1 < self.side).then(|| self.cells[pos.0 * self.side + pos.1])
    }

    pub fn cell(&self, pos: Coord) -> Cell {
        self.cells[pos.0 * self.side + pos.1]
    }

    pub fn set(&mut self, pos: Coord, cell: Cell) {
        self.cells[pos.0 * self.side + pos.1] = cell;
    }

    pub fn is_path(&self, pos: Coord) -> bool {
        self.get(pos) == Some(Cell::Path)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Cell]> {
        self.cells.chunks(self.side)
    }

    pub fn count(&self, cell: Cell) -> usize {
        self.cells.iter().filter(|&&c| c == cell).count()
    }

    /// In-bounds 4-neighbours of `pos` in up, right, down, left order.
    pub fn neighbours(&self, pos: Coord) -> impl Iterator<Item = Coord> + '_ {
        let (r, c) = pos;
        [
            r.checked_sub(1).map(|r| (r, c)),
            (c + 1 < self.side).then_some((r, c + 1)),
            (r + 1 < self.side).then_some((r + 1, c)),
            c.checked_sub(1).map(|c| (r, c)),
        ]
        .into_iter()
        .flatten()
    }

    fn index(&self, pos: Coord) -> usize {
        pos.0 * self.side + pos.1
    }

    /// Checks the spanning-tree property of the open cells together with the
    /// start/goal contract.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();

        let path_cell_count = self.count(Cell::Path);
        let mut edge_count = 0;
        for r in 0..self.side {
            for c in 0..self.side {
                if self.cell((r, c)) != Cell::Path {
                    continue;
                }
                if c + 1 < self.side && self.cell((r, c + 1)) == Cell::Path {
                    edge_count += 1;
                }
                if r + 1 < self.side && self.cell((r + 1, c)) == Cell::Path {
                    edge_count += 1;
                }
            }
        }

        let mut component = vec![usize::MAX; self.cells.len()];
        let mut components = 0;
        for idx in 0..self.cells.len() {
            if self.cells[idx] != Cell::Path || component[idx] != usize::MAX {
                continue;
            }
            let mut queue = VecDeque::from([idx]);
            component[idx] = components;
            while let Some(cur) = queue.pop_front() {
                let pos = (cur / self.side, cur % self.side);
                for nb in self.neighbours(pos) {
                    let ni = self.index(nb);
                    if self.cells[ni] == Cell::Path && component[ni] == usize::MAX {
                        component[ni] = components;
                        queue.push_back(ni);
                    }
                }
            }
            components += 1;
        }
        let connected = components == 1;
        if components > 1 {
            violations.push(Violation::Disconnected { components });
        }
        // A graph with P vertices in C components has E - P + C independent cycles.
        let cycles = (edge_count + components).saturating_sub(path_cell_count);
        if cycles > 0 {
            violations.push(Violation::Cycle {
                independent_cycles: cycles,
            });
        }

        for (label, pos) in [("start", self.start), ("goal", self.goal)] {
            if !self.is_path(pos) {
                violations.push(Violation::Endpoint {
                    label,
                    pos,
                    reason: "not a path cell",
                });
            } else if pos.0 % 2 == 0 || pos.1 % 2 == 0 {
                violations.push(Violation::Endpoint {
                    label,
                    pos,
                    reason: "not a start/goal candidate cell",
                });
            }
        }
        if self.start == self.goal {
            violations.push(Violation::Endpoint {
                label: "goal",
                pos: self.goal,
                reason: "coincides with start",
            });
        }
        let endpoints_ok = !violations
            .iter()
            .any(|v| matches!(v, Violation::Endpoint { .. }));

        ValidationReport {
            is_perfect: connected
                && path_cell_count > 0
                && edge_count + 1 == path_cell_count
                && endpoints_ok,
            path_cell_count,
            connected,
            edge_count,
            violations,
        }
    }

    /// Breadth-first shortest path from start to goal, both inclusive.
    pub fn shortest_path(&self) -> Result<Vec<Coord>, MazeError> {
        if !self.is_path(self.start) || !self.is_path(self.goal) {
            return Err(MazeError::NoPath);
        }
        let mut parent = vec![usize::MAX; self.cells.len()];
        let start = self.index(self.start);
        let goal = self.index(self.goal);
        parent[start] = start;
        let mut queue = VecDeque::from([start]);
        while let Some(cur) = queue.pop_front() {
            if cur == goal {
                break;
            }
            for nb in self.neighbours((cur / self.side, cur % self.side)) {
                let ni = self.index(nb);
                if self.cells[ni] == Cell::Path && parent[ni] == usize::MAX {
                    parent[ni] = cur;
                    queue.push_back(ni);
                }
            }
        }
        if parent[goal] == usize::MAX {
            return Err(MazeError::NoPath);
        }
        let mut path = vec![self.goal];
        let mut cur = goal;
        while cur != start {
            cur = parent[cur];
            path.push((cur / self.side, cur % self.side));
        }
        path.reverse();
        Ok(path)
    }

    /// One character per cell: `#` wall, `.` path, `S` start, `G` goal.
    pub fn render_ascii(&self) -> String {
        let mut out = String::with_capacity(self.side * (self.side + 1));
        for r in 0..self.side {
            for c in 0..self.side {
                out.push(if (r, c) == self.start {
                    'S'
                } else if (r, c) == self.goal {
                    'G'
                } else {
                    match self.cell((r, c)) {
                        Cell::Wall => '#',
                        Cell::Path => '.',
                    }
                });
            }
            if r + 1 < self.side {
                out.push('\n');
            }
        }
        out
    }

    pub fn parse_ascii(text: &str) -> Result<Self, MazeError> {
        let lines: Vec<&str> = text
            .lines()
            .map(str::trim_end)
            .filter(|l| !l.is_empty())
            .collect();
        let side = lines.len();
        if side < 5 || side.is_multiple_of(2) {
            return Err(MazeError::Shape {
                side: side_for(1).max(side),
                rows: side,
                widths: lines.iter().map(|l| l.chars().count()).collect(),
            });
        }
        let mut start = None;
        let mut goal = None;
        let mut rows = Vec::with_capacity(side);
        for (r, line) in lines.iter().enumerate() {
            let mut row = Vec::with_capacity(side);
            for (c, ch) in line.chars().enumerate() {
                row.push(match ch {
                    '#' => Cell::Wall,
                    '.' => Cell::Path,
                    'S' if start.is_none() => {
                        start = Some((r, c));
                        Cell::Path
                    }
                    'G' if goal.is_none() => {
                        goal = Some((r, c));
                        Cell::Path
                    }
                    'S' | 'G' => return Err(MazeError::Markers),
                    other => return Err(MazeError::BadChar(other)),
                });
            }
            rows.push(row);
        }
        let (Some(start), Some(goal)) = (start, goal) else {
            return Err(MazeError::Markers);
        };
        Maze::from_rows((side - 3) / 2, rows, start, goal)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&MazeJson::from(self)).expect("maze json is always serialisable")
    }

    pub fn from_json(text: &str) -> Result<Self, MazeError> {
        let raw: MazeJson =
            serde_json::from_str(text).map_err(|e| MazeError::Json(e.to_string()))?;
        Maze::try_from(raw)
    }
}

impl fmt::Display for Maze {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_ascii())
    }
}

impl FromStr for Maze {
    type Err = MazeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim_start().starts_with('{') {
            Maze::from_json(s)
        } else {
            Maze::parse_ascii(s)
        }
    }
}

/// Wire form: `{"n": 3, "grid": ["#########", ...], "start": [r, c], "goal": [r, c]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MazeJson {
    pub n: usize,
    pub grid: Vec<String>,
    pub start: [usize; 2],
    pub goal: [usize; 2],
}

impl From<&Maze> for MazeJson {
    fn from(m: &Maze) -> Self {
        MazeJson {
            n: m.n,
            grid: m
                .rows()
                .map(|row| {
                    row.iter()
                        .map(|c| match c {
                            Cell::Wall => '#',
                            Cell::Path => '.',
                        })
                        .collect()
                })
                .collect(),
            start: [m.start.0, m.start.1],
            goal: [m.goal.0, m.goal.1],
        }
    }
}

impl TryFrom<MazeJson> for Maze {
    type Error = MazeError;

    fn try_from(raw: MazeJson) -> Result<Self, Self::Error> {
        let rows = raw
            .grid
            .iter()
            .map(|line| {
                line.chars()
                    .map(|ch| match ch {
                        '#' => Ok(Cell::Wall),
                        '.' => Ok(Cell::Path),
                        other => Err(MazeError::BadChar(other)),
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Maze::from_rows(
            raw.n,
            rows,
            (raw.start[0], raw.start[1]),
            (raw.goal[0], raw.goal[1]),
        )
    }
}

impl Serialize for Maze {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        MazeJson::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Maze {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = MazeJson::deserialize(deserializer)?;
        Maze::try_from(raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Cycle {
        independent_cycles: usize,
    },
    Disconnected {
        components: usize,
    },
    Endpoint {
        label: &'static str,
        pos: Coord,
        reason: &'static str,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle { independent_cycles } => {
                write!(f, "cycle ({independent_cycles} independent)")
            }
            Violation::Disconnected { components } => {
                write!(f, "disconnected ({components} regions)")
            }
            Violation::Endpoint { label, pos, reason } => write!(f, "{label} at {pos:?}: {reason}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub is_perfect: bool,
    pub path_cell_count: usize,
    pub connected: bool,
    pub edge_count: usize,
    pub violations: Vec<Violation>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_interior(n: usize) -> Maze {
        let side = side_for(n);
        let rows = (0..side)
            .map(|r| {
                (0..side)
                    .map(|c| {
                        if r == 0 || c == 0 || r == side - 1 || c == side - 1 {
                            Cell::Wall
                        } else {
                            Cell::Path
                        }
                    })
                    .collect()
            })
            .collect();
        Maze::from_rows(n, rows, (1, 1), (side - 2, side - 2)).unwrap()
    }

    /// n=1 maze with bar (0,0) extended right: walls at (2,2) and (2,3).
    fn tipped_right() -> Maze {
        let mut m = Maze::with_bars(1).unwrap();
        m.set((2, 3), Cell::Wall);
        m.set_endpoints((1, 1), (3, 3));
        m
    }

    #[test]
    fn open_square_is_a_cycle() {
        let report = open_interior(1).validate();
        assert!(!report.is_perfect);
        assert!(report.connected);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Cycle { .. })));
    }

    #[test]
    fn untipped_bar_leaves_a_closed_circuit() {
        // Every bar standing alone: the ring around each bar is a circuit.
        let report = Maze::with_bars(2).unwrap().validate();
        assert!(!report.is_perfect);
        assert_eq!(
            report.violations,
            vec![Violation::Cycle {
                independent_cycles: 4
            }]
        );
    }

    #[test]
    fn single_tipped_bar_is_perfect() {
        let report = tipped_right().validate();
        assert!(report.is_perfect, "{report:?}");
        assert_eq!(report.path_cell_count, 7);
        assert_eq!(report.edge_count, 6);
    }

    #[test]
    fn enclosed_region_is_disconnected() {
        let mut m = tipped_right();
        // Seal off the top-left corner cell.
        m.set((1, 2), Cell::Wall);
        m.set((2, 1), Cell::Wall);
        let report = m.validate();
        assert!(!report.connected);
        assert!(!report.is_perfect);
        assert_eq!(m.shortest_path(), Err(MazeError::NoPath));
    }

    #[test]
    fn endpoint_faults_are_reported() {
        let mut m = tipped_right();
        m.set_endpoints((1, 1), (1, 1));
        assert!(!m.validate().is_perfect);
        m.set_endpoints((1, 2), (3, 3));
        let report = m.validate();
        assert!(!report.is_perfect);
        assert!(matches!(
            report.violations[0],
            Violation::Endpoint { label: "start", .. }
        ));
    }

    #[test]
    fn adjacent_endpoints_give_length_two_path() {
        let mut m = open_interior(1);
        m.set_endpoints((1, 1), (1, 2));
        assert_eq!(m.shortest_path().unwrap(), vec![(1, 1), (1, 2)]);
    }

    #[test]
    fn shortest_path_in_tipped_maze() {
        // (1,1) → (1,2) → (1,3) → ... the right extension blocks row 2 at columns 2..3,
        // so the only route goes around the left side.
        let path = tipped_right().shortest_path().unwrap();
        assert_eq!(path, vec![(1, 1), (2, 1), (3, 1), (3, 2), (3, 3)]);
    }

    #[test]
    fn ascii_round_trip_and_shape() {
        let m = open_interior(1);
        let text = m.render_ascii();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "#####");
        assert_eq!(lines[4], "#####");
        assert_eq!(Maze::parse_ascii(&text).unwrap(), m);
    }

    #[test]
    fn json_round_trip() {
        let m = tipped_right();
        let json = m.to_json();
        assert_eq!(
            json,
            r######"{"n":1,"grid":["#####","#...#","#.###","#...#","#####"],"start":[1,1],"goal":[3,3]}"######
        );
        assert_eq!(Maze::from_json(&json).unwrap(), m);
        assert_eq!(json.parse::<Maze>().unwrap(), m);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert_eq!(Maze::with_bars(0), Err(MazeError::ZeroSize));
        assert!(matches!(
            Maze::parse_ascii("###\n#S#\n###"),
            Err(MazeError::Shape { .. })
        ));
        assert_eq!(
            Maze::parse_ascii("#####\n#S..#\n#.#.#\n#...#\n#####"),
            Err(MazeError::Markers)
        );
        assert_eq!(
            Maze::parse_ascii("#####\n#S.x#\n#.#.#\n#..G#\n#####"),
            Err(MazeError::BadChar('x'))
        );
        assert!(Maze::from_json(
            r######"{"n":2,"grid":["#####"],"start":[1,1],"goal":[3,3]}"######
        )
        .is_err());
    }
}
