//! Classical maze generators on the shared `(2N+3)²` grid.
//!
//! All three place start and goal on two distinct odd-odd candidate cells so
//! their output has the same contract as a decoded QUBO sample.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bars::{bar_cell, extension_cell, Direction};
use crate::maze::{candidate_cell, side_for, Cell, Coord, Maze, MazeError};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    BarTipping,
    WallExtending,
    HuntAndKill,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::BarTipping,
        Algorithm::WallExtending,
        Algorithm::HuntAndKill,
    ];

    pub fn generate(self, n: usize, seed: u64) -> Result<Maze, MazeError> {
        match self {
            Algorithm::BarTipping => bar_tipping(n, seed),
            Algorithm::WallExtending => wall_extending(n, seed),
            Algorithm::HuntAndKill => hunt_and_kill(n, seed),
        }
    }
}

/// Picks two distinct start/goal candidates uniformly; the draw order decides
/// which one is the start.
pub fn pick_endpoints<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (Coord, Coord) {
    let count = (n + 1) * (n + 1);
    let a = rng.random_range(0..count);
    let mut b = rng.random_range(0..count - 1);
    if b >= a {
        b += 1;
    }
    let to_cell = |k: usize| candidate_cell(k / (n + 1), k % (n + 1));
    (to_cell(a), to_cell(b))
}

/// Bar-tipping: bars are tipped column by column, left to right. A direction is
/// drawn uniformly from those allowed in the column and redrawn while its
/// target cell is already wall.
pub fn bar_tipping(n: usize, seed: u64) -> Result<Maze, MazeError> {
    let mut rng = seed::rng(seed);
    let mut maze = Maze::with_bars(n)?;
    for j in 0..n {
        let allowed = Direction::allowed(j);
        for i in 0..n {
            let target = loop {
                let d = *allowed.choose(&mut rng).expect("non-empty direction set");
                let cell = extension_cell(i, j, d);
                if maze.cell(cell) == Cell::Path {
                    break cell;
                }
            };
            maze.set(target, Cell::Wall);
        }
    }
    let (start, goal) = pick_endpoints(n, &mut rng);
    maze.set_endpoints(start, goal);
    Ok(maze)
}

/// Wall-extending: starting from an open field inside the outer wall, walls
/// grow two cells at a time from the even-even interior cells until every one
/// of them is wall. A growing wall stops when it joins an existing wall and
/// backtracks when it would close on itself.
pub fn wall_extending(n: usize, seed: u64) -> Result<Maze, MazeError> {
    if n == 0 {
        return Err(MazeError::ZeroSize);
    }
    let mut rng = seed::rng(seed);
    let side = side_for(n);
    let mut maze = Maze::with_bars(n)?;
    for i in 0..n {
        for j in 0..n {
            maze.set(bar_cell(i, j), Cell::Path);
        }
    }

    let mut pending: Vec<Coord> = (0..n)
        .flat_map(|i| (0..n).map(move |j| bar_cell(i, j)))
        .collect();
    // Cells of the wall currently being grown, and its even-even joints.
    let mut current = vec![false; side * side];
    let mut touched: Vec<usize> = Vec::new();
    let mut joints: Vec<Coord> = Vec::new();

    while !pending.is_empty() {
        let k = rng.random_range(0..pending.len());
        let origin = pending.swap_remove(k);
        if maze.cell(origin) == Cell::Wall {
            continue;
        }
        let mark =
            |maze: &mut Maze, current: &mut [bool], touched: &mut Vec<usize>, cell: Coord| {
                maze.set(cell, Cell::Wall);
                current[cell.0 * side + cell.1] = true;
                touched.push(cell.0 * side + cell.1);
            };
        mark(&mut maze, &mut current, &mut touched, origin);
        joints.clear();
        joints.push(origin);
        loop {
            let pos = *joints.last().expect("a growing wall always has an exit");
            let options: Vec<(Coord, Coord)> = Direction::ALL
                .into_iter()
                .filter_map(|d| {
                    let one = d.step(pos)?;
                    let two = d.step(one)?;
                    (maze.cell(one) == Cell::Path && !current[two.0 * side + two.1])
                        .then_some((one, two))
                })
                .collect();
            let Some(&(one, two)) = options.choose(&mut rng) else {
                // Boxed in by our own wall: resume from the previous joint.
                joints.pop();
                continue;
            };
            let joins_existing = maze.cell(two) == Cell::Wall;
            mark(&mut maze, &mut current, &mut touched, one);
            if joins_existing {
                break;
            }
            mark(&mut maze, &mut current, &mut touched, two);
            joints.push(two);
        }
        for idx in touched.drain(..) {
            current[idx] = false;
        }
    }

    let (start, goal) = pick_endpoints(n, &mut rng);
    maze.set_endpoints(start, goal);
    Ok(maze)
}

/// Hunt-and-kill: from a fully walled grid, a path is carved two cells at a
/// time between odd-odd cells; when it is stuck, carving resumes from a random
/// odd-odd cell that is already open.
pub fn hunt_and_kill(n: usize, seed: u64) -> Result<Maze, MazeError> {
    let mut rng = seed::rng(seed);
    let mut maze = Maze::walled(n)?;
    let side = maze.side();
    let total = (n + 1) * (n + 1);

    let first = candidate_cell(rng.random_range(0..=n), rng.random_range(0..=n));
    maze.set(first, Cell::Path);
    let mut open = vec![first];
    let mut opened = 1;
    let mut pos = first;

    let unvisited = |maze: &Maze, from: Coord, d: Direction| -> Option<(Coord, Coord)> {
        let one = d.step(from)?;
        let two = d.step(one)?;
        (two.0 > 0
            && two.1 > 0
            && two.0 < side - 1
            && two.1 < side - 1
            && maze.cell(two) == Cell::Wall)
            .then_some((one, two))
    };

    while opened < total {
        let options: Vec<(Coord, Coord)> = Direction::ALL
            .into_iter()
            .filter_map(|d| unvisited(&maze, pos, d))
            .collect();
        if let Some(&(one, two)) = options.choose(&mut rng) {
            maze.set(one, Cell::Path);
            maze.set(two, Cell::Path);
            open.push(two);
            opened += 1;
            pos = two;
        } else {
            // Hunt: a dead cell never regains options, so drop it from the pool.
            if let Some(k) = open.iter().position(|&c| c == pos) {
                open.swap_remove(k);
            }
            pos = *open
                .choose(&mut rng)
                .expect("some open cell still has a walled neighbour");
        }
    }

    let (start, goal) = pick_endpoints(n, &mut rng);
    maze.set_endpoints(start, goal);
    Ok(maze)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bars::BarAssignment;

    fn even_even_interior(n: usize) -> impl Iterator<Item = Coord> {
        (0..n).flat_map(move |i| (0..n).map(move |j| bar_cell(i, j)))
    }

    #[test]
    fn bar_tipping_layout_for_three() {
        let m = bar_tipping(3, 11).unwrap();
        assert_eq!(m.side(), 9);
        for k in 0..9 {
            for edge in [(0, k), (k, 0), (8, k), (k, 8)] {
                assert_eq!(m.cell(edge), Cell::Wall);
            }
        }
        for r in [2, 4, 6] {
            for c in [2, 4, 6] {
                assert_eq!(m.cell((r, c)), Cell::Wall);
            }
        }
        assert!(m.validate().is_perfect);
    }

    #[test]
    fn bar_tipping_single_bar_extends_once() {
        for s in 0..32 {
            let m = bar_tipping(1, s).unwrap();
            let extensions = [(1, 2), (2, 3), (3, 2), (2, 1)]
                .into_iter()
                .filter(|&c| m.cell(c) == Cell::Wall)
                .count();
            assert_eq!(extensions, 1);
        }
    }

    #[test]
    fn bar_tipping_implies_a_feasible_assignment() {
        for s in 0..50 {
            let m = bar_tipping(5, s).unwrap();
            let a = BarAssignment::from_maze(&m).expect("one extension per bar");
            assert!(a.is_feasible());
            assert_eq!(a.to_maze().unwrap(), m);
        }
    }

    #[test]
    fn bar_tipping_is_seed_deterministic() {
        assert_eq!(bar_tipping(6, 3).unwrap(), bar_tipping(6, 3).unwrap());
        assert_ne!(bar_tipping(6, 3).unwrap(), bar_tipping(6, 4).unwrap());
    }

    #[test]
    fn wall_extending_walls_every_start_cell() {
        let m = wall_extending(2, 5).unwrap();
        assert!(even_even_interior(2).all(|c| m.cell(c) == Cell::Wall));
        assert!(m.validate().is_perfect);
        assert!(wall_extending(1, 0).unwrap().validate().is_perfect);
    }

    #[test]
    fn wall_extending_is_perfect() {
        for s in 0..100 {
            let m = wall_extending(6, s).unwrap();
            assert!(m.validate().is_perfect, "seed {s}\n{m}");
        }
    }

    #[test]
    fn hunt_and_kill_opens_every_candidate() {
        let m = hunt_and_kill(1, 9).unwrap();
        for c in [(1, 1), (1, 3), (3, 1), (3, 3)] {
            assert_eq!(m.cell(c), Cell::Path);
        }
        let m = hunt_and_kill(3, 2).unwrap();
        for mm in 0..=3 {
            for nn in 0..=3 {
                assert_eq!(m.cell(candidate_cell(mm, nn)), Cell::Path);
            }
        }
    }

    #[test]
    fn hunt_and_kill_is_perfect() {
        for s in 0..100 {
            let m = hunt_and_kill(6, s).unwrap();
            assert!(m.validate().is_perfect, "seed {s}\n{m}");
        }
    }

    #[test]
    fn endpoints_are_distinct_candidates() {
        let mut rng = seed::rng(1);
        for _ in 0..500 {
            let (a, b) = pick_endpoints(1, &mut rng);
            assert_ne!(a, b);
            assert!(a.0 % 2 == 1 && a.1 % 2 == 1 && b.0 % 2 == 1 && b.1 % 2 == 1);
        }
    }

    #[test]
    fn zero_size_is_rejected() {
        for algo in Algorithm::ALL {
            assert_eq!(algo.generate(0, 0), Err(MazeError::ZeroSize));
        }
    }
}
