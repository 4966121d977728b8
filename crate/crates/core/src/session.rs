//! Play sessions: one set of mazes under a 5×5 view, with the update matrix
//! advanced after every solved maze.
//!
//! The solve timer is the client's business; the session trusts the submitted
//! time and expects it to be measured from the first view of each maze.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adaptive::{
    next_maze, AdaptiveError, UpdateState, DEFAULT_A, DEFAULT_LAMBDA_UPDATE1,
    DEFAULT_LAMBDA_UPDATE2,
};
use crate::bars::Direction;
use crate::benchmark::{sma_increase_rate, DEFAULT_WINDOW};
use crate::maze::{Coord, Maze};
use crate::qubo::{QuboProblem, DEFAULT_LAMBDA1, DEFAULT_LAMBDA2};
use crate::sampler::{AnnealParams, Sampler};
use crate::seed;

pub const DEFAULT_SET_SIZE: usize = 30;
/// Side of the square window a player sees.
pub const VIEW_SIZE: usize = 5;
const VIEW_RADIUS: isize = (VIEW_SIZE / 2) as isize;

const INIT_TAG: u64 = 1;
const MAZE_TAG: u64 = 2;
const UPDATE_TAG: u64 = 3;
const BOT_TAG: u64 = 4;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid session parameters: {0}")]
    Params(String),
    #[error("solve time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("no maze is active in this session")]
    OutOfOrder,
    #[error("the goal has not been reached; submit with give_up to skip this maze")]
    NotFinished,
    #[error("the goal has already been reached; submit the result first")]
    GoalReached,
    #[error("session `{0}` not found")]
    NotFound(String),
    #[error("invalid session id `{0}`")]
    BadId(String),
    #[error(transparent)]
    Adaptive(#[from] AdaptiveError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("corrupt session snapshot: {0}")]
    Snapshot(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda_update1: f64,
    pub lambda_update2: f64,
    pub a: f64,
    pub anneal: AnnealParams,
    pub sampler: Sampler,
    /// `false` is the control arm: every maze comes from the base QUBO.
    pub update_enabled: bool,
    pub set_size: usize,
    pub seed: u64,
}

impl Default for SessionParams {
    fn default() -> Self {
        SessionParams {
            lambda1: DEFAULT_LAMBDA1,
            lambda2: DEFAULT_LAMBDA2,
            lambda_update1: DEFAULT_LAMBDA_UPDATE1,
            lambda_update2: DEFAULT_LAMBDA_UPDATE2,
            a: DEFAULT_A,
            anneal: AnnealParams::default(),
            sampler: Sampler::Sa,
            update_enabled: true,
            set_size: DEFAULT_SET_SIZE,
            seed: 0,
        }
    }
}

impl SessionParams {
    pub fn validate(&self) -> Result<(), SessionError> {
        if self.set_size == 0 {
            return Err(SessionError::Params("set_size must be at least 1".into()));
        }
        self.anneal
            .validate(self.sampler == Sampler::Sqa)
            .map_err(|e| SessionError::Params(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewCell {
    Wall,
    Path,
    Start,
    Goal,
    OutOfBounds,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewWindow {
    pub center: Coord,
    /// Row-major, `cells[0][0]` is two up and two left of the centre.
    pub cells: Vec<Vec<ViewCell>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveOutcome {
    pub pos: Coord,
    pub blocked: bool,
    pub reached_goal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub set_size: usize,
    pub mazes_completed: usize,
    pub solve_times: Vec<f64>,
    /// Moving-average increase rate; empty until enough times are in.
    pub sma_increase_rate: Vec<f64>,
    /// Shortest-path length in cells of each completed maze.
    pub path_lengths: Vec<usize>,
    /// Fallback level of every maze issued so far.
    pub fallback_levels: Vec<u8>,
    pub updates: usize,
    pub complete: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SubmitOutcome {
    NextMaze {
        maze_index: usize,
        fallback_level: u8,
    },
    SetComplete {
        stats: SessionStats,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub n: usize,
    pub params: SessionParams,
    pub update_state: UpdateState,
    /// `None` once the set is complete.
    pub current_maze: Option<Maze>,
    pub player_pos: Coord,
    pub reached_goal: bool,
    /// Number of mazes finished so far; the active maze has this index.
    pub maze_index: usize,
    pub solve_times: Vec<f64>,
    pub path_lengths: Vec<usize>,
    pub fallback_levels: Vec<u8>,
    pub updates: usize,
}

impl Session {
    /// Starts a set and generates its first maze.
    pub fn create(
        id: impl Into<String>,
        n: usize,
        params: SessionParams,
    ) -> Result<Self, SessionError> {
        if n == 0 {
            return Err(SessionError::Params("n must be at least 1".into()));
        }
        params.validate()?;
        let update_state = UpdateState::init(
            n,
            params.a,
            params.lambda_update1,
            params.lambda_update2,
            seed::derive(params.seed, INIT_TAG, 0),
        )?;
        let mut session = Session {
            id: id.into(),
            n,
            params,
            update_state,
            current_maze: None,
            player_pos: (0, 0),
            reached_goal: false,
            maze_index: 0,
            solve_times: Vec::new(),
            path_lengths: Vec::new(),
            fallback_levels: Vec::new(),
            updates: 0,
        };
        session.issue_maze()?;
        Ok(session)
    }

    fn issue_maze(&mut self) -> Result<u8, SessionError> {
        let base = QuboProblem::base(self.n, self.params.lambda1, self.params.lambda2)
            .map_err(|e| SessionError::Params(e.to_string()))?;
        let anneal = AnnealParams {
            seed: seed::derive(self.params.seed, MAZE_TAG, self.maze_index as u64),
            ..self.params.anneal.clone()
        };
        let state = self.params.update_enabled.then_some(&self.update_state);
        let next = next_maze(state, &base, self.params.sampler, &anneal)?;
        self.player_pos = next.maze.start();
        self.current_maze = Some(next.maze);
        self.reached_goal = false;
        self.fallback_levels.push(next.fallback_level);
        Ok(next.fallback_level)
    }

    pub fn maze(&self) -> Result<&Maze, SessionError> {
        self.current_maze.as_ref().ok_or(SessionError::OutOfOrder)
    }

    pub fn is_complete(&self) -> bool {
        self.maze_index >= self.params.set_size
    }

    pub fn get_view(&self) -> Result<ViewWindow, SessionError> {
        let maze = self.maze()?;
        let (r0, c0) = self.player_pos;
        let cells = (-VIEW_RADIUS..=VIEW_RADIUS)
            .map(|dr| {
                (-VIEW_RADIUS..=VIEW_RADIUS)
                    .map(|dc| {
                        let r = r0 as isize + dr;
                        let c = c0 as isize + dc;
                        if r < 0 || c < 0 {
                            return ViewCell::OutOfBounds;
                        }
                        let pos = (r as usize, c as usize);
                        match maze.get(pos) {
                            None => ViewCell::OutOfBounds,
                            Some(_) if pos == maze.start() => ViewCell::Start,
                            Some(_) if pos == maze.goal() => ViewCell::Goal,
                            Some(crate::maze::Cell::Wall) => ViewCell::Wall,
                            Some(crate::maze::Cell::Path) => ViewCell::Path,
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(ViewWindow {
            center: self.player_pos,
            cells,
        })
    }

    pub fn move_player(&mut self, dir: Direction) -> Result<MoveOutcome, SessionError> {
        let maze = self.maze()?;
        if self.reached_goal {
            return Err(SessionError::GoalReached);
        }
        let goal = maze.goal();
        let target = dir
            .step(self.player_pos)
            .filter(|&p| maze.get(p) == Some(crate::maze::Cell::Path));
        let blocked = target.is_none();
        if let Some(p) = target {
            self.player_pos = p;
        }
        self.reached_goal = self.player_pos == goal;
        Ok(MoveOutcome {
            pos: self.player_pos,
            blocked,
            reached_goal: self.reached_goal,
        })
    }

    /// Records the solve time of the active maze and issues the next one,
    /// advancing the update matrix first when updates are enabled. No update
    /// follows the last maze of the set.
    pub fn submit_result(
        &mut self,
        solve_time: f64,
        give_up: bool,
    ) -> Result<SubmitOutcome, SessionError> {
        let maze = self.maze()?;
        if !(solve_time >= 0.0 && solve_time.is_finite()) {
            return Err(SessionError::NegativeTime(solve_time));
        }
        if !self.reached_goal && !give_up {
            return Err(SessionError::NotFinished);
        }
        let path_len = maze.shortest_path().map(|p| p.len()).unwrap_or(0);
        self.solve_times.push(solve_time);
        self.path_lengths.push(path_len);
        self.maze_index += 1;
        if self.is_complete() {
            self.current_maze = None;
            return Ok(SubmitOutcome::SetComplete {
                stats: self.stats(),
            });
        }
        if self.params.update_enabled {
            self.update_state = self.update_state.update(
                solve_time,
                seed::derive(self.params.seed, UPDATE_TAG, self.maze_index as u64),
            )?;
            self.updates += 1;
        }
        let fallback_level = self.issue_maze()?;
        Ok(SubmitOutcome::NextMaze {
            maze_index: self.maze_index,
            fallback_level,
        })
    }

    pub fn stats(&self) -> SessionStats {
        SessionStats {
            set_size: self.params.set_size,
            mazes_completed: self.maze_index,
            solve_times: self.solve_times.clone(),
            sma_increase_rate: sma_increase_rate(&self.solve_times, DEFAULT_WINDOW)
                .unwrap_or_default(),
            path_lengths: self.path_lengths.clone(),
            fallback_levels: self.fallback_levels.clone(),
            updates: self.updates,
            complete: self.is_complete(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("session is serialisable")
    }

    pub fn from_json(text: &str) -> Result<Self, SessionError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// One JSON file per session in a directory.
#[derive(Clone, Debug)]
pub struct SessionStore {
    dir: PathBuf,
}

impl SessionStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, SessionError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(SessionStore { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> Result<PathBuf, SessionError> {
        let ok = !id.is_empty()
            && id.len() <= 64
            && id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if !ok {
            return Err(SessionError::BadId(id.to_string()));
        }
        Ok(self.dir.join(format!("{id}.json")))
    }

    /// Writes through a temporary file so a crash never leaves half a snapshot.
    pub fn save(&self, session: &Session) -> Result<(), SessionError> {
        let path = self.path(&session.id)?;
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, session.to_json())?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(&self, id: &str) -> Result<Session, SessionError> {
        let path = self.path(id)?;
        match fs::read_to_string(&path) {
            Ok(text) => Session::from_json(&text),
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                Err(SessionError::NotFound(id.to_string()))
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn exists(&self, id: &str) -> bool {
        self.path(id).map(|p| p.exists()).unwrap_or(false)
    }
}

/// Solve-time model of the scripted player: `c · path_length + N(0, σ)`,
/// clipped below at `min_time`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BotProfile {
    /// Seconds per path cell.
    pub c: f64,
    pub sigma: f64,
    pub min_time: f64,
}

impl Default for BotProfile {
    fn default() -> Self {
        BotProfile {
            c: 0.1,
            sigma: 0.5,
            min_time: 0.1,
        }
    }
}

impl BotProfile {
    pub fn solve_time<R: Rng + ?Sized>(&self, path_len: usize, rng: &mut R) -> f64 {
        let noise = if self.sigma > 0.0 {
            Normal::new(0.0, self.sigma)
                .expect("positive sigma")
                .sample(rng)
        } else {
            0.0
        };
        (self.c * path_len as f64 + noise).max(self.min_time)
    }

    fn validate(&self) -> Result<(), SessionError> {
        let ok = [self.c, self.sigma, self.min_time]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(SessionError::Params(format!(
                "bot profile values must be non-negative: {self:?}"
            )))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BotReport {
    pub stats: SessionStats,
    /// Every maze of the set passed validation.
    pub all_perfect: bool,
    pub mazes: Vec<Maze>,
}

/// Plays a whole set headlessly by walking each maze's shortest path.
pub fn run_bot_set(
    n: usize,
    params: SessionParams,
    profile: &BotProfile,
    seed: u64,
) -> Result<BotReport, SessionError> {
    profile.validate()?;
    let mut rng = seed::rng(seed::derive(seed, BOT_TAG, 0));
    let mut session = Session::create(format!("bot-{seed}"), n, params)?;
    let mut mazes = Vec::with_capacity(session.params.set_size);
    let mut all_perfect = true;
    loop {
        let maze = session.maze()?.clone();
        all_perfect &= maze.validate().is_perfect;
        let path = maze
            .shortest_path()
            .map_err(|e| SessionError::Params(format!("issued maze has no path: {e}")))?;
        for pair in path.windows(2) {
            let dir = Direction::ALL
                .into_iter()
                .find(|d| d.step(pair[0]) == Some(pair[1]))
                .expect("consecutive path cells are adjacent");
            session.move_player(dir)?;
        }
        let t = profile.solve_time(path.len(), &mut rng);
        mazes.push(maze);
        if let SubmitOutcome::SetComplete { stats } =
            session.submit_result(t, !session.reached_goal)?
        {
            return Ok(BotReport {
                stats,
                all_perfect,
                mazes,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maze::Cell;

    fn quick(n_reads: usize, set_size: usize) -> SessionParams {
        SessionParams {
            anneal: AnnealParams {
                reads: n_reads,
                sweeps: 200,
                ..AnnealParams::default()
            },
            set_size,
            seed: 5,
            ..SessionParams::default()
        }
    }

    #[test]
    fn create_and_view_at_start() {
        let s = Session::create("a", 2, quick(8, 3)).unwrap();
        let maze = s.maze().unwrap();
        assert_eq!(maze.side(), 7);
        assert!(maze.validate().is_perfect);
        assert_eq!(s.player_pos, maze.start());
        let view = s.get_view().unwrap();
        assert_eq!(view.cells.len(), 5);
        assert!(view.cells.iter().all(|r| r.len() == 5));
        assert_eq!(view.cells[2][2], ViewCell::Start);
    }

    #[test]
    fn zero_size_rejected() {
        assert!(matches!(
            Session::create("a", 0, quick(8, 3)),
            Err(SessionError::Params(_))
        ));
        let mut p = quick(8, 3);
        p.set_size = 0;
        assert!(Session::create("a", 1, p).is_err());
    }

    #[test]
    fn view_matches_grid_slice() {
        let mut s = Session::create("a", 3, quick(8, 3)).unwrap();
        let maze = s.maze().unwrap().clone();
        for r in 0..maze.side() {
            for c in 0..maze.side() {
                s.player_pos = (r, c);
                let view = s.get_view().unwrap();
                assert_eq!(view.center, (r, c));
                for (dr, row) in view.cells.iter().enumerate() {
                    for (dc, cell) in row.iter().enumerate() {
                        let rr = r as isize + dr as isize - 2;
                        let cc = c as isize + dc as isize - 2;
                        let side = maze.side() as isize;
                        let expected = if rr < 0 || cc < 0 || rr >= side || cc >= side {
                            ViewCell::OutOfBounds
                        } else {
                            let p = (rr as usize, cc as usize);
                            if p == maze.start() {
                                ViewCell::Start
                            } else if p == maze.goal() {
                                ViewCell::Goal
                            } else if maze.cell(p) == Cell::Wall {
                                ViewCell::Wall
                            } else {
                                ViewCell::Path
                            }
                        };
                        assert_eq!(*cell, expected);
                    }
                }
            }
        }
    }

    #[test]
    fn corner_view_has_walls_and_out_of_bounds() {
        let mut s = Session::create("a", 2, quick(8, 3)).unwrap();
        s.player_pos = (1, 1);
        let view = s.get_view().unwrap();
        assert!(view.cells[0].iter().all(|c| *c == ViewCell::OutOfBounds));
        assert!(view.cells[1][1..].iter().all(|c| *c == ViewCell::Wall));
        assert!(view.cells.iter().all(|r| r[0] == ViewCell::OutOfBounds));
    }

    #[test]
    fn walking_the_path_reaches_goal() {
        let mut s = Session::create("a", 3, quick(8, 3)).unwrap();
        let path = s.maze().unwrap().shortest_path().unwrap();
        let mut moves = 0;
        for pair in path.windows(2) {
            let d = Direction::ALL
                .into_iter()
                .find(|d| d.step(pair[0]) == Some(pair[1]))
                .unwrap();
            let out = s.move_player(d).unwrap();
            moves += 1;
            assert!(!out.blocked);
            assert_eq!(out.pos, pair[1]);
            assert_eq!(out.reached_goal, moves == path.len() - 1);
        }
        assert!(matches!(
            s.move_player(Direction::Up),
            Err(SessionError::GoalReached)
        ));
    }

    #[test]
    fn wall_blocks_move() {
        let mut s = Session::create("a", 2, quick(8, 3)).unwrap();
        let maze = s.maze().unwrap().clone();
        let start = maze.start();
        let d = Direction::ALL
            .into_iter()
            .find(|d| d.step(start).is_some_and(|p| maze.cell(p) == Cell::Wall))
            .expect("a start cell always touches a wall");
        let out = s.move_player(d).unwrap();
        assert!(out.blocked);
        assert_eq!(out.pos, start);
    }

    #[test]
    fn submit_rules() {
        let mut s = Session::create("a", 2, quick(8, 2)).unwrap();
        assert!(matches!(
            s.submit_result(1.0, false),
            Err(SessionError::NotFinished)
        ));
        assert!(matches!(
            s.submit_result(-1.0, true),
            Err(SessionError::NegativeTime(_))
        ));
        let first = s.update_state.clone();
        match s.submit_result(4.0, true).unwrap() {
            SubmitOutcome::NextMaze { maze_index, .. } => assert_eq!(maze_index, 1),
            other => panic!("{other:?}"),
        }
        assert_eq!(s.updates, 1);
        assert_ne!(s.update_state, first);
        assert_eq!(s.update_state.history[0].solve_time, 4.0);
        match s.submit_result(2.0, true).unwrap() {
            SubmitOutcome::SetComplete { stats } => {
                assert_eq!(stats.solve_times, vec![4.0, 2.0]);
                assert_eq!(stats.updates, 1);
                assert!(stats.complete);
                assert!(stats.sma_increase_rate.is_empty());
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            s.submit_result(1.0, true),
            Err(SessionError::OutOfOrder)
        ));
        assert!(matches!(s.get_view(), Err(SessionError::OutOfOrder)));
    }

    #[test]
    fn control_arm_ignores_solve_time() {
        let mut p = quick(8, 3);
        p.update_enabled = false;
        let mut a = Session::create("a", 2, p.clone()).unwrap();
        let mut b = Session::create("b", 2, p).unwrap();
        a.submit_result(1.0, true).unwrap();
        b.submit_result(100.0, true).unwrap();
        assert_eq!(a.current_maze, b.current_maze);
        assert_eq!(a.updates, 0);
    }

    #[test]
    fn snapshot_round_trip_through_store() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let mut s = Session::create("round-trip", 2, quick(8, 3)).unwrap();
        s.submit_result(3.25, true).unwrap();
        store.save(&s).unwrap();
        let back = store.load("round-trip").unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_json(), s.to_json());
        assert!(matches!(
            store.load("missing"),
            Err(SessionError::NotFound(_))
        ));
        assert!(matches!(store.load("../etc"), Err(SessionError::BadId(_))));
    }

    #[test]
    fn bot_set_is_reproducible() {
        let profile = BotProfile {
            sigma: 0.0,
            ..BotProfile::default()
        };
        let a = run_bot_set(2, quick(8, 12), &profile, 9).unwrap();
        let b = run_bot_set(2, quick(8, 12), &profile, 9).unwrap();
        assert_eq!(a.stats.solve_times, b.stats.solve_times);
        assert!(a.all_perfect);
        assert_eq!(a.stats.solve_times.len(), 12);
        assert_eq!(a.stats.updates, 11);
        assert_eq!(a.stats.sma_increase_rate.len(), 3);
        for (t, len) in a.stats.solve_times.iter().zip(&a.stats.path_lengths) {
            assert!((t - (0.1 * *len as f64).max(0.1)).abs() < 1e-12);
        }
    }

    #[test]
    fn bot_times_respect_floor() {
        let profile = BotProfile {
            c: 0.0,
            sigma: 5.0,
            min_time: 0.1,
        };
        let mut rng = seed::rng(0);
        assert!((0..1000).all(|_| profile.solve_time(10, &mut rng) >= 0.1));
        assert!(run_bot_set(
            1,
            quick(8, 2),
            &BotProfile {
                c: -1.0,
                ..BotProfile::default()
            },
            0
        )
        .is_err());
    }
}
