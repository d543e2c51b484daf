//! Built-in environments: navigation gridworld, repeated rock-paper-scissors,
//! the single-state worst case, bandits over arbitrary points, and random MDPs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MdpError, MdpTables, Outcome, VectorMdp};

/// Bundled navigation map: 6 x 9 open cells, start top-left, goal on the
/// right. Every 10-step route crosses the risky column once; the shortest
/// risk-free route takes 12 steps.
pub const DEFAULT_MAP: &str = include_str!("../../maps/navigation.txt");

pub const DEFAULT_GRID_HORIZON: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridAction {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

impl GridAction {
    pub const ALL: [GridAction; 4] = [Self::Up, Self::Down, Self::Left, Self::Right];

    fn delta(self) -> (isize, isize) {
        match self {
            Self::Up => (-1, 0),
            Self::Down => (1, 0),
            Self::Left => (0, -1),
            Self::Right => (0, 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Cell {
    Free,
    Risky,
    Wall,
}

/// A parsed grid map together with its MDP.
#[derive(Clone, Debug)]
pub struct GridWorld {
    pub mdp: VectorMdp,
    pub rows: usize,
    pub cols: usize,
    /// `(row, col)` of each state.
    pub cells: Vec<(usize, usize)>,
    pub start: usize,
    pub goal: usize,
}

impl GridWorld {
    pub fn state_at(&self, row: usize, col: usize) -> Option<usize> {
        self.cells.iter().position(|&c| c == (row, col))
    }

    /// Builds a deterministic policy from a per-cell rule.
    pub fn policy_from_fn(&self, rule: impl Fn(usize, usize) -> GridAction) -> super::DeterministicPolicy {
        super::DeterministicPolicy(self.cells.iter().map(|&(r, c)| rule(r, c) as usize).collect())
    }
}

/// Parses an ASCII map (`S` start, `G` goal, `#` wall, `.` free, `R` risky)
/// into a navigation MDP with measurement `(1, risky)` per step.
pub fn make_gridworld(map_text: &str, gamma: f64, horizon_cap: usize) -> Result<GridWorld, MdpError> {
    let lines: Vec<&str> = map_text
        .lines()
        .map(str::trim_end)
        .filter(|l| !l.is_empty())
        .collect();
    if lines.is_empty() {
        return Err(MdpError::Map("map is empty".into()));
    }
    let cols = lines[0].chars().count();
    let mut grid = Vec::new();
    let mut start = None;
    let mut goal = None;
    for (r, line) in lines.iter().enumerate() {
        if line.chars().count() != cols {
            return Err(MdpError::Map(format!(
                "row {} has {} cells, expected {cols}",
                r + 1,
                line.chars().count()
            )));
        }
        let mut row = Vec::with_capacity(cols);
        for (c, ch) in line.chars().enumerate() {
            let cell = match ch {
                '.' => Cell::Free,
                'R' => Cell::Risky,
                '#' => Cell::Wall,
                'S' | 'G' => {
                    let slot = if ch == 'S' { &mut start } else { &mut goal };
                    if slot.replace((r, c)).is_some() {
                        return Err(MdpError::Map(format!("more than one '{ch}'")));
                    }
                    Cell::Free
                }
                other => {
                    return Err(MdpError::Map(format!(
                        "unknown character {other:?} at row {}, column {}",
                        r + 1,
                        c + 1
                    )))
                }
            };
            row.push(cell);
        }
        grid.push(row);
    }
    let start = start.ok_or_else(|| MdpError::Map("missing 'S'".into()))?;
    let goal = goal.ok_or_else(|| MdpError::Map("missing 'G'".into()))?;
    let rows = grid.len();

    let mut cells = Vec::new();
    let mut index = vec![vec![usize::MAX; cols]; rows];
    for (r, row) in grid.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            if *cell != Cell::Wall {
                index[r][c] = cells.len();
                cells.push((r, c));
            }
        }
    }
    let n = cells.len();
    let start_state = index[start.0][start.1];
    let goal_state = index[goal.0][goal.1];

    let mut outcomes = Vec::with_capacity(n * 4);
    for &(r, c) in &cells {
        let risky = if grid[r][c] == Cell::Risky { 1.0 } else { 0.0 };
        for action in GridAction::ALL {
            let (dr, dc) = action.delta();
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            let inside = nr >= 0 && nc >= 0 && (nr as usize) < rows && (nc as usize) < cols;
            let next = if inside && grid[nr as usize][nc as usize] != Cell::Wall {
                index[nr as usize][nc as usize]
            } else {
                index[r][c]
            };
            let (next, measurement) = if index[r][c] == goal_state {
                (goal_state, vec![0.0, 0.0])
            } else {
                (next, vec![1.0, risky])
            };
            outcomes.push(vec![Outcome {
                next,
                prob: 1.0,
                measurement,
            }]);
        }
    }
    let mut initial = vec![0.0; n];
    initial[start_state] = 1.0;
    let mut terminal = vec![false; n];
    terminal[goal_state] = true;
    let mdp = VectorMdp::new(MdpTables {
        num_states: n,
        num_actions: 4,
        measurement_dim: 2,
        outcomes,
        initial,
        discount: gamma,
        horizon: Some(horizon_cap),
        terminal,
    })?;
    Ok(GridWorld {
        mdp,
        rows,
        cols,
        cells,
        start: start_state,
        goal: goal_state,
    })
}

/// Repeated rock-paper-scissors against a uniform opponent. Winning with
/// action `i` emits `e_i`; ties and losses emit zero. Undiscounted, one state
/// per round plus a terminal state.
pub fn make_rps(rounds: usize) -> Result<VectorMdp, MdpError> {
    if rounds == 0 {
        return Err(MdpError::Invalid("rock-paper-scissors needs at least one round".into()));
    }
    let n = rounds + 1;
    let mut outcomes = Vec::with_capacity(n * 3);
    for s in 0..n {
        for a in 0..3 {
            if s == rounds {
                outcomes.push(vec![Outcome {
                    next: s,
                    prob: 1.0,
                    measurement: vec![0.0; 3],
                }]);
                continue;
            }
            let mut win = vec![0.0; 3];
            win[a] = 1.0;
            outcomes.push(vec![
                Outcome {
                    next: s + 1,
                    prob: 1.0 / 3.0,
                    measurement: win,
                },
                Outcome {
                    next: s + 1,
                    prob: 2.0 / 3.0,
                    measurement: vec![0.0; 3],
                },
            ]);
        }
    }
    let mut initial = vec![0.0; n];
    initial[0] = 1.0;
    let mut terminal = vec![false; n];
    terminal[rounds] = true;
    VectorMdp::new(MdpTables {
        num_states: n,
        num_actions: 3,
        measurement_dim: 3,
        outcomes,
        initial,
        discount: 1.0,
        horizon: Some(rounds),
        terminal,
    })
}

/// Single state, one action per point, one step per episode: the measurement
/// polytope is exactly the convex hull of `points`.
pub fn make_bandit(points: &[Vec<f64>]) -> Result<VectorMdp, MdpError> {
    let m = points.first().map_or(0, Vec::len);
    VectorMdp::new(MdpTables {
        num_states: 1,
        num_actions: points.len(),
        measurement_dim: m,
        outcomes: points
            .iter()
            .map(|p| {
                vec![Outcome {
                    next: 0,
                    prob: 1.0,
                    measurement: p.clone(),
                }]
            })
            .collect(),
        initial: vec![1.0],
        discount: 1.0,
        horizon: Some(1),
        terminal: vec![false],
    })
}

/// The single-state instance with `c(a_i) = e_i` for `i < m` and a final
/// zero-measurement action.
pub fn make_worstcase(m: usize) -> Result<VectorMdp, MdpError> {
    if m == 0 {
        return Err(MdpError::Invalid("worst-case instance needs m >= 1".into()));
    }
    let points: Vec<Vec<f64>> = (0..=m)
        .map(|i| (0..m).map(|k| if k == i { 1.0 } else { 0.0 }).collect())
        .collect();
    make_bandit(&points)
}

/// Dense random MDP with measurements in `[0, 1]^m` and no horizon.
pub fn make_random_mdp(
    num_states: usize,
    num_actions: usize,
    m: usize,
    gamma: f64,
    seed: u64,
) -> Result<VectorMdp, MdpError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normalized = |len: usize, rng: &mut ChaCha8Rng| {
        let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / total).collect::<Vec<f64>>()
    };
    let mut outcomes = Vec::with_capacity(num_states * num_actions);
    for _ in 0..num_states * num_actions {
        let probs = normalized(num_states, &mut rng);
        let measurement: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
        outcomes.push(
            probs
                .into_iter()
                .enumerate()
                .map(|(next, prob)| Outcome {
                    next,
                    prob,
                    measurement: measurement.clone(),
                })
                .collect(),
        );
    }
    let initial = normalized(num_states, &mut rng);
    VectorMdp::new(MdpTables {
        num_states,
        num_actions,
        measurement_dim: m,
        outcomes,
        initial,
        discount: gamma,
        horizon: None,
        terminal: vec![false; num_states],
    })
}
