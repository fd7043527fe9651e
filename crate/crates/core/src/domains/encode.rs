//! One-hot encoding of a (state, goal) pair as an `h × w × d_0` tensor.
//!
//! Channel order of one layer:
//!
//! * Sokoban: wall, empty, box, agent, target
//! * Maze: agent, wall, floor, goal, teleport pair 1..4
//! * Floor-Tile: agent 1, agent 2, black, white
//!
//! The goal layer follows the state layer. It uses the same channels with
//! agents cleared: Sokoban boxes sit on the targets, Floor-Tile shows the
//! goal coloring, and the Maze goal layer places the agent on the goal cell.

use super::grid::Pos;
use super::{Color, GoalCondition, State};
use crate::error::{CoatError, Result};
use crate::tensor::{Real, Tensor};

pub mod channel {
    pub const SOKOBAN_WALL: usize = 0;
    pub const SOKOBAN_EMPTY: usize = 1;
    pub const SOKOBAN_BOX: usize = 2;
    pub const SOKOBAN_AGENT: usize = 3;
    pub const SOKOBAN_TARGET: usize = 4;

    pub const MAZE_AGENT: usize = 0;
    pub const MAZE_WALL: usize = 1;
    pub const MAZE_FLOOR: usize = 2;
    pub const MAZE_GOAL: usize = 3;
    pub const MAZE_TELEPORT: usize = 4;

    pub const FLOOR_AGENT1: usize = 0;
    pub const FLOOR_AGENT2: usize = 1;
    pub const FLOOR_BLACK: usize = 2;
    pub const FLOOR_WHITE: usize = 3;
}

use channel::*;

#[derive(Debug, Clone, PartialEq)]
pub struct Encoded<T> {
    pub tensor: Tensor<T>,
    /// Cells whose hidden vectors feed the fully connected head.
    pub agents: Vec<Pos>,
}

impl<T: Real> Encoded<T> {
    pub fn agent_tuples(&self) -> Vec<(usize, usize)> {
        self.agents.iter().map(|p| p.tuple()).collect()
    }
}

pub fn encode_pair<T: Real>(state: &State, goal: &GoalCondition) -> Result<Encoded<T>> {
    let dims = state.dims();
    if goal.domain() != state.domain() {
        return Err(CoatError::Contract(format!(
            "{} state paired with a {} goal",
            state.domain(),
            goal.domain()
        )));
    }
    if goal.dims() != dims {
        return Err(CoatError::Contract(format!(
            "state is {}x{} but goal is {}x{}",
            dims.h,
            dims.w,
            goal.dims().h,
            goal.dims().w
        )));
    }
    let k = state.domain().state_channels();
    let mut t = Tensor::zeros(&[dims.h, dims.w, 2 * k]);
    let one = T::one();
    match (state, goal) {
        (State::Sokoban(s), GoalCondition::Sokoban { targets, .. }) => {
            let board = s.board();
            for p in dims.positions() {
                let (r, c) = p.tuple();
                let wall = board.is_wall(p);
                for (base, has_box, agent) in [
                    (0, s.has_box(p), s.agent() == p),
                    (k, targets.contains(&p), false),
                ] {
                    let ch = if wall {
                        SOKOBAN_WALL
                    } else if has_box {
                        SOKOBAN_BOX
                    } else if agent {
                        SOKOBAN_AGENT
                    } else {
                        SOKOBAN_EMPTY
                    };
                    t.set3(r, c, base + ch, one);
                    if targets.contains(&p) {
                        t.set3(r, c, base + SOKOBAN_TARGET, one);
                    }
                }
            }
        }
        (State::Maze(s), GoalCondition::Maze { goal, .. }) => {
            let board = s.board();
            for p in dims.positions() {
                let (r, c) = p.tuple();
                for (base, agent) in [(0, s.agent()), (k, *goal)] {
                    let ch = if board.is_wall(p) {
                        MAZE_WALL
                    } else if p == agent {
                        MAZE_AGENT
                    } else {
                        MAZE_FLOOR
                    };
                    t.set3(r, c, base + ch, one);
                    if p == *goal {
                        t.set3(r, c, base + MAZE_GOAL, one);
                    }
                    if let Some(i) = board.pad(p) {
                        t.set3(r, c, base + MAZE_TELEPORT + i, one);
                    }
                }
            }
        }
        (State::FloorTile(s), GoalCondition::FloorTile { coloring, .. }) => {
            let [a1, a2] = s.agents();
            for p in dims.positions() {
                let (r, c) = p.tuple();
                if p == a1 {
                    t.set3(r, c, FLOOR_AGENT1, one);
                } else if p == a2 {
                    t.set3(r, c, FLOOR_AGENT2, one);
                }
                let paint = |color: Option<Color>| match color {
                    Some(Color::Black) => Some(FLOOR_BLACK),
                    Some(Color::White) => Some(FLOOR_WHITE),
                    None => None,
                };
                if let Some(ch) = paint(s.tile(p)) {
                    t.set3(r, c, ch, one);
                }
                if let Some(ch) = paint(coloring[dims.idx(p)]) {
                    t.set3(r, c, k + ch, one);
                }
            }
        }
        _ => unreachable!("domains checked above"),
    }
    Ok(Encoded {
        tensor: t,
        agents: state.agents(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::parse_instance;

    #[test]
    fn sokoban_layers() {
        let inst = parse_instance("domain=sokoban h=3 w=5\n#####\n#@$.#\n#####\n").unwrap();
        let e: Encoded<f32> = encode_pair(&inst.initial, &inst.goal()).unwrap();
        assert_eq!(e.tensor.shape(), &[3, 5, 10]);
        assert_eq!(e.agents, vec![Pos::new(1, 1)]);
        assert_eq!(e.tensor.at3(1, 1, SOKOBAN_AGENT), 1.0);
        assert_eq!(e.tensor.at3(1, 2, SOKOBAN_BOX), 1.0);
        assert_eq!(e.tensor.at3(1, 3, SOKOBAN_EMPTY), 1.0);
        assert_eq!(e.tensor.at3(1, 3, SOKOBAN_TARGET), 1.0);
        // goal layer: box on the target, no agent anywhere
        assert_eq!(e.tensor.at3(1, 3, 5 + SOKOBAN_BOX), 1.0);
        assert_eq!(e.tensor.at3(1, 2, 5 + SOKOBAN_EMPTY), 1.0);
        assert_eq!(e.tensor.at3(1, 1, 5 + SOKOBAN_EMPTY), 1.0);
        let agent_sum: f32 = (0..5).map(|c| e.tensor.at3(1, c, 5 + SOKOBAN_AGENT)).sum();
        assert_eq!(agent_sum, 0.0);
    }

    #[test]
    fn maze_pair_shares_channel() {
        let inst = parse_instance("domain=maze h=2 w=4\nS.2.\n..2G\n").unwrap();
        let e: Encoded<f64> = encode_pair(&inst.initial, &inst.goal()).unwrap();
        assert_eq!(e.tensor.shape(), &[2, 4, 16]);
        assert_eq!(e.tensor.at3(0, 2, MAZE_TELEPORT + 1), 1.0);
        assert_eq!(e.tensor.at3(1, 2, MAZE_TELEPORT + 1), 1.0);
        assert_eq!(e.tensor.at3(1, 3, 8 + MAZE_AGENT), 1.0);
        assert_eq!(e.tensor.at3(0, 0, 8 + MAZE_FLOOR), 1.0);
    }

    #[test]
    fn mismatched_goal_is_rejected() {
        let a = parse_instance("domain=maze h=1 w=3\nS.G\n").unwrap();
        let b = parse_instance("domain=maze h=1 w=4\nS..G\n").unwrap();
        assert!(encode_pair::<f32>(&a.initial, &b.goal()).is_err());
        let c = parse_instance("domain=sokoban h=3 w=4\n####\n#@*#\n####\n").unwrap();
        assert!(encode_pair::<f32>(&a.initial, &c.goal()).is_err());
    }
}
