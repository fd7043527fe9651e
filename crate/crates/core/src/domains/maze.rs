//! Maze with teleports. Stepping onto a teleport pad relocates the agent to
//! the paired pad within the same unit-cost move.

use std::hash::{Hash, Hasher};
use std::sync::Arc;

use super::grid::{Dims, Dir, Pos};
use crate::error::{CoatError, Result};

pub const MAX_PAIRS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MazeBoard {
    pub dims: Dims,
    walls: Vec<bool>,
    goal: Pos,
    /// Indexed by pair number (digit − 1).
    pairs: [Option<(Pos, Pos)>; MAX_PAIRS],
    /// Per cell: `(pair index, partner pad)` when the cell is a pad.
    pads: Vec<Option<(u8, Pos)>>,
}

impl MazeBoard {
    /// Each pair is stored with its endpoints in row-major order.
    pub fn new(dims: Dims, walls: Vec<bool>, goal: Pos, mut pairs: [Option<(Pos, Pos)>; MAX_PAIRS]) -> Result<Self> {
        for pair in pairs.iter_mut().flatten() {
            if pair.1 < pair.0 {
                *pair = (pair.1, pair.0);
            }
        }
        if walls.len() != dims.cells() {
            return Err(CoatError::Contract("wall mask does not match grid dims".into()));
        }
        let inside = |p: Pos| p.r() < dims.h && p.c() < dims.w;
        if !inside(goal) || walls[dims.idx(goal)] {
            return Err(CoatError::Contract(format!("goal {goal} is out of bounds or on a wall")));
        }
        let mut pads = vec![None; dims.cells()];
        for (i, pair) in pairs.iter().enumerate() {
            let Some((a, b)) = *pair else { continue };
            for p in [a, b] {
                if !inside(p) || walls[dims.idx(p)] {
                    return Err(CoatError::Contract(format!("pad {p} is out of bounds or on a wall")));
                }
                if p == goal {
                    return Err(CoatError::Contract(format!("pad {p} coincides with the goal")));
                }
                if pads[dims.idx(p)].is_some() {
                    return Err(CoatError::Contract(format!("cell {p} holds two pads")));
                }
            }
            if a == b {
                return Err(CoatError::Contract(format!("pair {} links a cell to itself", i + 1)));
            }
            pads[dims.idx(a)] = Some((i as u8, b));
            pads[dims.idx(b)] = Some((i as u8, a));
        }
        Ok(Self {
            dims,
            walls,
            goal,
            pairs,
            pads,
        })
    }

    pub fn is_wall(&self, p: Pos) -> bool {
        self.walls[self.dims.idx(p)]
    }

    pub fn walls(&self) -> &[bool] {
        &self.walls
    }

    pub fn goal(&self) -> Pos {
        self.goal
    }

    pub fn pairs(&self) -> &[Option<(Pos, Pos)>; MAX_PAIRS] {
        &self.pairs
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.iter().flatten().count()
    }

    /// Pair index of the pad at `p`, if any.
    pub fn pad(&self, p: Pos) -> Option<usize> {
        self.pads[self.dims.idx(p)].map(|(i, _)| i as usize)
    }

    pub fn partner(&self, p: Pos) -> Option<Pos> {
        self.pads[self.dims.idx(p)].map(|(_, q)| q)
    }

    /// Destination of a move in direction `d` from `from`, teleport included.
    pub fn destination(&self, from: Pos, d: Dir) -> Option<Pos> {
        let next = self.dims.step(from, d)?;
        if self.is_wall(next) {
            return None;
        }
        Some(self.partner(next).unwrap_or(next))
    }

    fn rotated(&self) -> Self {
        let dims = self.dims;
        let mut pairs = [None; MAX_PAIRS];
        for (slot, pair) in pairs.iter_mut().zip(&self.pairs) {
            *slot = pair.map(|(a, b)| (dims.rotate_pos(a), dims.rotate_pos(b)));
        }
        Self::new(dims.rotated(), dims.rotate_cells(&self.walls), dims.rotate_pos(self.goal), pairs)
            .expect("rotation preserves validity")
    }
}

#[derive(Debug, Clone)]
pub struct MazeState {
    board: Arc<MazeBoard>,
    agent: Pos,
}

impl PartialEq for MazeState {
    fn eq(&self, other: &Self) -> bool {
        self.agent == other.agent
            && (Arc::ptr_eq(&self.board, &other.board) || self.board == other.board)
    }
}

impl Eq for MazeState {}

impl Hash for MazeState {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.agent.hash(state);
    }
}

impl MazeState {
    pub fn new(board: Arc<MazeBoard>, agent: Pos) -> Result<Self> {
        let dims = board.dims;
        if agent.r() >= dims.h || agent.c() >= dims.w || board.is_wall(agent) {
            return Err(CoatError::Contract(format!("agent {agent} is out of bounds or on a wall")));
        }
        Ok(Self { board, agent })
    }

    pub fn board(&self) -> &Arc<MazeBoard> {
        &self.board
    }

    pub fn agent(&self) -> Pos {
        self.agent
    }

    pub fn is_goal(&self) -> bool {
        self.agent == self.board.goal
    }

    pub fn apply(&self, d: Dir) -> Option<Self> {
        let agent = self.board.destination(self.agent, d)?;
        Some(Self {
            board: self.board.clone(),
            agent,
        })
    }

    pub fn successors(&self) -> Vec<(Dir, Self)> {
        Dir::ALL
            .into_iter()
            .filter_map(|d| self.apply(d).map(|s| (d, s)))
            .collect()
    }

    pub fn with_agent(&self, agent: Pos) -> Result<Self> {
        Self::new(self.board.clone(), agent)
    }

    pub fn rotated(&self) -> Self {
        let dims = self.board.dims;
        Self {
            board: Arc::new(self.board.rotated()),
            agent: dims.rotate_pos(self.agent),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_board(pairs: [Option<(Pos, Pos)>; MAX_PAIRS]) -> Arc<MazeBoard> {
        let dims = Dims::new(3, 3);
        Arc::new(MazeBoard::new(dims, vec![false; 9], Pos::new(2, 2), pairs).unwrap())
    }

    #[test]
    fn stepping_on_pad_teleports() {
        let board = open_board([Some((Pos::new(0, 1), Pos::new(2, 0))), None, None, None]);
        let s = MazeState::new(board, Pos::new(0, 0)).unwrap();
        let t = s.apply(Dir::Right).unwrap();
        assert_eq!(t.agent(), Pos::new(2, 0));
        // stepping off a pad is an ordinary move
        assert_eq!(t.apply(Dir::Right).unwrap().agent(), Pos::new(2, 1));
    }

    #[test]
    fn pads_must_be_distinct_and_off_goal() {
        let dims = Dims::new(3, 3);
        let same = [Some((Pos::new(0, 1), Pos::new(0, 1))), None, None, None];
        assert!(MazeBoard::new(dims, vec![false; 9], Pos::new(2, 2), same).is_err());
        let overlap = [
            Some((Pos::new(0, 1), Pos::new(1, 1))),
            Some((Pos::new(1, 1), Pos::new(1, 0))),
            None,
            None,
        ];
        assert!(MazeBoard::new(dims, vec![false; 9], Pos::new(2, 2), overlap).is_err());
        let on_goal = [Some((Pos::new(0, 1), Pos::new(2, 2))), None, None, None];
        assert!(MazeBoard::new(dims, vec![false; 9], Pos::new(2, 2), on_goal).is_err());
    }

    #[test]
    fn goal_check() {
        let board = open_board([None; MAX_PAIRS]);
        let s = MazeState::new(board, Pos::new(2, 1)).unwrap();
        assert!(!s.is_goal());
        assert!(s.apply(Dir::Right).unwrap().is_goal());
    }
}
