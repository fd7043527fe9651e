//! Sokoban: one agent pushes boxes onto targets. A push moves a box one cell
//! when the cell beyond it is free; boxes cannot be pulled.

use std::hash::{Hash, Hasher};
use std::sync::Arc;

use super::grid::{Dims, Dir, Pos};
use crate::error::{CoatError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SokobanBoard {
    pub dims: Dims,
    walls: Vec<bool>,
    targets: Vec<Pos>,
}

impl SokobanBoard {
    pub fn new(dims: Dims, walls: Vec<bool>, mut targets: Vec<Pos>) -> Result<Self> {
        if walls.len() != dims.cells() {
            return Err(CoatError::Contract("wall mask does not match grid dims".into()));
        }
        targets.sort();
        targets.dedup();
        for &t in &targets {
            if t.r() >= dims.h || t.c() >= dims.w || walls[dims.idx(t)] {
                return Err(CoatError::Contract(format!("target {t} is out of bounds or on a wall")));
            }
        }
        Ok(Self { dims, walls, targets })
    }

    pub fn is_wall(&self, p: Pos) -> bool {
        self.walls[self.dims.idx(p)]
    }

    pub fn walls(&self) -> &[bool] {
        &self.walls
    }

    pub fn targets(&self) -> &[Pos] {
        &self.targets
    }

    pub fn is_target(&self, p: Pos) -> bool {
        self.targets.binary_search(&p).is_ok()
    }

    fn free(&self, p: Pos) -> bool {
        !self.is_wall(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SokobanAction {
    Move(Dir),
    Push(Dir),
}

impl SokobanAction {
    pub const COUNT: usize = 8;

    /// Policy index: moves up/down/left/right are 0..4, pushes 4..8.
    pub fn index(self) -> usize {
        match self {
            SokobanAction::Move(d) => d.index(),
            SokobanAction::Push(d) => 4 + d.index(),
        }
    }

    pub fn name(self) -> String {
        match self {
            SokobanAction::Move(d) => format!("move-{}", d.name()),
            SokobanAction::Push(d) => format!("push-{}", d.name()),
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        if let Some(d) = name.strip_prefix("move-") {
            Dir::from_name(d).map(SokobanAction::Move)
        } else if let Some(d) = name.strip_prefix("push-") {
            Dir::from_name(d).map(SokobanAction::Push)
        } else {
            None
        }
    }
}

/// Boxes are kept sorted so equal configurations compare equal.
#[derive(Debug, Clone)]
pub struct SokobanState {
    board: Arc<SokobanBoard>,
    boxes: Vec<Pos>,
    agent: Pos,
}

impl PartialEq for SokobanState {
    fn eq(&self, other: &Self) -> bool {
        self.agent == other.agent && self.boxes == other.boxes
            && (Arc::ptr_eq(&self.board, &other.board) || self.board == other.board)
    }
}

impl Eq for SokobanState {}

impl Hash for SokobanState {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.agent.hash(state);
        self.boxes.hash(state);
    }
}

impl SokobanState {
    pub fn new(board: Arc<SokobanBoard>, mut boxes: Vec<Pos>, agent: Pos) -> Result<Self> {
        let dims = board.dims;
        let inside = |p: Pos| p.r() < dims.h && p.c() < dims.w;
        boxes.sort();
        if boxes.windows(2).any(|w| w[0] == w[1]) {
            return Err(CoatError::Contract("two boxes share a cell".into()));
        }
        if boxes.len() != board.targets.len() {
            return Err(CoatError::Contract(format!(
                "{} boxes but {} targets",
                boxes.len(),
                board.targets.len()
            )));
        }
        for &b in &boxes {
            if !inside(b) || board.is_wall(b) {
                return Err(CoatError::Contract(format!("box {b} is out of bounds or on a wall")));
            }
        }
        if !inside(agent) || board.is_wall(agent) {
            return Err(CoatError::Contract(format!("agent {agent} is out of bounds or on a wall")));
        }
        if boxes.binary_search(&agent).is_ok() {
            return Err(CoatError::Contract("agent stands on a box".into()));
        }
        Ok(Self { board, boxes, agent })
    }

    pub fn board(&self) -> &Arc<SokobanBoard> {
        &self.board
    }

    pub fn boxes(&self) -> &[Pos] {
        &self.boxes
    }

    pub fn agent(&self) -> Pos {
        self.agent
    }

    pub fn has_box(&self, p: Pos) -> bool {
        self.boxes.binary_search(&p).is_ok()
    }

    pub fn is_goal(&self) -> bool {
        self.boxes == self.board.targets
    }

    pub fn apply(&self, action: SokobanAction) -> Option<Self> {
        let dims = self.board.dims;
        match action {
            SokobanAction::Move(d) => {
                let next = dims.step(self.agent, d)?;
                if !self.board.free(next) || self.has_box(next) {
                    return None;
                }
                Some(Self {
                    board: self.board.clone(),
                    boxes: self.boxes.clone(),
                    agent: next,
                })
            }
            SokobanAction::Push(d) => {
                let next = dims.step(self.agent, d)?;
                if !self.has_box(next) {
                    return None;
                }
                let beyond = dims.step(next, d)?;
                if !self.board.free(beyond) || self.has_box(beyond) {
                    return None;
                }
                let mut boxes: Vec<Pos> = self
                    .boxes
                    .iter()
                    .map(|&b| if b == next { beyond } else { b })
                    .collect();
                boxes.sort();
                Some(Self {
                    board: self.board.clone(),
                    boxes,
                    agent: next,
                })
            }
        }
    }

    pub fn successors(&self) -> Vec<(SokobanAction, Self)> {
        let mut out = Vec::with_capacity(4);
        for d in Dir::ALL {
            for a in [SokobanAction::Move(d), SokobanAction::Push(d)] {
                if let Some(s) = self.apply(a) {
                    out.push((a, s));
                }
            }
        }
        out
    }

    pub fn rotated(&self) -> Self {
        let dims = self.board.dims;
        let targets = self.board.targets.iter().map(|&t| dims.rotate_pos(t)).collect();
        let board = SokobanBoard::new(dims.rotated(), dims.rotate_cells(&self.board.walls), targets)
            .expect("rotation preserves validity");
        let boxes = self.boxes.iter().map(|&b| dims.rotate_pos(b)).collect();
        Self::new(Arc::new(board), boxes, dims.rotate_pos(self.agent)).expect("rotation preserves validity")
    }

    pub fn with_boxes_and_agent(&self, boxes: Vec<Pos>, agent: Pos) -> Result<Self> {
        Self::new(self.board.clone(), boxes, agent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corridor() -> SokobanState {
        // #####
        // #@$.#   (5 wide, 3 tall)
        // #####
        let dims = Dims::new(3, 5);
        let walls = dims
            .positions()
            .map(|p| p.r() != 1 || p.c() == 0 || p.c() == 4)
            .collect();
        let board = SokobanBoard::new(dims, walls, vec![Pos::new(1, 3)]).unwrap();
        SokobanState::new(Arc::new(board), vec![Pos::new(1, 2)], Pos::new(1, 1)).unwrap()
    }

    #[test]
    fn push_then_goal() {
        let s = corridor();
        let succ = s.successors();
        assert_eq!(succ.len(), 1);
        assert_eq!(succ[0].0, SokobanAction::Push(Dir::Right));
        assert!(succ[0].1.is_goal());
    }

    #[test]
    fn no_push_into_wall() {
        let s = corridor().apply(SokobanAction::Push(Dir::Right)).unwrap();
        // box now at (1,3) with wall behind it
        assert!(s.apply(SokobanAction::Push(Dir::Right)).is_none());
        assert_eq!(s.successors().len(), 1);
    }

    #[test]
    fn action_names_round_trip() {
        for d in Dir::ALL {
            for a in [SokobanAction::Move(d), SokobanAction::Push(d)] {
                assert_eq!(SokobanAction::parse(&a.name()), Some(a));
            }
        }
        let idx: Vec<usize> = Dir::ALL.iter().map(|&d| SokobanAction::Push(d).index()).collect();
        assert_eq!(idx, vec![4, 5, 6, 7]);
    }

    #[test]
    fn invariants_enforced() {
        let s = corridor();
        assert!(s.with_boxes_and_agent(vec![Pos::new(1, 2)], Pos::new(1, 2)).is_err());
        assert!(s.with_boxes_and_agent(vec![Pos::new(0, 2)], Pos::new(1, 1)).is_err());
        assert!(s.with_boxes_and_agent(vec![], Pos::new(1, 1)).is_err());
    }
}
