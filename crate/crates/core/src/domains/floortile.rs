//! Floor-Tile with two agents: agent 1 paints white, agent 2 paints black.
//! An agent may move onto, or paint, an orthogonally adjacent cell only when
//! that cell is uncolored and unoccupied. The goal colors every cell of a
//! designated subset.

use std::hash::{Hash, Hasher};
use std::sync::Arc;

use super::grid::{Dims, Dir, Pos};
use crate::error::{CoatError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Color {
    White,
    Black,
}

impl Color {
    /// Fixed paint color of agent 0 / agent 1.
    pub fn of_agent(agent: usize) -> Color {
        if agent == 0 {
            Color::White
        } else {
            Color::Black
        }
    }

    /// Checkerboard color of a cell: white on even `row + col`.
    pub fn checkerboard(p: Pos) -> Color {
        if (p.r() + p.c()) % 2 == 0 {
            Color::White
        } else {
            Color::Black
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FloorTileBoard {
    pub dims: Dims,
    goal: Vec<Option<Color>>,
}

impl FloorTileBoard {
    pub fn new(dims: Dims, goal: Vec<Option<Color>>) -> Result<Self> {
        if goal.len() != dims.cells() {
            return Err(CoatError::Contract("goal coloring does not match grid dims".into()));
        }
        Ok(Self { dims, goal })
    }

    /// Checkerboard goal over every cell except `free` (the cells the agents
    /// end on).
    pub fn checkerboard(dims: Dims, free: [Pos; 2]) -> Self {
        let goal = dims
            .positions()
            .map(|p| (!free.contains(&p)).then(|| Color::checkerboard(p)))
            .collect();
        Self { dims, goal }
    }

    pub fn goal(&self) -> &[Option<Color>] {
        &self.goal
    }

    pub fn goal_at(&self, p: Pos) -> Option<Color> {
        self.goal[self.dims.idx(p)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FloorTileAction {
    Move { agent: u8, dir: Dir },
    Paint { agent: u8, dir: Dir },
}

impl FloorTileAction {
    pub const COUNT: usize = 16;

    pub fn agent(self) -> usize {
        match self {
            FloorTileAction::Move { agent, .. } | FloorTileAction::Paint { agent, .. } => agent as usize,
        }
    }

    pub fn index(self) -> usize {
        match self {
            FloorTileAction::Move { agent, dir } => agent as usize * 8 + dir.index(),
            FloorTileAction::Paint { agent, dir } => agent as usize * 8 + 4 + dir.index(),
        }
    }

    pub fn name(self) -> String {
        match self {
            FloorTileAction::Move { agent, dir } => format!("a{}-move-{}", agent + 1, dir.name()),
            FloorTileAction::Paint { agent, dir } => format!("a{}-paint-{}", agent + 1, dir.name()),
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        let (agent, rest) = if let Some(r) = name.strip_prefix("a1-") {
            (0u8, r)
        } else if let Some(r) = name.strip_prefix("a2-") {
            (1u8, r)
        } else {
            return None;
        };
        if let Some(d) = rest.strip_prefix("move-") {
            Dir::from_name(d).map(|dir| FloorTileAction::Move { agent, dir })
        } else if let Some(d) = rest.strip_prefix("paint-") {
            Dir::from_name(d).map(|dir| FloorTileAction::Paint { agent, dir })
        } else {
            None
        }
    }

    pub fn all() -> impl Iterator<Item = FloorTileAction> {
        (0..2u8).flat_map(|agent| {
            Dir::ALL
                .into_iter()
                .map(move |dir| FloorTileAction::Move { agent, dir })
                .chain(Dir::ALL.into_iter().map(move |dir| FloorTileAction::Paint { agent, dir }))
        })
    }
}

#[derive(Debug, Clone)]
pub struct FloorTileState {
    board: Arc<FloorTileBoard>,
    tiles: Vec<Option<Color>>,
    agents: [Pos; 2],
}

impl PartialEq for FloorTileState {
    fn eq(&self, other: &Self) -> bool {
        self.agents == other.agents && self.tiles == other.tiles
            && (Arc::ptr_eq(&self.board, &other.board) || self.board == other.board)
    }
}

impl Eq for FloorTileState {}

impl Hash for FloorTileState {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.agents.hash(state);
        self.tiles.hash(state);
    }
}

impl FloorTileState {
    pub fn new(board: Arc<FloorTileBoard>, tiles: Vec<Option<Color>>, agents: [Pos; 2]) -> Result<Self> {
        let dims = board.dims;
        if tiles.len() != dims.cells() {
            return Err(CoatError::Contract("tile coloring does not match grid dims".into()));
        }
        for a in agents {
            if a.r() >= dims.h || a.c() >= dims.w {
                return Err(CoatError::Contract(format!("agent {a} is out of bounds")));
            }
            if tiles[dims.idx(a)].is_some() {
                return Err(CoatError::Contract(format!("agent {a} stands on a colored tile")));
            }
        }
        if agents[0] == agents[1] {
            return Err(CoatError::Contract("agents share a cell".into()));
        }
        Ok(Self { board, tiles, agents })
    }

    pub fn board(&self) -> &Arc<FloorTileBoard> {
        &self.board
    }

    pub fn tiles(&self) -> &[Option<Color>] {
        &self.tiles
    }

    pub fn tile(&self, p: Pos) -> Option<Color> {
        self.tiles[self.board.dims.idx(p)]
    }

    pub fn agents(&self) -> [Pos; 2] {
        self.agents
    }

    pub fn is_goal(&self) -> bool {
        self.board
            .goal
            .iter()
            .zip(&self.tiles)
            .all(|(g, t)| g.is_none() || g == t)
    }

    fn open(&self, p: Pos) -> bool {
        self.tile(p).is_none() && !self.agents.contains(&p)
    }

    pub fn apply(&self, action: FloorTileAction) -> Option<Self> {
        let dims = self.board.dims;
        match action {
            FloorTileAction::Move { agent, dir } => {
                let next = dims.step(self.agents[agent as usize], dir)?;
                if !self.open(next) {
                    return None;
                }
                let mut agents = self.agents;
                agents[agent as usize] = next;
                Some(Self {
                    board: self.board.clone(),
                    tiles: self.tiles.clone(),
                    agents,
                })
            }
            FloorTileAction::Paint { agent, dir } => {
                let target = dims.step(self.agents[agent as usize], dir)?;
                if !self.open(target) {
                    return None;
                }
                let mut tiles = self.tiles.clone();
                tiles[dims.idx(target)] = Some(Color::of_agent(agent as usize));
                Some(Self {
                    board: self.board.clone(),
                    tiles,
                    agents: self.agents,
                })
            }
        }
    }

    pub fn successors(&self) -> Vec<(FloorTileAction, Self)> {
        FloorTileAction::all()
            .filter_map(|a| self.apply(a).map(|s| (a, s)))
            .collect()
    }

    pub fn with(&self, tiles: Vec<Option<Color>>, agents: [Pos; 2]) -> Result<Self> {
        Self::new(self.board.clone(), tiles, agents)
    }

    pub fn rotated(&self) -> Self {
        let dims = self.board.dims;
        let board = FloorTileBoard::new(dims.rotated(), dims.rotate_cells(&self.board.goal))
            .expect("rotation preserves validity");
        Self {
            board: Arc::new(board),
            tiles: dims.rotate_cells(&self.tiles),
            agents: self.agents.map(|a| dims.rotate_pos(a)),
        }
    }
}
