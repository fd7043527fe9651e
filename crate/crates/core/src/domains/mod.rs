//! Grid planning domains behind one runtime-dispatched interface.

pub mod encode;
pub mod floortile;
pub mod generate;
pub mod grid;
pub mod maze;
pub mod sokoban;
pub mod text;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CoatError, Result};
pub use encode::{encode_pair, Encoded};
pub use floortile::{Color, FloorTileAction, FloorTileBoard, FloorTileState};
pub use generate::{generate, GenParams};
pub use grid::{Dims, Dir, Pos};
pub use maze::{MazeBoard, MazeState};
pub use sokoban::{SokobanAction, SokobanBoard, SokobanState};
pub use text::{parse_instance, serialize_instance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainTag {
    Sokoban,
    Maze,
    #[serde(rename = "floortile")]
    FloorTile,
}

impl DomainTag {
    pub const ALL: [DomainTag; 3] = [DomainTag::Sokoban, DomainTag::Maze, DomainTag::FloorTile];

    pub fn name(self) -> &'static str {
        match self {
            DomainTag::Sokoban => "sokoban",
            DomainTag::Maze => "maze",
            DomainTag::FloorTile => "floortile",
        }
    }

    /// One-hot channels of a single state layer.
    pub fn state_channels(self) -> usize {
        match self {
            DomainTag::Sokoban => 5,
            DomainTag::Maze => 8,
            DomainTag::FloorTile => 4,
        }
    }

    /// Network input depth: state and goal layers stacked.
    pub fn input_channels(self) -> usize {
        2 * self.state_channels()
    }

    pub fn action_count(self) -> usize {
        match self {
            DomainTag::Sokoban => SokobanAction::COUNT,
            DomainTag::Maze => 4,
            DomainTag::FloorTile => FloorTileAction::COUNT,
        }
    }

    pub fn agent_count(self) -> usize {
        match self {
            DomainTag::FloorTile => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for DomainTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DomainTag {
    type Err = CoatError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sokoban" => Ok(DomainTag::Sokoban),
            "maze" => Ok(DomainTag::Maze),
            "floortile" | "floor-tile" => Ok(DomainTag::FloorTile),
            other => Err(CoatError::Usage(format!("unknown domain {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Sokoban(SokobanAction),
    Maze(Dir),
    FloorTile(FloorTileAction),
}

impl Action {
    pub fn name(self) -> String {
        match self {
            Action::Sokoban(a) => a.name(),
            Action::Maze(d) => d.name().to_string(),
            Action::FloorTile(a) => a.name(),
        }
    }

    /// Index into the policy head's output.
    pub fn index(self) -> usize {
        match self {
            Action::Sokoban(a) => a.index(),
            Action::Maze(d) => d.index(),
            Action::FloorTile(a) => a.index(),
        }
    }

    pub fn parse(domain: DomainTag, name: &str) -> Result<Self> {
        let parsed = match domain {
            DomainTag::Sokoban => SokobanAction::parse(name).map(Action::Sokoban),
            DomainTag::Maze => Dir::from_name(name).map(Action::Maze),
            DomainTag::FloorTile => FloorTileAction::parse(name).map(Action::FloorTile),
        };
        parsed.ok_or_else(|| CoatError::Usage(format!("unknown {domain} action {name:?}")))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum State {
    Sokoban(SokobanState),
    Maze(MazeState),
    FloorTile(FloorTileState),
}

impl State {
    pub fn domain(&self) -> DomainTag {
        match self {
            State::Sokoban(_) => DomainTag::Sokoban,
            State::Maze(_) => DomainTag::Maze,
            State::FloorTile(_) => DomainTag::FloorTile,
        }
    }

    pub fn dims(&self) -> Dims {
        match self {
            State::Sokoban(s) => s.board().dims,
            State::Maze(s) => s.board().dims,
            State::FloorTile(s) => s.board().dims,
        }
    }

    /// Applicable actions with their deterministic results.
    pub fn successors(&self) -> Vec<(Action, State)> {
        match self {
            State::Sokoban(s) => s
                .successors()
                .into_iter()
                .map(|(a, t)| (Action::Sokoban(a), State::Sokoban(t)))
                .collect(),
            State::Maze(s) => s
                .successors()
                .into_iter()
                .map(|(a, t)| (Action::Maze(a), State::Maze(t)))
                .collect(),
            State::FloorTile(s) => s
                .successors()
                .into_iter()
                .map(|(a, t)| (Action::FloorTile(a), State::FloorTile(t)))
                .collect(),
        }
    }

    pub fn apply(&self, action: Action) -> Option<State> {
        match (self, action) {
            (State::Sokoban(s), Action::Sokoban(a)) => s.apply(a).map(State::Sokoban),
            (State::Maze(s), Action::Maze(a)) => s.apply(a).map(State::Maze),
            (State::FloorTile(s), Action::FloorTile(a)) => s.apply(a).map(State::FloorTile),
            _ => None,
        }
    }

    pub fn goal(&self) -> GoalCondition {
        match self {
            State::Sokoban(s) => GoalCondition::Sokoban {
                dims: s.board().dims,
                targets: s.board().targets().to_vec(),
            },
            State::Maze(s) => GoalCondition::Maze {
                dims: s.board().dims,
                goal: s.board().goal(),
            },
            State::FloorTile(s) => GoalCondition::FloorTile {
                dims: s.board().dims,
                coloring: s.board().goal().to_vec(),
            },
        }
    }

    /// Agent cell(s) used by the network's flatten step.
    pub fn agents(&self) -> Vec<Pos> {
        match self {
            State::Sokoban(s) => vec![s.agent()],
            State::Maze(s) => vec![s.agent()],
            State::FloorTile(s) => s.agents().to_vec(),
        }
    }

    pub fn rotated(&self) -> State {
        match self {
            State::Sokoban(s) => State::Sokoban(s.rotated()),
            State::Maze(s) => State::Maze(s.rotated()),
            State::FloorTile(s) => State::FloorTile(s.rotated()),
        }
    }

    /// A string identifying this state together with its static layout.
    /// Two states with equal keys are interchangeable across instances.
    pub fn key(&self) -> String {
        text::state_key(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GoalCondition {
    Sokoban { dims: Dims, targets: Vec<Pos> },
    Maze { dims: Dims, goal: Pos },
    FloorTile { dims: Dims, coloring: Vec<Option<Color>> },
}

impl GoalCondition {
    pub fn domain(&self) -> DomainTag {
        match self {
            GoalCondition::Sokoban { .. } => DomainTag::Sokoban,
            GoalCondition::Maze { .. } => DomainTag::Maze,
            GoalCondition::FloorTile { .. } => DomainTag::FloorTile,
        }
    }

    pub fn dims(&self) -> Dims {
        match self {
            GoalCondition::Sokoban { dims, .. }
            | GoalCondition::Maze { dims, .. }
            | GoalCondition::FloorTile { dims, .. } => *dims,
        }
    }
}

/// Sokoban: every target holds a box. Maze: the agent is on the goal.
/// Floor-Tile: every cell of the goal subset has its goal color.
pub fn is_goal(state: &State, goal: &GoalCondition) -> bool {
    match (state, goal) {
        (State::Sokoban(s), GoalCondition::Sokoban { targets, .. }) => {
            targets.iter().all(|t| s.has_box(*t))
        }
        (State::Maze(s), GoalCondition::Maze { goal, .. }) => s.agent() == *goal,
        (State::FloorTile(s), GoalCondition::FloorTile { coloring, .. }) => coloring
            .iter()
            .zip(s.tiles())
            .all(|(g, t)| g.is_none() || g == t),
        _ => false,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metadata {
    pub seed: Option<u64>,
    pub tier: Option<String>,
}

/// A planning task: initial state (carrying the static layout and the goal)
/// plus provenance metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub initial: State,
    pub meta: Metadata,
}

impl Instance {
    /// Rejects initial states the text format cannot express (a maze agent
    /// on a teleport pad).
    pub fn new(initial: State, meta: Metadata) -> Result<Self> {
        if let State::Maze(m) = &initial {
            if m.board().pad(m.agent()).is_some() {
                return Err(CoatError::Contract("maze agent starts on a teleport pad".into()));
            }
        }
        Ok(Self { initial, meta })
    }

    pub fn domain(&self) -> DomainTag {
        self.initial.domain()
    }

    pub fn dims(&self) -> Dims {
        self.initial.dims()
    }

    pub fn goal(&self) -> GoalCondition {
        self.initial.goal()
    }

    pub fn is_goal(&self, state: &State) -> bool {
        match state {
            State::Sokoban(s) => s.is_goal(),
            State::Maze(s) => s.is_goal(),
            State::FloorTile(s) => s.is_goal(),
        }
    }

    /// Clockwise rotation by `quarter_turns` × 90° (taken modulo 4).
    pub fn rotate(&self, quarter_turns: u32) -> Result<Instance> {
        let mut state = self.initial.clone();
        for _ in 0..quarter_turns % 4 {
            state = state.rotated();
        }
        Ok(Instance {
            initial: state,
            meta: self.meta.clone(),
        })
    }

    /// Replays `actions` from the initial state; `None` if one is inapplicable.
    pub fn replay(&self, actions: &[Action]) -> Option<Vec<State>> {
        let mut states = vec![self.initial.clone()];
        for &a in actions {
            let next = states.last().expect("non-empty").apply(a)?;
            states.push(next);
        }
        Some(states)
    }
}

/// Clockwise rotation by `quarter_turns` × 90°.
pub fn rotate(instance: &Instance, quarter_turns: u32) -> Result<Instance> {
    instance.rotate(quarter_turns)
}
