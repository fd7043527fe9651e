//! Seeded instance generators. Every returned instance comes with an oracle
//! plan proving it solvable.

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::floortile::{FloorTileBoard, FloorTileState};
use super::grid::{Dims, Dir, Pos};
use super::maze::{MazeBoard, MazeState, MAX_PAIRS};
use super::sokoban::{SokobanBoard, SokobanState};
use super::{DomainTag, Instance, Metadata, State};
use crate::error::{CoatError, Result};
use crate::search::{oracle_solve_with, InstancePlan, SearchBudget};

const MAX_ATTEMPTS: usize = 200;
const CERTIFY_EXPANSIONS: u64 = 2_000_000;
const FLOORTILE_CERTIFY_EXPANSIONS: u64 = 300_000;

#[derive(Debug, Clone, PartialEq)]
pub enum GenParams {
    Sokoban {
        h: usize,
        w: usize,
        boxes: usize,
        /// Reverse-play steps taken from the solved configuration.
        walk_steps: usize,
    },
    Maze {
        h: usize,
        w: usize,
        pairs: usize,
        /// Probability of knocking out an interior wall of the perfect maze.
        wall_removal: f64,
    },
    FloorTile {
        h: usize,
        w: usize,
    },
}

impl GenParams {
    pub fn sokoban(h: usize, w: usize, boxes: usize) -> Self {
        GenParams::Sokoban {
            h,
            w,
            boxes,
            walk_steps: 60 + 30 * boxes,
        }
    }

    pub fn maze(h: usize, w: usize, pairs: usize) -> Self {
        GenParams::Maze {
            h,
            w,
            pairs,
            wall_removal: 0.1,
        }
    }

    pub fn floortile(h: usize, w: usize) -> Self {
        GenParams::FloorTile { h, w }
    }

    pub fn domain(&self) -> DomainTag {
        match self {
            GenParams::Sokoban { .. } => DomainTag::Sokoban,
            GenParams::Maze { .. } => DomainTag::Maze,
            GenParams::FloorTile { .. } => DomainTag::FloorTile,
        }
    }

    pub fn dims(&self) -> Dims {
        match *self {
            GenParams::Sokoban { h, w, .. } | GenParams::Maze { h, w, .. } | GenParams::FloorTile { h, w } => {
                Dims::new(h, w)
            }
        }
    }

    /// Scalar used to order curriculum tiers: box count for Sokoban, cell
    /// count otherwise.
    pub fn difficulty(&self) -> usize {
        match *self {
            GenParams::Sokoban { boxes, .. } => boxes,
            _ => self.dims().cells(),
        }
    }

    fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(CoatError::Generation(m));
        match *self {
            GenParams::Sokoban { h, w, boxes, .. } => {
                if h < 3 || w < 3 || h > 255 || w > 255 {
                    return fail(format!("sokoban grid {h}x{w} needs 3..=255 rows and columns"));
                }
                if boxes == 0 || boxes + 2 > (h - 2) * (w - 2) {
                    return fail(format!("{boxes} boxes do not fit a {h}x{w} room"));
                }
            }
            GenParams::Maze {
                h,
                w,
                pairs,
                wall_removal,
            } => {
                if h < 2 || w < 2 || h > 255 || w > 255 {
                    return fail(format!("maze grid {h}x{w} needs 2..=255 rows and columns"));
                }
                if pairs > MAX_PAIRS {
                    return fail(format!("at most {MAX_PAIRS} teleport pairs, got {pairs}"));
                }
                if !(0.0..=1.0).contains(&wall_removal) {
                    return fail(format!("wall removal probability {wall_removal} outside [0, 1]"));
                }
                let lattice = h.div_ceil(2) * w.div_ceil(2);
                if 2 * lattice - 1 < 2 * pairs + 2 {
                    return fail(format!("{h}x{w} maze too small for {pairs} teleport pairs"));
                }
            }
            GenParams::FloorTile { h, w } => {
                if h * w < 3 || h > 255 || w > 255 {
                    return fail(format!("floortile grid {h}x{w} needs at least 3 cells"));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for GenParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GenParams::Sokoban { h, w, boxes, .. } => write!(f, "sokoban-{h}x{w}-b{boxes}"),
            GenParams::Maze { h, w, pairs, .. } => write!(f, "maze-{h}x{w}-t{pairs}"),
            GenParams::FloorTile { h, w } => write!(f, "floortile-{h}x{w}"),
        }
    }
}

pub fn generate(params: &GenParams, seed: u64) -> Result<Instance> {
    generate_certified(params, seed).map(|(inst, _)| inst)
}

/// Generates an instance together with its optimal oracle plan.
pub fn generate_certified(params: &GenParams, seed: u64) -> Result<(Instance, InstancePlan)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = SearchBudget::expansions(match params {
        GenParams::FloorTile { .. } => FLOORTILE_CERTIFY_EXPANSIONS,
        _ => CERTIFY_EXPANSIONS,
    });
    for _ in 0..MAX_ATTEMPTS {
        let candidate = match *params {
            GenParams::Sokoban {
                h,
                w,
                boxes,
                walk_steps,
            } => sokoban(Dims::new(h, w), boxes, walk_steps, &mut rng),
            GenParams::Maze {
                h,
                w,
                pairs,
                wall_removal,
            } => maze(Dims::new(h, w), pairs, wall_removal, &mut rng),
            GenParams::FloorTile { h, w } => floortile(Dims::new(h, w), &mut rng),
        };
        let Some(state) = candidate else { continue };
        let meta = Metadata {
            seed: Some(seed),
            tier: None,
        };
        let instance = Instance::new(state, meta)?;
        if let Ok(plan) = oracle_solve_with(&instance, budget) {
            return Ok((instance, plan));
        }
    }
    Err(CoatError::Generation(format!(
        "no solvable {params} instance after {MAX_ATTEMPTS} attempts (seed {seed})"
    )))
}

fn sokoban(dims: Dims, boxes: usize, walk_steps: usize, rng: &mut ChaCha8Rng) -> Option<State> {
    let interior = (dims.h - 2) * (dims.w - 2);
    let want_floor = (interior * 3 / 5).max(boxes + 3).min(interior);
    let mut floor = vec![false; dims.cells()];
    let inside = |p: Pos| p.r() >= 1 && p.c() >= 1 && p.r() + 1 < dims.h && p.c() + 1 < dims.w;
    let mut cur = Pos::new(rng.gen_range(1..dims.h - 1), rng.gen_range(1..dims.w - 1));
    floor[dims.idx(cur)] = true;
    let mut count = 1;
    while count < want_floor {
        let d = Dir::ALL[rng.gen_range(0..4)];
        if let Some(next) = dims.step(cur, d).filter(|&p| inside(p)) {
            cur = next;
            if !floor[dims.idx(cur)] {
                floor[dims.idx(cur)] = true;
                count += 1;
            }
        }
    }
    let cells: Vec<Pos> = dims.positions().filter(|&p| floor[dims.idx(p)]).collect();
    let mut picks = cells.clone();
    picks.shuffle(rng);
    let targets: Vec<Pos> = picks[..boxes].to_vec();
    let mut box_cells = targets.clone();
    let mut agent = picks[boxes];

    let walls: Vec<bool> = floor.iter().map(|f| !f).collect();
    let board = Arc::new(SokobanBoard::new(dims, walls, targets.clone()).ok()?);
    let displacement = |bs: &[Pos]| -> usize {
        bs.iter()
            .map(|b| targets.iter().map(|t| t.manhattan(*b)).min().unwrap_or(0))
            .sum()
    };
    let is_floor = |p: Pos| floor[dims.idx(p)];
    let mut best: Option<(usize, Vec<Pos>, Pos)> = None;
    for _ in 0..walk_steps {
        let d = Dir::ALL[rng.gen_range(0..4)];
        let Some(next) = dims.step(agent, d).filter(|&p| is_floor(p) && !box_cells.contains(&p)) else {
            continue;
        };
        // pull: the box behind the agent follows it
        let behind = dims.step(agent, d.opposite());
        if let Some(i) = behind.and_then(|b| box_cells.iter().position(|&x| x == b)) {
            if rng.gen_bool(0.7) {
                box_cells[i] = agent;
            }
        }
        agent = next;
        let score = displacement(&box_cells);
        if score > 0 && best.as_ref().map_or(true, |(s, ..)| score > *s) {
            best = Some((score, box_cells.clone(), agent));
        }
    }
    let (_, bs, a) = best?;
    SokobanState::new(board, bs, a).ok().map(State::Sokoban)
}

fn maze(dims: Dims, pairs: usize, wall_removal: f64, rng: &mut ChaCha8Rng) -> Option<State> {
    let mut floor = vec![false; dims.cells()];
    let lattice = |p: Pos| p.r() % 2 == 0 && p.c() % 2 == 0;
    // depth-first carve over even-coordinate cells
    let start = Pos::new(0, 0);
    floor[dims.idx(start)] = true;
    let mut stack = vec![start];
    while let Some(&cur) = stack.last() {
        let mut options: Vec<(Pos, Pos)> = Dir::ALL
            .iter()
            .filter_map(|&d| {
                let mid = dims.step(cur, d)?;
                let far = dims.step(mid, d)?;
                (!floor[dims.idx(far)]).then_some((mid, far))
            })
            .collect();
        if options.is_empty() {
            stack.pop();
            continue;
        }
        options.shuffle(rng);
        let (mid, far) = options[0];
        floor[dims.idx(mid)] = true;
        floor[dims.idx(far)] = true;
        stack.push(far);
    }
    // knock out walls: interior walls between two floor cells, and the odd
    // trailing row/column of even-sized grids
    let snapshot = floor.clone();
    for p in dims.positions() {
        if snapshot[dims.idx(p)] || lattice(p) {
            continue;
        }
        let open_neighbours = Dir::ALL
            .iter()
            .filter_map(|&d| dims.step(p, d))
            .filter(|&q| snapshot[dims.idx(q)])
            .count();
        let trailing = (dims.h % 2 == 0 && p.r() == dims.h - 1) || (dims.w % 2 == 0 && p.c() == dims.w - 1);
        let chance = if trailing { 0.5 } else { wall_removal };
        if (open_neighbours >= 2 || (trailing && open_neighbours >= 1)) && rng.gen_bool(chance) {
            floor[dims.idx(p)] = true;
        }
    }
    let goal = Pos::new((dims.h - 1) / 2 * 2, (dims.w - 1) / 2 * 2);
    let mut free: Vec<Pos> = dims
        .positions()
        .filter(|&p| floor[dims.idx(p)] && p != start && p != goal)
        .collect();
    if free.len() < 2 * pairs {
        return None;
    }
    free.shuffle(rng);
    let mut pads = [None; MAX_PAIRS];
    for (i, slot) in pads.iter_mut().take(pairs).enumerate() {
        *slot = Some((free[2 * i], free[2 * i + 1]));
    }
    let walls = floor.iter().map(|f| !f).collect();
    let board = MazeBoard::new(dims, walls, goal, pads).ok()?;
    MazeState::new(Arc::new(board), start).ok().map(State::Maze)
}

fn floortile(dims: Dims, rng: &mut ChaCha8Rng) -> Option<State> {
    let mut cells: Vec<Pos> = dims.positions().collect();
    cells.shuffle(rng);
    let free = [cells[0], cells[1]];
    let board = FloorTileBoard::checkerboard(dims, free);
    cells.shuffle(rng);
    let agents = [cells[0], cells[1]];
    FloorTileState::new(Arc::new(board), vec![None; dims.cells()], agents)
        .ok()
        .map(State::FloorTile)
}
