//! Plain-text grid format for instances.
//!
//! ```text
//! domain=maze h=5 w=5 version=1 seed=7
//! S.#..
//! ...
//! ```
//!
//! The header carries `domain`, `h`, `w`, and optionally `version`, `seed`
//! and `tier`. Glyphs per domain:
//!
//! * Sokoban: `#` wall, ` ` empty, `$` box, `.` target, `@` agent,
//!   `*` box on target, `+` agent on target.
//! * Maze: `#` wall, `.` floor, `S` agent, `G` goal, `1`–`4` teleport pads
//!   (each digit used exactly twice or not at all).
//! * Floor-Tile: `.` uncolored, `w` white, `b` black, `A` agent 1, `B`
//!   agent 2, then a `---goal---` line and a second grid of `w`/`b`/`.`.

use std::fmt::Write as _;
use std::sync::Arc;

use super::floortile::{Color, FloorTileBoard, FloorTileState};
use super::grid::{Dims, Pos};
use super::maze::{MazeBoard, MazeState, MAX_PAIRS};
use super::sokoban::{SokobanBoard, SokobanState};
use super::{DomainTag, Instance, Metadata, State};
use crate::error::{parse_err, CoatError, Result};

pub const INSTANCE_FORMAT_VERSION: u32 = 1;
pub const GOAL_SEPARATOR: &str = "---goal---";

struct Header {
    domain: DomainTag,
    dims: Dims,
    meta: Metadata,
}

fn parse_header(line: &str) -> Result<Header> {
    let mut domain = None;
    let mut h = None;
    let mut w = None;
    let mut meta = Metadata::default();
    let mut column = 1;
    for token in line.split(' ') {
        if token.is_empty() {
            column += 1;
            continue;
        }
        let Some((key, value)) = token.split_once('=') else {
            return parse_err(1, column, format!("expected key=value, found {token:?}"));
        };
        let bad = |what: &str| parse_err::<Header>(1, column, format!("invalid {what} {value:?}"));
        match key {
            "domain" => match value.parse() {
                Ok(d) => domain = Some(d),
                Err(_) => return bad("domain"),
            },
            "h" => match value.parse::<usize>() {
                Ok(v) if v > 0 && v < 256 => h = Some(v),
                _ => return bad("height"),
            },
            "w" => match value.parse::<usize>() {
                Ok(v) if v > 0 && v < 256 => w = Some(v),
                _ => return bad("width"),
            },
            "version" => match value.parse::<u32>() {
                Ok(INSTANCE_FORMAT_VERSION) => {}
                Ok(found) => {
                    return Err(CoatError::Version {
                        found,
                        expected: INSTANCE_FORMAT_VERSION,
                    })
                }
                Err(_) => return bad("version"),
            },
            "seed" => match value.parse() {
                Ok(s) => meta.seed = Some(s),
                Err(_) => return bad("seed"),
            },
            "tier" => meta.tier = Some(value.to_string()),
            _ => return parse_err(1, column, format!("unknown header key {key:?}")),
        }
        column += token.chars().count() + 1;
    }
    match (domain, h, w) {
        (Some(domain), Some(h), Some(w)) => Ok(Header {
            domain,
            dims: Dims::new(h, w),
            meta,
        }),
        _ => parse_err(1, 1, "header needs domain=, h= and w="),
    }
}

/// Grid rows starting at `first` (0-based line index). Sokoban rows may be
/// right-trimmed; they are padded with spaces.
fn grid_rows<'a>(lines: &[&'a str], first: usize, dims: Dims, pad: bool) -> Result<Vec<Vec<char>>> {
    let mut rows = Vec::with_capacity(dims.h);
    for r in 0..dims.h {
        let line_no = first + r + 1;
        let Some(line) = lines.get(first + r) else {
            return parse_err(line_no, 1, format!("expected {} grid rows, found {r}", dims.h));
        };
        let mut chars: Vec<char> = line.chars().collect();
        if pad && chars.len() < dims.w {
            chars.resize(dims.w, ' ');
        }
        if chars.len() != dims.w {
            return parse_err(
                line_no,
                chars.len().min(dims.w) + 1,
                format!("row has {} cells, expected {}", chars.len(), dims.w),
            );
        }
        rows.push(chars);
    }
    Ok(rows)
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let lines: Vec<&str> = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
    let Some(first) = lines.first() else {
        return parse_err(1, 1, "empty input");
    };
    let header = parse_header(first)?;
    let dims = header.dims;
    let (state, used) = match header.domain {
        DomainTag::Sokoban => (parse_sokoban(&lines, dims)?, 1 + dims.h),
        DomainTag::Maze => (parse_maze(&lines, dims)?, 1 + dims.h),
        DomainTag::FloorTile => (parse_floortile(&lines, dims)?, 2 + 2 * dims.h),
    };
    if let Some((i, _)) = lines.iter().enumerate().skip(used).find(|(_, l)| !l.trim().is_empty()) {
        return parse_err(i + 1, 1, "unexpected trailing content");
    }
    Instance::new(state, header.meta).map_err(|e| CoatError::Parse {
        line: 1,
        column: 1,
        message: e.to_string(),
    })
}

fn parse_sokoban(lines: &[&str], dims: Dims) -> Result<State> {
    let rows = grid_rows(lines, 1, dims, true)?;
    let mut walls = vec![false; dims.cells()];
    let mut boxes = Vec::new();
    let mut targets = Vec::new();
    let mut agent = None;
    for (r, row) in rows.iter().enumerate() {
        for (c, &ch) in row.iter().enumerate() {
            let p = Pos::new(r, c);
            match ch {
                '#' => walls[dims.idx(p)] = true,
                ' ' | '-' | '_' => {}
                '$' => boxes.push(p),
                '.' => targets.push(p),
                '*' => {
                    boxes.push(p);
                    targets.push(p);
                }
                '@' | '+' => {
                    if agent.is_some() {
                        return parse_err(r + 2, c + 1, "second agent");
                    }
                    agent = Some(p);
                    if ch == '+' {
                        targets.push(p);
                    }
                }
                other => return parse_err(r + 2, c + 1, format!("unknown sokoban glyph {other:?}")),
            }
        }
    }
    let Some(agent) = agent else {
        return parse_err(2, 1, "no agent ('@' or '+') in grid");
    };
    if boxes.len() != targets.len() {
        return parse_err(
            2,
            1,
            format!("{} boxes but {} targets", boxes.len(), targets.len()),
        );
    }
    let board = SokobanBoard::new(dims, walls, targets).map_err(|e| to_parse(e, 2))?;
    let state = SokobanState::new(Arc::new(board), boxes, agent).map_err(|e| to_parse(e, 2))?;
    Ok(State::Sokoban(state))
}

fn to_parse(e: CoatError, line: usize) -> CoatError {
    CoatError::Parse {
        line,
        column: 1,
        message: e.to_string(),
    }
}

fn parse_maze(lines: &[&str], dims: Dims) -> Result<State> {
    let rows = grid_rows(lines, 1, dims, false)?;
    let mut walls = vec![false; dims.cells()];
    let mut pads: [Vec<(Pos, usize, usize)>; MAX_PAIRS] = Default::default();
    let mut agent = None;
    let mut goal = None;
    for (r, row) in rows.iter().enumerate() {
        for (c, &ch) in row.iter().enumerate() {
            let p = Pos::new(r, c);
            match ch {
                '#' => walls[dims.idx(p)] = true,
                '.' => {}
                'S' => {
                    if agent.replace(p).is_some() {
                        return parse_err(r + 2, c + 1, "second agent 'S'");
                    }
                }
                'G' => {
                    if goal.replace(p).is_some() {
                        return parse_err(r + 2, c + 1, "second goal 'G'");
                    }
                }
                '1'..='4' => {
                    let i = ch as usize - '1' as usize;
                    pads[i].push((p, r + 2, c + 1));
                    if pads[i].len() > 2 {
                        return parse_err(r + 2, c + 1, format!("teleport {ch} appears more than twice"));
                    }
                }
                other => return parse_err(r + 2, c + 1, format!("unknown maze glyph {other:?}")),
            }
        }
    }
    let mut pairs = [None; MAX_PAIRS];
    for (i, cells) in pads.iter().enumerate() {
        match cells.as_slice() {
            [] => {}
            [(a, ..), (b, ..)] => pairs[i] = Some((*a, *b)),
            [(_, line, col)] => {
                return parse_err(*line, *col, format!("teleport {} appears only once", i + 1))
            }
            _ => unreachable!("checked above"),
        }
    }
    let Some(agent) = agent else {
        return parse_err(2, 1, "no agent 'S' in grid");
    };
    let Some(goal) = goal else {
        return parse_err(2, 1, "no goal 'G' in grid");
    };
    let board = MazeBoard::new(dims, walls, goal, pairs).map_err(|e| to_parse(e, 2))?;
    let state = MazeState::new(Arc::new(board), agent).map_err(|e| to_parse(e, 2))?;
    Ok(State::Maze(state))
}

fn parse_floortile(lines: &[&str], dims: Dims) -> Result<State> {
    let rows = grid_rows(lines, 1, dims, false)?;
    let mut tiles = vec![None; dims.cells()];
    let mut agents = [None, None];
    for (r, row) in rows.iter().enumerate() {
        for (c, &ch) in row.iter().enumerate() {
            let p = Pos::new(r, c);
            match ch {
                '.' => {}
                'w' => tiles[dims.idx(p)] = Some(Color::White),
                'b' => tiles[dims.idx(p)] = Some(Color::Black),
                'A' | 'B' => {
                    let i = usize::from(ch == 'B');
                    if agents[i].replace(p).is_some() {
                        return parse_err(r + 2, c + 1, format!("second agent {ch:?}"));
                    }
                }
                other => return parse_err(r + 2, c + 1, format!("unknown floortile glyph {other:?}")),
            }
        }
    }
    let sep_line = 1 + dims.h;
    match lines.get(sep_line) {
        Some(l) if l.trim() == GOAL_SEPARATOR => {}
        _ => return parse_err(sep_line + 1, 1, format!("expected {GOAL_SEPARATOR:?}")),
    }
    let goal_rows = grid_rows(lines, sep_line + 1, dims, false)?;
    let mut goal = vec![None; dims.cells()];
    for (r, row) in goal_rows.iter().enumerate() {
        for (c, &ch) in row.iter().enumerate() {
            goal[dims.idx(Pos::new(r, c))] = match ch {
                '.' => None,
                'w' => Some(Color::White),
                'b' => Some(Color::Black),
                other => {
                    return parse_err(sep_line + r + 2, c + 1, format!("unknown goal glyph {other:?}"))
                }
            };
        }
    }
    let [Some(a1), Some(a2)] = agents else {
        return parse_err(2, 1, "floortile needs agents 'A' and 'B'");
    };
    let board = FloorTileBoard::new(dims, goal).map_err(|e| to_parse(e, 2))?;
    let state = FloorTileState::new(Arc::new(board), tiles, [a1, a2]).map_err(|e| to_parse(e, 2))?;
    Ok(State::FloorTile(state))
}

fn render_grid(state: &State, out: &mut String) {
    let dims = state.dims();
    match state {
        State::Sokoban(s) => {
            let board = s.board();
            for r in 0..dims.h {
                for c in 0..dims.w {
                    let p = Pos::new(r, c);
                    let ch = if board.is_wall(p) {
                        '#'
                    } else {
                        match (s.agent() == p, s.has_box(p), board.is_target(p)) {
                            (true, _, true) => '+',
                            (true, _, false) => '@',
                            (false, true, true) => '*',
                            (false, true, false) => '$',
                            (false, false, true) => '.',
                            (false, false, false) => ' ',
                        }
                    };
                    out.push(ch);
                }
                out.push('\n');
            }
        }
        State::Maze(s) => {
            let board = s.board();
            for r in 0..dims.h {
                for c in 0..dims.w {
                    let p = Pos::new(r, c);
                    let ch = if board.is_wall(p) {
                        '#'
                    } else if s.agent() == p {
                        // 's' only appears in state keys: agent resting on a pad
                        if board.pad(p).is_some() {
                            's'
                        } else {
                            'S'
                        }
                    } else if board.goal() == p {
                        'G'
                    } else if let Some(i) = board.pad(p) {
                        char::from(b'1' + i as u8)
                    } else {
                        '.'
                    };
                    out.push(ch);
                }
                out.push('\n');
            }
            if let Some(i) = board.pad(s.agent()) {
                let _ = writeln!(out, "pad={}", i + 1);
            }
        }
        State::FloorTile(s) => {
            let [a1, a2] = s.agents();
            let color = |c: Option<Color>| match c {
                None => '.',
                Some(Color::White) => 'w',
                Some(Color::Black) => 'b',
            };
            for r in 0..dims.h {
                for c in 0..dims.w {
                    let p = Pos::new(r, c);
                    out.push(if p == a1 {
                        'A'
                    } else if p == a2 {
                        'B'
                    } else {
                        color(s.tile(p))
                    });
                }
                out.push('\n');
            }
            out.push_str(GOAL_SEPARATOR);
            out.push('\n');
            for r in 0..dims.h {
                for c in 0..dims.w {
                    out.push(color(s.board().goal_at(Pos::new(r, c))));
                }
                out.push('\n');
            }
        }
    }
}

/// Canonical text: header line, then the grid(s), newline-terminated.
pub fn serialize_instance(instance: &Instance) -> String {
    let dims = instance.dims();
    let mut out = format!(
        "domain={} h={} w={} version={INSTANCE_FORMAT_VERSION}",
        instance.domain(),
        dims.h,
        dims.w
    );
    if let Some(seed) = instance.meta.seed {
        let _ = write!(out, " seed={seed}");
    }
    if let Some(tier) = &instance.meta.tier {
        let _ = write!(out, " tier={tier}");
    }
    out.push('\n');
    render_grid(&instance.initial, &mut out);
    out
}

pub(crate) fn state_key(state: &State) -> String {
    let dims = state.dims();
    let mut out = format!("{} {}x{}\n", state.domain(), dims.h, dims.w);
    render_grid(state, &mut out);
    out
}
