//! Typed STRIPS export of instances.
//!
//! Predicate mapping:
//!
//! * Sokoban: `(agent-at ?c)`, `(box-at ?c)`, `(clear ?c)` for non-wall cells
//!   without a box, static `(adjacent ?a ?b ?d)` between non-wall cells.
//!   Actions `move` and `push`; the goal puts a box on every target.
//! * Maze: `(at ?c)` and static `(link ?from ?to ?d)` where `?to` is the
//!   cell reached by stepping in `?d`, teleport included. One `move` action.
//! * Floor-Tile: `(at ?a ?c)`, `(clear ?c)` for uncolored unoccupied cells,
//!   `(painted-white ?c)`, `(painted-black ?c)`, static `(adjacent ..)` and
//!   `(paints-white ?a)` / `(paints-black ?a)`. Actions `move`,
//!   `paint-white`, `paint-black`.
//!
//! Cells are named `c<row>_<col>`, directions `up down left right`.

use std::fmt::Write as _;

use coat_core::domains::grid::{Dims, Dir, Pos};
use coat_core::domains::Color;
use coat_core::{Instance, State};

pub struct PddlPair {
    pub domain: String,
    pub problem: String,
}

fn cell(p: Pos) -> String {
    format!("c{}_{}", p.r(), p.c())
}

fn objects(cells: &[Pos], extra: &str) -> String {
    let names: Vec<String> = cells.iter().map(|&p| cell(p)).collect();
    format!(
        "  (:objects\n    {} - cell\n    up down left right - dir{extra})\n",
        names.join(" ")
    )
}

fn adjacency(dims: Dims, open: impl Fn(Pos) -> bool) -> Vec<String> {
    let mut out = Vec::new();
    for p in dims.positions().filter(|&p| open(p)) {
        for d in Dir::ALL {
            if let Some(q) = dims.step(p, d).filter(|&q| open(q)) {
                out.push(format!("(adjacent {} {} {})", cell(p), cell(q), d.name()));
            }
        }
    }
    out
}

fn problem(domain: &str, name: &str, objects: String, init: &[String], goal: &[String]) -> String {
    let mut s = format!("(define (problem {name})\n  (:domain {domain})\n{objects}  (:init\n");
    for f in init {
        let _ = writeln!(s, "    {f}");
    }
    s.push_str("  )\n  (:goal (and\n");
    for g in goal {
        let _ = writeln!(s, "    {g}");
    }
    s.push_str("  ))\n)\n");
    s
}

const SOKOBAN_DOMAIN: &str = "(define (domain sokoban)
  (:requirements :strips :typing)
  (:types cell dir)
  (:predicates (agent-at ?c - cell) (box-at ?c - cell) (clear ?c - cell)
               (adjacent ?a ?b - cell ?d - dir))
  (:action move
    :parameters (?from ?to - cell ?d - dir)
    :precondition (and (agent-at ?from) (adjacent ?from ?to ?d) (clear ?to))
    :effect (and (not (agent-at ?from)) (agent-at ?to)))
  (:action push
    :parameters (?from ?box ?to - cell ?d - dir)
    :precondition (and (agent-at ?from) (adjacent ?from ?box ?d) (adjacent ?box ?to ?d)
                       (box-at ?box) (clear ?to))
    :effect (and (not (agent-at ?from)) (agent-at ?box) (not (box-at ?box)) (clear ?box)
                 (box-at ?to) (not (clear ?to))))
)
";

const MAZE_DOMAIN: &str = "(define (domain maze)
  (:requirements :strips :typing)
  (:types cell dir)
  (:predicates (at ?c - cell) (link ?from ?to - cell ?d - dir))
  (:action move
    :parameters (?from ?to - cell ?d - dir)
    :precondition (and (at ?from) (link ?from ?to ?d))
    :effect (and (not (at ?from)) (at ?to)))
)
";

const FLOORTILE_DOMAIN: &str = "(define (domain floortile)
  (:requirements :strips :typing)
  (:types cell dir agent)
  (:predicates (at ?a - agent ?c - cell) (clear ?c - cell)
               (painted-white ?c - cell) (painted-black ?c - cell)
               (adjacent ?a ?b - cell ?d - dir)
               (paints-white ?a - agent) (paints-black ?a - agent))
  (:action move
    :parameters (?a - agent ?from ?to - cell ?d - dir)
    :precondition (and (at ?a ?from) (adjacent ?from ?to ?d) (clear ?to))
    :effect (and (not (at ?a ?from)) (at ?a ?to) (not (clear ?to)) (clear ?from)))
  (:action paint-white
    :parameters (?a - agent ?from ?to - cell ?d - dir)
    :precondition (and (at ?a ?from) (adjacent ?from ?to ?d) (clear ?to) (paints-white ?a))
    :effect (and (not (clear ?to)) (painted-white ?to)))
  (:action paint-black
    :parameters (?a - agent ?from ?to - cell ?d - dir)
    :precondition (and (at ?a ?from) (adjacent ?from ?to ?d) (clear ?to) (paints-black ?a))
    :effect (and (not (clear ?to)) (painted-black ?to)))
)
";

pub fn export(instance: &Instance, name: &str) -> PddlPair {
    let dims = instance.dims();
    match &instance.initial {
        State::Sokoban(s) => {
            let board = s.board();
            let open: Vec<Pos> = dims.positions().filter(|&p| !board.is_wall(p)).collect();
            let mut init = vec![format!("(agent-at {})", cell(s.agent()))];
            init.extend(s.boxes().iter().map(|&b| format!("(box-at {})", cell(b))));
            init.extend(open.iter().filter(|&&p| !s.has_box(p)).map(|&p| format!("(clear {})", cell(p))));
            init.extend(adjacency(dims, |p| !board.is_wall(p)));
            let goal: Vec<String> = board.targets().iter().map(|&t| format!("(box-at {})", cell(t))).collect();
            PddlPair {
                domain: SOKOBAN_DOMAIN.to_string(),
                problem: problem("sokoban", name, objects(&open, ""), &init, &goal),
            }
        }
        State::Maze(m) => {
            let board = m.board();
            let open: Vec<Pos> = dims.positions().filter(|&p| !board.is_wall(p)).collect();
            let mut init = vec![format!("(at {})", cell(m.agent()))];
            for &p in &open {
                for d in Dir::ALL {
                    if let Some(q) = board.destination(p, d) {
                        init.push(format!("(link {} {} {})", cell(p), cell(q), d.name()));
                    }
                }
            }
            PddlPair {
                domain: MAZE_DOMAIN.to_string(),
                problem: problem("maze", name, objects(&open, ""), &init, &[format!("(at {})", cell(board.goal()))]),
            }
        }
        State::FloorTile(f) => {
            let all: Vec<Pos> = dims.positions().collect();
            let agents = f.agents();
            let mut init: Vec<String> = agents
                .iter()
                .enumerate()
                .map(|(i, &p)| format!("(at a{} {})", i + 1, cell(p)))
                .collect();
            for &p in &all {
                match f.tile(p) {
                    Some(Color::White) => init.push(format!("(painted-white {})", cell(p))),
                    Some(Color::Black) => init.push(format!("(painted-black {})", cell(p))),
                    None if !agents.contains(&p) => init.push(format!("(clear {})", cell(p))),
                    None => {}
                }
            }
            init.extend(adjacency(dims, |_| true));
            init.push("(paints-white a1)".into());
            init.push("(paints-black a2)".into());
            let goal: Vec<String> = all
                .iter()
                .filter_map(|&p| {
                    f.board().goal_at(p).map(|c| match c {
                        Color::White => format!("(painted-white {})", cell(p)),
                        Color::Black => format!("(painted-black {})", cell(p)),
                    })
                })
                .collect();
            PddlPair {
                domain: FLOORTILE_DOMAIN.to_string(),
                problem: problem("floortile", name, objects(&all, "\n    a1 a2 - agent"), &init, &goal),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use coat_core::parse_instance;

    #[test]
    fn adjacent_goal_maze_exports_single_link() {
        let inst = parse_instance("domain=maze h=1 w=2\nSG\n").unwrap();
        let out = export(&inst, "tiny");
        assert!(out.problem.contains("(at c0_0)"));
        assert!(out.problem.contains("(link c0_0 c0_1 right)"));
        assert!(out.problem.contains("(:goal (and\n    (at c0_1)"));
        assert_eq!(export(&inst, "tiny").problem, out.problem);
    }

    #[test]
    fn teleport_links_point_at_partner() {
        let inst = parse_instance("domain=maze h=2 w=4\nS1..\n..1G\n").unwrap();
        let out = export(&inst, "t");
        assert!(out.problem.contains("(link c0_0 c1_2 right)"));
    }
}
