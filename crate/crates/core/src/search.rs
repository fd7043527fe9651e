//! Vanilla A* over unit-cost transition systems, plus an optimal oracle
//! solver built on admissible per-domain heuristics.

use std::cmp::Ordering;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::hash::Hash;
use std::time::{Duration, Instant};

use crate::domains::{Action, Dims, Dir, FloorTileState, Instance, Pos, State};
use crate::error::{CoatError, Result};

pub trait SearchProblem {
    type State: Clone + Eq + Hash;
    type Action: Clone;

    fn initial_state(&self) -> Self::State;
    fn successors(&self, state: &Self::State) -> Vec<(Self::Action, Self::State)>;
    fn is_goal(&self, state: &Self::State) -> bool;
}

impl SearchProblem for Instance {
    type State = State;
    type Action = Action;

    fn initial_state(&self) -> State {
        self.initial.clone()
    }

    fn successors(&self, state: &State) -> Vec<(Action, State)> {
        state.successors()
    }

    fn is_goal(&self, state: &State) -> bool {
        Instance::is_goal(self, state)
    }
}

/// Limits on one search. At least one bound must be set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBudget {
    pub max_expansions: Option<u64>,
    pub time_limit: Option<Duration>,
}

impl SearchBudget {
    pub fn new(max_expansions: Option<u64>, time_limit: Option<Duration>) -> Result<Self> {
        if max_expansions.is_none() && time_limit.is_none() {
            return Err(CoatError::Config("search budget needs an expansion or time bound".into()));
        }
        Ok(Self {
            max_expansions,
            time_limit,
        })
    }

    pub fn expansions(n: u64) -> Self {
        Self {
            max_expansions: Some(n),
            time_limit: None,
        }
    }

    /// 200 000 expansions or 60 seconds, whichever comes first.
    pub fn desk() -> Self {
        Self {
            max_expansions: Some(200_000),
            time_limit: Some(Duration::from_secs(60)),
        }
    }

    /// Ten minutes per instance, no expansion cap.
    pub fn full() -> Self {
        Self {
            max_expansions: None,
            time_limit: Some(Duration::from_secs(600)),
        }
    }
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self::desk()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Solved,
    /// Open list emptied or the expansion cap was hit.
    Exhausted,
    TimedOut,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan<S, A> {
    pub actions: Vec<A>,
    /// `actions.len() + 1` states, starting at the initial state.
    pub states: Vec<S>,
}

impl<S, A> Plan<S, A> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

pub type InstancePlan = Plan<State, Action>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub expanded: u64,
    pub generated: u64,
    pub max_open: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct SearchResult<S, A> {
    pub outcome: Outcome,
    pub plan: Option<Plan<S, A>>,
    pub stats: SearchStats,
}

impl<S, A> SearchResult<S, A> {
    pub fn solved(&self) -> bool {
        self.outcome == Outcome::Solved
    }

    pub fn plan_length(&self) -> Option<usize> {
        self.plan.as_ref().map(Plan::len)
    }
}

#[derive(Debug, Clone, Copy)]
struct OpenEntry {
    f: f64,
    h: f64,
    seq: u64,
    node: usize,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenEntry {
    // BinaryHeap is a max-heap: reverse so the smallest (f, h, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Node<S, A> {
    state: S,
    parent: Option<(usize, A)>,
}

struct Seen {
    g: u32,
    h: f64,
    node: usize,
    closed: bool,
}

/// A* with f = g + h, ties broken by lower h then insertion order.
///
/// `heuristic` is called at most once per distinct state. An infinite value
/// marks a dead end and the state is never queued. Closed states are not
/// reopened.
pub fn astar<P: SearchProblem>(
    problem: &P,
    mut heuristic: impl FnMut(&P::State) -> f64,
    budget: SearchBudget,
) -> SearchResult<P::State, P::Action> {
    let start = Instant::now();
    let mut stats = SearchStats::default();
    let mut nodes: Vec<Node<P::State, P::Action>> = Vec::new();
    let mut seen: HashMap<P::State, Seen> = HashMap::new();
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;

    let init = problem.initial_state();
    let h0 = heuristic(&init);
    stats.generated = 1;
    if h0.is_finite() {
        nodes.push(Node {
            state: init.clone(),
            parent: None,
        });
        seen.insert(
            init,
            Seen {
                g: 0,
                h: h0,
                node: 0,
                closed: false,
            },
        );
        open.push(OpenEntry {
            f: h0,
            h: h0,
            seq,
            node: 0,
        });
        seq += 1;
    }
    stats.max_open = open.len();

    let finish = |outcome, plan, mut stats: SearchStats| {
        stats.elapsed = start.elapsed();
        SearchResult { outcome, plan, stats }
    };

    while let Some(entry) = open.pop() {
        let state = nodes[entry.node].state.clone();
        let g = {
            let rec = seen.get_mut(&state).expect("queued states are recorded");
            if rec.closed || rec.node != entry.node {
                continue;
            }
            rec.closed = true;
            rec.g
        };
        if problem.is_goal(&state) {
            let plan = extract_plan(&nodes, entry.node);
            return finish(Outcome::Solved, Some(plan), stats);
        }
        if budget.max_expansions.is_some_and(|m| stats.expanded >= m) {
            return finish(Outcome::Exhausted, None, stats);
        }
        if budget.time_limit.is_some_and(|t| start.elapsed() >= t) {
            return finish(Outcome::TimedOut, None, stats);
        }
        stats.expanded += 1;
        for (action, next) in problem.successors(&state) {
            stats.generated += 1;
            let g_next = g + 1;
            let h = match seen.entry(next) {
                Entry::Occupied(mut occ) => {
                    let rec = occ.get_mut();
                    if rec.closed || !rec.h.is_finite() || g_next >= rec.g {
                        continue;
                    }
                    rec.g = g_next;
                    rec.node = nodes.len();
                    let h = rec.h;
                    nodes.push(Node {
                        state: occ.key().clone(),
                        parent: Some((entry.node, action)),
                    });
                    h
                }
                Entry::Vacant(vac) => {
                    let h = heuristic(vac.key());
                    if !h.is_finite() {
                        vac.insert(Seen {
                            g: g_next,
                            h,
                            node: usize::MAX,
                            closed: true,
                        });
                        continue;
                    }
                    let node = nodes.len();
                    nodes.push(Node {
                        state: vac.key().clone(),
                        parent: Some((entry.node, action)),
                    });
                    vac.insert(Seen {
                        g: g_next,
                        h,
                        node,
                        closed: false,
                    });
                    h
                }
            };
            open.push(OpenEntry {
                f: f64::from(g_next) + h,
                h,
                seq,
                node: nodes.len() - 1,
            });
            seq += 1;
        }
        stats.max_open = stats.max_open.max(open.len());
    }
    finish(Outcome::Exhausted, None, stats)
}

fn extract_plan<S: Clone, A: Clone>(nodes: &[Node<S, A>], last: usize) -> Plan<S, A> {
    let mut actions = Vec::new();
    let mut states = vec![nodes[last].state.clone()];
    let mut cur = last;
    while let Some((parent, action)) = &nodes[cur].parent {
        actions.push(action.clone());
        states.push(nodes[*parent].state.clone());
        cur = *parent;
    }
    actions.reverse();
    states.reverse();
    Plan { actions, states }
}

/// Expansion cap used by [`oracle_solve`].
pub const ORACLE_EXPANSIONS: u64 = 5_000_000;

/// Admissible, consistent heuristic for `instance`; infinite on provable
/// dead ends.
///
/// * Sokoban: sum over boxes of the wall-respecting distance to the nearest
///   target, ignoring other boxes and the agent.
/// * Maze: exact distance to the goal over teleport-aware moves.
/// * Floor-Tile: number of goal cells not yet holding their goal color.
pub fn oracle_heuristic(instance: &Instance) -> impl Fn(&State) -> f64 + Send + Sync {
    let table = OracleTable::build(instance);
    move |s: &State| table.eval(s)
}

enum OracleTable {
    Sokoban { dims: Dims, dist: Vec<u32> },
    Maze { dims: Dims, dist: Vec<u32> },
    FloorTile,
}

const UNREACHED: u32 = u32::MAX;

impl OracleTable {
    fn build(instance: &Instance) -> Self {
        match &instance.initial {
            State::Sokoban(s) => {
                let board = s.board();
                let dims = board.dims;
                let mut dist = vec![UNREACHED; dims.cells()];
                let mut queue = VecDeque::new();
                for &t in board.targets() {
                    dist[dims.idx(t)] = 0;
                    queue.push_back(t);
                }
                while let Some(p) = queue.pop_front() {
                    let d = dist[dims.idx(p)];
                    for dir in Dir::ALL {
                        if let Some(q) = dims.step(p, dir) {
                            if !board.is_wall(q) && dist[dims.idx(q)] == UNREACHED {
                                dist[dims.idx(q)] = d + 1;
                                queue.push_back(q);
                            }
                        }
                    }
                }
                OracleTable::Sokoban { dims, dist }
            }
            State::Maze(s) => {
                let board = s.board();
                let dims = board.dims;
                let mut preds: Vec<Vec<Pos>> = vec![Vec::new(); dims.cells()];
                for p in dims.positions().filter(|&p| !board.is_wall(p)) {
                    for dir in Dir::ALL {
                        if let Some(q) = board.destination(p, dir) {
                            preds[dims.idx(q)].push(p);
                        }
                    }
                }
                let mut dist = vec![UNREACHED; dims.cells()];
                let goal = board.goal();
                dist[dims.idx(goal)] = 0;
                let mut queue = VecDeque::from([goal]);
                while let Some(q) = queue.pop_front() {
                    let d = dist[dims.idx(q)];
                    for &p in &preds[dims.idx(q)] {
                        if dist[dims.idx(p)] == UNREACHED {
                            dist[dims.idx(p)] = d + 1;
                            queue.push_back(p);
                        }
                    }
                }
                OracleTable::Maze { dims, dist }
            }
            State::FloorTile(_) => OracleTable::FloorTile,
        }
    }

    fn eval(&self, state: &State) -> f64 {
        let finite = |d: u32| if d == UNREACHED { f64::INFINITY } else { f64::from(d) };
        match (self, state) {
            (OracleTable::Sokoban { dims, dist }, State::Sokoban(s)) => {
                s.boxes().iter().map(|&b| finite(dist[dims.idx(b)])).sum()
            }
            (OracleTable::Maze { dims, dist }, State::Maze(s)) => finite(dist[dims.idx(s.agent())]),
            (OracleTable::FloorTile, State::FloorTile(s)) => floortile_remaining(s),
            _ => f64::INFINITY,
        }
    }
}

fn floortile_remaining(s: &FloorTileState) -> f64 {
    let board = s.board();
    let dims = board.dims;
    let mut missing = 0u32;
    for p in dims.positions() {
        let Some(want) = board.goal_at(p) else { continue };
        match s.tile(p) {
            Some(c) if c == want => {}
            Some(_) => return f64::INFINITY,
            None => {
                // painting needs an agent on an uncolored neighbour
                let paintable = Dir::ALL
                    .iter()
                    .filter_map(|&d| dims.step(p, d))
                    .any(|q| s.tile(q).is_none());
                if !paintable {
                    return f64::INFINITY;
                }
                missing += 1;
            }
        }
    }
    f64::from(missing)
}

/// Optimal plan via A* with [`oracle_heuristic`].
pub fn oracle_solve(instance: &Instance) -> Result<InstancePlan> {
    oracle_solve_with(instance, SearchBudget::expansions(ORACLE_EXPANSIONS))
}

pub fn oracle_solve_with(instance: &Instance, budget: SearchBudget) -> Result<InstancePlan> {
    let h = oracle_heuristic(instance);
    let result = astar(instance, h, budget);
    match (result.outcome, result.plan) {
        (Outcome::Solved, Some(plan)) => Ok(plan),
        (outcome, _) => Err(CoatError::Oracle(format!(
            "{} {}x{} instance not solved ({outcome:?} after {} expansions); \
             try a smaller grid or fewer boxes",
            instance.domain(),
            instance.dims().h,
            instance.dims().w,
            result.stats.expanded
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanCheck {
    pub valid: bool,
    /// First inapplicable action, or `actions.len()` when the final state
    /// misses the goal.
    pub failure_index: Option<usize>,
}

pub fn validate_plan(instance: &Instance, actions: &[Action]) -> PlanCheck {
    let mut state = instance.initial.clone();
    for (i, &a) in actions.iter().enumerate() {
        match state.apply(a) {
            Some(next) => state = next,
            None => {
                return PlanCheck {
                    valid: false,
                    failure_index: Some(i),
                }
            }
        }
    }
    if instance.is_goal(&state) {
        PlanCheck {
            valid: true,
            failure_index: None,
        }
    } else {
        PlanCheck {
            valid: false,
            failure_index: Some(actions.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::parse_instance;

    #[test]
    fn empty_maze_corner_to_corner() {
        let inst = parse_instance("domain=maze h=3 w=3\nS..\n...\n..G\n").unwrap();
        let r = astar(&inst, |_| 0.0, SearchBudget::expansions(1000));
        assert_eq!(r.outcome, Outcome::Solved);
        assert_eq!(r.plan_length(), Some(4));
        assert!(validate_plan(&inst, &r.plan.unwrap().actions).valid);
    }

    #[test]
    fn teleport_shortcut() {
        let text = "domain=maze h=3 w=7\nS1.....\n######.\nG1.....\n";
        let inst = parse_instance(text).unwrap();
        let r = astar(&inst, |_| 0.0, SearchBudget::expansions(1000));
        // right onto pad 1 lands below it, then left onto the goal
        assert_eq!(r.plan_length(), Some(2));
        assert_eq!(oracle_solve(&inst).unwrap().len(), 2);
    }

    #[test]
    fn goal_start_gives_empty_plan() {
        let inst = parse_instance("domain=sokoban h=3 w=4\n####\n#@*#\n####\n").unwrap();
        let plan = oracle_solve(&inst).unwrap();
        assert!(plan.is_empty());
        assert_eq!(plan.states.len(), 1);
    }

    #[test]
    fn sokoban_push_fixture() {
        let inst = parse_instance("domain=sokoban h=3 w=7\n#######\n#@$ . #\n#######\n").unwrap();
        let plan = oracle_solve(&inst).unwrap();
        assert_eq!(plan.len(), 2);
        let names: Vec<String> = plan.actions.iter().map(|a| a.name()).collect();
        assert_eq!(names, ["push-right", "push-right"]);
    }

    #[test]
    fn validate_reports_failure_index() {
        let inst = parse_instance("domain=maze h=1 w=4\nS..G\n").unwrap();
        let plan = oracle_solve(&inst).unwrap();
        assert_eq!(validate_plan(&inst, &plan.actions), PlanCheck { valid: true, failure_index: None });
        let short = &plan.actions[..2];
        assert_eq!(validate_plan(&inst, short).failure_index, Some(2));
        let mut bad = plan.actions.clone();
        bad[1] = Action::Maze(Dir::Up);
        assert_eq!(validate_plan(&inst, &bad).failure_index, Some(1));
    }

    #[test]
    fn one_expansion_budget() {
        let inst = parse_instance("domain=maze h=1 w=4\nS..G\n").unwrap();
        let r = astar(&inst, |_| 0.0, SearchBudget::expansions(1));
        assert_eq!(r.outcome, Outcome::Exhausted);
        assert_eq!(r.stats.expanded, 1);
        assert!(r.plan.is_none());
    }

    #[test]
    fn unsolvable_is_exhausted() {
        let inst = parse_instance("domain=maze h=1 w=3\nS#G\n").unwrap();
        let r = astar(&inst, |_| 0.0, SearchBudget::expansions(100));
        assert_eq!(r.outcome, Outcome::Exhausted);
        assert!(oracle_solve(&inst).is_err());
    }

    #[test]
    fn budget_needs_a_bound() {
        assert!(SearchBudget::new(None, None).is_err());
        assert!(SearchBudget::new(Some(5), None).is_ok());
    }
}
