//! Bounded breadth-first reachability.
//!
//! Successors are generated in a fixed order (enabled rules by id, then the
//! environment tick) and each state keeps the first parent that reached it,
//! so every returned path is the lexicographically smallest among the
//! shortest ones.

use std::collections::HashMap;

use super::system::{Packed, Step, Trace, TransitionSystem};
use crate::model::HomeState;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchMode {
    AnyState,
    /// Only states in which no rule is enabled count as goals.
    StableState,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchOutcome {
    pub found: Option<Trace>,
    /// Distinct states discovered.
    pub explored: usize,
    /// True when every reachable state was visited before the bound cut the
    /// search short, so a miss is a proof of absence rather than bounded
    /// evidence.
    pub exhausted: bool,
}

pub(crate) type PackedGoal<'a> = Box<dyn Fn(&[u32]) -> bool + 'a>;

pub(crate) struct MultiOutcome {
    pub found: Vec<Option<Trace>>,
    pub explored: usize,
    pub exhausted: bool,
}

struct Graph {
    nodes: Vec<Packed>,
    parent: Vec<Option<(usize, Option<usize>)>>,
    index: HashMap<Packed, usize>,
}

impl Graph {
    fn insert(&mut self, s: Packed, parent: Option<(usize, Option<usize>)>) -> Option<usize> {
        if self.index.contains_key(&s) {
            return None;
        }
        let id = self.nodes.len();
        self.index.insert(s.clone(), id);
        self.nodes.push(s);
        self.parent.push(parent);
        Some(id)
    }
}

impl TransitionSystem {
    /// Breadth-first search for a state satisfying `goal`, checked at every
    /// depth from 0 up to the system's depth bound.
    pub fn search(&self, goal: impl Fn(&HomeState) -> bool, mode: SearchMode) -> SearchOutcome {
        let decoded = |s: &[u32]| goal(&self.decode(s));
        let goals: Vec<PackedGoal<'_>> = vec![Box::new(decoded)];
        let mut out = self.search_packed(&goals, mode, self.depth_bound());
        SearchOutcome { found: out.found.pop().flatten(), explored: out.explored, exhausted: out.exhausted }
    }

    /// One breadth-first pass serving several goals; stops early once all
    /// have been hit.
    pub(crate) fn search_packed(&self, goals: &[PackedGoal<'_>], mode: SearchMode, bound: usize) -> MultiOutcome {
        let mut graph = Graph { nodes: Vec::new(), parent: Vec::new(), index: HashMap::new() };
        let mut found: Vec<Option<usize>> = vec![None; goals.len()];
        let mut remaining = goals.len();
        let is_goal_state = |s: &[u32]| mode == SearchMode::AnyState || self.enabled_packed(s).next().is_none();
        let check = |id: usize, s: &[u32], found: &mut Vec<Option<usize>>, remaining: &mut usize| {
            if *remaining == 0 || !is_goal_state(s) {
                return;
            }
            for (g, goal) in goals.iter().enumerate() {
                if found[g].is_none() && goal(s) {
                    found[g] = Some(id);
                    *remaining -= 1;
                }
            }
        };

        let root: Packed = self.initial_packed().into();
        graph.insert(root.clone(), None);
        check(0, &root, &mut found, &mut remaining);

        let mut level = 0..1;
        let mut exhausted = false;
        for depth in 0..=bound {
            if level.is_empty() {
                exhausted = true;
                break;
            }
            if remaining == 0 {
                break;
            }
            if depth == bound {
                exhausted = level.clone().all(|i| {
                    self.successors(&graph.nodes[i]).into_iter().all(|(_, s)| graph.index.contains_key(&s))
                });
                break;
            }
            let next_start = graph.nodes.len();
            for i in level.clone() {
                let current = graph.nodes[i].clone();
                for (rule, succ) in self.successors(&current) {
                    if let Some(id) = graph.insert(succ, Some((i, rule))) {
                        let s = graph.nodes[id].clone();
                        check(id, &s, &mut found, &mut remaining);
                    }
                }
            }
            level = next_start..graph.nodes.len();
        }

        let found = found.into_iter().map(|hit| hit.map(|id| self.rebuild(&graph, id))).collect();
        MultiOutcome { found, explored: graph.nodes.len(), exhausted }
    }

    fn rebuild(&self, graph: &Graph, mut id: usize) -> Trace {
        let mut steps = Vec::new();
        while let Some((parent, rule)) = graph.parent[id] {
            steps.push(Step { transition: self.kind_of(rule), state: self.decode(&graph.nodes[id]) });
            id = parent;
        }
        steps.reverse();
        Trace { initial: self.initial().clone(), steps }
    }

    /// States visited by environment ticks alone from the initial state, up to
    /// the first repetition.
    pub(crate) fn tick_orbit(&self) -> Vec<Packed> {
        let mut seen = HashMap::new();
        let mut orbit: Vec<Packed> = Vec::new();
        let mut s: Packed = self.initial_packed().into();
        while seen.insert(s.clone(), ()).is_none() {
            let next = self.tick_packed(&s);
            orbit.push(s);
            s = next;
        }
        orbit
    }

    /// Every state reachable within the bound, in breadth-first order.
    pub fn reachable_states(&self) -> Vec<HomeState> {
        let mut graph = Graph { nodes: Vec::new(), parent: Vec::new(), index: HashMap::new() };
        graph.insert(self.initial_packed().into(), None);
        let mut level = 0..1;
        for _ in 0..self.depth_bound() {
            let next_start = graph.nodes.len();
            for i in level.clone() {
                let current = graph.nodes[i].clone();
                for (rule, succ) in self.successors(&current) {
                    graph.insert(succ, Some((i, rule)));
                }
            }
            level = next_start..graph.nodes.len();
            if level.is_empty() {
                break;
            }
        }
        graph.nodes.iter().map(|s| self.decode(s)).collect()
    }
}
