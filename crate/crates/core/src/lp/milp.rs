//! Best-bound branch-and-bound over binary columns.
//!
//! Nodes are re-optimised from their parent's final tableau with the dual
//! simplex, or from the root tableau once the warm-start memory budget is
//! used up. Branching picks the most fractional binary, ties to the lowest
//! column index; the down branch is created first.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use super::simplex::Tableau;
use super::{LinearProgram, LpStatus, MilpSolution, MilpStatus};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct MilpOptions<T> {
    /// Relative gap `|incumbent - bound| / max(1, |incumbent|)` at which the
    /// search stops.
    pub gap_tol: T,
    pub node_limit: usize,
    /// Nodes whose relaxation exceeds this value are discarded.
    pub cutoff: Option<T>,
    pub max_iterations: Option<usize>,
    pub warm_start_entries: usize,
}

impl<T: Real> Default for MilpOptions<T> {
    fn default() -> Self {
        MilpOptions {
            gap_tol: T::lit(1e-6),
            node_limit: 200_000,
            cutoff: None,
            max_iterations: None,
            warm_start_entries: 40_000_000,
        }
    }
}

/// -1 free, 0 fixed down, 1 fixed up; one entry per binary column.
type Fixings = Vec<i8>;

struct Node<T> {
    bound: T,
    id: usize,
    fixings: Fixings,
    warm: Option<Arc<Tableau<T>>>,
}

impl<T: Real> PartialEq for Node<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Real> Eq for Node<T> {}
impl<T: Real> PartialOrd for Node<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Node<T> {
    // BinaryHeap is a max-heap: the smallest bound, then the oldest node,
    // must compare greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .partial_cmp(&self.bound)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.id.cmp(&self.id))
    }
}

fn gap<T: Real>(incumbent: T, bound: T) -> T {
    if !incumbent.is_finite() {
        return T::infinity();
    }
    if !bound.is_finite() {
        return T::infinity();
    }
    ((incumbent - bound) / T::one().max(incumbent.abs())).max(T::zero())
}

struct Search<'a, T: Real> {
    lp: &'a LinearProgram<T>,
    opts: &'a MilpOptions<T>,
    binaries: Vec<usize>,
    root: Arc<Tableau<T>>,
    incumbent: Option<(Vec<T>, T)>,
    history: Vec<T>,
    numerical_trouble: bool,
}

impl<'a, T: Real> Search<'a, T> {
    fn apply(&self, tab: &mut Tableau<T>, fixings: &Fixings) {
        for (&j, &f) in self.binaries.iter().zip(fixings) {
            let (lo, hi) = match f {
                0 => (T::zero(), T::zero()),
                1 => (T::one(), T::one()),
                _ => (self.lp.lower[j].max(T::zero()), self.lp.upper[j].min(T::one())),
            };
            tab.set_bounds(j, lo, hi);
        }
    }

    fn solve_node(&mut self, warm: Option<&Arc<Tableau<T>>>, fixings: &Fixings) -> (LpStatus, Tableau<T>) {
        let start = warm.unwrap_or(&self.root);
        let mut tab = Tableau::clone(start);
        self.apply(&mut tab, fixings);
        let status = tab.solve(self.opts.max_iterations);
        if matches!(status, LpStatus::Optimal | LpStatus::Infeasible) || warm.is_none() {
            return (status, tab);
        }
        let mut cold = Tableau::clone(&self.root);
        self.apply(&mut cold, fixings);
        let status = cold.solve(self.opts.max_iterations);
        (status, cold)
    }

    fn cutoff_value(&self) -> T {
        let inc = self.incumbent.as_ref().map(|(_, v)| *v).unwrap_or(T::infinity());
        match self.opts.cutoff {
            Some(c) => inc.min(c),
            None => inc,
        }
    }

    /// True when a node with relaxation value `bound` cannot improve enough.
    fn prunable(&self, bound: T) -> bool {
        if let Some(c) = self.opts.cutoff {
            if bound > c + T::primal_tol() * (T::one() + c.abs()) {
                return true;
            }
        }
        match &self.incumbent {
            Some((_, inc)) => gap(*inc, bound) <= self.opts.gap_tol,
            None => false,
        }
    }

    /// Fixes every binary at the given values and keeps the result if it
    /// improves the incumbent.
    fn try_integral(&mut self, tab: &Tableau<T>, values: &[T]) {
        let fixings: Fixings = values.iter().map(|v| if *v > T::lit(0.5) { 1 } else { 0 }).collect();
        let mut probe = tab.clone();
        self.apply(&mut probe, &fixings);
        if probe.solve(self.opts.max_iterations) != LpStatus::Optimal {
            return;
        }
        let mut x: Vec<T> = (0..probe.num_structural()).map(|j| probe.value(j)).collect();
        for (&j, &f) in self.binaries.iter().zip(&fixings) {
            x[j] = if f == 1 { T::one() } else { T::zero() };
        }
        let obj = self.lp.evaluate(&x);
        let better = match &self.incumbent {
            Some((_, inc)) => obj < *inc - T::epsilon() * (T::one() + inc.abs()),
            None => true,
        };
        if better {
            self.history.push(obj);
            self.incumbent = Some((x, obj));
        }
    }

    fn most_fractional(&self, tab: &Tableau<T>) -> Option<usize> {
        let tol = T::integrality_tol();
        let half = T::lit(0.5);
        let mut best: Option<(usize, T)> = None;
        for (pos, &j) in self.binaries.iter().enumerate() {
            let v = tab.value(j);
            let frac = (v - v.floor()).min(v.ceil() - v);
            if frac > tol && best.is_none_or(|(_, f)| frac > f) {
                best = Some((pos, frac));
            }
            if best.is_some_and(|(_, f)| f >= half) {
                break;
            }
        }
        best.map(|(p, _)| p)
    }
}

pub fn branch_and_bound<T: Real>(lp: &LinearProgram<T>, opts: &MilpOptions<T>) -> MilpSolution<T> {
    let empty = |status| MilpSolution {
        status,
        primal: vec![T::zero(); lp.num_vars()],
        objective: T::infinity(),
        bound: T::neg_infinity(),
        gap: T::infinity(),
        nodes: 0,
        incumbent_history: Vec::new(),
    };
    if lp.validate().is_err() {
        return empty(MilpStatus::NumericalFailure);
    }

    let mut root = Tableau::new(lp);
    match root.solve(opts.max_iterations) {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return empty(MilpStatus::Infeasible),
        LpStatus::Unbounded => return empty(MilpStatus::Unbounded),
        _ => return empty(MilpStatus::NumericalFailure),
    }
    let root_bound = root.objective();
    let binaries: Vec<usize> = (0..lp.num_vars()).filter(|&j| lp.binary[j]).collect();
    let max_stored = (opts.warm_start_entries / root.len().max(1)).max(2);

    let mut search = Search {
        lp,
        opts,
        binaries,
        root: Arc::new(root),
        incumbent: None,
        history: Vec::new(),
        numerical_trouble: false,
    };

    let mut heap = BinaryHeap::new();
    heap.push(Node { bound: root_bound, id: 0, fixings: vec![-1; search.binaries.len()], warm: None });
    let mut next_id = 1;
    let mut stored = 0usize;
    let mut nodes = 0usize;
    let mut pruned_bound = T::infinity();
    let mut hit_limit = false;

    while let Some(node) = heap.pop() {
        if node.warm.is_some() {
            stored -= 1;
        }
        if search.prunable(node.bound) {
            pruned_bound = pruned_bound.min(node.bound);
            continue;
        }
        if nodes >= opts.node_limit {
            hit_limit = true;
            heap.push(node);
            break;
        }
        nodes += 1;

        let (status, tab) = search.solve_node(node.warm.as_ref(), &node.fixings);
        match status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => return empty(MilpStatus::Unbounded),
            _ => {
                search.numerical_trouble = true;
                pruned_bound = pruned_bound.min(node.bound);
                continue;
            }
        }
        let obj = tab.objective();
        if search.prunable(obj) {
            pruned_bound = pruned_bound.min(obj);
            continue;
        }

        let Some(pos) = search.most_fractional(&tab) else {
            let values: Vec<T> = search.binaries.iter().map(|&j| tab.value(j)).collect();
            search.try_integral(&tab, &values);
            continue;
        };

        if node.id == 0 {
            let tol = T::integrality_tol();
            let up: Vec<T> =
                search.binaries.iter().map(|&j| if tab.value(j) > tol { T::one() } else { T::zero() }).collect();
            search.try_integral(&tab, &up);
            let nearest: Vec<T> = search.binaries.iter().map(|&j| tab.value(j).round()).collect();
            search.try_integral(&tab, &nearest);
            if search.prunable(obj) {
                pruned_bound = pruned_bound.min(obj);
                continue;
            }
        }

        let warm = if stored + 2 <= max_stored {
            stored += 2;
            Some(Arc::new(tab))
        } else {
            None
        };
        for value in [0i8, 1] {
            let mut fixings = node.fixings.clone();
            fixings[pos] = value;
            heap.push(Node { bound: obj, id: next_id, fixings, warm: warm.clone() });
            next_id += 1;
        }
    }

    let open_bound = heap.iter().map(|n| n.bound).fold(T::infinity(), T::min);
    let cutoff = search.cutoff_value();
    match search.incumbent.take() {
        Some((primal, objective)) => {
            let bound = open_bound.min(pruned_bound).min(objective);
            let status = if hit_limit {
                MilpStatus::NodeLimit
            } else if search.numerical_trouble && gap(objective, bound) > opts.gap_tol {
                MilpStatus::NumericalFailure
            } else {
                MilpStatus::Optimal
            };
            MilpSolution {
                status,
                primal,
                objective,
                bound,
                gap: gap(objective, bound),
                nodes,
                incumbent_history: search.history,
            }
        }
        None => {
            let status = if hit_limit {
                MilpStatus::NodeLimit
            } else if search.numerical_trouble {
                MilpStatus::NumericalFailure
            } else {
                MilpStatus::Infeasible
            };
            let mut sol = empty(status);
            sol.nodes = nodes;
            sol.bound = open_bound.min(pruned_bound).min(cutoff);
            sol
        }
    }
}
