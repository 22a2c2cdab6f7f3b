//! Dense bounded-variable simplex.
//!
//! Every row `i` gets a logical column `n + i` with `a_i x - y_i = 0`, and the
//! row relation becomes a bound on `y_i`. The tableau stores `B^-1 [A, -I]`
//! row-major; with a zero right-hand side the basic values are always
//! `x_B = -sum_N T[:, j] x_j`.

use super::{LinearProgram, LpSolution, LpStatus, Relation};
use crate::scalar::Real;

const NONBASIC: usize = usize::MAX;
/// Consecutive degenerate steps before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 40;
/// Pivots between recomputing values and reduced costs from scratch.
const REFRESH_EVERY: usize = 64;

#[derive(Clone, Debug)]
pub(crate) struct Tableau<T> {
    m: usize,
    n: usize,
    w: usize,
    t: Vec<T>,
    lower: Vec<T>,
    upper: Vec<T>,
    cost: Vec<T>,
    x: Vec<T>,
    basis: Vec<usize>,
    row_of: Vec<usize>,
    d: Vec<T>,
    /// Structural columns of the original matrix, for refactorisation.
    columns: Vec<Vec<(usize, T)>>,
    offset: T,
    dual_tol: T,
    pub iterations: usize,
    degenerate_run: usize,
    bland: bool,
    since_refresh: usize,
}

enum Step<T> {
    Flip,
    Pivot { row: usize, target: T },
}

enum DualOutcome {
    PrimalFeasible,
    Infeasible,
    Stalled,
}

impl<T: Real> Tableau<T> {
    pub fn new(lp: &LinearProgram<T>) -> Self {
        let n = lp.num_vars();
        let m = lp.num_rows();
        let w = n + m;
        let mut columns: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a == T::zero() {
                    continue;
                }
                match columns[j].last_mut() {
                    Some((r, v)) if *r == i => *v += a,
                    _ => columns[j].push((i, a)),
                }
            }
        }

        let mut lower = Vec::with_capacity(w);
        let mut upper = Vec::with_capacity(w);
        for j in 0..n {
            let (mut lo, mut hi) = (lp.lower[j], lp.upper[j]);
            if lp.binary[j] {
                lo = lo.max(T::zero());
                hi = hi.min(T::one());
            }
            lower.push(lo);
            upper.push(hi);
        }
        for row in &lp.rows {
            let (lo, hi) = match row.relation {
                Relation::Le => (T::neg_infinity(), row.rhs),
                Relation::Ge => (row.rhs, T::infinity()),
                Relation::Eq => (row.rhs, row.rhs),
            };
            lower.push(lo);
            upper.push(hi);
        }
        let mut cost = lp.objective.clone();
        cost.resize(w, T::zero());
        let cost_scale = cost.iter().fold(T::one(), |a, c| a.max(c.abs()));

        let mut tab = Tableau {
            m,
            n,
            w,
            t: Vec::new(),
            lower,
            upper,
            cost,
            x: vec![T::zero(); w],
            basis: Vec::new(),
            row_of: Vec::new(),
            d: vec![T::zero(); w],
            columns,
            offset: lp.offset,
            dual_tol: T::dual_tol() * cost_scale,
            iterations: 0,
            degenerate_run: 0,
            bland: false,
            since_refresh: 0,
        };
        for j in 0..n {
            tab.x[j] = tab.resting_value(j);
        }
        tab.slack_basis();
        tab
    }

    fn resting_value(&self, j: usize) -> T {
        if self.lower[j].is_finite() {
            self.lower[j]
        } else if self.upper[j].is_finite() {
            self.upper[j]
        } else {
            T::zero()
        }
    }

    /// Resets to the all-logical basis, keeping structural values.
    fn slack_basis(&mut self) {
        let (m, n, w) = (self.m, self.n, self.w);
        self.t = vec![T::zero(); m * w];
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, a) in col {
                self.t[i * w + j] = -a;
            }
        }
        for i in 0..m {
            self.t[i * w + n + i] = T::one();
        }
        self.basis = (n..w).collect();
        self.row_of = vec![NONBASIC; w];
        for i in 0..m {
            self.row_of[n + i] = i;
        }
        self.refresh_values();
        self.refresh_duals();
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.t[i * self.w + j]
    }

    #[inline]
    fn is_basic(&self, j: usize) -> bool {
        self.row_of[j] != NONBASIC
    }

    #[inline]
    fn ptol(&self, bound: T) -> T {
        T::primal_tol() * (T::one() + bound.abs())
    }

    fn refresh_values(&mut self) {
        let w = self.w;
        let nonbasic: Vec<(usize, T)> = (0..w)
            .filter(|&j| !self.is_basic(j) && self.x[j] != T::zero())
            .map(|j| (j, self.x[j]))
            .collect();
        for i in 0..self.m {
            let row = &self.t[i * w..(i + 1) * w];
            let v: T = nonbasic.iter().map(|&(j, xj)| row[j] * xj).sum();
            self.x[self.basis[i]] = -v;
        }
        self.since_refresh = 0;
    }

    fn refresh_duals(&mut self) {
        let w = self.w;
        self.d.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb == T::zero() {
                continue;
            }
            let row = &self.t[i * w..(i + 1) * w];
            for (dj, tij) in self.d.iter_mut().zip(row) {
                *dj -= cb * *tij;
            }
        }
        for &b in &self.basis {
            self.d[b] = T::zero();
        }
    }

    fn infeasibility(&self, j: usize) -> T {
        let v = self.x[j];
        if v < self.lower[j] - self.ptol(self.lower[j]) {
            self.lower[j] - v
        } else if v > self.upper[j] + self.ptol(self.upper[j]) {
            v - self.upper[j]
        } else {
            T::zero()
        }
    }

    fn primal_feasible(&self) -> bool {
        self.basis.iter().all(|&b| self.infeasibility(b) == T::zero())
    }

    /// Gauss-Jordan step on entry `(r, q)`, touching only the nonzeros of the
    /// pivot row.
    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.w;
        let piv = self.t[r * w + q];
        let inv = T::one() / piv;
        let tiny = T::epsilon() * T::lit(64.0);
        let mut prow: Vec<(usize, T)> = Vec::with_capacity(64);
        {
            let row = &mut self.t[r * w..(r + 1) * w];
            for (j, v) in row.iter_mut().enumerate() {
                if *v != T::zero() {
                    *v *= inv;
                    if v.abs() < tiny {
                        *v = T::zero();
                    } else {
                        prow.push((j, *v));
                    }
                }
            }
            row[q] = T::one();
        }
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let base = i * w;
            let f = self.t[base + q];
            if f == T::zero() {
                continue;
            }
            for &(j, v) in &prow {
                let e = &mut self.t[base + j];
                *e -= f * v;
                if e.abs() < tiny {
                    *e = T::zero();
                }
            }
            self.t[base + q] = T::zero();
        }
        let f = self.d[q];
        if f != T::zero() {
            for &(j, v) in &prow {
                self.d[j] -= f * v;
            }
        }
        self.d[q] = T::zero();
        let leaving = self.basis[r];
        self.row_of[leaving] = NONBASIC;
        self.basis[r] = q;
        self.row_of[q] = r;
        self.iterations += 1;
        self.since_refresh += 1;
    }

    fn can_increase(&self, j: usize) -> bool {
        self.x[j] < self.upper[j] - self.ptol(self.upper[j]) || self.upper[j] == T::infinity()
    }

    fn can_decrease(&self, j: usize) -> bool {
        self.x[j] > self.lower[j] + self.ptol(self.lower[j]) || self.lower[j] == T::neg_infinity()
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.lower[j] == self.upper[j]
    }

    /// Pricing over `dvec`; returns `(column, direction)`.
    fn choose_entering(&self, dvec: &[T], tol: T) -> Option<(usize, T)> {
        let mut best: Option<(usize, T, T)> = None;
        for (j, &dj) in dvec.iter().enumerate().take(self.w) {
            if self.is_basic(j) || self.is_fixed(j) {
                continue;
            }
            let cand = if dj < -tol && self.can_increase(j) {
                Some((T::one(), -dj))
            } else if dj > tol && self.can_decrease(j) {
                Some((-T::one(), dj))
            } else {
                None
            };
            if let Some((dir, score)) = cand {
                if self.bland {
                    return Some((j, dir));
                }
                if best.is_none_or(|(_, _, s)| score > s) {
                    best = Some((j, dir, score));
                }
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// Distance basic row `i` may travel at `rate` before hitting a bound,
    /// and the bound it stops at.
    fn row_limit(&self, i: usize, rate: T) -> Option<(T, T)> {
        let b = self.basis[i];
        let (v, lo, hi) = (self.x[b], self.lower[b], self.upper[b]);
        if rate < T::zero() {
            if v > hi + self.ptol(hi) {
                Some((v - hi, hi))
            } else if v < lo - self.ptol(lo) {
                None
            } else if lo.is_finite() {
                Some(((v - lo).max(T::zero()), lo))
            } else {
                None
            }
        } else if v < lo - self.ptol(lo) {
            Some((lo - v, lo))
        } else if v > hi + self.ptol(hi) {
            None
        } else if hi.is_finite() {
            Some(((hi - v).max(T::zero()), hi))
        } else {
            None
        }
    }

    /// Two-pass ratio test. Returns the step and its length, or `None` when
    /// the direction is unbounded.
    fn ratio_test(&self, q: usize, dir: T) -> Option<(Step<T>, T)> {
        let ptol = T::pivot_tol();
        let mut relaxed = T::infinity();
        let mut rows: Vec<(usize, T, T, T)> = Vec::new();
        for i in 0..self.m {
            let a = self.at(i, q);
            if a.abs() <= ptol {
                continue;
            }
            let rate = -a * dir;
            if let Some((dist, target)) = self.row_limit(i, rate) {
                let slack = self.ptol(target).min(T::primal_tol() * T::lit(10.0));
                let r = (dist + slack) / rate.abs();
                if r < relaxed {
                    relaxed = r;
                }
                rows.push((i, dist / rate.abs(), rate.abs(), target));
            }
        }
        let flip = if self.lower[q].is_finite() && self.upper[q].is_finite() {
            Some(self.upper[q] - self.lower[q])
        } else {
            None
        };

        let mut chosen: Option<(usize, T, T, T)> = None;
        for &(i, ratio, mag, target) in &rows {
            if ratio > relaxed {
                continue;
            }
            let better = match chosen {
                None => true,
                Some((ci, _, cmag, _)) => {
                    if self.bland {
                        self.basis[i] < self.basis[ci]
                    } else {
                        mag > cmag
                    }
                }
            };
            if better {
                chosen = Some((i, ratio, mag, target));
            }
        }

        match (chosen, flip) {
            (Some((_, ratio, _, _)), Some(f)) if f <= ratio => Some((Step::Flip, f)),
            (Some((row, ratio, _, target)), _) => Some((Step::Pivot { row, target }, ratio.max(T::zero()))),
            (None, Some(f)) => Some((Step::Flip, f)),
            (None, None) => None,
        }
    }

    fn apply_move(&mut self, q: usize, delta: T) {
        if delta == T::zero() {
            return;
        }
        self.x[q] += delta;
        let w = self.w;
        for i in 0..self.m {
            let a = self.t[i * w + q];
            if a != T::zero() {
                let b = self.basis[i];
                self.x[b] -= a * delta;
            }
        }
    }

    fn primal(&mut self, max_iter: usize) -> LpStatus {
        let mut verified = false;
        loop {
            if self.iterations >= max_iter {
                return LpStatus::IterationLimit;
            }
            if self.since_refresh >= REFRESH_EVERY {
                self.refresh_values();
                self.refresh_duals();
            }
            let infeasible: Vec<(usize, T)> = (0..self.m)
                .filter_map(|i| {
                    let b = self.basis[i];
                    let v = self.x[b];
                    if v < self.lower[b] - self.ptol(self.lower[b]) {
                        Some((i, -T::one()))
                    } else if v > self.upper[b] + self.ptol(self.upper[b]) {
                        Some((i, T::one()))
                    } else {
                        None
                    }
                })
                .collect();
            let phase_one = !infeasible.is_empty();
            let entering = if phase_one {
                let w = self.w;
                let mut d1 = vec![T::zero(); w];
                for &(i, c) in &infeasible {
                    let row = &self.t[i * w..(i + 1) * w];
                    for (dj, tij) in d1.iter_mut().zip(row) {
                        *dj -= c * *tij;
                    }
                }
                for &b in &self.basis {
                    d1[b] = T::zero();
                }
                self.choose_entering(&d1, T::dual_tol())
            } else {
                self.choose_entering(&self.d, self.dual_tol)
            };

            let Some((q, dir)) = entering else {
                if !verified {
                    self.refresh_values();
                    self.refresh_duals();
                    verified = true;
                    continue;
                }
                return if phase_one { LpStatus::Infeasible } else { LpStatus::Optimal };
            };
            verified = false;

            let Some((step, len)) = self.ratio_test(q, dir) else {
                return if phase_one { LpStatus::NumericalFailure } else { LpStatus::Unbounded };
            };

            if len <= T::epsilon() * T::lit(1e3) {
                self.degenerate_run += 1;
                if self.degenerate_run > DEGENERATE_LIMIT {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
                self.bland = false;
            }

            match step {
                Step::Flip => {
                    let target = if dir > T::zero() { self.upper[q] } else { self.lower[q] };
                    let delta = target - self.x[q];
                    self.apply_move(q, delta);
                    self.x[q] = target;
                    self.iterations += 1;
                }
                Step::Pivot { row, target } => {
                    self.apply_move(q, dir * len);
                    let leaving = self.basis[row];
                    self.x[leaving] = target;
                    self.pivot(row, q);
                }
            }
        }
    }

    /// Moves nonbasic columns to the bound their reduced cost prefers.
    /// Returns false if some column cannot be made dual feasible.
    fn make_dual_feasible(&mut self) -> bool {
        let mut ok = true;
        for j in 0..self.w {
            if self.is_basic(j) || self.is_fixed(j) {
                continue;
            }
            let dj = self.d[j];
            let at_lower = self.x[j] == self.lower[j];
            let at_upper = self.x[j] == self.upper[j];
            if dj < -self.dual_tol && !at_upper {
                if self.upper[j].is_finite() {
                    let delta = self.upper[j] - self.x[j];
                    self.apply_move(j, delta);
                    self.x[j] = self.upper[j];
                } else {
                    ok = false;
                }
            } else if dj > self.dual_tol && !at_lower {
                if self.lower[j].is_finite() {
                    let delta = self.lower[j] - self.x[j];
                    self.apply_move(j, delta);
                    self.x[j] = self.lower[j];
                } else {
                    ok = false;
                }
            }
        }
        ok
    }

    fn dual(&mut self, max_iter: usize) -> DualOutcome {
        let ptol = T::pivot_tol();
        loop {
            if self.iterations >= max_iter {
                return DualOutcome::Stalled;
            }
            if self.since_refresh >= REFRESH_EVERY {
                self.refresh_values();
                self.refresh_duals();
            }
            let mut leave: Option<(usize, T)> = None;
            for i in 0..self.m {
                let b = self.basis[i];
                let inf = self.infeasibility(b);
                if inf > T::zero() && leave.is_none_or(|(_, v)| inf > v) {
                    leave = Some((i, inf));
                }
            }
            let Some((r, _)) = leave else {
                return DualOutcome::PrimalFeasible;
            };
            let b = self.basis[r];
            let v = self.x[b];
            let target = if v < self.lower[b] { self.lower[b] } else { self.upper[b] };
            let delta = target - v;
            let sign = if delta > T::zero() { T::one() } else { -T::one() };

            let mut relaxed = T::infinity();
            let mut cands: Vec<(usize, T, T)> = Vec::new();
            for j in 0..self.w {
                if self.is_basic(j) || self.is_fixed(j) {
                    continue;
                }
                let a = self.at(r, j);
                if a.abs() <= ptol {
                    continue;
                }
                // Raising x_j moves x_b by -a.
                let eligible = (self.can_increase(j) && -a * sign > T::zero())
                    || (self.can_decrease(j) && a * sign > T::zero());
                if !eligible {
                    continue;
                }
                let dj = self.d[j].abs();
                let r_relaxed = (dj + self.dual_tol) / a.abs();
                if r_relaxed < relaxed {
                    relaxed = r_relaxed;
                }
                cands.push((j, dj / a.abs(), a.abs()));
            }
            let mut chosen: Option<(usize, T)> = None;
            for &(j, ratio, mag) in &cands {
                if ratio > relaxed {
                    continue;
                }
                let better = match chosen {
                    None => true,
                    Some((_, cmag)) => !self.bland && mag > cmag,
                };
                if better {
                    chosen = Some((j, mag));
                }
            }
            let Some((q, _)) = chosen else {
                return DualOutcome::Infeasible;
            };
            let step = delta / (-self.at(r, q));
            self.apply_move(q, step);
            self.x[b] = target;
            self.pivot(r, q);
        }
    }

    /// Rebuilds `B^-1 [A, -I]` from the original columns for the current
    /// basis. Falls back to the logical basis if `B` is singular.
    fn refactor(&mut self) {
        let (m, n, w) = (self.m, self.n, self.w);
        let mut bmat = vec![T::zero(); m * m];
        for (c, &j) in self.basis.iter().enumerate() {
            if j < n {
                for &(i, a) in &self.columns[j] {
                    bmat[i * m + c] = a;
                }
            } else {
                bmat[(j - n) * m + c] = -T::one();
            }
        }
        let Some(inv) = invert(m, &mut bmat) else {
            self.slack_basis();
            return;
        };
        let mut t = vec![T::zero(); m * w];
        for (j, col) in self.columns.iter().enumerate() {
            for &(k, a) in col {
                for i in 0..m {
                    let v = inv[i * m + k];
                    if v != T::zero() {
                        t[i * w + j] += v * a;
                    }
                }
            }
        }
        for k in 0..m {
            for i in 0..m {
                t[i * w + n + k] = -inv[i * m + k];
            }
        }
        self.t = t;
        self.refresh_values();
        self.refresh_duals();
    }

    /// Largest mismatch between row activities and their logical columns.
    fn residual(&self) -> T {
        let mut act = vec![T::zero(); self.m];
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, a) in col {
                act[i] += a * self.x[j];
            }
        }
        act.iter()
            .enumerate()
            .map(|(i, a)| (*a - self.x[self.n + i]).abs() / (T::one() + a.abs()))
            .fold(T::zero(), T::max)
    }

    pub fn set_bounds(&mut self, j: usize, lo: T, hi: T) {
        self.lower[j] = lo;
        self.upper[j] = hi;
        if self.is_basic(j) {
            return;
        }
        let target = if self.x[j] < lo || !self.x[j].is_finite() {
            lo
        } else if self.x[j] > hi {
            hi
        } else if self.x[j] == lo || self.x[j] == hi {
            return;
        } else if self.d[j] >= T::zero() && lo.is_finite() {
            lo
        } else if hi.is_finite() {
            hi
        } else {
            return;
        };
        let delta = target - self.x[j];
        self.apply_move(j, delta);
        self.x[j] = target;
    }

    pub fn solve(&mut self, max_iterations: Option<usize>) -> LpStatus {
        let budget = max_iterations.unwrap_or(50 * (self.m + self.w) + 10_000);
        let max_iter = self.iterations + budget;
        let mut status = LpStatus::NumericalFailure;
        for attempt in 0..3 {
            self.refresh_values();
            self.refresh_duals();
            if !self.primal_feasible() && self.make_dual_feasible() {
                match self.dual(max_iter) {
                    DualOutcome::Infeasible if self.residual() < T::primal_tol() * T::lit(100.0) => {
                        return LpStatus::Infeasible;
                    }
                    _ => {}
                }
            }
            status = self.primal(max_iter);
            let clean = self.residual() < T::primal_tol() * T::lit(100.0);
            match status {
                LpStatus::Optimal | LpStatus::Infeasible | LpStatus::Unbounded if clean => return status,
                LpStatus::IterationLimit => return status,
                _ => {}
            }
            if attempt == 0 {
                self.refactor();
            } else {
                self.slack_basis();
            }
            self.bland = true;
        }
        status
    }

    pub fn objective(&self) -> T {
        self.offset + (0..self.n).map(|j| self.cost[j] * self.x[j]).sum::<T>()
    }

    pub fn value(&self, j: usize) -> T {
        self.x[j]
    }

    pub fn num_structural(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn solution(&mut self, status: LpStatus) -> LpSolution<T> {
        if status == LpStatus::Optimal {
            self.refresh_duals();
        }
        let primal: Vec<T> = self.x[..self.n].to_vec();
        LpSolution {
            status,
            objective: if status == LpStatus::Optimal { self.objective() } else { T::nan() },
            primal,
            duals: self.d[self.n..].to_vec(),
            reduced_costs: self.d[..self.n].to_vec(),
            iterations: self.iterations,
        }
    }
}

/// Dense Gauss-Jordan inverse with partial pivoting (row-major, in place).
fn invert<T: Real>(m: usize, a: &mut [T]) -> Option<Vec<T>> {
    let mut inv = vec![T::zero(); m * m];
    for i in 0..m {
        inv[i * m + i] = T::one();
    }
    for c in 0..m {
        let p = (c..m).max_by(|&x, &y| {
            a[x * m + c].abs().partial_cmp(&a[y * m + c].abs()).unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[p * m + c].abs() <= T::epsilon() * T::lit(1e3) {
            return None;
        }
        if p != c {
            for k in 0..m {
                a.swap(p * m + k, c * m + k);
                inv.swap(p * m + k, c * m + k);
            }
        }
        let piv = T::one() / a[c * m + c];
        for k in 0..m {
            a[c * m + k] *= piv;
            inv[c * m + k] *= piv;
        }
        for r in 0..m {
            if r == c {
                continue;
            }
            let f = a[r * m + c];
            if f == T::zero() {
                continue;
            }
            for k in 0..m {
                let (ack, ick) = (a[c * m + k], inv[c * m + k]);
                a[r * m + k] -= f * ack;
                inv[r * m + k] -= f * ick;
            }
        }
    }
    Some(inv)
}
