//! Dynamic programming over states (current vertex, set of unvisited
//! vertices).
//!
//! `V(i, A) = c(i, A) + min_{j in succ(i)} V(j, A \ {j})` with `V(., {}) = 0`.
//! The discrete cost is `c = |A|`; the continuous cost under per-vertex
//! budgets is `c = |A| / a_i`. Moving to a vertex outside `A` keeps the state
//! at the same level, so each level is solved by Dijkstra on the reversed
//! graph, seeded with the exits into `A`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DirectedGraph;

pub const MAX_DP_VERTICES: usize = 20;
const NO_MOVE: u8 = u8::MAX;
const TIE_TOL: f64 = 1e-12;

/// `V(i, A)` for every vertex `i` and every subset `A` (as a bitmask).
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    n: usize,
    values: Vec<f64>,
    policy: Vec<u8>,
    pub start: usize,
    pub target: u32,
}

impl ValueTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn value_at(&self, i: usize, mask: u32) -> f64 {
        self.values[(mask as usize) * self.n + i]
    }

    /// The successor chosen at `(i, mask)`, `None` when `mask` is empty.
    pub fn policy_at(&self, i: usize, mask: u32) -> Option<usize> {
        let p = self.policy[(mask as usize) * self.n + i];
        (p != NO_MOVE).then_some(p as usize)
    }

    /// `V(start, target)`.
    pub fn value(&self) -> f64 {
        self.value_at(self.start, self.target)
    }

    pub fn full_mask(&self) -> u32 {
        full_mask(self.n)
    }
}

pub fn full_mask(n: usize) -> u32 {
    if n == 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

fn solve_table(g: &DirectedGraph, cost: impl Fn(usize, u32) -> f64) -> Result<(Vec<f64>, Vec<u8>)> {
    let n = g.n();
    if n > MAX_DP_VERTICES {
        return Err(Error::StateSpaceTooLarge(n));
    }
    if !g.is_strongly_connected() {
        return Err(Error::NotIrreducible);
    }
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, b) in g.edges() {
        preds[b].push(a);
    }
    let states = 1usize << n;
    let mut values = vec![f64::INFINITY; states * n];
    let mut policy = vec![NO_MOVE; states * n];
    for i in 0..n {
        values[i] = 0.0;
    }

    let mut masks: Vec<u32> = (1..states as u32).collect();
    masks.sort_by_key(|m| m.count_ones());
    let mut d = vec![0.0; n];
    let mut done = vec![false; n];
    for &mask in &masks {
        let base = mask as usize * n;
        for i in 0..n {
            let c = cost(i, mask);
            d[i] = g
                .successors(i)
                .iter()
                .filter(|&&j| mask >> j & 1 == 1)
                .map(|&j| c + values[(mask & !(1 << j)) as usize * n + j])
                .fold(f64::INFINITY, f64::min);
            done[i] = false;
        }
        for _ in 0..n {
            let Some(u) = (0..n).filter(|&u| !done[u]).min_by(|&a, &b| d[a].total_cmp(&d[b])) else { break };
            done[u] = true;
            if mask >> u & 1 == 1 || !d[u].is_finite() {
                continue;
            }
            for &i in &preds[u] {
                if !done[i] {
                    let cand = cost(i, mask) + d[u];
                    if cand < d[i] {
                        d[i] = cand;
                    }
                }
            }
        }
        values[base..base + n].copy_from_slice(&d);
        for i in 0..n {
            let c = cost(i, mask);
            let best = g.successors(i).iter().copied().find(|&j| {
                let next = if mask >> j & 1 == 1 { values[(mask & !(1 << j)) as usize * n + j] } else { values[base + j] };
                c + next <= d[i] + TIE_TOL * d[i].abs().max(1.0)
            });
            policy[base + i] = best.map_or(NO_MOVE, |j| j as u8);
        }
    }
    Ok((values, policy))
}

fn check_vertex(g: &DirectedGraph, start: usize) -> Result<()> {
    if start >= g.n() {
        return Err(Error::InvalidInput(format!("start vertex {start} out of range")));
    }
    Ok(())
}

/// Discrete-time cover cost: every step from `(i, A)` pays `|A|`.
pub fn discrete_value_function(g: &DirectedGraph, start: usize, target_set: u32) -> Result<ValueTable> {
    if g.n() > MAX_DP_VERTICES {
        return Err(Error::StateSpaceTooLarge(g.n()));
    }
    check_vertex(g, start)?;
    if target_set & !full_mask(g.n()) != 0 {
        return Err(Error::InvalidInput("target set has vertices out of range".into()));
    }
    let (values, policy) = solve_table(g, |_, mask| mask.count_ones() as f64)?;
    Ok(ValueTable { n: g.n(), values, policy, start, target: target_set })
}

pub fn validate_budgets(n: usize, budgets: &[f64]) -> Result<()> {
    if budgets.len() != n {
        return Err(Error::BudgetInvalid(format!("expected {n} budgets, found {}", budgets.len())));
    }
    if budgets.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(Error::BudgetInvalid("budgets must be positive".into()));
    }
    let s: f64 = budgets.iter().sum();
    if (s - n as f64).abs() > 1e-9 {
        return Err(Error::BudgetInvalid(format!("budgets sum to {s}, expected {n}")));
    }
    Ok(())
}

/// Continuous-time cover cost with total exit rate `a_i` at vertex `i`:
/// `V(i, A) = |A| / a_i + min_j V(j, A \ {j})`. Target is `V \ {start}`.
pub fn continuous_value_function(g: &DirectedGraph, start: usize, budgets: &[f64]) -> Result<ValueTable> {
    if g.n() > MAX_DP_VERTICES {
        return Err(Error::StateSpaceTooLarge(g.n()));
    }
    check_vertex(g, start)?;
    validate_budgets(g.n(), budgets)?;
    let (values, policy) = solve_table(g, |i, mask| mask.count_ones() as f64 / budgets[i])?;
    let n = g.n();
    Ok(ValueTable { n, values, policy, start, target: full_mask(n) & !(1 << start) })
}

/// Cover cost averaged over a uniformly chosen start (`start = None`) or
/// from a fixed start.
pub fn budget_objective(g: &DirectedGraph, budgets: &[f64], start: Option<usize>) -> Result<f64> {
    let t = continuous_value_function(g, start.unwrap_or(0), budgets)?;
    let n = g.n();
    let full = full_mask(n);
    Ok(match start {
        Some(s) => t.value_at(s, full & !(1 << s)),
        None => (0..n).map(|i| t.value_at(i, full & !(1 << i))).sum::<f64>() / n as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSearch {
    pub best_budgets: Vec<f64>,
    pub best_value: f64,
    pub unit_value: f64,
}

pub const MAX_BUDGET_SEARCH_VERTICES: usize = 6;

fn positive_compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for k in 1..=(total - parts + 1) {
        for mut rest in positive_compositions(total - k, parts - 1) {
            rest.insert(0, k);
            out.push(rest);
        }
    }
    out
}

/// Minimizes [`budget_objective`] over budgets with `sum a_i = N`: a grid
/// with `grid` units of `N / grid`, then pairwise transfers with a
/// shrinking step.
pub fn optimal_budget_search(g: &DirectedGraph, start: Option<usize>, grid: usize) -> Result<BudgetSearch> {
    let n = g.n();
    if n > MAX_BUDGET_SEARCH_VERTICES {
        return Err(Error::StateSpaceTooLarge(n));
    }
    if grid < n {
        return Err(Error::InvalidInput(format!("grid must be at least {n}")));
    }
    if let Some(s) = start {
        check_vertex(g, s)?;
    }
    let unit = vec![1.0; n];
    let unit_value = budget_objective(g, &unit, start)?;
    let scale = n as f64 / grid as f64;
    let mut best = (unit_value, unit.clone());
    for k in positive_compositions(grid, n) {
        let mut a: Vec<f64> = k.iter().map(|&x| x as f64 * scale).collect();
        let s: f64 = a.iter().sum();
        a.iter_mut().for_each(|x| *x *= n as f64 / s);
        let v = budget_objective(g, &a, start)?;
        if v < best.0 - 1e-12 {
            best = (v, a);
        }
    }
    let (mut value, mut a) = best;
    let mut step = scale;
    while step > 1e-6 {
        let mut improved = false;
        for i in 0..n {
            for j in 0..n {
                if i == j || a[j] <= step {
                    continue;
                }
                let mut b = a.clone();
                b[i] += step;
                b[j] -= step;
                let s: f64 = b.iter().sum();
                b.iter_mut().for_each(|x| *x *= n as f64 / s);
                let v = budget_objective(g, &b, start)?;
                if v < value - 1e-14 {
                    value = v;
                    a = b;
                    improved = true;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    Ok(BudgetSearch { best_budgets: a, best_value: value, unit_value })
}

/// Follows the policy from `(start, target)` until every vertex is visited.
pub fn extract_policy_path(table: &ValueTable, start: usize) -> Vec<usize> {
    extract_policy_path_from(table, start, table.target)
}

pub fn extract_policy_path_from(table: &ValueTable, start: usize, mut mask: u32) -> Vec<usize> {
    let mut path = vec![start];
    let mut cur = start;
    let limit = table.n * (table.n + 1) + 1;
    while mask != 0 && path.len() <= limit {
        let Some(j) = table.policy_at(cur, mask) else { break };
        mask &= !(1 << j);
        cur = j;
        path.push(j);
    }
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::hypercube_graph;

    /// Value iteration on the same Bellman equation, as an oracle.
    fn value_iteration(g: &DirectedGraph, cost: impl Fn(usize, u32) -> f64) -> Vec<f64> {
        let n = g.n();
        let states = 1usize << n;
        let mut v = vec![0.0; states * n];
        loop {
            let mut change = 0.0_f64;
            for mask in 1..states as u32 {
                for i in 0..n {
                    let best = g
                        .successors(i)
                        .iter()
                        .map(|&j| v[(mask & !(1 << j)) as usize * n + j])
                        .fold(f64::INFINITY, f64::min);
                    let new = cost(i, mask) + best;
                    change = change.max((new - v[mask as usize * n + i]).abs());
                    v[mask as usize * n + i] = new;
                }
            }
            if change == 0.0 {
                return v;
            }
        }
    }

    #[test]
    fn hamiltonian_values() {
        for n in 2..=6 {
            let g = DirectedGraph::directed_cycle(n).unwrap();
            let t = discrete_value_function(&g, 0, full_mask(n) & !1).unwrap();
            let nf = n as f64;
            assert_eq!(t.value(), nf * (nf - 1.0) / 2.0);
            assert_eq!(t.value_at(0, full_mask(n)), nf * (nf + 1.0) / 2.0);
            assert_eq!(extract_policy_path(&t, 0), (0..n).collect::<Vec<_>>());
            let c = continuous_value_function(&g, 0, &vec![1.0; n]).unwrap();
            assert_eq!(c.value(), t.value());
        }
    }

    #[test]
    fn empty_target_is_free() {
        let g = DirectedGraph::complete(4).unwrap();
        let t = discrete_value_function(&g, 2, 0).unwrap();
        assert_eq!(t.value(), 0.0);
        assert_eq!(t.policy_at(2, 0), None);
    }

    #[test]
    fn non_hamiltonian_segment() {
        let g = DirectedGraph::segment(2).unwrap();
        let t = discrete_value_function(&g, 0, 0b110).unwrap();
        assert_eq!(t.value(), 3.0);
        let t = discrete_value_function(&g, 1, 0b101).unwrap();
        assert_eq!(t.value(), 2.0 + 1.0 + 1.0);
        assert_eq!(extract_policy_path(&t, 1), vec![1, 0, 1, 2]);
    }

    #[test]
    fn bottom_up_matches_value_iteration() {
        let graphs = [
            DirectedGraph::segment(3).unwrap(),
            DirectedGraph::complete(4).unwrap(),
            DirectedGraph::new(5, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 2), (1, 0)]).unwrap(),
            hypercube_graph(3).unwrap(),
        ];
        for g in &graphs {
            let t = discrete_value_function(g, 0, 0).unwrap();
            let vi = value_iteration(g, |_, m| m.count_ones() as f64);
            assert_eq!(t.values, vi);
            let a: Vec<f64> = (0..g.n()).map(|i| 0.5 + i as f64).collect();
            let s: f64 = a.iter().sum();
            let a: Vec<f64> = a.iter().map(|x| x * g.n() as f64 / s).collect();
            let c = continuous_value_function(g, 0, &a).unwrap();
            let vi = value_iteration(g, |i, m| m.count_ones() as f64 / a[i]);
            for (x, y) in c.values.iter().zip(&vi) {
                assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn hypercube_path() {
        let g = hypercube_graph(3).unwrap();
        let t = discrete_value_function(&g, 0, 0xFE).unwrap();
        assert_eq!(t.value(), 28.0);
        let mut p = extract_policy_path(&t, 0);
        assert_eq!(p.len(), 8);
        p.sort();
        assert_eq!(p, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn skewed_budgets_cost_more() {
        let g = DirectedGraph::directed_cycle(3).unwrap();
        let unit = continuous_value_function(&g, 0, &[1.0, 1.0, 1.0]).unwrap().value();
        let skew = continuous_value_function(&g, 0, &[2.0, 0.5, 0.5]).unwrap().value();
        assert_eq!(unit, 3.0);
        assert_eq!(skew, 2.0 / 2.0 + 1.0 / 0.5);
        // From vertex 0 the skew happens to tie; averaged over starts it costs more.
        let avg_unit = budget_objective(&g, &[1.0, 1.0, 1.0], None).unwrap();
        let avg_skew = budget_objective(&g, &[2.0, 0.5, 0.5], None).unwrap();
        assert_eq!(avg_unit, 3.0);
        assert_eq!(avg_skew, 4.5);
        assert!(matches!(continuous_value_function(&g, 0, &[1.0, 1.0, 2.0]), Err(Error::BudgetInvalid(_))));
    }

    #[test]
    fn budget_search_on_directed_cycle() {
        let g = DirectedGraph::directed_cycle(3).unwrap();
        let r = optimal_budget_search(&g, None, 12).unwrap();
        assert!(r.best_budgets.iter().all(|a| (a - 1.0).abs() < 1e-2), "{r:?}");
        let g = DirectedGraph::complete(2).unwrap();
        let r = optimal_budget_search(&g, None, 10).unwrap();
        assert!(r.best_budgets.iter().all(|a| (a - 1.0).abs() < 1e-2));
    }

    #[test]
    fn too_large() {
        let g = DirectedGraph::directed_cycle(21).unwrap();
        assert_eq!(discrete_value_function(&g, 0, 0).unwrap_err(), Error::StateSpaceTooLarge(21));
    }
}
