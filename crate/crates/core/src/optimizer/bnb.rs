//! Exact multiple-choice knapsack: pick one option per group, maximise the
//! summed weight under several capacity dimensions.
//!
//! Depth-first branch and bound over groups in their given order, options in
//! descending weight. Because the incumbent is only replaced by strictly
//! better solutions, the result is the lexicographically first optimum in
//! that search order, so equal inputs always give equal answers.

use crate::lp::{Cmp, Outcome, Problem};

const USAGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub weight: u64,
    pub usage: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mckp {
    pub capacity: Vec<f64>,
    pub groups: Vec<Vec<Choice>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MckpSolution {
    /// Index of the chosen option within each original group.
    pub picks: Vec<usize>,
    pub value: u64,
    /// False when the node budget ran out before optimality was proven.
    pub proven: bool,
    pub nodes: u64,
}

struct Prepared {
    /// Surviving original indices per group, in search order.
    order: Vec<Vec<usize>>,
    suffix_max: Vec<u64>,
    suffix_min_usage: Vec<Vec<f64>>,
}

fn dominated(a: &Choice, ai: usize, b: &Choice, bi: usize) -> bool {
    let le = b.usage.iter().zip(&a.usage).all(|(x, y)| *x <= *y + USAGE_EPS);
    if !le || b.weight < a.weight {
        return false;
    }
    let strictly = b.weight > a.weight || b.usage.iter().zip(&a.usage).any(|(x, y)| *x < *y - USAGE_EPS);
    strictly || bi < ai
}

impl Mckp {
    fn fits(&self, usage: &[f64], cap: &[f64]) -> bool {
        usage.iter().zip(cap).all(|(u, c)| *u <= *c + USAGE_EPS)
    }

    fn prepare(&self) -> Option<Prepared> {
        let dims = self.capacity.len();
        let mut order = Vec::with_capacity(self.groups.len());
        for g in &self.groups {
            let alive: Vec<usize> = (0..g.len()).filter(|&i| self.fits(&g[i].usage, &self.capacity)).collect();
            let mut keep: Vec<usize> = alive
                .iter()
                .copied()
                .filter(|&i| !alive.iter().any(|&k| k != i && dominated(&g[i], i, &g[k], k)))
                .collect();
            if keep.is_empty() {
                return None;
            }
            keep.sort_by(|&a, &b| g[b].weight.cmp(&g[a].weight).then(a.cmp(&b)));
            order.push(keep);
        }
        let n = self.groups.len();
        let mut suffix_max = vec![0u64; n + 1];
        let mut suffix_min_usage = vec![vec![0.0; dims]; n + 1];
        for j in (0..n).rev() {
            let g = &self.groups[j];
            suffix_max[j] = suffix_max[j + 1] + order[j].iter().map(|&i| g[i].weight).max().unwrap();
            for d in 0..dims {
                let m = order[j].iter().map(|&i| g[i].usage[d]).fold(f64::INFINITY, f64::min);
                suffix_min_usage[j][d] = suffix_min_usage[j + 1][d] + m;
            }
        }
        Some(Prepared { order, suffix_max, suffix_min_usage })
    }

    /// Greedy feasible solution used only to seed the pruning threshold.
    fn heuristic(&self, prep: &Prepared) -> Option<(Vec<usize>, u64)> {
        let dims = self.capacity.len();
        let scale: Vec<f64> = self.capacity.iter().map(|c| if *c > 0.0 { 1.0 / c } else { 1.0 }).collect();
        let cost = |u: &[f64]| u.iter().zip(&scale).map(|(a, b)| a * b).sum::<f64>();
        let mut picks = Vec::with_capacity(self.groups.len());
        let mut used = vec![0.0; dims];
        for (j, g) in self.groups.iter().enumerate() {
            let i = *prep.order[j]
                .iter()
                .min_by(|&&a, &&b| cost(&g[a].usage).total_cmp(&cost(&g[b].usage)).then(a.cmp(&b)))
                .unwrap();
            for d in 0..dims {
                used[d] += g[i].usage[d];
            }
            picks.push(i);
        }
        if !self.fits(&used, &self.capacity) {
            return None;
        }
        loop {
            let mut best: Option<(u64, usize, usize)> = None;
            for (j, g) in self.groups.iter().enumerate() {
                let cur = &g[picks[j]];
                for &i in &prep.order[j] {
                    let o = &g[i];
                    if o.weight <= cur.weight {
                        continue;
                    }
                    let ok = (0..dims).all(|d| used[d] - cur.usage[d] + o.usage[d] <= self.capacity[d] + USAGE_EPS);
                    if ok && best.is_none_or(|b| o.weight - cur.weight > b.0) {
                        best = Some((o.weight - cur.weight, j, i));
                    }
                }
            }
            let Some((_, j, i)) = best else { break };
            let g = &self.groups[j];
            for d in 0..dims {
                used[d] += g[i].usage[d] - g[picks[j]].usage[d];
            }
            picks[j] = i;
        }
        let value = picks.iter().enumerate().map(|(j, &i)| self.groups[j][i].weight).sum();
        Some((picks, value))
    }

    /// LP relaxation of the groups from `depth` on; `None` if infeasible.
    fn lp_bound(&self, prep: &Prepared, depth: usize, cap: &[f64]) -> Option<f64> {
        let mut vars = Vec::new();
        for j in depth..self.groups.len() {
            for &i in &prep.order[j] {
                if self.fits(&self.groups[j][i].usage, cap) {
                    vars.push((j, i));
                }
            }
        }
        let mut p = Problem::new(vars.len())
            .maximize(vars.iter().map(|&(j, i)| self.groups[j][i].weight as f64).collect());
        for (d, &c) in cap.iter().enumerate() {
            p.add(vars.iter().map(|&(j, i)| self.groups[j][i].usage[d]).collect(), Cmp::Le, c.max(0.0));
        }
        for j in depth..self.groups.len() {
            p.add(vars.iter().map(|&(k, _)| if k == j { 1.0 } else { 0.0 }).collect(), Cmp::Eq, 1.0);
        }
        match p.solve() {
            Outcome::Optimal { value, .. } => Some(value),
            Outcome::Infeasible => None,
            Outcome::Unbounded => Some(f64::INFINITY),
        }
    }

    /// Solves exactly (or within `node_limit` search nodes). Solutions worth
    /// less than `floor` are never reported. Returns `None` when nothing
    /// feasible exists.
    pub fn solve(&self, floor: u64, node_limit: Option<u64>) -> Option<MckpSolution> {
        let prep = self.prepare()?;
        let heuristic = self.heuristic(&prep);
        let seed = heuristic.as_ref().map_or(floor, |h| h.1.max(floor));
        let mut search = Search {
            problem: self,
            prep: &prep,
            incumbent: seed as i128 - 1,
            best: None,
            current: Vec::with_capacity(self.groups.len()),
            nodes: 0,
            limit: node_limit.unwrap_or(u64::MAX),
            exhausted: false,
        };
        let cap = self.capacity.clone();
        search.dfs(0, &cap, 0);
        let (nodes, exhausted) = (search.nodes, search.exhausted);
        match search.best {
            Some((picks, value)) => Some(MckpSolution { picks, value, proven: !exhausted, nodes }),
            None if exhausted => heuristic
                .filter(|h| h.1 >= floor)
                .map(|(picks, value)| MckpSolution { picks, value, proven: false, nodes }),
            None => None,
        }
    }

    /// Exhaustive enumeration; only for small instances.
    pub fn brute_force(&self) -> Option<u64> {
        fn go(p: &Mckp, j: usize, cap: &mut Vec<f64>, value: u64, best: &mut Option<u64>) {
            if j == p.groups.len() {
                if best.is_none_or(|b| value > b) {
                    *best = Some(value);
                }
                return;
            }
            for o in &p.groups[j] {
                if p.fits(&o.usage, cap) {
                    for (c, u) in cap.iter_mut().zip(&o.usage) {
                        *c -= u;
                    }
                    go(p, j + 1, cap, value + o.weight, best);
                    for (c, u) in cap.iter_mut().zip(&o.usage) {
                        *c += u;
                    }
                }
            }
        }
        let mut best = None;
        go(self, 0, &mut self.capacity.clone(), 0, &mut best);
        best
    }
}

struct Search<'a> {
    problem: &'a Mckp,
    prep: &'a Prepared,
    incumbent: i128,
    best: Option<(Vec<usize>, u64)>,
    current: Vec<usize>,
    nodes: u64,
    limit: u64,
    exhausted: bool,
}

impl Search<'_> {
    fn beats(&self, bound: f64) -> bool {
        bound + 1e-6 >= (self.incumbent + 1) as f64
    }

    fn dfs(&mut self, depth: usize, cap: &[f64], value: u64) {
        if self.exhausted {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.limit {
            self.exhausted = true;
            return;
        }
        let p = self.problem;
        let n = p.groups.len();
        if depth == n {
            if value as i128 > self.incumbent {
                self.incumbent = value as i128;
                self.best = Some((self.current.clone(), value));
            }
            return;
        }
        if !self.beats((value + self.prep.suffix_max[depth]) as f64) {
            return;
        }
        if self.prep.suffix_min_usage[depth].iter().zip(cap).any(|(u, c)| *u > *c + USAGE_EPS) {
            return;
        }
        let mut fit_bound = value;
        for j in depth..n {
            let g = &p.groups[j];
            match self.prep.order[j].iter().find(|&&i| p.fits(&g[i].usage, cap)) {
                Some(&i) => fit_bound += g[i].weight,
                None => return,
            }
        }
        if !self.beats(fit_bound as f64) {
            return;
        }
        if n - depth > 1 {
            match p.lp_bound(self.prep, depth, cap) {
                Some(b) if self.beats(value as f64 + b) => {}
                _ => return,
            }
        }
        let mut next = cap.to_vec();
        for &i in &self.prep.order[depth] {
            let o = &p.groups[depth][i];
            if !p.fits(&o.usage, cap) {
                continue;
            }
            for (d, c) in next.iter_mut().enumerate() {
                *c = cap[d] - o.usage[d];
            }
            self.current.push(i);
            self.dfs(depth + 1, &next, value + o.weight);
            self.current.pop();
            if self.exhausted {
                return;
            }
        }
    }
}
