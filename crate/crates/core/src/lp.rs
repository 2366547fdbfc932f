//! Dense two-phase primal simplex with Bland's anticycling rule.
//!
//! Variables are implicitly non-negative. Problem sizes here are small (a few
//! dozen rows), so a dense tableau is adequate.

const TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub cmp: Cmp,
    pub rhs: f64,
}

/// `maximize objective · x` subject to the constraints and `x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl Problem {
    pub fn new(num_vars: usize) -> Self {
        Problem { num_vars, objective: vec![0.0; num_vars], constraints: Vec::new() }
    }

    pub fn maximize(mut self, objective: Vec<f64>) -> Self {
        assert_eq!(objective.len(), self.num_vars);
        self.objective = objective;
        self
    }

    pub fn add(&mut self, coeffs: Vec<f64>, cmp: Cmp, rhs: f64) {
        assert_eq!(coeffs.len(), self.num_vars);
        self.constraints.push(Constraint { coeffs, cmp, rhs });
    }

    /// Optimises the objective.
    pub fn solve(&self) -> Outcome {
        let Some(mut t) = Tableau::phase_one(self) else {
            return Outcome::Infeasible;
        };
        if !t.phase_two(&self.objective) {
            return Outcome::Unbounded;
        }
        let x = t.solution(self.num_vars);
        let value = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
        Outcome::Optimal { x, value }
    }

    /// A basic feasible solution (a vertex of the feasible region), ignoring
    /// the objective.
    pub fn feasible_vertex(&self) -> Option<Vec<f64>> {
        Tableau::phase_one(self).map(|t| t.solution(self.num_vars))
    }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Columns at or beyond this index are artificial.
    art_start: usize,
    cols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.cols]
    }

    fn phase_one(p: &Problem) -> Option<Tableau> {
        let n = p.num_vars;
        let m = p.constraints.len();
        // normalise to non-negative right-hand sides
        let normalized: Vec<(Vec<f64>, Cmp, f64)> = p
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < 0.0 {
                    let flipped = match c.cmp {
                        Cmp::Le => Cmp::Ge,
                        Cmp::Ge => Cmp::Le,
                        Cmp::Eq => Cmp::Eq,
                    };
                    (c.coeffs.iter().map(|v| -v).collect(), flipped, -c.rhs)
                } else {
                    (c.coeffs.clone(), c.cmp, c.rhs)
                }
            })
            .collect();
        let slacks = normalized.iter().filter(|c| c.1 != Cmp::Eq).count();
        let arts = normalized.iter().filter(|c| c.1 != Cmp::Le).count();
        let art_start = n + slacks;
        let cols = art_start + arts;

        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let (mut s, mut a) = (n, art_start);
        for (coeffs, cmp, rhs) in &normalized {
            let mut row = vec![0.0; cols + 1];
            row[..n].copy_from_slice(coeffs);
            row[cols] = *rhs;
            match cmp {
                Cmp::Le => {
                    row[s] = 1.0;
                    basis.push(s);
                    s += 1;
                }
                Cmp::Ge => {
                    row[s] = -1.0;
                    s += 1;
                    row[a] = 1.0;
                    basis.push(a);
                    a += 1;
                }
                Cmp::Eq => {
                    row[a] = 1.0;
                    basis.push(a);
                    a += 1;
                }
            }
            rows.push(row);
        }

        let mut t = Tableau { rows, basis, art_start, cols };
        if arts > 0 {
            let cost: Vec<f64> = (0..cols).map(|j| if j >= art_start { -1.0 } else { 0.0 }).collect();
            // phase one is bounded below by zero, so it cannot be unbounded
            t.optimize(&cost, cols);
            let infeasibility: f64 =
                (0..t.rows.len()).filter(|&i| t.basis[i] >= art_start).map(|i| t.rhs(i)).sum();
            if infeasibility > FEAS_TOL {
                return None;
            }
            t.drive_out_artificials();
        }
        Some(t)
    }

    fn drive_out_artificials(&mut self) {
        let mut i = 0;
        while i < self.rows.len() {
            if self.basis[i] >= self.art_start {
                match (0..self.art_start).find(|&j| self.rows[i][j].abs() > TOL) {
                    Some(j) => {
                        self.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        // redundant row
                        self.rows.remove(i);
                        self.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
        for row in &mut self.rows {
            let rhs = row[self.cols];
            row.truncate(self.art_start);
            row.push(rhs);
        }
        self.cols = self.art_start;
    }

    fn phase_two(&mut self, objective: &[f64]) -> bool {
        let mut cost = vec![0.0; self.cols];
        cost[..objective.len()].copy_from_slice(objective);
        self.optimize(&cost, self.art_start.min(self.cols))
    }

    /// Maximises `cost · x` over columns `< limit`; false when unbounded.
    fn optimize(&mut self, cost: &[f64], limit: usize) -> bool {
        let mut reduced: Vec<f64> = cost.to_vec();
        for (i, row) in self.rows.iter().enumerate() {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (r, a) in reduced.iter_mut().zip(row) {
                    *r -= cb * a;
                }
            }
        }
        loop {
            let Some(enter) = (0..limit).find(|&j| reduced[j] > TOL) else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][enter];
                if a > TOL {
                    let ratio = self.rhs(i) / a;
                    let better = match leave {
                        None => true,
                        Some((l, best)) => {
                            ratio < best - TOL || (ratio <= best + TOL && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return false;
            };
            self.pivot(r, enter);
            let f = reduced[enter];
            for (red, a) in reduced.iter_mut().zip(&self.rows[r]) {
                *red -= f * a;
            }
        }
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[col] = 0.0;
            }
        }
        self.basis[r] = col;
    }

    fn solution(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] = self.rhs(i).max(0.0);
            }
        }
        x
    }
}
