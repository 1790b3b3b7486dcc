//! Small dense linear programs: two-phase tableau simplex with Bland's rule.
//!
//! Problems here have a handful of variables (at most a few times the
//! dimension), so a dense tableau is both simplest and fastest. Every optimum
//! is certified by an explicit dual solution: the basis duals `B^T y = c_B`
//! must be dual feasible and close the duality gap.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Required bound on the duality gap of a reported optimum.
pub const GAP_TOLERANCE: f64 = 1e-9;

const PIVOT_EPS: f64 = 1e-12;
const COST_EPS: f64 = 1e-11;
const FEAS_EPS: f64 = 1e-9;
const MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// `minimize c^T x` subject to linear constraints and `x >= 0`.
#[derive(Debug, Clone)]
pub struct Lp {
    n: usize,
    c: Vec<f64>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per constraint, in insertion order.
    pub duals: Vec<f64>,
    pub duality_gap: f64,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            LpOutcome::Infeasible => None,
        }
    }
}

impl Lp {
    pub fn new(n: usize) -> Self {
        Lp {
            n,
            c: vec![0.0; n],
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) -> &mut Self {
        self.c[var] = cost;
        self
    }

    pub fn constraint(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.n, "constraint width");
        self.rows.push((coeffs, rel, rhs));
        self
    }

    /// Sparse form of [`Lp::constraint`].
    pub fn constraint_sparse(&mut self, terms: &[(usize, f64)], rel: Relation, rhs: f64) -> &mut Self {
        let mut coeffs = vec![0.0; self.n];
        for &(j, a) in terms {
            coeffs[j] += a;
        }
        self.constraint(coeffs, rel, rhs)
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    m: usize,
    /// structural + slack columns; artificials follow
    n_real: usize,
    n_cols: usize,
    /// m rows of n_cols + 1 (rhs last)
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// standard-form columns (row-flipped), for the dual certificate
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    /// +1 or -1 per row
    flip: Vec<f64>,
}

impl Tableau {
    fn build(lp: &Lp) -> Tableau {
        let m = lp.rows.len();
        let n_slack = lp.rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let n_real = lp.n + n_slack;
        let n_cols = n_real + m;
        let mut a = vec![vec![0.0; n_cols]; m];
        let mut b = vec![0.0; m];
        let mut flip = vec![1.0; m];
        let mut slack = lp.n;
        for (r, (coeffs, rel, rhs)) in lp.rows.iter().enumerate() {
            a[r][..lp.n].copy_from_slice(coeffs);
            match rel {
                Relation::Le => {
                    a[r][slack] = 1.0;
                    slack += 1;
                }
                Relation::Ge => {
                    a[r][slack] = -1.0;
                    slack += 1;
                }
                Relation::Eq => {}
            }
            b[r] = *rhs;
            if *rhs < 0.0 {
                flip[r] = -1.0;
                b[r] = -*rhs;
                for v in a[r].iter_mut() {
                    *v = -*v;
                }
            }
            a[r][n_real + r] = 1.0;
        }
        let t = (0..m)
            .map(|r| {
                let mut row = a[r].clone();
                row.push(b[r]);
                row
            })
            .collect();
        Tableau {
            m,
            n_real,
            n_cols,
            t,
            basis: (0..m).map(|r| n_real + r).collect(),
            a,
            b,
            flip,
        }
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut red = cost.to_vec();
        for (r, &bv) in self.basis.iter().enumerate() {
            let cb = cost[bv];
            if cb != 0.0 {
                for (j, v) in red.iter_mut().enumerate() {
                    *v -= cb * self.t[r][j];
                }
            }
        }
        red
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for r in 0..self.m {
            if r == row {
                continue;
            }
            let f = self.t[r][col];
            if f != 0.0 {
                for (v, pv) in self.t[r].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.t[r][col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Bland's rule simplex on the current basis; columns `>= allowed` never
    /// enter.
    fn optimize(&mut self, cost: &[f64], allowed: usize, pivots: &mut usize) -> Result<()> {
        loop {
            let red = self.reduced_costs(cost);
            let Some(enter) = (0..allowed).find(|&j| red[j] < -COST_EPS) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let a = self.t[r][enter];
                if a > PIVOT_EPS {
                    let ratio = self.t[r][self.n_cols] / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-15
                                || (ratio <= lratio + 1e-15 && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leave else {
                return Err(Error::LpNonConvergence("objective unbounded below".into()));
            };
            self.pivot(row, enter);
            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return Err(Error::LpNonConvergence(format!("no optimum after {MAX_PIVOTS} pivots")));
            }
        }
    }

    fn run(mut self, lp: &Lp) -> Result<LpOutcome> {
        let mut pivots = 0;
        // Phase 1: minimise the sum of artificials.
        let mut phase1 = vec![0.0; self.n_cols];
        for v in phase1[self.n_real..].iter_mut() {
            *v = 1.0;
        }
        self.optimize(&phase1, self.n_cols, &mut pivots)?;
        let infeas: f64 = (0..self.m)
            .filter(|&r| self.basis[r] >= self.n_real)
            .map(|r| self.t[r][self.n_cols])
            .sum();
        let scale = self.b.iter().fold(1.0f64, |a, &v| a.max(v.abs()));
        if infeas > FEAS_EPS * scale {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive zero-level artificials out where possible; rows where that is
        // impossible are redundant and keep their artificial at zero.
        for r in 0..self.m {
            if self.basis[r] >= self.n_real {
                if let Some(col) = (0..self.n_real).find(|&j| self.t[r][j].abs() > 1e-9) {
                    self.pivot(r, col);
                }
            }
        }
        // Phase 2.
        let mut cost = vec![0.0; self.n_cols];
        cost[..lp.n].copy_from_slice(&lp.c);
        self.optimize(&cost, self.n_real, &mut pivots)?;

        let mut x_full = vec![0.0; self.n_cols];
        for (r, &bv) in self.basis.iter().enumerate() {
            x_full[bv] = self.t[r][self.n_cols].max(0.0);
        }
        let objective: f64 = (0..lp.n).map(|j| lp.c[j] * x_full[j]).sum();
        let y = self.certificate(&cost)?;
        let dual_obj: f64 = y.iter().zip(&self.b).map(|(y, b)| y * b).sum();
        let gap = (objective - dual_obj).abs();
        let cscale = 1.0 + objective.abs().max(dual_obj.abs());
        if gap > GAP_TOLERANCE * cscale {
            return Err(Error::LpNonConvergence(format!("duality gap {gap:e}")));
        }
        for (j, &c) in cost.iter().enumerate().take(self.n_real) {
            let reduced = c - (0..self.m).map(|r| self.a[r][j] * y[r]).sum::<f64>();
            if reduced < -GAP_TOLERANCE * cscale {
                return Err(Error::LpNonConvergence(format!(
                    "dual infeasible: reduced cost {reduced:e} on column {j}"
                )));
            }
        }
        Ok(LpOutcome::Optimal(LpSolution {
            x: x_full[..lp.n].to_vec(),
            objective,
            duals: y.iter().zip(&self.flip).map(|(y, f)| y * f).collect(),
            duality_gap: gap,
        }))
    }

    /// Solves `B^T y = c_B` on the original standard-form columns.
    fn certificate(&self, cost: &[f64]) -> Result<Vec<f64>> {
        let m = self.m;
        if m == 0 {
            return Ok(Vec::new());
        }
        let basis = DMatrix::from_fn(m, m, |r, k| self.a[r][self.basis[k]]);
        let cb = DVector::from_iterator(m, self.basis.iter().map(|&bv| cost[bv]));
        basis
            .transpose()
            .lu()
            .solve(&cb)
            .map(|y| y.iter().copied().collect())
            .ok_or_else(|| Error::LpNonConvergence("singular final basis".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximisation() {
        // max 3x + 5y st x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = Lp::new(2);
        lp.set_cost(0, -3.0).set_cost(1, -5.0);
        lp.constraint(vec![1.0, 0.0], Relation::Le, 4.0)
            .constraint(vec![0.0, 2.0], Relation::Le, 12.0)
            .constraint(vec![3.0, 2.0], Relation::Le, 18.0);
        let s = lp.solve().unwrap().optimal().unwrap();
        assert!((s.objective + 36.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
        // shadow prices (0, 3/2, 1) in the max problem
        assert!((s.duals[1] + 1.5).abs() < 1e-12 && (s.duals[2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + y st x + y = 3, x - y >= 1, -x <= -0.5
        let mut lp = Lp::new(2);
        lp.set_cost(0, 1.0).set_cost(1, 2.0);
        lp.constraint(vec![1.0, 1.0], Relation::Eq, 3.0)
            .constraint(vec![1.0, -1.0], Relation::Ge, 1.0)
            .constraint(vec![-1.0, 0.0], Relation::Le, -0.5);
        let s = lp.solve().unwrap().optimal().unwrap();
        assert!((s.objective - 3.0).abs() < 1e-12);
        assert!(s.duality_gap < 1e-12);
    }

    #[test]
    fn infeasible_is_reported() {
        let mut lp = Lp::new(1);
        lp.constraint(vec![1.0], Relation::Ge, 2.0)
            .constraint(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(lp.solve().unwrap(), LpOutcome::Infeasible));
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let mut lp = Lp::new(2);
        lp.set_cost(0, 1.0);
        lp.constraint(vec![1.0, 1.0], Relation::Eq, 1.0)
            .constraint(vec![2.0, 2.0], Relation::Eq, 2.0);
        let s = lp.solve().unwrap().optimal().unwrap();
        assert!(s.objective.abs() < 1e-12);
    }

    #[test]
    fn unbounded_is_an_error() {
        let mut lp = Lp::new(1);
        lp.set_cost(0, -1.0);
        assert!(matches!(lp.solve(), Err(Error::LpNonConvergence(_))));
    }
}
