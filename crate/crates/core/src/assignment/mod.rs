//! Linear sum assignment: an exact shortest-augmenting-path Hungarian
//! solver, an exhaustive oracle, and threshold pre-linking.

mod hungarian;
mod prelink;

pub use prelink::{prelink, prelink_indexed, Prelink};

use crate::error::{Error, Result};

/// Square matrix of finite, non-negative linking costs, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::SizeMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        if let Some(k) = data.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidCost {
                row: k / n,
                col: k % n,
                value: data[k],
            });
        }
        Ok(CostMatrix { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::SizeMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        CostMatrix::new(n, rows.concat())
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            data.extend((0..n).map(|j| f(i, j)));
        }
        CostMatrix::new(n, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.n..(row + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Sum of the entries selected by `perm`, accumulated in row order.
    pub fn cost_of(&self, perm: &[usize]) -> f64 {
        perm.iter()
            .enumerate()
            .fold(0.0, |acc, (i, &j)| acc + self.get(i, j))
    }
}

/// `perm[i] = j`: row i is linked to column j.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub perm: Vec<usize>,
    pub total_cost: f64,
}

impl Assignment {
    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.perm.len()];
        self.perm
            .iter()
            .all(|&j| j < seen.len() && !std::mem::replace(&mut seen[j], true))
    }
}

/// Minimum-cost perfect matching. Ties between optimal matchings are
/// resolved arbitrarily.
pub fn solve_lsap(c: &CostMatrix) -> Result<Assignment> {
    if c.n == 0 {
        return Err(Error::EmptyMatrix);
    }
    let perm = hungarian::solve(c.n, &c.data);
    Ok(Assignment {
        total_cost: c.cost_of(&perm),
        perm,
    })
}

const BRUTE_FORCE_LIMIT: usize = 10;

/// Exhaustive minimum over all n! permutations, ties to the
/// lexicographically smallest permutation. Refuses n > 10.
pub fn brute_force_lsap(c: &CostMatrix) -> Result<Assignment> {
    if c.n == 0 {
        return Err(Error::EmptyMatrix);
    }
    if c.n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge(c.n));
    }

    struct Search<'a> {
        c: &'a CostMatrix,
        used: Vec<bool>,
        current: Vec<usize>,
        best: Vec<usize>,
        best_cost: f64,
    }

    impl Search<'_> {
        fn visit(&mut self, row: usize, cost: f64) {
            let n = self.c.n;
            if row == n {
                if cost < self.best_cost {
                    self.best_cost = cost;
                    self.best.clone_from(&self.current);
                }
                return;
            }
            for col in 0..n {
                if !self.used[col] {
                    self.used[col] = true;
                    self.current.push(col);
                    self.visit(row + 1, cost + self.c.get(row, col));
                    self.current.pop();
                    self.used[col] = false;
                }
            }
        }
    }

    let mut search = Search {
        c,
        used: vec![false; c.n],
        current: Vec::with_capacity(c.n),
        best: Vec::new(),
        best_cost: f64::INFINITY,
    };
    search.visit(0, 0.0);
    Ok(Assignment {
        perm: search.best,
        total_cost: search.best_cost,
    })
}
