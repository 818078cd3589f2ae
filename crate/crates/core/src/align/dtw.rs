//! Dynamic time warping with steps (1,1), (1,2), (2,1) and weights 2, 3, 3.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense non-negative cost matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyInput("cost matrix"));
        }
        if values.len() != rows * cols {
            return Err(Error::LengthMismatch(values.len(), rows * cols));
        }
        if values.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidConfig("costs must be finite and non-negative".into()));
        }
        Ok(CostMatrix { rows, cols, values })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        Self::new(rows, cols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.rows, self.cols, self.values.iter().map(|v| v * factor).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpingPath {
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

/// Steps in backtrack preference order, with their weights.
pub const STEPS: [((usize, usize), f64); 3] = [((1, 1), 2.0), ((2, 1), 3.0), ((1, 2), 3.0)];

/// Globally optimal warping path from `(0, 0)` to `(I-1, J-1)`.
///
/// The accumulated cost of the start cell is `2 * c(0, 0)`; each step adds its
/// weight times the cost of the cell it lands on. Ties between predecessors
/// are broken in the order (1,1), (2,1), (1,2).
pub fn dtw(cost: &CostMatrix) -> Result<WarpingPath> {
    dtw_banded(cost, None)
}

/// As [`dtw`], optionally restricted to cells within `band` columns of the
/// straight line joining the corners.
pub fn dtw_banded(cost: &CostMatrix, band: Option<usize>) -> Result<WarpingPath> {
    let (rows, cols) = (cost.rows, cost.cols);
    let in_band = |i: usize, j: usize| match band {
        None => true,
        Some(b) => {
            let center = if rows > 1 { i as f64 * (cols - 1) as f64 / (rows - 1) as f64 } else { 0.0 };
            (j as f64 - center).abs() <= b as f64 + 1e-9
        }
    };
    let mut acc = alloc::vec![f64::INFINITY; rows * cols];
    let mut step = alloc::vec![u8::MAX; rows * cols];
    acc[0] = 2.0 * cost.get(0, 0);
    for i in 0..rows {
        for j in 0..cols {
            if (i == 0 && j == 0) || !in_band(i, j) {
                continue;
            }
            let c = cost.get(i, j);
            let mut best = f64::INFINITY;
            let mut best_step = u8::MAX;
            for (k, &((di, dj), w)) in STEPS.iter().enumerate() {
                if i < di || j < dj {
                    continue;
                }
                let prev = acc[(i - di) * cols + (j - dj)];
                let cand = prev + w * c;
                if cand < best {
                    best = cand;
                    best_step = k as u8;
                }
            }
            acc[i * cols + j] = best;
            step[i * cols + j] = best_step;
        }
    }
    let total_cost = acc[rows * cols - 1];
    if !total_cost.is_finite() {
        return Err(Error::InfeasiblePath { rows, cols });
    }
    let mut pairs = alloc::vec![(rows - 1, cols - 1)];
    let (mut i, mut j) = (rows - 1, cols - 1);
    while i > 0 || j > 0 {
        let ((di, dj), _) = STEPS[step[i * cols + j] as usize];
        i -= di;
        j -= dj;
        pairs.push((i, j));
    }
    pairs.reverse();
    Ok(WarpingPath { pairs, total_cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn single_cell() {
        let c = CostMatrix::new(1, 1, vec![0.7]).unwrap();
        let p = dtw(&c).unwrap();
        assert_eq!(p.pairs, vec![(0, 0)]);
        assert!((p.total_cost - 1.4).abs() < 1e-12);
    }

    #[test]
    fn zero_diagonal() {
        let c = CostMatrix::from_fn(4, 4, |i, j| if i == j { 0.0 } else { 1.0 }).unwrap();
        let p = dtw(&c).unwrap();
        assert_eq!(p.pairs, vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
        assert_eq!(p.total_cost, 0.0);
    }

    #[test]
    fn infeasible_shapes() {
        let c = CostMatrix::from_fn(1, 3, |_, _| 1.0).unwrap();
        assert_eq!(dtw(&c), Err(Error::InfeasiblePath { rows: 1, cols: 3 }));
        let c = CostMatrix::from_fn(2, 5, |_, _| 1.0).unwrap();
        assert!(dtw(&c).is_err());
        // every step advances both axes, so a single row only admits one column
        let c = CostMatrix::from_fn(1, 2, |_, _| 1.0).unwrap();
        assert!(dtw(&c).is_err());
        let c = CostMatrix::from_fn(2, 3, |_, _| 1.0).unwrap();
        assert_eq!(dtw(&c).unwrap().pairs, vec![(0, 0), (1, 2)]);
    }

    #[test]
    fn tie_prefers_diagonal() {
        // all-zero costs: every path ties
        let c = CostMatrix::from_fn(3, 3, |_, _| 0.0).unwrap();
        assert_eq!(dtw(&c).unwrap().pairs, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn rejects_bad_costs() {
        assert!(CostMatrix::new(1, 2, vec![0.0, -1.0]).is_err());
        assert!(CostMatrix::new(1, 2, vec![0.0, f64::NAN]).is_err());
        assert!(CostMatrix::new(0, 2, vec![]).is_err());
        assert!(CostMatrix::new(2, 2, vec![0.0]).is_err());
    }

    #[test]
    fn band_restricts_path() {
        let c = CostMatrix::from_fn(20, 20, |i, j| if j == 19 - i { 0.0 } else { 1.0 }).unwrap();
        let p = dtw_banded(&c, Some(2)).unwrap();
        assert!(p.pairs.iter().all(|&(i, j)| (i as i64 - j as i64).abs() <= 2));
    }
}
