//! Two-way layouts and their per-cell sufficient statistics.
//!
//! Every test in this crate consumes a [`CellSummaryTable`]: the cell means
//! and unbiased cell variances of an `a × b` layout. Raw observations are
//! reduced to that form by [`summarize`].

use serde::{Deserialize, Serialize};

use crate::error::{AnovaError, Result};
use crate::grid::Grid;

/// Factor dimensions and per-cell sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    n: Grid<usize>,
}

impl Layout {
    /// Requires `a, b >= 2` and at least two observations in every cell.
    pub fn new(n: Grid<usize>) -> Result<Self> {
        let (a, b) = n.shape();
        if a < 2 || b < 2 {
            return Err(AnovaError::InvalidLayout(format!(
                "both factors need at least 2 levels, got {a}x{b}"
            )));
        }
        for ((i, j), &count) in n.indexed() {
            if count < 2 {
                return Err(AnovaError::EmptyCell {
                    row: i + 1,
                    col: j + 1,
                    count,
                });
            }
        }
        Ok(Layout { n })
    }

    pub fn balanced(a: usize, b: usize, n: usize) -> Result<Self> {
        Layout::new(Grid::filled(a, b, n))
    }

    /// Levels of factor A.
    pub fn a(&self) -> usize {
        self.n.rows()
    }

    /// Levels of factor B.
    pub fn b(&self) -> usize {
        self.n.cols()
    }

    pub fn n(&self, i: usize, j: usize) -> usize {
        self.n[(i, j)]
    }

    pub fn sizes(&self) -> &Grid<usize> {
        &self.n
    }

    /// Total sample size `N`.
    pub fn total(&self) -> usize {
        self.n.iter().sum()
    }

    pub fn transpose(&self) -> Layout {
        Layout {
            n: self.n.transpose(),
        }
    }
}

/// One observation: 1-based factor levels and the response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    #[serde(rename = "A")]
    pub level_a: usize,
    #[serde(rename = "B")]
    pub level_b: usize,
    pub y: f64,
}

/// Long-format raw observations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawDataset {
    pub records: Vec<Record>,
}

impl RawDataset {
    pub fn new(records: Vec<Record>) -> Self {
        RawDataset { records }
    }

    /// Layout implied by the records: `a`/`b` are the largest levels seen.
    pub fn infer_layout(&self) -> Result<Layout> {
        let a = self.records.iter().map(|r| r.level_a).max().unwrap_or(0);
        let b = self.records.iter().map(|r| r.level_b).max().unwrap_or(0);
        if self
            .records
            .iter()
            .any(|r| r.level_a == 0 || r.level_b == 0)
        {
            return Err(AnovaError::DimensionMismatch(
                "factor levels are 1-based; found level 0".into(),
            ));
        }
        let mut n = Grid::filled(a, b, 0usize);
        for r in &self.records {
            n[(r.level_a - 1, r.level_b - 1)] += 1;
        }
        Layout::new(n)
    }
}

/// Per-cell sample means and unbiased sample variances (divisor `n_ij - 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummaryTable {
    layout: Layout,
    mean: Grid<f64>,
    var: Grid<f64>,
}

/// Unweighted marginal means of the cell means.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub rows: Vec<f64>,
    pub cols: Vec<f64>,
    pub grand: f64,
}

impl CellSummaryTable {
    /// Variances may be zero here; tests reject such tables via
    /// [`CellSummaryTable::ensure_nondegenerate`].
    pub fn new(layout: Layout, mean: Grid<f64>, var: Grid<f64>) -> Result<Self> {
        let shape = layout.sizes().shape();
        for (name, g) in [("mean", &mean), ("var", &var)] {
            if g.shape() != shape {
                return Err(AnovaError::DimensionMismatch(format!(
                    "{name} is {}x{}, n is {}x{}",
                    g.rows(),
                    g.cols(),
                    shape.0,
                    shape.1
                )));
            }
        }
        for ((i, j), &v) in var.indexed() {
            if !v.is_finite() || v < 0.0 {
                return Err(AnovaError::InvalidParameter(format!(
                    "variance of cell ({},{}) must be finite and non-negative, got {v}",
                    i + 1,
                    j + 1
                )));
            }
        }
        if let Some(((i, j), m)) = mean.indexed().find(|(_, m)| !m.is_finite()) {
            return Err(AnovaError::InvalidParameter(format!(
                "mean of cell ({},{}) is not finite: {m}",
                i + 1,
                j + 1
            )));
        }
        Ok(CellSummaryTable { layout, mean, var })
    }

    /// Builds a table from the three `a × b` matrices, checking that their
    /// shapes agree.
    pub fn from_matrices(mean: Grid<f64>, n: Grid<usize>, var: Grid<f64>) -> Result<Self> {
        if mean.shape() != n.shape() {
            return Err(AnovaError::DimensionMismatch(format!(
                "mean is {}x{}, n is {}x{}",
                mean.rows(),
                mean.cols(),
                n.rows(),
                n.cols()
            )));
        }
        if var.shape() != n.shape() {
            return Err(AnovaError::DimensionMismatch(format!(
                "var is {}x{}, n is {}x{}",
                var.rows(),
                var.cols(),
                n.rows(),
                n.cols()
            )));
        }
        CellSummaryTable::new(Layout::new(n)?, mean, var)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn a(&self) -> usize {
        self.layout.a()
    }

    pub fn b(&self) -> usize {
        self.layout.b()
    }

    pub fn n(&self, i: usize, j: usize) -> f64 {
        self.layout.n(i, j) as f64
    }

    pub fn mean(&self, i: usize, j: usize) -> f64 {
        self.mean[(i, j)]
    }

    /// Unbiased sample variance `S²_ij`.
    pub fn var(&self, i: usize, j: usize) -> f64 {
        self.var[(i, j)]
    }

    pub fn means(&self) -> &Grid<f64> {
        &self.mean
    }

    pub fn vars(&self) -> &Grid<f64> {
        &self.var
    }

    /// Maximum-likelihood (biased) variance `(n_ij - 1)/n_ij · S²_ij`.
    pub fn ml_var(&self, i: usize, j: usize) -> f64 {
        let n = self.n(i, j);
        (n - 1.0) / n * self.var(i, j)
    }

    /// Estimated variance of the cell mean, `S²_ij / n_ij`.
    pub fn se2(&self, i: usize, j: usize) -> f64 {
        self.var(i, j) / self.n(i, j)
    }

    pub fn degenerate_cells(&self) -> Vec<(usize, usize)> {
        self.var
            .indexed()
            .filter(|(_, &v)| v <= 0.0)
            .map(|(ij, _)| ij)
            .collect()
    }

    /// Fails with [`AnovaError::DegenerateCell`] (1-based indices) if any
    /// cell variance is zero.
    pub fn ensure_nondegenerate(&self) -> Result<()> {
        match self.degenerate_cells().first() {
            Some(&(i, j)) => Err(AnovaError::DegenerateCell {
                row: i + 1,
                col: j + 1,
            }),
            None => Ok(()),
        }
    }

    pub fn row_means(&self) -> Vec<f64> {
        (0..self.a())
            .map(|i| self.mean.row(i).iter().sum::<f64>() / self.b() as f64)
            .collect()
    }

    pub fn col_means(&self) -> Vec<f64> {
        (0..self.b())
            .map(|j| (0..self.a()).map(|i| self.mean(i, j)).sum::<f64>() / self.a() as f64)
            .collect()
    }

    pub fn grand_mean(&self) -> f64 {
        self.mean.iter().sum::<f64>() / (self.a() * self.b()) as f64
    }

    pub fn marginals(&self) -> Marginals {
        Marginals {
            rows: self.row_means(),
            cols: self.col_means(),
            grand: self.grand_mean(),
        }
    }

    /// Swaps the roles of the two factors.
    pub fn transpose(&self) -> CellSummaryTable {
        CellSummaryTable {
            layout: self.layout.transpose(),
            mean: self.mean.transpose(),
            var: self.var.transpose(),
        }
    }

    /// Same table with different cell means.
    pub fn with_means(&self, mean: Grid<f64>) -> Result<CellSummaryTable> {
        CellSummaryTable::new(self.layout.clone(), mean, self.var.clone())
    }

    /// Applies `y -> scale·y + shift` to the underlying observations.
    pub fn affine(&self, scale: f64, shift: f64) -> CellSummaryTable {
        CellSummaryTable {
            layout: self.layout.clone(),
            mean: self.mean.map(|m| scale * m + shift),
            var: self.var.map(|v| scale * scale * v),
        }
    }
}

/// Reduces raw records to per-cell means and unbiased variances.
pub fn summarize(raw: &RawDataset, layout: &Layout) -> Result<CellSummaryTable> {
    let (a, b) = (layout.a(), layout.b());
    let mut cells: Vec<Vec<f64>> = vec![Vec::new(); a * b];
    for r in &raw.records {
        if r.level_a == 0 || r.level_a > a || r.level_b == 0 || r.level_b > b {
            return Err(AnovaError::DimensionMismatch(format!(
                "record level ({},{}) outside 1..{a} x 1..{b}",
                r.level_a, r.level_b
            )));
        }
        cells[(r.level_a - 1) * b + r.level_b - 1].push(r.y);
    }

    let mut mean = Grid::filled(a, b, 0.0);
    let mut var = Grid::filled(a, b, 0.0);
    for i in 0..a {
        for j in 0..b {
            let ys = &cells[i * b + j];
            if ys.len() < 2 {
                return Err(AnovaError::EmptyCell {
                    row: i + 1,
                    col: j + 1,
                    count: ys.len(),
                });
            }
            if ys.len() != layout.n(i, j) {
                return Err(AnovaError::DimensionMismatch(format!(
                    "cell ({},{}) has {} records, layout expects {}",
                    i + 1,
                    j + 1,
                    ys.len(),
                    layout.n(i, j)
                )));
            }
            let (m, v) = mean_var(ys);
            mean[(i, j)] = m;
            var[(i, j)] = v;
        }
    }
    CellSummaryTable::new(layout.clone(), mean, var)
}

/// Summarizes using the layout implied by the records themselves.
pub fn summarize_inferred(raw: &RawDataset) -> Result<CellSummaryTable> {
    let layout = raw.infer_layout()?;
    summarize(raw, &layout)
}

/// Two-pass mean and unbiased variance.
pub(crate) fn mean_var(ys: &[f64]) -> (f64, f64) {
    let n = ys.len() as f64;
    let m = ys.iter().sum::<f64>() / n;
    let ss = ys.iter().map(|y| (y - m) * (y - m)).sum::<f64>();
    (m, ss / (n - 1.0))
}
