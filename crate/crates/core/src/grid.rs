//! Uniform 1D grids, node-sampled fields, and trapezoid quadrature.
//!
//! Every quantity in the crate (densities, growth rates, kernels,
//! eigenfunctions) is a [`Field`]: real values sampled on the nodes of a
//! uniform [`Grid`] over a bounded interval. All integrals are composite
//! trapezoid sums, which is exact for affine integrands and O(h^2)
//! otherwise — the same order as the spatial stencils built on top.

use crate::error::{Error, Result};

/// Uniform discretization of a bounded interval with `n >= 3` nodes.
///
/// Nodes are `x_i = x_lo + i * h` for `i = 0..n`, with
/// `h = (x_hi - x_lo) / (n - 1)`, so both endpoints are nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_lo: f64,
    x_hi: f64,
    n: usize,
}

impl Grid {
    pub fn new(x_lo: f64, x_hi: f64, n: usize) -> Result<Self> {
        if !(x_lo.is_finite() && x_hi.is_finite()) {
            return Err(Error::InvalidParameter(
                "grid endpoints must be finite".into(),
            ));
        }
        if x_hi <= x_lo {
            return Err(Error::InvalidParameter(format!(
                "grid needs x_hi > x_lo, got [{x_lo}, {x_hi}]"
            )));
        }
        if n < 3 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 3 nodes, got {n}"
            )));
        }
        Ok(Grid { x_lo, x_hi, n })
    }

    /// Unit interval helper used throughout the experiment suite.
    pub fn unit(n: usize) -> Result<Self> {
        Grid::new(0.0, 1.0, n)
    }

    pub fn x_lo(&self) -> f64 {
        self.x_lo
    }

    pub fn x_hi(&self) -> f64 {
        self.x_hi
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Node spacing.
    pub fn h(&self) -> f64 {
        (self.x_hi - self.x_lo) / (self.n - 1) as f64
    }

    /// Domain length |X|.
    pub fn measure(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    /// Coordinate of node `i`.
    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        self.x_lo + i as f64 * self.h()
    }

    /// Iterator over node coordinates.
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.node(i))
    }

    /// Trapezoid weight of node `i`: `h/2` at the two endpoints, `h` inside.
    pub fn weight(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        if i == 0 || i == self.n - 1 {
            0.5 * self.h()
        } else {
            self.h()
        }
    }

    fn describe(&self) -> String {
        format!("[{}, {}] n={}", self.x_lo, self.x_hi, self.n)
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(self.describe(), other.describe()))
        }
    }
}

/// Real-valued function sampled at the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    /// Wrap raw node values, validating length and finiteness.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values but the grid has {} nodes",
                values.len(),
                grid.n()
            )));
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { node });
        }
        Ok(Field { grid, values })
    }

    /// Sample a function at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().map(f).collect();
        Field::new(grid, values)
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        Field::new(grid, vec![c; grid.n()])
    }

    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.n()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Maximum absolute node value.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `max_i |self_i - other_i|`; errors on grid mismatch.
    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Pointwise map, preserving the grid. Panics on non-finite results via
    /// `debug_assert` only; callers producing possibly-invalid values should
    /// go through [`Field::new`].
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Composite trapezoid approximation of the integral of `f` over its domain.
///
/// Exact for affine integrands.
pub fn integrate(f: &Field) -> f64 {
    let g = f.grid();
    let v = f.values();
    let n = g.n();
    let interior: f64 = v[1..n - 1].iter().sum();
    g.h() * (0.5 * v[0] + interior + 0.5 * v[n - 1])
}

/// Trapezoid approximation of the L2 pairing of two fields on the same grid.
pub fn inner_l2(f: &Field, g: &Field) -> Result<f64> {
    f.grid().check_same(g.grid())?;
    let gr = f.grid();
    let n = gr.n();
    let a = f.values();
    let b = g.values();
    let interior: f64 = (1..n - 1).map(|i| a[i] * b[i]).sum();
    Ok(gr.h() * (0.5 * a[0] * b[0] + interior + 0.5 * a[n - 1] * b[n - 1]))
}

/// Trapezoid L2 norm.
pub fn norm_l2(f: &Field) -> f64 {
    inner_l2(f, f).expect("same field, same grid").sqrt()
}
