//! Uniform grids on `[0, 1]` and the functions sampled on them.
//!
//! Every numeric module works with node samples `f(x_j)`, `x_j = j / m`.
//! Quadrature is the composite trapezoid rule, which is exact for the
//! piecewise-linear interpolant of the samples; [`GridFn::interpolate`] is
//! that interpolant. ODE steppers need coefficients between nodes and use the
//! local cubic interpolant from [`GridFn::sample`] instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible number of intervals.
pub const MIN_INTERVALS: usize = 16;

/// Default number of intervals used by the pipelines.
pub const DEFAULT_INTERVALS: usize = 1024;

/// Uniform grid `x_j = j / m`, `j = 0..=m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Grid {
    m: usize,
}

impl Grid {
    pub fn new(m: usize) -> Result<Self> {
        if m < MIN_INTERVALS {
            return Err(Error::domain(format!(
                "grid needs at least {MIN_INTERVALS} intervals, got {m}"
            )));
        }
        Ok(Grid { m })
    }

    /// Number of intervals.
    pub fn intervals(&self) -> usize {
        self.m
    }

    /// Number of nodes, `m + 1`.
    pub fn len(&self) -> usize {
        self.m + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 / self.m as f64
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.m + 1).map(move |j| self.node(j))
    }

    /// Grid with half the step.
    pub fn refined(&self) -> Grid {
        Grid { m: 2 * self.m }
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self.m != other.m {
            return Err(Error::GridMismatch {
                left: self.m,
                right: other.m,
            });
        }
        Ok(())
    }
}

impl TryFrom<usize> for Grid {
    type Error = Error;

    fn try_from(m: usize) -> Result<Self> {
        Grid::new(m)
    }
}

impl From<Grid> for usize {
    fn from(g: Grid) -> usize {
        g.m
    }
}

/// Position inside the grid: interval `j` and fraction `t` in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct At {
    pub j: usize,
    pub t: f64,
}

/// Real function sampled at the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridFnRepr", into = "GridFnRepr")]
pub struct GridFn {
    grid: Grid,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridFnRepr {
    m: usize,
    values: Vec<f64>,
}

impl TryFrom<GridFnRepr> for GridFn {
    type Error = Error;

    fn try_from(repr: GridFnRepr) -> Result<Self> {
        GridFn::new(Grid::new(repr.m)?, repr.values)
    }
}

impl From<GridFn> for GridFnRepr {
    fn from(f: GridFn) -> Self {
        GridFnRepr {
            m: f.grid.m,
            values: f.values,
        }
    }
}

impl GridFn {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidLength {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node });
        }
        Ok(GridFn { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().map(f).collect();
        GridFn { grid, values }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        GridFn {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Wraps samples that are finite by construction.
    pub(crate) fn from_samples(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        GridFn { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFn {
        GridFn {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &GridFn, f: impl Fn(f64, f64) -> f64) -> Result<GridFn> {
        self.grid.ensure_same(&other.grid)?;
        Ok(GridFn {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Composite trapezoid rule over `[0, 1]`.
    pub fn integrate(&self) -> f64 {
        let v = &self.values;
        let interior: f64 = v[1..v.len() - 1].iter().sum();
        self.grid.step() * (0.5 * (v[0] + v[v.len() - 1]) + interior)
    }

    /// Cumulative trapezoid rule, `F(0) = 0`. `F(1)` equals [`Self::integrate`]
    /// up to summation order.
    pub fn antiderivative(&self) -> GridFn {
        let half = 0.5 * self.grid.step();
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.values.len());
        out.push(0.0);
        for w in self.values.windows(2) {
            acc += half * (w[0] + w[1]);
            out.push(acc);
        }
        GridFn {
            grid: self.grid,
            values: out,
        }
    }

    /// Cumulative integral of the cubic interpolant [`Self::sample`],
    /// `F(0) = 0`. Fourth order on smooth data, where the trapezoid rule of
    /// [`Self::antiderivative`] is second order.
    pub fn antiderivative_cubic(&self) -> GridFn {
        // two-point Gauss is exact for the cubic on each interval
        let d = 0.5 / 3f64.sqrt();
        let half = 0.5 * self.grid.step();
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.values.len());
        out.push(0.0);
        for j in 0..self.grid.m {
            acc += half * (self.sample(At { j, t: 0.5 - d }) + self.sample(At { j, t: 0.5 + d }));
            out.push(acc);
        }
        GridFn {
            grid: self.grid,
            values: out,
        }
    }

    /// Piecewise-linear interpolant; exact at nodes.
    pub fn interpolate(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::domain(format!("x = {x} outside [0, 1]")));
        }
        let m = self.grid.m;
        let s = x * m as f64;
        let j = (s.floor() as usize).min(m - 1);
        let t = s - j as f64;
        if t == 0.0 {
            return Ok(self.values[j]);
        }
        if t == 1.0 {
            return Ok(self.values[j + 1]);
        }
        Ok((1.0 - t) * self.values[j] + t * self.values[j + 1])
    }

    /// Local cubic (four-point Lagrange) interpolant at `x_j + t / m`.
    ///
    /// Uses nodes `j-1..=j+2`, shifted inward at the ends of the grid. Nodes
    /// are reproduced exactly.
    pub fn sample(&self, at: At) -> f64 {
        let v = &self.values;
        if at.t == 0.0 {
            return v[at.j];
        }
        if at.t == 1.0 {
            return v[at.j + 1];
        }
        let m = self.grid.m;
        let start = at.j.saturating_sub(1).min(m - 3);
        // position relative to the first stencil node
        let s = at.t + (at.j - start) as f64;
        let w0 = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0;
        let w1 = s * (s - 2.0) * (s - 3.0) / 2.0;
        let w2 = -s * (s - 1.0) * (s - 3.0) / 2.0;
        let w3 = s * (s - 1.0) * (s - 2.0) / 6.0;
        w0 * v[start] + w1 * v[start + 1] + w2 * v[start + 2] + w3 * v[start + 3]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Mean value over `[0, 1]` (trapezoid).
    pub fn mean(&self) -> f64 {
        self.integrate()
    }

    pub fn centered(&self) -> GridFn {
        let mean = self.mean();
        self.map(|v| v - mean)
    }

    /// Trapezoid `L2(0, 1)` norm.
    pub fn l2_norm(&self) -> f64 {
        self.map(|v| v * v).integrate().sqrt()
    }

    pub fn l2_distance(&self, other: &GridFn) -> Result<f64> {
        Ok(self.zip_with(other, |a, b| a - b)?.l2_norm())
    }

    /// Resample onto another grid by linear interpolation.
    pub fn resample(&self, grid: Grid) -> GridFn {
        let values = grid
            .nodes()
            .map(|x| self.interpolate(x).expect("node inside [0, 1]"))
            .collect();
        GridFn { grid, values }
    }
}

impl std::ops::Index<usize> for GridFn {
    type Output = f64;

    fn index(&self, j: usize) -> &f64 {
        &self.values[j]
    }
}

/// 2x2 matrix-valued grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGridFn {
    pub e11: GridFn,
    pub e12: GridFn,
    pub e21: GridFn,
    pub e22: GridFn,
}

impl MatrixGridFn {
    pub fn new(e11: GridFn, e12: GridFn, e21: GridFn, e22: GridFn) -> Result<Self> {
        let g = e11.grid();
        g.ensure_same(&e12.grid())?;
        g.ensure_same(&e21.grid())?;
        g.ensure_same(&e22.grid())?;
        Ok(MatrixGridFn { e11, e12, e21, e22 })
    }

    pub fn symmetric(e11: GridFn, e12: GridFn, e22: GridFn) -> Result<Self> {
        let e21 = e12.clone();
        Self::new(e11, e12, e21, e22)
    }

    pub fn zeros(grid: Grid) -> Self {
        let z = GridFn::zeros(grid);
        MatrixGridFn {
            e11: z.clone(),
            e12: z.clone(),
            e21: z.clone(),
            e22: z,
        }
    }

    pub fn grid(&self) -> Grid {
        self.e11.grid()
    }

    /// Entry matrix at node `j`.
    pub fn at_node(&self, j: usize) -> [[f64; 2]; 2] {
        [[self.e11[j], self.e12[j]], [self.e21[j], self.e22[j]]]
    }

    pub fn max_abs(&self) -> f64 {
        [&self.e11, &self.e12, &self.e21, &self.e22]
            .iter()
            .map(|f| f.max_abs())
            .fold(0.0, f64::max)
    }

    /// `L2` norm of the Frobenius norm.
    pub fn l2_norm(&self) -> f64 {
        let sq = |f: &GridFn| f.map(|v| v * v);
        let total = sq(&self.e11).integrate()
            + sq(&self.e12).integrate()
            + sq(&self.e21).integrate()
            + sq(&self.e22).integrate();
        total.sqrt()
    }

    pub fn l2_distance(&self, other: &MatrixGridFn) -> Result<f64> {
        let d = |a: &GridFn, b: &GridFn| -> Result<f64> { Ok(a.zip_with(b, |x, y| (x - y) * (x - y))?.integrate()) };
        Ok((d(&self.e11, &other.e11)?
            + d(&self.e12, &other.e12)?
            + d(&self.e21, &other.e21)?
            + d(&self.e22, &other.e22)?)
        .sqrt())
    }
}
