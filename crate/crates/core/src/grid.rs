//! Periodic lattices and the fields sampled on them.
//!
//! A [`Grid`] is a 1D or 2D torus `[-L/2, L/2)^d` cut into an even number of
//! cells per axis. Cell centers sit at `-L/2 + (i + 1/2) h`. Kernel weights
//! live on the *offset* lattice `k h`, stored in FFT order (`k = i` for
//! `i < N/2`, `k = i - N` otherwise), so that a discrete convolution maps
//! cell centers onto cell centers.

use crate::error::{Error, Result};

/// A point in up to two dimensions; unused coordinates are zero.
pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dims: usize,
    extent: [f64; 2],
    cells: [usize; 2],
}

impl Grid {
    pub fn new(extent: &[f64], cells: &[usize]) -> Result<Self> {
        let dims = extent.len();
        if !(1..=2).contains(&dims) || cells.len() != dims {
            return Err(Error::InvalidParameter(format!(
                "grid needs 1 or 2 axes with matching extent/cells, got {} and {}",
                extent.len(),
                cells.len()
            )));
        }
        let mut e = [1.0; 2];
        let mut c = [1usize; 2];
        for axis in 0..dims {
            if !(extent[axis] > 0.0) || !extent[axis].is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "extent along axis {axis} must be positive, got {}",
                    extent[axis]
                )));
            }
            if cells[axis] < 2 || cells[axis] % 2 != 0 {
                return Err(Error::InvalidParameter(format!(
                    "cells along axis {axis} must be even and >= 2, got {}",
                    cells[axis]
                )));
            }
            e[axis] = extent[axis];
            c[axis] = cells[axis];
        }
        Ok(Grid {
            dims,
            extent: e,
            cells: c,
        })
    }

    pub fn line(extent: f64, cells: usize) -> Result<Self> {
        Self::new(&[extent], &[cells])
    }

    pub fn plane(extent: [f64; 2], cells: [usize; 2]) -> Result<Self> {
        Self::new(&extent, &cells)
    }

    /// A line grid with the given spacing and cell count.
    pub fn line_with_spacing(spacing: f64, cells: usize) -> Result<Self> {
        Self::line(spacing * cells as f64, cells)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn cells(&self, axis: usize) -> usize {
        self.cells[axis]
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.extent[axis]
    }

    pub fn half_extent(&self, axis: usize) -> f64 {
        0.5 * self.extent[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.extent[axis] / self.cells[axis] as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dims)
            .map(|a| self.spacing(a))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dims).map(|a| self.spacing(a)).product()
    }

    pub fn len(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major flat index; axis 0 is the slow axis.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.cells[1] + j
    }

    #[inline]
    pub fn split_index(&self, idx: usize) -> (usize, usize) {
        (idx / self.cells[1], idx % self.cells[1])
    }

    #[inline]
    pub fn center(&self, axis: usize, i: usize) -> f64 {
        -0.5 * self.extent[axis] + (i as f64 + 0.5) * self.spacing(axis)
    }

    /// Coordinates of the center of flat cell `idx`.
    pub fn cell_center(&self, idx: usize) -> Point {
        let (i, j) = self.split_index(idx);
        let mut p = [self.center(0, i), 0.0];
        if self.dims == 2 {
            p[1] = self.center(1, j);
        }
        p
    }

    /// Signed lattice offset (in cells) for FFT-ordered index `i` on `axis`.
    #[inline]
    pub fn offset_cells(&self, axis: usize, i: usize) -> isize {
        let n = self.cells[axis];
        if i < n / 2 {
            i as isize
        } else {
            i as isize - n as isize
        }
    }

    /// Offset vector for FFT-ordered flat index `idx`.
    pub fn offset_point(&self, idx: usize) -> Point {
        let (i, j) = self.split_index(idx);
        let mut p = [self.offset_cells(0, i) as f64 * self.spacing(0), 0.0];
        if self.dims == 2 {
            p[1] = self.offset_cells(1, j) as f64 * self.spacing(1);
        }
        p
    }

    /// FFT-ordered flat index of the lattice offset `(k0, k1)` (wrapped).
    pub fn offset_index(&self, k0: isize, k1: isize) -> usize {
        let i = k0.rem_euclid(self.cells[0] as isize) as usize;
        let j = k1.rem_euclid(self.cells[1] as isize) as usize;
        self.index(i, j)
    }

    /// Shortest periodic displacement from `b` to `a`.
    pub fn min_image(&self, a: Point, b: Point) -> Point {
        let mut d = [0.0; 2];
        for axis in 0..self.dims {
            let l = self.extent[axis];
            let mut x = a[axis] - b[axis];
            x -= l * (x / l).round();
            d[axis] = x;
        }
        d
    }

    /// Distance from `p` to the nearest seam `±L/2` along any axis.
    pub fn seam_distance(&self, p: Point) -> f64 {
        (0..self.dims)
            .map(|a| {
                let l = self.extent[a];
                let x = p[a] - l * (p[a] / l).round();
                0.5 * l - x.abs()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn same_lattice(&self, other: &Grid) -> bool {
        self.dims == other.dims
            && self.cells == other.cells
            && (0..self.dims).all(|a| (self.extent[a] - other.extent[a]).abs() <= 1e-12 * self.extent[a])
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self.same_lattice(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

#[inline]
pub(crate) fn norm(p: Point) -> f64 {
    (p[0] * p[0] + p[1] * p[1]).sqrt()
}

#[inline]
pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Grid-sampled density `u(., t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
    time: f64,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Field {
            grid,
            values: vec![value; grid.len()],
            time: 0.0,
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field {
            grid,
            values,
            time: 0.0,
        })
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.cell_center(i))).collect();
        Field {
            grid,
            values,
            time: 0.0,
        }
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Discrete integral `sum(u) * cell volume`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn sup_distance(&self, other: &Field) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            time: self.time,
        }
    }

    /// Translation by whole cells: `(T_y v)(x) = v(x - y)` with `y = shift * h`.
    pub fn translate_cells(&self, shift: [isize; 2]) -> Field {
        let g = self.grid;
        let (n0, n1) = (g.cells(0) as isize, g.cells(1) as isize);
        let mut out = vec![0.0; g.len()];
        for i in 0..n0 {
            let si = (i - shift[0]).rem_euclid(n0) as usize;
            for j in 0..n1 {
                let sj = (j - shift[1]).rem_euclid(n1) as usize;
                out[g.index(i as usize, j as usize)] = self.values[g.index(si, sj)];
            }
        }
        Field {
            grid: g,
            values: out,
            time: self.time,
        }
    }

    /// Periodic linear (1D) or bilinear (2D) interpolation at `p`.
    pub fn sample(&self, p: Point) -> f64 {
        let g = &self.grid;
        let mut base = [0isize; 2];
        let mut frac = [0.0; 2];
        for axis in 0..g.dims() {
            let h = g.spacing(axis);
            let pos = (p[axis] + g.half_extent(axis)) / h - 0.5;
            let fl = pos.floor();
            base[axis] = fl as isize;
            frac[axis] = pos - fl;
        }
        let n0 = g.cells(0) as isize;
        let n1 = g.cells(1) as isize;
        let at = |i: isize, j: isize| -> f64 {
            self.values[g.index(i.rem_euclid(n0) as usize, j.rem_euclid(n1) as usize)]
        };
        if g.dims() == 1 {
            let (i, t) = (base[0], frac[0]);
            (1.0 - t) * at(i, 0) + t * at(i + 1, 0)
        } else {
            let (i, j) = (base[0], base[1]);
            let (s, t) = (frac[0], frac[1]);
            (1.0 - s) * ((1.0 - t) * at(i, j) + t * at(i, j + 1))
                + s * ((1.0 - t) * at(i + 1, j) + t * at(i + 1, j + 1))
        }
    }

    /// Cell-wise maximum violation of `lo <= u <= hi` (0 when inside).
    pub fn tube_violation(&self, lo: f64, hi: f64) -> f64 {
        self.values
            .iter()
            .fold(0.0, |m, &v| m.max(lo - v).max(v - hi))
    }
}

/// An axis-aligned box `center + [-half_width, half_width]^d` on the torus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub center: Point,
    pub half_width: f64,
}

impl Window {
    pub fn new(center: Point, half_width: f64) -> Self {
        Window { center, half_width }
    }

    pub fn centered(half_width: f64) -> Self {
        Window::new([0.0, 0.0], half_width)
    }

    pub fn contains(&self, grid: &Grid, p: Point) -> bool {
        let d = grid.min_image(p, self.center);
        (0..grid.dims()).all(|a| d[a].abs() <= self.half_width * (1.0 + 1e-12))
    }

    /// Flat indices of the cells whose centers lie in the window.
    pub fn cells(&self, grid: &Grid) -> Vec<usize> {
        (0..grid.len()).filter(|&i| self.contains(grid, grid.cell_center(i))).collect()
    }

    /// Smallest distance from the window to the torus seam.
    pub fn seam_clearance(&self, grid: &Grid) -> f64 {
        grid.seam_distance(self.center) - self.half_width
    }
}
