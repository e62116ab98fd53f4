//! Uniform periodic grids and scalar fields sampled on them.
//!
//! Values are stored row-major with `x` varying fastest, so a 2D field with
//! `n = [nx, ny]` keeps point `(i, j)` at index `j * nx + i`. Grid points sit
//! at `x_i = i * h` with `h = L / n`; the right endpoint is the periodic image
//! of the left one and is not stored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    ndim: usize,
    n: [usize; 2],
    length: [f64; 2],
}

impl Grid {
    pub fn new_1d(n: usize, length: f64) -> Result<Self> {
        Self::new(&[n], &[length])
    }

    pub fn new_2d(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        Self::new(&[nx, ny], &[lx, ly])
    }

    /// Builds a grid from per-axis point counts and domain lengths.
    ///
    /// Every count must be even and at least 4, every length finite and
    /// positive.
    pub fn new(n: &[usize], length: &[f64]) -> Result<Self> {
        let ndim = n.len();
        if !(1..=2).contains(&ndim) {
            return Err(Error::InvalidGrid(format!("ndim must be 1 or 2, got {ndim}")));
        }
        if length.len() != ndim {
            return Err(Error::InvalidGrid(format!(
                "{} point counts but {} lengths",
                ndim,
                length.len()
            )));
        }
        for (axis, &count) in n.iter().enumerate() {
            if count < 4 || count % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "point count along axis {axis} must be even and >= 4, got {count}"
                )));
            }
        }
        for (axis, &l) in length.iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "length along axis {axis} must be finite and positive, got {l}"
                )));
            }
        }
        let mut grid = Grid { ndim, n: [1, 1], length: [1.0, 1.0] };
        grid.n[..ndim].copy_from_slice(n);
        grid.length[..ndim].copy_from_slice(length);
        Ok(grid)
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }

    /// Point counts for the active axes.
    pub fn shape(&self) -> &[usize] {
        &self.n[..self.ndim]
    }

    /// Domain lengths for the active axes.
    pub fn lengths(&self) -> &[f64] {
        &self.length[..self.ndim]
    }

    pub fn nx(&self) -> usize {
        self.n[0]
    }

    /// Points along `y`; 1 for a 1D grid.
    pub fn ny(&self) -> usize {
        self.n[1]
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.length[axis] / self.n[axis] as f64
    }

    /// |Ω|, the product of the active domain lengths.
    pub fn volume(&self) -> f64 {
        self.lengths().iter().product()
    }

    /// Quadrature weight shared by every grid point.
    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.len() as f64
    }

    /// Coordinates of the point at flat index `idx`. `y` is 0 in 1D.
    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let i = idx % self.n[0];
        let j = idx / self.n[0];
        let y = if self.ndim == 2 { j as f64 * self.spacing(1) } else { 0.0 };
        (i as f64 * self.spacing(0), y)
    }
}

/// A scalar field on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Field { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Field { grid, values: vec![c; grid.len()] }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ValueCountMismatch { expected: grid.len(), found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
        Ok(Field { grid, values })
    }

    /// Samples `f(x, y)` at every grid point (`y = 0` in 1D).
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let (x, y) = grid.coords(idx);
                f(x, y)
            })
            .collect();
        Field { grid, values }
    }

    /// Independent standard normal value at every point.
    pub fn random_normal<R: Rng + ?Sized>(grid: Grid, rng: &mut R) -> Self {
        let values = (0..grid.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        Field { grid, values }
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scaled(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        self.check_same_grid(other)?;
        Ok(self.lincomb_unchecked(a, other, b))
    }

    pub(crate) fn lincomb_unchecked(&self, a: f64, other: &Field, b: f64) -> Field {
        let values =
            self.values.iter().zip(&other.values).map(|(&x, &y)| a * x + b * y).collect();
        Field { grid: self.grid, values }
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.lincomb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.lincomb(1.0, other, -1.0)
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &Field) -> Result<()> {
        self.check_same_grid(x)?;
        self.axpy_unchecked(a, x);
        Ok(())
    }

    pub(crate) fn axpy_unchecked(&mut self, a: f64, x: &Field) {
        for (s, &xv) in self.values.iter_mut().zip(&x.values) {
            *s += a * xv;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max-norm distance to another field on the same grid.
    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn mean(&self) -> f64 {
        integrate(self) / self.grid.volume()
    }

    pub fn norm_l2(&self) -> f64 {
        inner_l2_unchecked(self, self).sqrt()
    }

    /// Cyclic shift by whole grid points along each axis.
    pub fn shifted(&self, dx: usize, dy: usize) -> Field {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut out = vec![0.0; self.values.len()];
        for j in 0..ny {
            for i in 0..nx {
                out[((j + dy) % ny) * nx + (i + dx) % nx] = self.values[j * nx + i];
            }
        }
        Field { grid: self.grid, values: out }
    }
}

/// Trapezoid quadrature on the periodic grid: `Σ values · cell volume`.
pub fn integrate(f: &Field) -> f64 {
    f.values.iter().sum::<f64>() * f.grid.cell_volume()
}

/// L² inner product `Σ f·g · cell volume`.
pub fn inner_l2(f: &Field, g: &Field) -> Result<f64> {
    f.check_same_grid(g)?;
    Ok(inner_l2_unchecked(f, g))
}

pub(crate) fn inner_l2_unchecked(f: &Field, g: &Field) -> f64 {
    dot(&f.values, &g.values) * f.grid.cell_volume()
}

/// Plain dot product with a fixed left-to-right summation order, which makes
/// it exactly symmetric in its arguments.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Writes a field in the plain-text field format.
pub fn write_field(f: &Field, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_field(f))?;
    Ok(())
}

/// Serializes a field: a header line `ndim n_x [n_y] L_x [L_y]` followed by
/// one value per line, all reals with 18 significant digits.
pub fn format_field(f: &Field) -> String {
    let grid = f.grid();
    let mut out = String::with_capacity(26 * (grid.len() + 2));
    out.push_str(&grid.ndim().to_string());
    for n in grid.shape() {
        write!(out, " {n}").unwrap();
    }
    for l in grid.lengths() {
        write!(out, " {l:.17e}").unwrap();
    }
    out.push('\n');
    for v in f.values() {
        writeln!(out, "{v:.17e}").unwrap();
    }
    out
}

pub fn read_field(path: impl AsRef<Path>) -> Result<Field> {
    parse_field(&fs::read_to_string(path)?)
}

pub fn parse_field(text: &str) -> Result<Field> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = loop {
        match lines.next() {
            Some(l) if l.starts_with('#') => continue,
            Some(l) => break l,
            None => return Err(Error::Format("missing header line".into())),
        }
    };
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let ndim: usize = tokens
        .first()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Format(format!("bad ndim in header {header:?}")))?;
    if !(1..=2).contains(&ndim) || tokens.len() != 1 + 2 * ndim {
        return Err(Error::Format(format!("header {header:?} does not match `ndim n.. L..`")));
    }
    let n = tokens[1..=ndim]
        .iter()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Format(format!("bad point count: {e}")))?;
    let length = tokens[1 + ndim..]
        .iter()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Format(format!("bad length: {e}")))?;
    let grid = Grid::new(&n, &length)?;

    let mut values = Vec::with_capacity(grid.len());
    for line in lines {
        if line.starts_with('#') {
            return Err(Error::Format("comment lines are only allowed before the header".into()));
        }
        let v: f64 =
            line.parse().map_err(|e| Error::Format(format!("bad value {line:?}: {e}")))?;
        if !v.is_finite() {
            return Err(Error::NonFinite("field file"));
        }
        values.push(v);
    }
    if values.len() != grid.len() {
        return Err(Error::ValueCountMismatch { expected: grid.len(), found: values.len() });
    }
    Ok(Field { grid, values })
}
