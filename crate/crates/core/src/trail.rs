//! The pheromone medium: discretized trails, marks, evaporation and fuzzy
//! Jaccard similarity, on a 1-D value axis and on a 2-D spatial grid.
//!
//! A trail step is `T_i = max(0, T_{i-1} - delta) + mark_i`: the old trail
//! evaporates first, then the new mark is added on top.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::write_pgm;

/// Anything that can be compared cell by cell with [`jaccard`].
pub trait Field {
    fn values(&self) -> &[f64];
    fn same_grid(&self, other: &Self) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    lo: f64,
    hi: f64,
    cells: usize,
}

impl Grid1D {
    pub fn new(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!("grid bounds [{lo}, {hi}]")));
        }
        if cells < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid needs >= 2 cells, got {cells}"
            )));
        }
        Ok(Self { lo, hi, cells })
    }

    /// `[0, 1]` with 100 cells.
    pub fn unit() -> Self {
        Self {
            lo: 0.0,
            hi: 1.0,
            cells: 100,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.step()
    }

    /// Inclusive range of cells whose centers fall in `[a, b]`, or `None`
    /// if the interval misses the grid.
    fn cells_within(&self, a: f64, b: f64) -> Option<(usize, usize)> {
        let step = self.step();
        let first = ((a - self.lo) / step - 0.5).ceil().max(0.0);
        let last = ((b - self.lo) / step - 0.5).floor();
        let max = (self.cells - 1) as f64;
        if last < 0.0 || first > max || first > last {
            return None;
        }
        Some((first as usize, last.min(max) as usize))
    }
}

impl Default for Grid1D {
    fn default() -> Self {
        Self::unit()
    }
}

/// Trapezoid with base width `width` and top width `width / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mark1D {
    center: f64,
    width: f64,
    height: f64,
}

impl Mark1D {
    pub fn new(center: f64, width: f64, height: f64) -> Result<Self> {
        if !(center.is_finite() && width.is_finite() && height.is_finite()) {
            return Err(Error::InvalidMark("non-finite mark parameter".into()));
        }
        if width <= 0.0 || height <= 0.0 {
            return Err(Error::InvalidMark(format!(
                "width and height must be positive (width {width}, height {height})"
            )));
        }
        Ok(Self {
            center,
            width,
            height,
        })
    }

    pub fn support(&self) -> (f64, f64) {
        (
            self.center - self.width / 2.0,
            self.center + self.width / 2.0,
        )
    }

    pub fn value_at(&self, x: f64) -> f64 {
        taper((x - self.center).abs(), self.width / 2.0, self.height)
    }
}

/// Radial profile shared by trapezoids and truncated cones: flat top out to
/// half the base radius, then linear down to zero at `radius`.
#[inline]
fn taper(distance: f64, radius: f64, height: f64) -> f64 {
    let top = radius / 2.0;
    if distance <= top {
        height
    } else if distance < radius {
        height * (radius - distance) / (radius - top)
    } else {
        0.0
    }
}

fn evaporate_cells(cells: &mut [f64], delta: f64) -> Result<()> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "evaporation must be a finite value >= 0, got {delta}"
        )));
    }
    if delta > 0.0 {
        for v in cells.iter_mut() {
            *v = (*v - delta).max(0.0);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trail1D {
    grid: Grid1D,
    intensity: Vec<f64>,
}

impl Trail1D {
    pub fn new(grid: Grid1D) -> Self {
        Self {
            grid,
            intensity: vec![0.0; grid.cells],
        }
    }

    pub fn from_intensity(grid: Grid1D, intensity: Vec<f64>) -> Result<Self> {
        if intensity.len() != grid.cells {
            return Err(Error::LengthMismatch {
                expected: grid.cells,
                actual: intensity.len(),
            });
        }
        if intensity.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "trail intensities must be finite and >= 0".into(),
            ));
        }
        Ok(Self { grid, intensity })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    pub fn total(&self) -> f64 {
        self.intensity.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.intensity.iter().all(|&v| v == 0.0)
    }

    pub fn deposit(&mut self, mark: &Mark1D) {
        let (a, b) = mark.support();
        if let Some((first, last)) = self.grid.cells_within(a, b) {
            for i in first..=last {
                self.intensity[i] += mark.value_at(self.grid.center(i));
            }
        }
    }

    pub fn evaporate(&mut self, delta: f64) -> Result<()> {
        evaporate_cells(&mut self.intensity, delta)
    }

    /// Two columns, `value,intensity`, one row per cell.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "value,intensity")?;
        for (i, v) in self.intensity.iter().enumerate() {
            writeln!(w, "{},{}", self.grid.center(i), v)?;
        }
        Ok(())
    }
}

impl Field for Trail1D {
    fn values(&self) -> &[f64] {
        &self.intensity
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.grid == other.grid
    }
}

/// Parameters for folding a sample sequence into a trail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrailSpec {
    pub mark_width: f64,
    pub evaporation: f64,
    pub height: f64,
    pub grid: Grid1D,
}

/// Folds evaporate-then-deposit over `samples` in order.
pub fn trail_of_series(samples: &[f64], spec: &TrailSpec) -> Result<Trail1D> {
    let mut trail = Trail1D::new(spec.grid);
    for &s in samples {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidParameter(format!(
                "sample {s} outside [0, 1]"
            )));
        }
        trail.evaporate(spec.evaporation)?;
        trail.deposit(&Mark1D::new(s, spec.mark_width, spec.height)?);
    }
    Ok(trail)
}

/// Fuzzy Jaccard similarity: cellwise `sum(min) / sum(max)`.
///
/// Returns [`Error::UndefinedSimilarity`] when both trails are all-zero; use
/// [`jaccard_or_zero`] where that case should count as no similarity.
pub fn jaccard<F: Field>(a: &F, b: &F) -> Result<f64> {
    if !a.same_grid(b) {
        return Err(Error::IncompatibleGrids);
    }
    let (mut inter, mut union) = (0.0, 0.0);
    for (&x, &y) in a.values().iter().zip(b.values()) {
        inter += x.min(y);
        union += x.max(y);
    }
    if union == 0.0 {
        return Err(Error::UndefinedSimilarity);
    }
    Ok((inter / union).clamp(0.0, 1.0))
}

pub fn jaccard_or_zero<F: Field>(a: &F, b: &F) -> Result<f64> {
    match jaccard(a, b) {
        Err(Error::UndefinedSimilarity) => {
            log::debug!("jaccard of two empty trails, using 0");
            Ok(0.0)
        }
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2D {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> Result<Self> {
        Grid1D::new(x0, x1, nx)?;
        Grid1D::new(y0, y1, ny)?;
        Ok(Self {
            x0,
            x1,
            y0,
            y1,
            nx,
            ny,
        })
    }

    pub fn x_axis(&self) -> Grid1D {
        Grid1D {
            lo: self.x0,
            hi: self.x1,
            cells: self.nx,
        }
    }

    pub fn y_axis(&self) -> Grid1D {
        Grid1D {
            lo: self.y0,
            hi: self.y1,
            cells: self.ny,
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    pub fn center(&self, ix: usize, iy: usize) -> (f64, f64) {
        (self.x_axis().center(ix), self.y_axis().center(iy))
    }

    /// Cell containing `(x, y)`. Cells are half-open `(lo, hi]`, so a point
    /// on a shared boundary goes to the lower-index cell; the grid's own lower
    /// edge belongs to cell 0.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        locate_axis(x, self.x0, self.x1, self.nx).zip(locate_axis(y, self.y0, self.y1, self.ny))
    }
}

fn locate_axis(v: f64, lo: f64, hi: f64, n: usize) -> Option<usize> {
    if !(v >= lo && v <= hi) {
        return None;
    }
    let t = (v - lo) / (hi - lo) * n as f64;
    let i = if t <= 0.0 { 0 } else { t.ceil() as usize - 1 };
    Some(i.min(n - 1))
}

/// Truncated cone with base radius `radius` and top radius `radius / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mark2D {
    x: f64,
    y: f64,
    radius: f64,
    height: f64,
}

impl Mark2D {
    pub fn new(x: f64, y: f64, radius: f64, height: f64) -> Result<Self> {
        if ![x, y, radius, height].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidMark("non-finite mark parameter".into()));
        }
        if radius <= 0.0 || height <= 0.0 {
            return Err(Error::InvalidMark(format!(
                "radius and height must be positive (radius {radius}, height {height})"
            )));
        }
        Ok(Self {
            x,
            y,
            radius,
            height,
        })
    }

    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        taper((x - self.x).hypot(y - self.y), self.radius, self.height)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trail2D {
    grid: Grid2D,
    intensity: Vec<f64>,
}

impl Trail2D {
    pub fn new(grid: Grid2D) -> Self {
        Self {
            grid,
            intensity: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.intensity[self.grid.index(ix, iy)]
    }

    pub fn total(&self) -> f64 {
        self.intensity.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.intensity.iter().all(|&v| v == 0.0)
    }

    pub fn deposit(&mut self, mark: &Mark2D) {
        let (xa, ya) = (self.grid.x_axis(), self.grid.y_axis());
        let xs = xa.cells_within(mark.x - mark.radius, mark.x + mark.radius);
        let ys = ya.cells_within(mark.y - mark.radius, mark.y + mark.radius);
        let (Some((x_first, x_last)), Some((y_first, y_last))) = (xs, ys) else {
            return;
        };
        for iy in y_first..=y_last {
            let cy = ya.center(iy);
            for ix in x_first..=x_last {
                let v = mark.value_at(xa.center(ix), cy);
                if v > 0.0 {
                    self.intensity[iy * self.grid.nx + ix] += v;
                }
            }
        }
    }

    pub fn evaporate(&mut self, delta: f64) -> Result<()> {
        evaporate_cells(&mut self.intensity, delta)
    }

    /// Dense matrix, one CSV line per grid row, northernmost row first.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for iy in (0..self.grid.ny).rev() {
            let row = &self.intensity[iy * self.grid.nx..(iy + 1) * self.grid.nx];
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Grayscale heatmap, northernmost row first, rescaled so the peak is 255.
    pub fn write_pgm<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut rows = Vec::with_capacity(self.intensity.len());
        for iy in (0..self.grid.ny).rev() {
            rows.extend_from_slice(&self.intensity[iy * self.grid.nx..(iy + 1) * self.grid.nx]);
        }
        write_pgm(w, self.grid.nx, self.grid.ny, &rows, None)
    }
}

impl Field for Trail2D {
    fn values(&self) -> &[f64] {
        &self.intensity
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.grid == other.grid
    }
}
