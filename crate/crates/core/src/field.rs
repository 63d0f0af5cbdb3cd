//! Channel-valued functions sampled at the cell centres of a uniform 2-D grid.
//!
//! Storage is y-major, x-minor, channel-innermost: the value of channel `c`
//! at cell `(i, j)` lives at `(j * nx + i) * channels + c`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_GRID_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        for (name, n) in [("nx", nx), ("ny", ny)] {
            if n < MIN_GRID_SIZE {
                return Err(Error::InvalidGrid(format!(
                    "{name} = {n} is below the minimum of {MIN_GRID_SIZE}"
                )));
            }
            if !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "{name} = {n} is not a power of two"
                )));
            }
        }
        if !(lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "extents must be positive, got {lx} x {ly}"
            )));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    /// Square `n x n` grid on the unit square.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    /// Square `n x n` grid on the torus `[0, 2pi]^2`.
    pub fn periodic_2pi(n: usize) -> Result<Self> {
        let l = 2.0 * std::f64::consts::PI;
        Self::new(n, n, l, l)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    /// Cell-centre x coordinate of column `i`.
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    /// Cell-centre y coordinate of row `j`.
    pub fn y(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dy()
    }

    pub fn same_points(&self, other: &Grid2D) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.lx == other.lx && self.ly == other.ly
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid2D,
    channels: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid2D, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::ShapeMismatch(
                "a field needs at least one channel".into(),
            ));
        }
        if data.len() != grid.len() * channels {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values for a {}x{}x{} field, got {}",
                grid.len() * channels,
                grid.nx(),
                grid.ny(),
                channels,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field entry {pos}")));
        }
        Ok(Self {
            grid,
            channels,
            data,
        })
    }

    pub fn zeros(grid: Grid2D, channels: usize) -> Self {
        assert!(channels > 0, "a field needs at least one channel");
        Self {
            grid,
            channels,
            data: vec![0.0; grid.len() * channels],
        }
    }

    pub fn constant(grid: Grid2D, channels: usize, value: f64) -> Self {
        assert!(value.is_finite());
        let mut f = Self::zeros(grid, channels);
        f.data.fill(value);
        f
    }

    /// Samples `f(x, y, channel)` at every cell centre.
    pub fn from_fn(
        grid: Grid2D,
        channels: usize,
        mut f: impl FnMut(f64, f64, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(grid.len() * channels);
        for j in 0..grid.ny() {
            let y = grid.y(j);
            for i in 0..grid.nx() {
                let x = grid.x(i);
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(grid, channels, data)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, c: usize) -> usize {
        (j * self.grid.nx() + i) * self.channels + c
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, c: usize) -> f64 {
        self.data[self.index(i, j, c)]
    }

    /// Applies `f` to every entry, rejecting non-finite results.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(
            self.grid,
            self.channels,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn scaled(&self, alpha: f64) -> Result<Field> {
        self.map(|v| alpha * v)
    }

    pub fn channel(&self, c: usize) -> Field {
        assert!(c < self.channels);
        let data = self
            .data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect();
        Field {
            grid: self.grid,
            channels: 1,
            data,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check_same_shape(&self, other: &Field) -> Result<()> {
        if !self.grid.same_points(&other.grid) || self.channels != other.channels {
            return Err(Error::ShapeMismatch(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.grid.nx(),
                self.grid.ny(),
                self.channels,
                other.grid.nx(),
                other.grid.ny(),
                other.channels
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Field::new(self.grid, self.channels, data)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Field::new(self.grid, self.channels, data)
    }

    /// Circular shift: the result at cell `(i, j)` is `self` at `(i + sx, j + sy)`.
    pub fn roll(&self, sx: isize, sy: isize) -> Field {
        let (nx, ny) = (self.grid.nx() as isize, self.grid.ny() as isize);
        let mut out = Field::zeros(self.grid, self.channels);
        for j in 0..ny {
            let js = (j + sy).rem_euclid(ny) as usize;
            for i in 0..nx {
                let is = (i + sx).rem_euclid(nx) as usize;
                let dst = out.index(i as usize, j as usize, 0);
                let src = self.index(is, js, 0);
                out.data[dst..dst + self.channels]
                    .copy_from_slice(&self.data[src..src + self.channels]);
            }
        }
        out
    }
}

/// Cell-centre coordinates as a two-channel field: channel 0 is x, channel 1 is y.
pub fn coords_field(grid: &Grid2D) -> Field {
    Field::from_fn(*grid, 2, |x, y, c| if c == 0 { x } else { y })
        .expect("cell-centre coordinates are finite")
}

/// Per-channel arithmetic mean over all grid points.
pub fn mean_over_domain(f: &Field) -> Vec<f64> {
    let c = f.channels();
    let mut sums = vec![0.0; c];
    for point in f.data().chunks_exact(c) {
        for (s, v) in sums.iter_mut().zip(point) {
            *s += v;
        }
    }
    let n = f.grid().len() as f64;
    sums.into_iter().map(|s| s / n).collect()
}

/// Midpoint-quadrature L2 inner product summed over all channels.
pub fn inner_product(f: &Field, g: &Field) -> Result<f64> {
    f.check_same_shape(g)?;
    let s: f64 = f.data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
    Ok(s * f.grid().cell_area())
}

pub fn l2_norm(f: &Field) -> f64 {
    inner_product(f, f).expect("same shape").sqrt()
}

/// `||pred - truth|| / ||truth||` under the uniform grid quadrature.
pub fn rel_l2_error(pred: &Field, truth: &Field) -> Result<f64> {
    pred.check_same_shape(truth)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, t) in pred.data().iter().zip(truth.data()) {
        num += (p - t) * (p - t);
        den += t * t;
    }
    if den == 0.0 {
        return Err(Error::DegenerateReference);
    }
    Ok((num / den).sqrt())
}
