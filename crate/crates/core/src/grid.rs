use crate::error::{Error, Result};

/// Sampling of one periodic unit cell. Sample `(i, j)` sits at
/// `(i * dx_um, j * dy_um)`; arrays are indexed `[j, i]` (row = y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub dx_um: f64,
    pub dy_um: f64,
    pub cell_width_um: f64,
    pub cell_height_um: f64,
}

impl GridSpec {
    /// Grid with exactly `nx` by `ny` samples tiling the given cell.
    pub fn new(nx: usize, ny: usize, cell_width_um: f64, cell_height_um: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidGrid(format!("empty grid {nx}x{ny}")));
        }
        if !(cell_width_um > 0.0 && cell_height_um > 0.0)
            || !cell_width_um.is_finite()
            || !cell_height_um.is_finite()
        {
            return Err(Error::InvalidGrid(format!(
                "cell must be positive and finite, got {cell_width_um} x {cell_height_um}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            dx_um: cell_width_um / nx as f64,
            dy_um: cell_height_um / ny as f64,
            cell_width_um,
            cell_height_um,
        })
    }

    /// Grid from explicit spacings; the cell is `nx * dx` by `ny * dy`.
    pub fn from_spacing(nx: usize, ny: usize, dx_um: f64, dy_um: f64) -> Result<Self> {
        if !(dx_um > 0.0 && dy_um > 0.0) || !dx_um.is_finite() || !dy_um.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "spacing must be positive and finite, got {dx_um} x {dy_um}"
            )));
        }
        let mut grid = Self::new(nx, ny, nx as f64 * dx_um, ny as f64 * dy_um)?;
        grid.dx_um = dx_um;
        grid.dy_um = dy_um;
        Ok(grid)
    }

    /// Smallest grid on the cell whose spacing does not exceed `max_spacing_um`.
    pub fn covering(cell_width_um: f64, cell_height_um: f64, max_spacing_um: f64) -> Result<Self> {
        if !(max_spacing_um > 0.0) || !max_spacing_um.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "spacing must be positive, got {max_spacing_um}"
            )));
        }
        let count = |len: f64| ((len / max_spacing_um) - 1e-9).ceil().max(1.0) as usize;
        Self::new(
            count(cell_width_um),
            count(cell_height_um),
            cell_width_um,
            cell_height_um,
        )
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.ny, self.nx)
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx_um
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.dy_um
    }

    pub fn pixel_area(&self) -> f64 {
        self.dx_um * self.dy_um
    }

    /// Whether this grid tiles a cell of the given size to relative precision 1e-9.
    pub fn tiles(&self, width_um: f64, height_um: f64) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
        close(self.cell_width_um, width_um) && close(self.cell_height_um, height_um)
    }

    /// Spatial frequencies (cycles/um) of the DFT bins along x, in FFT order.
    pub fn frequencies_x(&self) -> Vec<f64> {
        fft_frequencies(self.nx, self.cell_width_um)
    }

    pub fn frequencies_y(&self) -> Vec<f64> {
        fft_frequencies(self.ny, self.cell_height_um)
    }
}

fn fft_frequencies(n: usize, period: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let m = if i <= n / 2 { i as i64 } else { i as i64 - n as i64 };
            m as f64 / period
        })
        .collect()
}
