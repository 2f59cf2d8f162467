use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

const COLUMN_BLOCK: usize = 16;

/// Two-dimensional complex FFT over a standard-layout `[ny, nx]` array.
pub(crate) struct Fft2 {
    nx: usize,
    ny: usize,
    row_forward: Arc<dyn Fft<f64>>,
    row_inverse: Arc<dyn Fft<f64>>,
    col_forward: Arc<dyn Fft<f64>>,
    col_inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(ny: usize, nx: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nx,
            ny,
            row_forward: planner.plan_fft_forward(nx),
            row_inverse: planner.plan_fft_inverse(nx),
            col_forward: planner.plan_fft_forward(ny),
            col_inverse: planner.plan_fft_inverse(ny),
        }
    }

    pub fn forward(&self, data: &mut Array2<Complex64>) {
        self.transform(data, &self.row_forward, &self.col_forward);
    }

    /// Inverse transform including the `1 / (nx * ny)` normalization.
    pub fn inverse(&self, data: &mut Array2<Complex64>) {
        self.transform(data, &self.row_inverse, &self.col_inverse);
        let scale = 1.0 / (self.nx * self.ny) as f64;
        data.mapv_inplace(|v| v * scale);
    }

    fn transform(
        &self,
        data: &mut Array2<Complex64>,
        rows: &Arc<dyn Fft<f64>>,
        cols: &Arc<dyn Fft<f64>>,
    ) {
        assert_eq!(data.dim(), (self.ny, self.nx), "fft shape mismatch");
        let (ny, nx) = (self.ny, self.nx);
        let buf = data
            .as_slice_mut()
            .expect("field arrays are in standard layout");

        let mut scratch = vec![Complex64::default(); rows.get_inplace_scratch_len()];
        rows.process_with_scratch(buf, &mut scratch);

        let mut scratch = vec![Complex64::default(); cols.get_inplace_scratch_len()];
        let mut block = vec![Complex64::default(); COLUMN_BLOCK * ny];
        let mut start = 0;
        while start < nx {
            let width = COLUMN_BLOCK.min(nx - start);
            for j in 0..ny {
                let row = &buf[j * nx + start..j * nx + start + width];
                for (c, v) in row.iter().enumerate() {
                    block[c * ny + j] = *v;
                }
            }
            cols.process_with_scratch(&mut block[..width * ny], &mut scratch);
            for j in 0..ny {
                let row = &mut buf[j * nx + start..j * nx + start + width];
                for (c, v) in row.iter_mut().enumerate() {
                    *v = block[c * ny + j];
                }
            }
            start += width;
        }
    }
}
