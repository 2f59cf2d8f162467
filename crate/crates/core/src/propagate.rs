//! Scalar plane-wave (angular-spectrum) propagation on the periodic unit
//! cell, and the exposure dose it deposits in the resist.

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::grid::GridSpec;
use crate::mask::TransmissionGrid;
use crate::resist::ProcessRecipe;
use ndarray::{Array2, Array3, ArrayView2, Axis, Zip};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

/// Monochromatic complex amplitude sampled over one periodic cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub grid: GridSpec,
    /// Vacuum wavelength.
    pub wavelength_um: f64,
    pub medium_index: f64,
    pub amplitudes: Array2<Complex64>,
}

impl SampledField {
    pub fn new(
        grid: GridSpec,
        wavelength_um: f64,
        medium_index: f64,
        amplitudes: Array2<Complex64>,
    ) -> Result<Self> {
        if amplitudes.dim() != grid.shape() {
            return Err(Error::InvalidGrid(format!(
                "amplitude array {:?} does not match grid {:?}",
                amplitudes.dim(),
                grid.shape()
            )));
        }
        if !(wavelength_um > 0.0 && wavelength_um.is_finite()) {
            return Err(Error::Domain(format!("wavelength must be positive, got {wavelength_um}")));
        }
        if !(medium_index > 0.0 && medium_index.is_finite()) {
            return Err(Error::Domain(format!("medium index must be positive, got {medium_index}")));
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::Domain("field contains non-finite amplitudes".into()));
        }
        let amplitudes = amplitudes.as_standard_layout().into_owned();
        Ok(Self {
            grid,
            wavelength_um,
            medium_index,
            amplitudes,
        })
    }

    pub fn uniform(grid: GridSpec, wavelength_um: f64, medium_index: f64, value: Complex64) -> Result<Self> {
        Self::new(
            grid,
            wavelength_um,
            medium_index,
            Array2::from_elem(grid.shape(), value),
        )
    }

    /// Unit plane wave in air right behind the mask.
    pub fn behind_mask(mask: &TransmissionGrid, wavelength_um: f64) -> Result<Self> {
        Self::new(
            mask.grid,
            wavelength_um,
            1.0,
            mask.values.mapv(|t| Complex64::new(t, 0.0)),
        )
    }

    /// Continue in another medium; the interface passes amplitude unchanged.
    pub fn entering(mut self, medium_index: f64) -> Result<Self> {
        if !(medium_index > 0.0 && medium_index.is_finite()) {
            return Err(Error::Domain(format!("medium index must be positive, got {medium_index}")));
        }
        self.medium_index = medium_index;
        Ok(self)
    }

    pub fn intensity(&self) -> Array2<f64> {
        self.amplitudes.mapv(|a| a.norm_sqr())
    }

    /// Total power `sum |a|^2 dx dy`.
    pub fn power(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.pixel_area()
    }
}

/// Axial wavenumbers `kz` for every DFT bin, imaginary for evanescent bins.
fn axial_wavenumbers(grid: &GridSpec, wavelength_um: f64, medium_index: f64) -> Array2<Complex64> {
    let k = 2.0 * PI * medium_index / wavelength_um;
    let k2 = k * k;
    let fx = grid.frequencies_x();
    let fy = grid.frequencies_y();
    Array2::from_shape_fn(grid.shape(), |(j, i)| {
        let kx = 2.0 * PI * fx[i];
        let ky = 2.0 * PI * fy[j];
        let kz2 = k2 - kx * kx - ky * ky;
        if kz2 >= 0.0 {
            Complex64::new(kz2.sqrt(), 0.0)
        } else {
            Complex64::new(0.0, (-kz2).sqrt())
        }
    })
}

fn apply_transfer(spectrum: &mut Array2<Complex64>, kz: &Array2<Complex64>, distance_um: f64) {
    let i = Complex64::new(0.0, 1.0);
    Zip::from(spectrum)
        .and(kz)
        .for_each(|s, &kz| *s *= (i * kz * distance_um).exp());
}

/// Propagate a periodic field by `distance_um` through its medium.
///
/// Every plane-wave component advances by `exp(i kz d)`; evanescent
/// components decay. Distance zero returns the input unchanged.
pub fn angular_spectrum_step(field: &SampledField, distance_um: f64) -> Result<SampledField> {
    if !(distance_um >= 0.0) || !distance_um.is_finite() {
        return Err(Error::Domain(format!(
            "propagation distance must be non-negative, got {distance_um}"
        )));
    }
    if distance_um == 0.0 {
        return Ok(field.clone());
    }
    let grid = field.grid;
    let fft = Fft2::new(grid.ny, grid.nx);
    let mut spectrum = field.amplitudes.clone();
    fft.forward(&mut spectrum);
    let kz = axial_wavenumbers(&grid, field.wavelength_um, field.medium_index);
    apply_transfer(&mut spectrum, &kz, distance_um);
    fft.inverse(&mut spectrum);
    Ok(SampledField {
        amplitudes: spectrum,
        ..field.clone()
    })
}

/// Paraxial on-axis intensity behind a circular aperture of radius `a` under
/// unit plane-wave illumination: `4 sin^2(k a^2 / (4 z))`, `k = 2 pi / lambda`.
pub fn on_axis_reference(aperture_radius_um: f64, wavelength_um: f64, z_um: f64) -> Result<f64> {
    if !(z_um > 0.0) {
        return Err(Error::Domain(format!("axial distance must be positive, got {z_um}")));
    }
    if !(wavelength_um > 0.0) || !(aperture_radius_um >= 0.0) {
        return Err(Error::Domain("wavelength and radius must be positive".into()));
    }
    let k = 2.0 * PI / wavelength_um;
    let phase = k * aperture_radius_um * aperture_radius_um / (4.0 * z_um);
    Ok(4.0 * phase.sin().powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralLine {
    pub wavelength_um: f64,
    pub weight: f64,
}

/// Incoherent set of illumination lines with weights normalized to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    lines: Vec<SpectralLine>,
}

/// Default admissible band of the near-UV source.
pub const NEAR_UV_BAND_UM: (f64, f64) = (0.350, 0.450);

impl Spectrum {
    /// Lines restricted to the near-UV band.
    pub fn new(lines: Vec<SpectralLine>) -> Result<Self> {
        Self::within(lines, NEAR_UV_BAND_UM)
    }

    pub fn within(lines: Vec<SpectralLine>, band_um: (f64, f64)) -> Result<Self> {
        if lines.is_empty() {
            return Err(Error::Config("spectrum has no lines".into()));
        }
        for line in &lines {
            if !(line.wavelength_um >= band_um.0 && line.wavelength_um <= band_um.1) {
                return Err(Error::Config(format!(
                    "wavelength {} um outside band [{}, {}] um",
                    line.wavelength_um, band_um.0, band_um.1
                )));
            }
            if !(line.weight >= 0.0) || !line.weight.is_finite() {
                return Err(Error::Config(format!("invalid line weight {}", line.weight)));
            }
        }
        let total: f64 = lines.iter().map(|l| l.weight).sum();
        if !(total > 0.0) {
            return Err(Error::Config("spectrum weights sum to zero".into()));
        }
        Ok(Self {
            lines: lines
                .into_iter()
                .map(|l| SpectralLine {
                    weight: l.weight / total,
                    ..l
                })
                .collect(),
        })
    }

    pub fn monochromatic(wavelength_um: f64) -> Result<Self> {
        Self::within(
            vec![SpectralLine {
                wavelength_um,
                weight: 1.0,
            }],
            (f64::MIN_POSITIVE, f64::INFINITY),
        )
    }

    /// `count` equal-weight lines evenly spread over `[lo, hi]`.
    pub fn uniform_band(lo_um: f64, hi_um: f64, count: usize) -> Result<Self> {
        if count == 0 || !(hi_um >= lo_um) {
            return Err(Error::Config("empty spectral band".into()));
        }
        let lines = (0..count)
            .map(|i| SpectralLine {
                wavelength_um: if count == 1 {
                    0.5 * (lo_um + hi_um)
                } else {
                    lo_um + (hi_um - lo_um) * i as f64 / (count - 1) as f64
                },
                weight: 1.0,
            })
            .collect();
        Self::within(lines, (lo_um, hi_um))
    }

    pub fn lines(&self) -> &[SpectralLine] {
        &self.lines
    }

    pub fn shortest_wavelength_um(&self) -> f64 {
        self.lines
            .iter()
            .map(|l| l.wavelength_um)
            .fold(f64::INFINITY, f64::min)
    }
}

impl Default for Spectrum {
    /// Mercury i, h and g lines with equal weight.
    fn default() -> Self {
        Self::new(
            [0.365, 0.405, 0.436]
                .iter()
                .map(|&wavelength_um| SpectralLine {
                    wavelength_um,
                    weight: 1.0,
                })
                .collect(),
        )
        .expect("default spectrum is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExposureOptions {
    /// Uniform depth slices through the resist, the first at the surface.
    pub z_slices: usize,
    /// Require `dx, dy <= lambda_min / 2` so every propagating order is resolved.
    pub enforce_full_band: bool,
}

impl Default for ExposureOptions {
    fn default() -> Self {
        Self {
            z_slices: 64,
            enforce_full_band: true,
        }
    }
}

/// Spectrally weighted intensity in the resist before absorption and dose
/// scaling. Indexed `[z, y, x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityVolume {
    pub grid: GridSpec,
    pub z_samples: Vec<f64>,
    pub thickness_um: f64,
    pub intensity: Array3<f64>,
}

/// Normalized dose (1.0 = dose-to-clear at calibration) in the resist,
/// indexed `[z, y, x]`. Slice `k` represents depths `[z_k, z_{k+1})`, the last
/// one ending at `thickness_um`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureVolume {
    pub grid: GridSpec,
    pub z_samples: Vec<f64>,
    pub thickness_um: f64,
    pub dose: Array3<f64>,
}

fn uniform_depths(thickness_um: f64, slices: usize) -> Vec<f64> {
    (0..slices)
        .map(|k| thickness_um * k as f64 / slices as f64)
        .collect()
}

fn check_depths(z_samples: &[f64], thickness_um: f64) -> Result<()> {
    if z_samples.is_empty() {
        return Err(Error::Config("no depth samples".into()));
    }
    if z_samples[0] < 0.0 || z_samples.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("depth samples must be increasing from >= 0".into()));
    }
    if *z_samples.last().unwrap() > thickness_um {
        return Err(Error::Config("depth samples exceed resist thickness".into()));
    }
    Ok(())
}

impl ExposureVolume {
    pub fn new(
        grid: GridSpec,
        z_samples: Vec<f64>,
        thickness_um: f64,
        dose: Array3<f64>,
    ) -> Result<Self> {
        check_depths(&z_samples, thickness_um)?;
        if dose.dim() != (z_samples.len(), grid.ny, grid.nx) {
            return Err(Error::InvalidGrid("dose array does not match grid and depths".into()));
        }
        if dose.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
            return Err(Error::Domain("dose must be finite and non-negative".into()));
        }
        Ok(Self {
            grid,
            z_samples,
            thickness_um,
            dose,
        })
    }

    /// Depth-independent dose field over `slices` uniform slices.
    pub fn uniform_columns(
        grid: GridSpec,
        thickness_um: f64,
        slices: usize,
        dose: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let z = uniform_depths(thickness_um, slices);
        let values = Array3::from_shape_fn((slices, grid.ny, grid.nx), |(k, _, _)| dose(z[k]));
        Self::new(grid, z, thickness_um, values)
    }

    /// Dose `scale * I * exp(-alpha z)`.
    pub fn from_intensity(
        volume: &IntensityVolume,
        exposure_scale: f64,
        absorption_per_um: f64,
    ) -> Self {
        let mut dose = volume.intensity.clone();
        for (k, mut slice) in dose.axis_iter_mut(Axis(0)).enumerate() {
            let factor = exposure_scale * (-absorption_per_um * volume.z_samples[k]).exp();
            slice.mapv_inplace(|v| v * factor);
        }
        Self {
            grid: volume.grid,
            z_samples: volume.z_samples.clone(),
            thickness_um: volume.thickness_um,
            dose,
        }
    }

    pub fn slice(&self, k: usize) -> ArrayView2<'_, f64> {
        self.dose.index_axis(Axis(0), k)
    }

    /// Thickness of slice `k`.
    pub fn slice_width(&self, k: usize) -> f64 {
        let end = self
            .z_samples
            .get(k + 1)
            .copied()
            .unwrap_or(self.thickness_um);
        end - self.z_samples[k]
    }
}

/// Intensity inside the resist: each line crosses the air gap, enters the
/// resist and continues to every depth sample; lines add incoherently in
/// spectrum order.
pub fn aerial_intensity(
    mask: &TransmissionGrid,
    recipe: &ProcessRecipe,
    options: &ExposureOptions,
) -> Result<IntensityVolume> {
    recipe.validate()?;
    if options.z_slices == 0 {
        return Err(Error::Config("z_slices must be at least 1".into()));
    }
    let grid = mask.grid;
    if options.enforce_full_band {
        let lambda = recipe.spectrum.shortest_wavelength_um();
        let required = 0.5 * lambda;
        let coarse = grid.dx_um.max(grid.dy_um);
        if coarse > required {
            return Err(Error::Undersampled {
                dx_um: coarse,
                wavelength_um: lambda,
                required_dx_um: required,
            });
        }
    }
    let z_samples = uniform_depths(recipe.resist_thickness_um, options.z_slices);
    let fft = Fft2::new(grid.ny, grid.nx);
    let mut total = Array3::<f64>::zeros((z_samples.len(), grid.ny, grid.nx));

    for line in recipe.spectrum.lines() {
        let mut surface = mask.values.mapv(|t| Complex64::new(t, 0.0));
        fft.forward(&mut surface);
        let kz_air = axial_wavenumbers(&grid, line.wavelength_um, 1.0);
        apply_transfer(&mut surface, &kz_air, recipe.gap_um);
        let kz_resist = axial_wavenumbers(&grid, line.wavelength_um, recipe.resist_index);

        total
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(z_samples.par_iter())
            .for_each(|(mut acc, &z)| {
                let mut field = surface.clone();
                apply_transfer(&mut field, &kz_resist, z);
                fft.inverse(&mut field);
                Zip::from(&mut acc)
                    .and(&field)
                    .for_each(|a, f| *a += line.weight * f.norm_sqr());
            });
    }

    Ok(IntensityVolume {
        grid,
        z_samples,
        thickness_um: recipe.resist_thickness_um,
        intensity: total,
    })
}

/// Dose volume for `mask` under `recipe`.
pub fn exposure_volume(
    mask: &TransmissionGrid,
    recipe: &ProcessRecipe,
    options: &ExposureOptions,
) -> Result<ExposureVolume> {
    let intensity = aerial_intensity(mask, recipe, options)?;
    Ok(ExposureVolume::from_intensity(
        &intensity,
        recipe.exposure_scale,
        recipe.absorption_per_um,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{rasterize, MaskSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: GridSpec, seed: u64) -> SampledField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Array2::from_shape_fn(grid.shape(), |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        SampledField::new(grid, 0.405, 1.0, a).unwrap()
    }

    #[test]
    fn zero_distance_is_identity() {
        let grid = GridSpec::new(16, 12, 8.0, 6.0).unwrap();
        let f = random_field(grid, 1);
        assert_eq!(angular_spectrum_step(&f, 0.0).unwrap(), f);
    }

    #[test]
    fn plane_wave_keeps_unit_modulus() {
        let grid = GridSpec::new(32, 20, 16.0, 10.0).unwrap();
        let f = SampledField::uniform(grid, 0.405, 1.0, Complex64::new(1.0, 0.0)).unwrap();
        for z in [0.7, 13.0, 360.0] {
            let out = angular_spectrum_step(&f, z).unwrap();
            for a in out.amplitudes.iter() {
                assert!((a.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn plane_wave_phase_advances_by_kz() {
        let grid = GridSpec::new(8, 8, 4.0, 4.0).unwrap();
        let f = SampledField::uniform(grid, 0.5, 1.5, Complex64::new(1.0, 0.0)).unwrap();
        let out = angular_spectrum_step(&f, 1.0).unwrap();
        let expected = Complex64::from_polar(1.0, 2.0 * PI * 1.5 / 0.5);
        assert!((out.amplitudes[[3, 5]] - expected).norm() < 1e-12);
    }

    #[test]
    fn negative_distance_rejected() {
        let grid = GridSpec::new(4, 4, 4.0, 4.0).unwrap();
        let f = random_field(grid, 2);
        assert!(angular_spectrum_step(&f, -1.0).is_err());
    }

    #[test]
    fn power_conserved_for_propagating_band() {
        // dx >= lambda / sqrt(2): every grid frequency propagates
        let grid = GridSpec::new(24, 18, 24.0, 18.0).unwrap();
        let f = random_field(grid, 3);
        let out = angular_spectrum_step(&f, 57.0).unwrap();
        assert!((out.power() - f.power()).abs() <= 1e-9 * f.power());
    }

    #[test]
    fn evanescent_orders_decay() {
        let grid = GridSpec::new(16, 16, 1.6, 1.6).unwrap();
        let f = random_field(grid, 4);
        let out = angular_spectrum_step(&f, 5.0).unwrap();
        assert!(out.power() < f.power());
    }

    #[test]
    fn steps_compose() {
        let grid = GridSpec::new(20, 16, 10.0, 8.0).unwrap();
        let f = random_field(grid, 5);
        let one = angular_spectrum_step(&f, 40.0).unwrap();
        let two = angular_spectrum_step(&angular_spectrum_step(&f, 20.0).unwrap(), 20.0).unwrap();
        let norm: f64 = one.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let diff: f64 = one
            .amplitudes
            .iter()
            .zip(two.amplitudes.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff <= 1e-9 * norm);
    }

    #[test]
    fn on_axis_reference_extrema() {
        let lambda = 0.405;
        let z = 360.0;
        let k = 2.0 * PI / lambda;
        // k a^2 / (4 z) = pi / 2 and pi
        let a_max = (2.0 * PI * z / k).sqrt();
        let a_null = (4.0 * PI * z / k).sqrt();
        assert!((on_axis_reference(a_max, lambda, z).unwrap() - 4.0).abs() < 1e-12);
        assert!(on_axis_reference(a_null, lambda, z).unwrap().abs() < 1e-12);
        assert!(on_axis_reference(40.0, lambda, 0.0).is_err());
    }

    #[test]
    fn on_axis_reference_fig3_aperture() {
        let phase = 2.0 * PI / 0.405 * 1600.0 / (4.0 * 360.0);
        assert!((phase - 17.238).abs() < 1e-3);
        let v = on_axis_reference(40.0, 0.405, 360.0).unwrap();
        assert!((v - 4.0 * phase.sin().powi(2)).abs() < 1e-12);
        assert!((v - 3.99330).abs() < 1e-4);
    }

    #[test]
    fn spectrum_normalizes_and_checks_band() {
        let s = Spectrum::default();
        let total: f64 = s.lines().iter().map(|l| l.weight).sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert_eq!(s.shortest_wavelength_um(), 0.365);
        assert!(Spectrum::new(vec![SpectralLine { wavelength_um: 0.5, weight: 1.0 }]).is_err());
        assert!(Spectrum::new(vec![]).is_err());
        assert!(Spectrum::new(vec![SpectralLine { wavelength_um: 0.4, weight: 0.0 }]).is_err());
    }

    fn small_recipe() -> ProcessRecipe {
        ProcessRecipe {
            spectrum: Spectrum::monochromatic(0.405).unwrap(),
            resist_thickness_um: 4.0,
            ..ProcessRecipe::default()
        }
    }

    #[test]
    fn contact_print_reproduces_mask() {
        let spec = MaskSpec::hexagonal(8.0, 12.0).unwrap();
        let cell = spec.unit_cell();
        let grid = GridSpec::covering(cell.width_um, cell.height_um, 0.2).unwrap();
        let t = rasterize(&spec, &grid).unwrap();
        let recipe = ProcessRecipe {
            gap_um: 0.0,
            absorption_per_um: 0.0,
            exposure_scale: 1.7,
            ..small_recipe()
        };
        let opts = ExposureOptions { z_slices: 4, enforce_full_band: true };
        let dose = exposure_volume(&t, &recipe, &opts).unwrap();
        for (d, tv) in dose.slice(0).iter().zip(t.values.iter()) {
            assert!((d - 1.7 * tv * tv).abs() < 1e-12);
        }
    }

    #[test]
    fn open_mask_gives_beer_lambert_column() {
        let grid = GridSpec::new(10, 10, 2.0, 2.0).unwrap();
        let t = TransmissionGrid {
            grid,
            values: Array2::from_elem(grid.shape(), 1.0),
        };
        let recipe = ProcessRecipe {
            gap_um: 100.0,
            absorption_per_um: 0.3,
            exposure_scale: 2.0,
            ..small_recipe()
        };
        let opts = ExposureOptions { z_slices: 8, enforce_full_band: true };
        let dose = exposure_volume(&t, &recipe, &opts).unwrap();
        for (k, z) in dose.z_samples.iter().enumerate() {
            let expected = 2.0 * (-0.3 * z).exp();
            assert!(dose.slice(k).iter().all(|d| (d - expected).abs() < 1e-12));
        }
    }

    #[test]
    fn coarse_grid_reports_required_spacing() {
        let grid = GridSpec::new(10, 10, 10.0, 10.0).unwrap();
        let t = TransmissionGrid {
            grid,
            values: Array2::from_elem(grid.shape(), 1.0),
        };
        let err = exposure_volume(&t, &ProcessRecipe::default(), &ExposureOptions::default())
            .unwrap_err();
        match err {
            Error::Undersampled { required_dx_um, .. } => assert!((required_dx_um - 0.1825).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dose_scales_linearly() {
        let spec = MaskSpec::hexagonal(8.0, 12.0).unwrap();
        let cell = spec.unit_cell();
        let grid = GridSpec::covering(cell.width_um, cell.height_um, 0.5).unwrap();
        let t = rasterize(&spec, &grid).unwrap();
        let opts = ExposureOptions { z_slices: 3, enforce_full_band: false };
        let a = exposure_volume(&t, &ProcessRecipe { gap_um: 20.0, ..small_recipe() }, &opts).unwrap();
        let b = exposure_volume(
            &t,
            &ProcessRecipe { gap_um: 20.0, exposure_scale: 3.0, ..small_recipe() },
            &opts,
        )
        .unwrap();
        for (x, y) in a.dose.iter().zip(b.dose.iter()) {
            assert!((3.0 * x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn dose_is_lattice_shift_equivariant() {
        let spec = MaskSpec::hexagonal(8.0, 12.0).unwrap();
        let cell = spec.unit_cell();
        let grid = GridSpec::new(24, 42, cell.width_um, cell.height_um).unwrap();
        let t = rasterize(&spec, &grid).unwrap();
        let opts = ExposureOptions { z_slices: 2, enforce_full_band: false };
        let recipe = ProcessRecipe { gap_um: 15.0, ..small_recipe() };
        let a = exposure_volume(&t, &recipe, &opts).unwrap();
        let peak = a.dose.iter().cloned().fold(0.0, f64::max);
        for k in 0..2 {
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    let s = a.dose[[k, (j + grid.ny / 2) % grid.ny, (i + grid.nx / 2) % grid.nx]];
                    assert!((a.dose[[k, j, i]] - s).abs() <= 1e-12 * peak);
                }
            }
        }
    }
}
