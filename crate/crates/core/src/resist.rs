//! Positive-resist development and replica casting.

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::propagate::{ExposureVolume, Spectrum};
use ndarray::Array2;

/// Exposure and development conditions.
///
/// `exposure_scale`, `contrast_gamma`, `absorption_per_um` and
/// `rate_max_um_per_s` are calibration parameters; dose is normalized so
/// that `dose_to_clear` is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessRecipe {
    pub gap_um: f64,
    pub spectrum: Spectrum,
    pub exposure_scale: f64,
    pub resist_thickness_um: f64,
    pub resist_index: f64,
    pub absorption_per_um: f64,
    pub develop_time_s: f64,
    pub rate_max_um_per_s: f64,
    pub dose_to_clear: f64,
    pub contrast_gamma: f64,
    pub pdms_index: f64,
}

impl Default for ProcessRecipe {
    fn default() -> Self {
        let resist_thickness_um = 18.0;
        let develop_time_s = 120.0;
        Self {
            gap_um: 360.0,
            spectrum: Spectrum::default(),
            exposure_scale: 1.0,
            resist_thickness_um,
            resist_index: 1.65,
            absorption_per_um: 0.05,
            develop_time_s,
            // a column at dose-to-clear develops through the film in the develop time
            rate_max_um_per_s: resist_thickness_um / develop_time_s,
            dose_to_clear: 1.0,
            contrast_gamma: 2.0,
            pdms_index: 1.44,
        }
    }
}

impl ProcessRecipe {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("exposure_scale", self.exposure_scale),
            ("resist_thickness_um", self.resist_thickness_um),
            ("resist_index", self.resist_index),
            ("develop_time_s", self.develop_time_s),
            ("rate_max_um_per_s", self.rate_max_um_per_s),
            ("dose_to_clear", self.dose_to_clear),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("gap_um", self.gap_um), ("absorption_per_um", self.absorption_per_um)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(self.contrast_gamma >= 1.0) || !self.contrast_gamma.is_finite() {
            return Err(Error::Config(format!(
                "contrast_gamma must be >= 1, got {}",
                self.contrast_gamma
            )));
        }
        if !(self.pdms_index > 1.0) || !self.pdms_index.is_finite() {
            return Err(Error::Config(format!(
                "pdms_index must exceed 1, got {}",
                self.pdms_index
            )));
        }
        Ok(())
    }
}

/// Dissolution rate `rate_max * (dose / dose_to_clear)^gamma` in um/s.
pub fn development_rate(dose: f64, recipe: &ProcessRecipe) -> f64 {
    if dose <= 0.0 {
        return 0.0;
    }
    recipe.rate_max_um_per_s * (dose / recipe.dose_to_clear).powf(recipe.contrast_gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    /// Developed resist: lenses are dimples.
    MoldConcave,
    /// Cast PDMS: lenses are caps.
    ReplicaConvex,
}

impl Orientation {
    pub fn flipped(self) -> Self {
        match self {
            Self::MoldConcave => Self::ReplicaConvex,
            Self::ReplicaConvex => Self::MoldConcave,
        }
    }
}

/// Height map in um, indexed `[y, x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceProfile {
    pub grid: GridSpec,
    pub heights_um: Array2<f64>,
    pub orientation: Orientation,
}

impl SurfaceProfile {
    pub fn new(grid: GridSpec, heights_um: Array2<f64>, orientation: Orientation) -> Result<Self> {
        if heights_um.dim() != grid.shape() {
            return Err(Error::InvalidGrid(format!(
                "height array {:?} does not match grid {:?}",
                heights_um.dim(),
                grid.shape()
            )));
        }
        if heights_um.iter().any(|h| !h.is_finite()) {
            return Err(Error::Domain("profile contains non-finite heights".into()));
        }
        Ok(Self {
            grid,
            heights_um,
            orientation,
        })
    }

    pub fn min(&self) -> f64 {
        self.heights_um.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.heights_um.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Heights with lenses pointing down (dimples), whatever the orientation.
    pub fn as_mold_heights(&self) -> Array2<f64> {
        match self.orientation {
            Orientation::MoldConcave => self.heights_um.clone(),
            Orientation::ReplicaConvex => self.heights_um.mapv(|h| -h),
        }
    }

    /// Rectangular sub-window starting at sample `(i0, j0)`.
    pub fn window(&self, i0: usize, j0: usize, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || i0 + nx > self.grid.nx || j0 + ny > self.grid.ny {
            return Err(Error::InvalidGrid(format!(
                "window {nx}x{ny} at ({i0}, {j0}) exceeds {}x{} profile",
                self.grid.nx, self.grid.ny
            )));
        }
        let grid = GridSpec::from_spacing(nx, ny, self.grid.dx_um, self.grid.dy_um)?;
        let heights = self
            .heights_um
            .slice(ndarray::s![j0..j0 + ny, i0..i0 + nx])
            .to_owned();
        Self::new(grid, heights, self.orientation)
    }
}

/// Developed mold surface under vertical development.
///
/// Each column dissolves downward; the front crosses slice `k` at the rate
/// of that slice's dose, and stops when the develop time is used up or the
/// substrate is reached. Heights are `thickness - removed depth`.
pub fn develop_profile(dose: &ExposureVolume, recipe: &ProcessRecipe) -> Result<SurfaceProfile> {
    recipe.validate()?;
    let grid = dose.grid;
    let n = grid.len();
    let mut remaining = vec![recipe.develop_time_s; n];
    let mut depth = vec![0.0f64; n];
    let mut active = vec![true; n];

    for k in 0..dose.z_samples.len() {
        let width = dose.slice_width(k);
        let slice = dose.slice(k);
        let values = slice.as_slice().expect("dose slices are contiguous");
        for p in 0..n {
            if !active[p] {
                continue;
            }
            let rate = development_rate(values[p], recipe);
            if rate <= 0.0 {
                active[p] = false;
                continue;
            }
            let needed = width / rate;
            if needed >= remaining[p] {
                depth[p] += remaining[p] * rate;
                remaining[p] = 0.0;
                active[p] = false;
            } else {
                depth[p] += width;
                remaining[p] -= needed;
            }
        }
    }

    let thickness = dose.thickness_um;
    let heights = Array2::from_shape_vec(grid.shape(), depth)
        .expect("depth buffer matches grid")
        .mapv(|d| thickness - d.min(thickness));
    SurfaceProfile::new(grid, heights, Orientation::MoldConcave)
}

/// PDMS replica of a mold: `max(mold) - mold`.
pub fn cast_replica(mold: &SurfaceProfile) -> Result<SurfaceProfile> {
    if mold.orientation != Orientation::MoldConcave {
        return Err(Error::Contract("cast_replica expects a concave mold".into()));
    }
    Ok(negative(mold))
}

/// Mold cast back from a replica, the inverse of [`cast_replica`] up to a
/// constant offset.
pub fn cast_mold(replica: &SurfaceProfile) -> Result<SurfaceProfile> {
    if replica.orientation != Orientation::ReplicaConvex {
        return Err(Error::Contract("cast_mold expects a convex replica".into()));
    }
    Ok(negative(replica))
}

fn negative(profile: &SurfaceProfile) -> SurfaceProfile {
    let top = profile.max();
    SurfaceProfile {
        grid: profile.grid,
        heights_um: profile.heights_um.mapv(|h| top - h),
        orientation: profile.orientation.flipped(),
    }
}
