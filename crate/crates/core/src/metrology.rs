//! Lens geometry from height maps: sag, diameter, sphere fit, focal
//! properties, fill factor, roughness and regime classification.

use crate::error::{Error, Result};
use crate::mask::{rasterize, LensLayout, MaskSpec, SiteKey};
use crate::grid::GridSpec;
use crate::resist::SurfaceProfile;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use ndarray::Array2;
use std::collections::HashMap;

/// Radius of curvature, focal length and numerical aperture of a cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensOptics {
    pub radius_of_curvature_um: f64,
    pub focal_length_um: f64,
    pub numerical_aperture: f64,
}

/// Spherical-cap optics from diameter `D`, sag `h` and refractive index `n`:
/// `RC = (h^2 + D^2/4) / 2h`, `f = RC / (n - 1)`, `NA = D / 2f`.
pub fn lens_metrics(diameter_um: f64, sag_um: f64, index: f64) -> Result<LensOptics> {
    if !(diameter_um > 0.0) || !diameter_um.is_finite() {
        return Err(Error::Domain(format!("lens diameter must be positive, got {diameter_um}")));
    }
    if !(sag_um > 0.0) || !sag_um.is_finite() {
        return Err(Error::Domain(format!(
            "sag must be positive (radius of curvature unbounded), got {sag_um}"
        )));
    }
    if !(index > 1.0) || !index.is_finite() {
        return Err(Error::Domain(format!("refractive index must exceed 1, got {index}")));
    }
    let rc = (sag_um * sag_um + 0.25 * diameter_um * diameter_um) / (2.0 * sag_um);
    let f = rc / (index - 1.0);
    Ok(LensOptics {
        radius_of_curvature_um: rc,
        focal_length_um: f,
        numerical_aperture: diameter_um / (2.0 * f),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereFit {
    pub center: [f64; 3],
    pub radius_um: f64,
    /// RMS geometric distance of the samples from the sphere.
    pub rms_um: f64,
}

/// Algebraic least-squares sphere through `points`.
///
/// Solves `x^2 + y^2 + z^2 = 2ax + 2by + 2cz + e` in a centered, scaled
/// frame; the RMS is the geometric distance to the fitted sphere.
pub fn fit_sphere(points: &[[f64; 3]]) -> Result<SphereFit> {
    if points.len() < 4 {
        return Err(Error::SingularFit(format!(
            "need at least 4 samples, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mut mean = [0.0; 3];
    for p in points {
        for k in 0..3 {
            mean[k] += p[k] / n;
        }
    }
    let scale = points
        .iter()
        .flat_map(|p| (0..3).map(move |k| (p[k] - mean[k]).abs()))
        .fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::SingularFit("samples coincide".into()));
    }

    let mut a = DMatrix::<f64>::zeros(points.len(), 4);
    let mut b = DVector::<f64>::zeros(points.len());
    for (r, p) in points.iter().enumerate() {
        let q = [
            (p[0] - mean[0]) / scale,
            (p[1] - mean[1]) / scale,
            (p[2] - mean[2]) / scale,
        ];
        a[(r, 0)] = 2.0 * q[0];
        a[(r, 1)] = 2.0 * q[1];
        a[(r, 2)] = 2.0 * q[2];
        a[(r, 3)] = 1.0;
        b[r] = q[0] * q[0] + q[1] * q[1] + q[2] * q[2];
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::SingularFit(format!(
            "samples are (nearly) coplanar, condition {:.3e}",
            smin / smax
        )));
    }
    let sol = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::SingularFit(e.to_string()))?;
    let cq = [sol[0], sol[1], sol[2]];
    let r2 = sol[3] + cq.iter().map(|c| c * c).sum::<f64>();
    if !(r2 > 0.0) {
        return Err(Error::SingularFit("negative squared radius".into()));
    }
    let center = [
        mean[0] + scale * cq[0],
        mean[1] + scale * cq[1],
        mean[2] + scale * cq[2],
    ];
    let radius = scale * r2.sqrt();
    let ms = points
        .iter()
        .map(|p| {
            let d = ((p[0] - center[0]).powi(2)
                + (p[1] - center[1]).powi(2)
                + (p[2] - center[2]).powi(2))
            .sqrt();
            (d - radius).powi(2)
        })
        .sum::<f64>()
        / n;
    Ok(SphereFit {
        center,
        radius_um: radius,
        rms_um: ms.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    FlatTop,
    Concave,
    Blurred,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::FlatTop => "FlatTop",
            Regime::Concave => "Concave",
            Regime::Blurred => "Blurred",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "FlatTop" => Ok(Regime::FlatTop),
            "Concave" => Ok(Regime::Concave),
            "Blurred" => Ok(Regime::Blurred),
            other => Err(Error::Config(format!("unknown regime {other:?}"))),
        }
    }
}

/// Thresholds for lens extraction and regime classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetrologyConfig {
    /// Diameter contour depth below the rim, as a fraction of the sag.
    pub level_fraction: f64,
    /// Sphere-fit samples lie within this fraction of the lens radius.
    pub fit_fraction: f64,
    /// Ray directions used for contour radii.
    pub directions: usize,
    /// Plateau band above the cell minimum, as a fraction of the sag.
    pub plateau_fraction: f64,
    /// Plateau diameter beyond this fraction of D means flat top.
    pub plateau_span: f64,
    /// Sag below this fraction of the relief reference means blurred.
    pub min_modulation: f64,
    /// Sphere RMS beyond this fraction of the sag means blurred.
    pub max_rms_ratio: f64,
}

impl Default for MetrologyConfig {
    fn default() -> Self {
        Self {
            level_fraction: 0.05,
            fit_fraction: 0.8,
            directions: 72,
            plateau_fraction: 0.05,
            plateau_span: 0.30,
            min_modulation: 0.02,
            max_rms_ratio: 0.25,
        }
    }
}

/// Raw per-lens readings from a height map (mold orientation).
#[derive(Debug, Clone, PartialEq)]
pub struct LensSample {
    pub site: SiteKey,
    pub center_um: (f64, f64),
    pub diameter_um: f64,
    pub sag_um: f64,
    /// Highest point of the lens cell boundary.
    pub rim_um: f64,
    /// Lowest point of the lens cell.
    pub floor_um: f64,
    pub plateau_diameter_um: f64,
    /// `(dx, dy, height)` samples relative to the lens center for sphere fitting.
    pub patch: Vec<[f64; 3]>,
}

struct Sampler<'a> {
    heights: &'a Array2<f64>,
    grid: GridSpec,
    periodic: bool,
}

impl Sampler<'_> {
    fn at(&self, x: f64, y: f64) -> f64 {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let fx = x / self.grid.dx_um;
        let fy = y / self.grid.dy_um;
        let (i0, j0) = (fx.floor(), fy.floor());
        let (tx, ty) = (fx - i0, fy - j0);
        let index = |v: f64, n: usize| -> usize {
            if self.periodic {
                (v as i64).rem_euclid(n as i64) as usize
            } else {
                v.clamp(0.0, (n - 1) as f64) as usize
            }
        };
        let (i0, i1) = (index(i0, nx), index(i0 + 1.0, nx));
        let (j0, j1) = (index(j0, ny), index(j0 + 1.0, ny));
        let h = self.heights;
        (1.0 - ty) * ((1.0 - tx) * h[[j0, i0]] + tx * h[[j0, i1]])
            + ty * ((1.0 - tx) * h[[j1, i0]] + tx * h[[j1, i1]])
    }
}

struct LensRays<'a> {
    sampler: Sampler<'a>,
    layout: &'a LensLayout,
    directions: usize,
    step: f64,
    max_radius: f64,
}

impl LensRays<'_> {
    /// Mean distance from the center to where the surface first rises to
    /// `level`, or leaves the lens cell.
    fn mean_radius(&self, site: SiteKey, center: (f64, f64), level: f64) -> f64 {
        let mut total = 0.0;
        for d in 0..self.directions {
            let theta = 2.0 * std::f64::consts::PI * d as f64 / self.directions as f64;
            let (c, s) = (theta.cos(), theta.sin());
            let mut prev_r = 0.0;
            let mut prev_h = self.sampler.at(center.0, center.1);
            let mut radius = 0.0;
            if prev_h < level {
                let mut r = self.step;
                radius = self.max_radius;
                while r <= self.max_radius {
                    let (x, y) = (center.0 + r * c, center.1 + r * s);
                    if self.layout.locate(x, y).key != site {
                        radius = prev_r;
                        break;
                    }
                    let h = self.sampler.at(x, y);
                    if h >= level {
                        radius = prev_r + (r - prev_r) * (level - prev_h) / (h - prev_h);
                        break;
                    }
                    prev_r = r;
                    prev_h = h;
                    r += self.step;
                }
            }
            total += radius;
        }
        total / self.directions as f64
    }
}

/// Per-lens sag, diameter and sphere-fit patch.
///
/// Sag is rim minus cell minimum in mold orientation (replicas are read
/// upside down). The rim is the highest point on the lens's Voronoi
/// boundary. The diameter is the mean diameter of the contour
/// `level_fraction * h` below the rim, extrapolated to the rim by the
/// paraboloid factor `1 / sqrt(1 - level_fraction)`.
pub fn extract_lens(
    profile: &SurfaceProfile,
    layout: &LensLayout,
    config: &MetrologyConfig,
) -> Vec<Result<LensSample>> {
    let grid = profile.grid;
    let mold = profile.as_mold_heights();
    let periodic = layout.is_periodic();
    let boundary_width = grid.dx_um.max(grid.dy_um);

    let sites: Vec<(SiteKey, (f64, f64))> = layout.sites().collect();
    let index: HashMap<SiteKey, usize> = sites
        .iter()
        .enumerate()
        .map(|(n, (k, _))| (*k, n))
        .collect();
    let owner_of = |key: SiteKey| -> Option<usize> {
        if periodic {
            sites.iter().position(|(k, _)| k.center == key.center)
        } else {
            index.get(&key).copied()
        }
    };

    struct Cell {
        floor: f64,
        rim: f64,
        pixels: Vec<(f64, f64, f64)>,
    }
    let mut cells: Vec<Cell> = sites
        .iter()
        .map(|_| Cell {
            floor: f64::INFINITY,
            rim: f64::NEG_INFINITY,
            pixels: Vec::new(),
        })
        .collect();

    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (x, y) = (grid.x(i), grid.y(j));
            let hit = layout.locate(x, y);
            let Some(n) = owner_of(hit.key) else { continue };
            let h = mold[[j, i]];
            let (px, py) = layout.position(hit.key);
            let rel = (x - px, y - py);
            let cell = &mut cells[n];
            cell.floor = cell.floor.min(h);
            if hit.second_dist_sq.sqrt() - hit.dist_sq.sqrt() <= boundary_width {
                cell.rim = cell.rim.max(h);
            }
            cell.pixels.push((rel.0, rel.1, h));
        }
    }

    let rays = LensRays {
        sampler: Sampler {
            heights: &mold,
            grid,
            periodic,
        },
        layout,
        directions: config.directions.max(1),
        step: 0.25 * grid.dx_um.min(grid.dy_um),
        max_radius: layout.cell().covering_radius() + 2.0 * boundary_width,
    };

    sites
        .iter()
        .enumerate()
        .map(|(n, &(site, center))| {
            let cell = &cells[n];
            let fail = |reason: String| Error::Extraction { lens: n, reason };
            if cell.pixels.is_empty() || !cell.rim.is_finite() {
                return Err(fail("lens cell not covered by the profile".into()));
            }
            let sag = cell.rim - cell.floor;
            let tiny = 1e-9 * cell.rim.abs().max(1.0);
            if !(sag > tiny) {
                return Err(fail("no relief: rim not identifiable".into()));
            }
            let level = cell.rim - config.level_fraction * sag;
            let center_height = rays.sampler.at(center.0, center.1);
            if center_height >= level {
                return Err(fail("non-monotone radial profile: lens center is not depressed".into()));
            }
            let contour = rays.mean_radius(site, center, level);
            let diameter = 2.0 * contour / (1.0 - config.level_fraction).sqrt();
            let plateau = 2.0
                * rays.mean_radius(site, center, cell.floor + config.plateau_fraction * sag);
            let fit_radius = config.fit_fraction * 0.5 * diameter;
            let patch = cell
                .pixels
                .iter()
                .filter(|(dx, dy, _)| dx * dx + dy * dy <= fit_radius * fit_radius)
                .map(|&(dx, dy, h)| [dx, dy, h])
                .collect();
            Ok(LensSample {
                site,
                center_um: center,
                diameter_um: diameter,
                sag_um: sag,
                rim_um: cell.rim,
                floor_um: cell.floor,
                plateau_diameter_um: plateau,
                patch,
            })
        })
        .collect()
}

/// Fraction of the plane covered by discs of `diameter_um` on the mask lattice,
/// by pixel count at `resolution_um`.
pub fn fill_factor(diameter_um: f64, spec: &MaskSpec, resolution_um: f64) -> Result<f64> {
    let discs = spec.with_aperture(diameter_um)?;
    let discs = MaskSpec::new(
        discs.aperture_diameter_um(),
        discs.pitch_um(),
        discs.row_offset_um(),
        discs.row_spacing_um(),
        1.0,
        0.0,
    )?;
    let cell = discs.unit_cell();
    let grid = GridSpec::covering(cell.width_um, cell.height_um, resolution_um)?;
    Ok(rasterize(&discs, &grid)?.open_fraction(&discs))
}

/// Hexagonal-packing fill factor `(pi D^2 / 4) / ((sqrt 3 / 2) p^2)`, valid for `D <= p`.
pub fn fill_factor_hexagonal(diameter_um: f64, pitch_um: f64) -> f64 {
    (std::f64::consts::PI * diameter_um * diameter_um / 4.0)
        / (0.5 * 3f64.sqrt() * pitch_um * pitch_um)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoughnessReport {
    pub ra_nm: f64,
    pub patch_um: (f64, f64),
}

/// Arithmetic mean deviation from the least-squares plane over the whole
/// profile (crop it first with [`SurfaceProfile::window`]).
pub fn roughness_ra(patch: &SurfaceProfile) -> Result<RoughnessReport> {
    let grid = patch.grid;
    let n = grid.len() as f64;
    let (mx, my) = (
        (grid.nx as f64 - 1.0) * grid.dx_um / 2.0,
        (grid.ny as f64 - 1.0) * grid.dy_um / 2.0,
    );
    let mut normal = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for ((j, i), &h) in patch.heights_um.indexed_iter() {
        let v = Vector3::new(1.0, grid.x(i) - mx, grid.y(j) - my);
        normal += v * v.transpose();
        rhs += v * h;
    }
    // degenerate directions (single row or column) carry no slope
    let coef = normal
        .svd(true, true)
        .solve(&rhs, 1e-12 * n)
        .map_err(|e| Error::Domain(e.to_string()))?;
    let ra_um = patch
        .heights_um
        .indexed_iter()
        .map(|((j, i), &h)| {
            let plane = coef[0] + coef[1] * (grid.x(i) - mx) + coef[2] * (grid.y(j) - my);
            (h - plane).abs()
        })
        .sum::<f64>()
        / n;
    Ok(RoughnessReport {
        ra_nm: 1000.0 * ra_um,
        patch_um: (grid.nx as f64 * grid.dx_um, grid.ny as f64 * grid.dy_um),
    })
}

/// Measured geometry of one lens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensMeasurement {
    pub diameter_um: f64,
    pub sag_um: f64,
    pub optics: LensOptics,
    pub sphere_radius_um: f64,
    pub sphere_rms_um: f64,
    pub plateau_diameter_um: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LensReport {
    pub site: SiteKey,
    pub center_um: (f64, f64),
    pub outcome: Result<LensMeasurement>,
}

/// Array-level lens geometry (means over the measured lenses).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensMetrics {
    pub diameter_um: f64,
    pub sag_um: f64,
    pub radius_of_curvature_um: f64,
    pub focal_length_um: f64,
    pub numerical_aperture: f64,
    pub fill_factor: f64,
    pub sphere_rms_um: f64,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileReport {
    pub lenses: Vec<LensReport>,
    pub regime: Regime,
    /// `None` when no lens could be measured.
    pub summary: Option<LensMetrics>,
    /// Fraction of lens-cell pixels inside their lens's diameter contour.
    pub fill_factor_raster: f64,
}

fn measure_sample(sample: &LensSample, index: f64) -> Result<LensMeasurement> {
    let fit = fit_sphere(&sample.patch)?;
    Ok(LensMeasurement {
        diameter_um: sample.diameter_um,
        sag_um: sample.sag_um,
        optics: lens_metrics(sample.diameter_um, sample.sag_um, index)?,
        sphere_radius_um: fit.radius_um,
        sphere_rms_um: fit.rms_um,
        plateau_diameter_um: sample.plateau_diameter_um,
    })
}

fn classify_measurements(
    measured: &[LensMeasurement],
    relief_reference_um: f64,
    config: &MetrologyConfig,
) -> Regime {
    if measured.is_empty() {
        return Regime::Blurred;
    }
    let n = measured.len() as f64;
    let mean = |f: fn(&LensMeasurement) -> f64| measured.iter().map(f).sum::<f64>() / n;
    let sag = mean(|m| m.sag_um);
    let diameter = mean(|m| m.diameter_um);
    let plateau = mean(|m| m.plateau_diameter_um);
    let rms = mean(|m| m.sphere_rms_um);
    if plateau > config.plateau_span * diameter {
        Regime::FlatTop
    } else if sag < config.min_modulation * relief_reference_um || rms > config.max_rms_ratio * sag {
        Regime::Blurred
    } else {
        Regime::Concave
    }
}

/// Measure every lens of `profile` and summarize.
///
/// `relief_reference_um` is the film thickness the sag is compared against
/// for the blurred-regime test; `index` is the replica refractive index.
pub fn measure_profile(
    profile: &SurfaceProfile,
    layout: &LensLayout,
    spec: &MaskSpec,
    index: f64,
    relief_reference_um: f64,
    config: &MetrologyConfig,
) -> Result<ProfileReport> {
    let samples = extract_lens(profile, layout, config);
    let lenses: Vec<LensReport> = layout
        .sites()
        .zip(samples.iter())
        .map(|((site, center_um), sample)| LensReport {
            site,
            center_um,
            outcome: sample.clone().and_then(|s| measure_sample(&s, index)),
        })
        .collect();
    let measured: Vec<LensMeasurement> = lenses
        .iter()
        .filter_map(|l| l.outcome.as_ref().ok().copied())
        .collect();
    let regime = classify_measurements(&measured, relief_reference_um, config);
    let fill_factor_raster = raster_fill(profile, layout, &samples, config);

    let summary = if measured.is_empty() {
        None
    } else {
        let n = measured.len() as f64;
        let diameter = measured.iter().map(|m| m.diameter_um).sum::<f64>() / n;
        let sag = measured.iter().map(|m| m.sag_um).sum::<f64>() / n;
        let rms = measured.iter().map(|m| m.sphere_rms_um).sum::<f64>() / n;
        let optics = lens_metrics(diameter, sag, index)?;
        let resolution = profile.grid.dx_um.min(profile.grid.dy_um);
        Some(LensMetrics {
            diameter_um: diameter,
            sag_um: sag,
            radius_of_curvature_um: optics.radius_of_curvature_um,
            focal_length_um: optics.focal_length_um,
            numerical_aperture: optics.numerical_aperture,
            fill_factor: fill_factor(diameter, spec, resolution)?,
            sphere_rms_um: rms,
            regime,
        })
    };
    Ok(ProfileReport {
        lenses,
        regime,
        summary,
        fill_factor_raster,
    })
}

fn raster_fill(
    profile: &SurfaceProfile,
    layout: &LensLayout,
    samples: &[Result<LensSample>],
    config: &MetrologyConfig,
) -> f64 {
    let mold = profile.as_mold_heights();
    let levels: HashMap<usize, f64> = samples
        .iter()
        .enumerate()
        .filter_map(|(n, s)| {
            s.as_ref()
                .ok()
                .map(|s| (n, s.rim_um - config.level_fraction * s.sag_um))
        })
        .collect();
    let sites: Vec<SiteKey> = layout.sites().map(|(k, _)| k).collect();
    let (mut inside, mut total) = (0usize, 0usize);
    for ((j, i), &h) in mold.indexed_iter() {
        let key = layout.locate(profile.grid.x(i), profile.grid.y(j)).key;
        let owner = if layout.is_periodic() {
            sites.iter().position(|k| k.center == key.center)
        } else {
            sites.iter().position(|k| *k == key)
        };
        if let Some(level) = owner.and_then(|n| levels.get(&n)) {
            total += 1;
            if h <= *level {
                inside += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        inside as f64 / total as f64
    }
}

/// Regime of a profile: flat top, concave or blurred.
pub fn classify_regime(
    profile: &SurfaceProfile,
    layout: &LensLayout,
    index: f64,
    relief_reference_um: f64,
    config: &MetrologyConfig,
) -> Regime {
    let measured: Vec<LensMeasurement> = extract_lens(profile, layout, config)
        .into_iter()
        .filter_map(|s| s.ok())
        .filter_map(|s| measure_sample(&s, index).ok())
        .collect();
    classify_measurements(&measured, relief_reference_um, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resist::Orientation;
    use proptest::prelude::*;

    const MEASURED_LENSES: [(f64, f64, f64, f64, f64); 5] = [
        (111.8, 8.58, 186.39, 423.61, 0.1320),
        (116.16, 6.11, 279.10, 634.32, 0.0916),
        (116.26, 5.97, 285.99, 649.98, 0.0894),
        (118.46, 5.92, 299.26, 680.14, 0.0871),
        (122.5, 4.9, 385.26, 875.60, 0.0700),
    ];

    /// Mold of spherical dimples of diameter `d` and sag `h` cut into a film of
    /// thickness `t`, one per lattice site.
    fn dimple_mold(spec: &MaskSpec, dx: f64, d: f64, h: f64, t: f64) -> SurfaceProfile {
        let cell = spec.unit_cell();
        let grid = GridSpec::covering(cell.width_um, cell.height_um, dx).unwrap();
        let r = (h * h + d * d / 4.0) / (2.0 * h);
        let layout = LensLayout::periodic(cell);
        let heights = Array2::from_shape_fn(grid.shape(), |(j, i)| {
            let hit = layout.locate(grid.x(i), grid.y(j));
            let rho2 = hit.dist_sq;
            if rho2 < d * d / 4.0 {
                t - ((r * r - rho2).sqrt() - (r - h))
            } else {
                t
            }
        });
        SurfaceProfile::new(grid, heights, Orientation::MoldConcave).unwrap()
    }

    #[test]
    fn table_rows_reproduced() {
        for (d, h, rc, f, na) in MEASURED_LENSES {
            let o = lens_metrics(d, h, 1.44).unwrap();
            assert!((o.radius_of_curvature_um / rc - 1.0).abs() < 5e-3, "RC {d} {h}");
            assert!((o.focal_length_um / f - 1.0).abs() < 5e-3, "f {d} {h}");
            assert!((o.numerical_aperture / na - 1.0).abs() < 5e-3, "NA {d} {h}");
        }
    }

    #[test]
    fn hemisphere_identity() {
        let o = lens_metrics(100.0, 50.0, 1.44).unwrap();
        assert_eq!(o.radius_of_curvature_um, 50.0);
        assert!((o.numerical_aperture - 0.44).abs() < 1e-15);
    }

    #[test]
    fn metrics_reject_bad_inputs() {
        assert!(matches!(lens_metrics(100.0, 0.0, 1.44), Err(Error::Domain(_))));
        assert!(matches!(lens_metrics(100.0, 5.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(lens_metrics(0.0, 5.0, 1.44), Err(Error::Domain(_))));
    }

    fn cap_points(r: f64, half_width: f64, n: usize) -> Vec<[f64; 3]> {
        let mut pts = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let x = -half_width + 2.0 * half_width * i as f64 / (n - 1) as f64;
                let y = -half_width + 2.0 * half_width * j as f64 / (n - 1) as f64;
                if x * x + y * y <= half_width * half_width {
                    pts.push([x, y, 3.0 - ((r * r - x * x - y * y).sqrt() - r)]);
                }
            }
        }
        pts
    }

    #[test]
    fn sphere_fit_exact_cap() {
        for (_, _, rc, _, _) in MEASURED_LENSES {
            let fit = fit_sphere(&cap_points(rc, 45.0, 41)).unwrap();
            assert!((fit.radius_um / rc - 1.0).abs() < 1e-9, "{rc}: {}", fit.radius_um);
            assert!(fit.rms_um < 1e-8);
            assert!((fit.center[2] - (3.0 + rc)).abs() < 1e-6 * rc);
        }
    }

    #[test]
    fn sphere_fit_rejects_plane_and_too_few() {
        let plane: Vec<[f64; 3]> = (0..100)
            .map(|k| [(k % 10) as f64, (k / 10) as f64, 2.0])
            .collect();
        assert!(matches!(fit_sphere(&plane), Err(Error::SingularFit(_))));
        assert!(matches!(fit_sphere(&plane[..3]), Err(Error::SingularFit(_))));
    }

    #[test]
    fn sphere_fit_noise_bounds_rms() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let eps = 0.01;
        let pts: Vec<[f64; 3]> = cap_points(186.39, 45.0, 41)
            .into_iter()
            .map(|[x, y, z]| [x, y, z + rng.gen_range(-eps..eps)])
            .collect();
        let fit = fit_sphere(&pts).unwrap();
        assert!(fit.rms_um <= eps);
        assert!((fit.radius_um / 186.39 - 1.0).abs() < 0.01);
    }

    #[test]
    fn extract_synthetic_dimples() {
        let spec = MaskSpec::hexagonal(80.0, 120.0).unwrap();
        let mold = dimple_mold(&spec, 0.4, 116.16, 6.11, 18.0);
        let layout = LensLayout::periodic(spec.unit_cell());
        let samples = extract_lens(&mold, &layout, &MetrologyConfig::default());
        assert_eq!(samples.len(), 2);
        for s in samples {
            let s = s.unwrap();
            assert!((s.sag_um / 6.11 - 1.0).abs() < 0.01, "sag {}", s.sag_um);
            assert!((s.diameter_um / 116.16 - 1.0).abs() < 0.01, "D {}", s.diameter_um);
            assert!((s.rim_um - 18.0).abs() < 1e-12);
            let fit = fit_sphere(&s.patch).unwrap();
            let rc = lens_metrics(s.diameter_um, s.sag_um, 1.44).unwrap().radius_of_curvature_um;
            assert!((fit.radius_um / rc - 1.0).abs() < 1e-3, "{} vs {rc}", fit.radius_um);
        }
    }

    #[test]
    fn replica_reads_like_its_mold() {
        let spec = MaskSpec::hexagonal(80.0, 120.0).unwrap();
        let mold = dimple_mold(&spec, 0.5, 110.0, 7.0, 18.0);
        let replica = crate::resist::cast_replica(&mold).unwrap();
        let layout = LensLayout::periodic(spec.unit_cell());
        let config = MetrologyConfig::default();
        let a = measure_profile(&mold, &layout, &spec, 1.44, 18.0, &config).unwrap();
        let b = measure_profile(&replica, &layout, &spec, 1.44, 18.0, &config).unwrap();
        let (a, b) = (a.summary.unwrap(), b.summary.unwrap());
        assert!((a.sag_um - b.sag_um).abs() < 1e-9);
        assert!((a.diameter_um - b.diameter_um).abs() < 1e-9);
    }

    #[test]
    fn flat_profile_has_no_lens() {
        let spec = MaskSpec::hexagonal(80.0, 120.0).unwrap();
        let cell = spec.unit_cell();
        let grid = GridSpec::covering(cell.width_um, cell.height_um, 1.0).unwrap();
        let flat = SurfaceProfile::new(grid, Array2::from_elem(grid.shape(), 5.0), Orientation::MoldConcave)
            .unwrap();
        let layout = LensLayout::periodic(cell);
        for s in extract_lens(&flat, &layout, &MetrologyConfig::default()) {
            assert!(matches!(s, Err(Error::Extraction { .. })));
        }
        let report = measure_profile(&flat, &layout, &spec, 1.44, 18.0, &MetrologyConfig::default()).unwrap();
        assert!(report.summary.is_none());
        assert_eq!(report.regime, Regime::Blurred);
    }

    #[test]
    fn tangent_dimples_measure_alike() {
        let spec = MaskSpec::hexagonal(80.0, 100.0).unwrap();
        let mold = dimple_mold(&spec, 0.25, 100.0, 5.0, 18.0);
        let layout = LensLayout::periodic(spec.unit_cell());
        let s: Vec<LensSample> = extract_lens(&mold, &layout, &MetrologyConfig::default())
            .into_iter()
            .map(|s| s.unwrap())
            .collect();
        // the two centers sit at different sub-pixel offsets
        assert!((s[0].sag_um - s[1].sag_um).abs() < 1e-3 * s[0].sag_um);
        assert!((s[0].diameter_um - s[1].diameter_um).abs() < 1e-3 * s[0].diameter_um);
    }

    #[test]
    fn fill_factor_cases() {
        let spec = MaskSpec::hexagonal(80.0, 120.0).unwrap();
        let tangent = fill_factor(120.0, &spec, 0.1).unwrap();
        let exact = std::f64::consts::PI / (2.0 * 3f64.sqrt());
        assert!((fill_factor_hexagonal(120.0, 120.0) - exact).abs() < 1e-15);
        assert!((tangent / exact - 1.0).abs() < 5e-3, "{tangent}");
        let partial = fill_factor(116.16, &spec, 0.1).unwrap();
        assert!((partial / fill_factor_hexagonal(116.16, 120.0) - 1.0).abs() < 5e-3);
        assert!((partial - 0.8498).abs() < 5e-3, "{partial}");
        assert_eq!(fill_factor(2.0 * spec.unit_cell().covering_radius() + 1.0, &spec, 0.2).unwrap(), 1.0);
    }

    fn profile_from(nx: usize, ny: usize, dx: f64, f: impl Fn(f64, f64) -> f64) -> SurfaceProfile {
        let grid = GridSpec::from_spacing(nx, ny, dx, dx).unwrap();
        let heights = Array2::from_shape_fn((ny, nx), |(j, i)| f(grid.x(i), grid.y(j)));
        SurfaceProfile::new(grid, heights, Orientation::ReplicaConvex).unwrap()
    }

    #[test]
    fn roughness_oracles() {
        let plane = profile_from(50, 40, 0.1, |x, y| 3.0 + 0.2 * x - 0.7 * y);
        assert!(roughness_ra(&plane).unwrap().ra_nm < 1e-9);

        let a = 0.004;
        let checker = profile_from(50, 50, 0.1, |x, y| {
            let (i, j) = ((x / 0.1).round() as i64, (y / 0.1).round() as i64);
            if (i + j) % 2 == 0 { a } else { -a }
        });
        let ra = roughness_ra(&checker).unwrap().ra_nm / 1000.0;
        assert!((ra / a - 1.0).abs() < 1e-9, "{ra}");

        let amp = 0.003;
        let wavelength = 1.0;
        // even about the patch center, so the fitted plane stays level
        let mid = 499.0 * 0.01 / 2.0;
        let sine = profile_from(500, 20, 0.01, |x, _| {
            amp * (2.0 * std::f64::consts::PI * (x - mid) / wavelength).cos()
        });
        let ra = roughness_ra(&sine).unwrap();
        let expected = 2.0 * amp / std::f64::consts::PI;
        assert!((ra.ra_nm / 1000.0 / expected - 1.0).abs() < 0.01, "{}", ra.ra_nm);
        assert!((ra.patch_um.0 - 5.0).abs() < 1e-12);
    }

    #[test]
    fn regime_ignores_height_offset() {
        let spec = MaskSpec::hexagonal(80.0, 120.0).unwrap();
        let mold = dimple_mold(&spec, 0.5, 110.0, 7.0, 18.0);
        let mut raised = mold.clone();
        raised.heights_um.mapv_inplace(|h| h + 3.5);
        let layout = LensLayout::periodic(spec.unit_cell());
        let config = MetrologyConfig::default();
        let a = classify_regime(&mold, &layout, 1.44, 18.0, &config);
        assert_eq!(a, Regime::Concave);
        assert_eq!(a, classify_regime(&raised, &layout, 1.44, 18.0, &config));
    }

    #[test]
    fn regime_thresholds() {
        let spec = MaskSpec::hexagonal(80.0, 120.0).unwrap();
        let layout = LensLayout::periodic(spec.unit_cell());
        let config = MetrologyConfig::default();
        let shallow = dimple_mold(&spec, 0.5, 110.0, 0.2, 18.0);
        assert_eq!(classify_regime(&shallow, &layout, 1.44, 18.0, &config), Regime::Blurred);
        // cap clipped flat at 40% of its depth
        let mut clipped = dimple_mold(&spec, 0.5, 110.0, 10.0, 18.0);
        clipped.heights_um.mapv_inplace(|h| h.max(12.0));
        assert_eq!(classify_regime(&clipped, &layout, 1.44, 18.0, &config), Regime::FlatTop);
    }

    #[test]
    fn regime_round_trips_text() {
        for r in [Regime::FlatTop, Regime::Concave, Regime::Blurred] {
            assert_eq!(r.as_str().parse::<Regime>().unwrap(), r);
        }
        assert!("concave".parse::<Regime>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn metrics_scale_covariant(d in 20.0..200.0f64, ratio in 0.01..0.5f64, k in 0.1..10.0f64) {
            let h = ratio * d;
            let a = lens_metrics(d, h, 1.44).unwrap();
            let b = lens_metrics(k * d, k * h, 1.44).unwrap();
            prop_assert!((b.radius_of_curvature_um / (k * a.radius_of_curvature_um) - 1.0).abs() < 1e-12);
            prop_assert!((b.numerical_aperture / a.numerical_aperture - 1.0).abs() < 1e-12);
        }

        #[test]
        fn fill_factor_monotone(d1 in 40.0..150.0f64, d2 in 40.0..150.0f64) {
            let spec = MaskSpec::hexagonal(80.0, 100.0).unwrap();
            let (lo, hi) = (d1.min(d2), d1.max(d2));
            prop_assert!(fill_factor(lo, &spec, 0.5).unwrap() <= fill_factor(hi, &spec, 0.5).unwrap());
        }

        #[test]
        fn sphere_fit_translation_invariant(tx in -500.0..500.0f64, ty in -500.0..500.0f64, tz in -50.0..50.0f64) {
            let pts = cap_points(250.0, 40.0, 15);
            let moved: Vec<[f64; 3]> = pts.iter().map(|p| [p[0] + tx, p[1] + ty, p[2] + tz]).collect();
            let a = fit_sphere(&pts).unwrap();
            let b = fit_sphere(&moved).unwrap();
            prop_assert!((a.radius_um - b.radius_um).abs() < 1e-6 * a.radius_um);
        }
    }
}
