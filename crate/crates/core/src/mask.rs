//! Aperture-array photomask: layout, unit cell and rasterized transmission.

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use ndarray::Array2;
use rayon::prelude::*;

/// Circular apertures on a two-row lattice: rows `row_spacing_um` apart,
/// apertures `pitch_um` apart along a row, odd rows shifted by `row_offset_um`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskSpec {
    aperture_diameter_um: f64,
    pitch_um: f64,
    row_offset_um: f64,
    row_spacing_um: f64,
    transmission_open: f64,
    transmission_dark: f64,
}

impl MaskSpec {
    pub fn new(
        aperture_diameter_um: f64,
        pitch_um: f64,
        row_offset_um: f64,
        row_spacing_um: f64,
        transmission_open: f64,
        transmission_dark: f64,
    ) -> Result<Self> {
        let finite = [
            aperture_diameter_um,
            pitch_um,
            row_offset_um,
            row_spacing_um,
            transmission_open,
            transmission_dark,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidMask("non-finite field".into()));
        }
        if aperture_diameter_um <= 0.0 || pitch_um <= 0.0 {
            return Err(Error::InvalidMask(format!(
                "aperture diameter and pitch must be positive (d = {aperture_diameter_um}, p = {pitch_um})"
            )));
        }
        if !(0.0..pitch_um).contains(&row_offset_um) {
            return Err(Error::InvalidMask(format!(
                "row offset {row_offset_um} must lie in [0, pitch)"
            )));
        }
        if row_spacing_um <= 0.0 {
            return Err(Error::InvalidMask(format!(
                "row spacing must be positive, got {row_spacing_um}"
            )));
        }
        // equality admits the fully dark mask
        if !(0.0 <= transmission_dark
            && transmission_dark <= transmission_open
            && transmission_open <= 1.0)
        {
            return Err(Error::InvalidMask(format!(
                "need 0 <= dark ({transmission_dark}) <= open ({transmission_open}) <= 1"
            )));
        }
        Ok(Self {
            aperture_diameter_um,
            pitch_um,
            row_offset_um,
            row_spacing_um,
            transmission_open,
            transmission_dark,
        })
    }

    /// Equilateral (hexagonal) layout: rows offset by half a pitch and
    /// spaced `sqrt(3)/2` pitches apart, binary opaque/clear mask.
    pub fn hexagonal(aperture_diameter_um: f64, pitch_um: f64) -> Result<Self> {
        Self::new(
            aperture_diameter_um,
            pitch_um,
            0.5 * pitch_um,
            0.5 * 3f64.sqrt() * pitch_um,
            1.0,
            0.0,
        )
    }

    pub fn aperture_diameter_um(&self) -> f64 {
        self.aperture_diameter_um
    }

    pub fn pitch_um(&self) -> f64 {
        self.pitch_um
    }

    pub fn row_offset_um(&self) -> f64 {
        self.row_offset_um
    }

    pub fn row_spacing_um(&self) -> f64 {
        self.row_spacing_um
    }

    pub fn transmission_open(&self) -> f64 {
        self.transmission_open
    }

    pub fn transmission_dark(&self) -> f64 {
        self.transmission_dark
    }

    pub fn with_aperture(&self, aperture_diameter_um: f64) -> Result<Self> {
        Self::new(
            aperture_diameter_um,
            self.pitch_um,
            self.row_offset_um,
            self.row_spacing_um,
            self.transmission_open,
            self.transmission_dark,
        )
    }

    /// Same layout at a new pitch; row offset and spacing scale with it.
    pub fn with_pitch(&self, pitch_um: f64) -> Result<Self> {
        if !(pitch_um > 0.0) {
            return Err(Error::InvalidMask(format!("pitch must be positive, got {pitch_um}")));
        }
        let s = pitch_um / self.pitch_um;
        Self::new(
            self.aperture_diameter_um,
            pitch_um,
            self.row_offset_um * s,
            self.row_spacing_um * s,
            self.transmission_open,
            self.transmission_dark,
        )
    }

    pub fn unit_cell(&self) -> UnitCell {
        UnitCell {
            width_um: self.pitch_um,
            height_um: 2.0 * self.row_spacing_um,
            centers: [(0.0, 0.0), (self.row_offset_um, self.row_spacing_um)],
        }
    }
}

/// Rectangular periodic cell holding two aperture (lens) centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitCell {
    pub width_um: f64,
    pub height_um: f64,
    pub centers: [(f64, f64); 2],
}

/// Lattice point identity: which cell center, in which cell image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SiteKey {
    pub center: usize,
    pub image: (i64, i64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteHit {
    pub key: SiteKey,
    pub dist_sq: f64,
    /// Squared distance to the second-nearest lattice point.
    pub second_dist_sq: f64,
}

impl UnitCell {
    pub fn area(&self) -> f64 {
        self.width_um * self.height_um
    }

    pub fn site_position(&self, key: SiteKey) -> (f64, f64) {
        let (cx, cy) = self.centers[key.center];
        (
            cx + key.image.0 as f64 * self.width_um,
            cy + key.image.1 as f64 * self.height_um,
        )
    }

    /// Nearest and second-nearest lattice points to `(x, y)`.
    pub fn locate(&self, x: f64, y: f64) -> SiteHit {
        let bx = (x / self.width_um).floor() as i64;
        let by = (y / self.height_um).floor() as i64;
        let mut best = (f64::INFINITY, SiteKey { center: 0, image: (0, 0) });
        let mut second = f64::INFINITY;
        for dj in -2..=2 {
            for di in -2..=2 {
                for center in 0..2 {
                    let key = SiteKey {
                        center,
                        image: (bx + di, by + dj),
                    };
                    let (sx, sy) = self.site_position(key);
                    let d = (x - sx).powi(2) + (y - sy).powi(2);
                    if d < best.0 {
                        second = best.0;
                        best = (d, key);
                    } else if d < second {
                        second = d;
                    }
                }
            }
        }
        SiteHit {
            key: best.1,
            dist_sq: best.0,
            second_dist_sq: second,
        }
    }

    /// Squared distance to the nearest lattice point.
    fn nearest_dist_sq(&self, x: f64, y: f64) -> f64 {
        let fx = x.rem_euclid(self.width_um);
        let fy = y.rem_euclid(self.height_um);
        let mut best = f64::INFINITY;
        for &(cx, cy) in &self.centers {
            for dj in -1..=1 {
                for di in -1..=1 {
                    let sx = cx + di as f64 * self.width_um;
                    let sy = cy + dj as f64 * self.height_um;
                    best = best.min((fx - sx).powi(2) + (fy - sy).powi(2));
                }
            }
        }
        best
    }

    /// Largest distance from any point to its nearest lattice point.
    pub fn covering_radius(&self) -> f64 {
        const N: usize = 96;
        let mut worst: f64 = 0.0;
        for j in 0..=N {
            for i in 0..=N {
                let x = self.width_um * i as f64 / N as f64;
                let y = self.height_um * j as f64 / N as f64;
                worst = worst.max(self.locate(x, y).dist_sq);
            }
        }
        // the sampled maximum undershoots by at most one sample diagonal
        worst.sqrt() + 0.5 * (self.width_um.powi(2) + self.height_um.powi(2)).sqrt() / N as f64
    }
}

/// Sampled amplitude transmission of the mask over one unit cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionGrid {
    pub grid: GridSpec,
    pub values: Array2<f64>,
}

impl TransmissionGrid {
    /// Fraction of samples at the open amplitude.
    pub fn open_fraction(&self, spec: &MaskSpec) -> f64 {
        let open = spec.transmission_open.sqrt();
        let n = self.values.iter().filter(|&&v| v == open).count();
        n as f64 / self.grid.len() as f64
    }

    /// A single clear disc centered on the origin of an otherwise opaque cell
    /// (periodic images wrap around the cell edges).
    pub fn single_disc(grid: GridSpec, diameter_um: f64) -> Self {
        let r2 = 0.25 * diameter_um * diameter_um;
        let (w, h) = (grid.cell_width_um, grid.cell_height_um);
        let values = Array2::from_shape_fn(grid.shape(), |(j, i)| {
            let x = grid.x(i);
            let y = grid.y(j);
            let dx = x.min(w - x);
            let dy = y.min(h - y);
            if dx * dx + dy * dy <= r2 {
                1.0
            } else {
                0.0
            }
        });
        Self { grid, values }
    }
}

/// Pixel-sampled amplitude transmission of `spec` on `grid`.
///
/// A sample is open when its position lies inside any aperture disc,
/// periodic images included.
pub fn rasterize(spec: &MaskSpec, grid: &GridSpec) -> Result<TransmissionGrid> {
    let cell = spec.unit_cell();
    if !grid.tiles(cell.width_um, cell.height_um) {
        return Err(Error::Config(format!(
            "grid cell {} x {} um does not match mask unit cell {} x {} um",
            grid.cell_width_um, grid.cell_height_um, cell.width_um, cell.height_um
        )));
    }
    let r2 = 0.25 * spec.aperture_diameter_um.powi(2);
    let open = spec.transmission_open.sqrt();
    let dark = spec.transmission_dark.sqrt();
    let mut values = Array2::zeros(grid.shape());
    values
        .axis_iter_mut(ndarray::Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(j, mut row)| {
            let y = grid.y(j);
            for (i, v) in row.iter_mut().enumerate() {
                *v = if cell.nearest_dist_sq(grid.x(i), y) <= r2 {
                    open
                } else {
                    dark
                };
            }
        });
    Ok(TransmissionGrid { grid: *grid, values })
}

/// Lens sites over a sampled surface, with Voronoi ownership of points.
#[derive(Debug, Clone, PartialEq)]
pub struct LensLayout {
    cell: UnitCell,
    origin: (f64, f64),
    periodic: bool,
    sites: Vec<(SiteKey, (f64, f64))>,
}

impl LensLayout {
    /// The two lens sites of a profile that covers exactly one unit cell.
    pub fn periodic(cell: UnitCell) -> Self {
        let sites = (0..2)
            .map(|center| {
                let key = SiteKey { center, image: (0, 0) };
                (key, cell.site_position(key))
            })
            .collect();
        Self {
            cell,
            origin: (0.0, 0.0),
            periodic: true,
            sites,
        }
    }

    /// Lattice anchored so that cell center 0 sits at `origin`; keeps only sites
    /// whose whole Voronoi cell lies inside `[0, width] x [0, height]`.
    /// Sites are ordered row-major (by y, then x).
    pub fn bounded(cell: UnitCell, origin: (f64, f64), width_um: f64, height_um: f64) -> Self {
        let margin = cell.covering_radius();
        let mut sites = Vec::new();
        let ni = (width_um / cell.width_um).ceil() as i64 + 2;
        let nj = (height_um / cell.height_um).ceil() as i64 + 2;
        let bi = (origin.0 / cell.width_um).ceil() as i64;
        let bj = (origin.1 / cell.height_um).ceil() as i64;
        for mj in -bj - 1..=nj {
            for mi in -bi - 1..=ni {
                for center in 0..2 {
                    let key = SiteKey {
                        center,
                        image: (mi, mj),
                    };
                    let (sx, sy) = cell.site_position(key);
                    let (x, y) = (sx + origin.0, sy + origin.1);
                    if x - margin >= 0.0
                        && x + margin <= width_um
                        && y - margin >= 0.0
                        && y + margin <= height_um
                    {
                        sites.push((key, (x, y)));
                    }
                }
            }
        }
        sites.sort_by(|a, b| {
            (a.1 .1, a.1 .0)
                .partial_cmp(&(b.1 .1, b.1 .0))
                .expect("finite site positions")
        });
        Self {
            cell,
            origin,
            periodic: false,
            sites,
        }
    }

    pub fn cell(&self) -> &UnitCell {
        &self.cell
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn sites(&self) -> impl Iterator<Item = (SiteKey, (f64, f64))> + '_ {
        self.sites.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Position of a lattice point in profile coordinates.
    pub fn position(&self, key: SiteKey) -> (f64, f64) {
        let (x, y) = self.cell.site_position(key);
        (x + self.origin.0, y + self.origin.1)
    }

    /// Owning lattice point of a position in profile coordinates.
    pub fn locate(&self, x: f64, y: f64) -> SiteHit {
        self.cell.locate(x - self.origin.0, y - self.origin.1)
    }
}
