//! Experiment orchestration: full pipeline runs, gap and pitch sweeps,
//! calibration of the resist model, inverse gap design and design rules.

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::mask::{rasterize, LensLayout, MaskSpec, TransmissionGrid};
use crate::metrology::{extract_lens, measure_profile, LensMetrics, MetrologyConfig, ProfileReport, Regime};
use crate::propagate::{aerial_intensity, ExposureOptions, ExposureVolume, IntensityVolume};
use crate::resist::{cast_replica, develop_profile, ProcessRecipe, SurfaceProfile};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSettings {
    /// Largest admissible sample spacing; the grid tiles the unit cell exactly.
    pub dx_um: f64,
    pub exposure: ExposureOptions,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            dx_um: 0.18,
            exposure: ExposureOptions::default(),
        }
    }
}

/// Mask, process and numerics for one simulated print.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub mask: MaskSpec,
    pub recipe: ProcessRecipe,
    pub settings: SimulationSettings,
    pub metrology: MetrologyConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub transmission: TransmissionGrid,
    pub mold: SurfaceProfile,
    pub replica: SurfaceProfile,
    pub report: ProfileReport,
}

/// Developed surfaces and their metrology for a given intensity volume.
#[derive(Debug, Clone, PartialEq)]
pub struct Development {
    pub mold: SurfaceProfile,
    pub replica: SurfaceProfile,
    pub report: ProfileReport,
}

impl Pipeline {
    pub fn new(mask: MaskSpec, recipe: ProcessRecipe) -> Self {
        Self {
            mask,
            recipe,
            settings: SimulationSettings::default(),
            metrology: MetrologyConfig::default(),
        }
    }

    pub fn with_gap(&self, gap_um: f64) -> Self {
        let mut next = self.clone();
        next.recipe.gap_um = gap_um;
        next
    }

    pub fn with_pitch(&self, pitch_um: f64) -> Result<Self> {
        let mut next = self.clone();
        next.mask = self.mask.with_pitch(pitch_um)?;
        Ok(next)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let cell = self.mask.unit_cell();
        GridSpec::covering(cell.width_um, cell.height_um, self.settings.dx_um)
    }

    pub fn transmission(&self) -> Result<TransmissionGrid> {
        rasterize(&self.mask, &self.grid()?)
    }

    /// Optical part of the pipeline; independent of the development parameters
    /// and of absorption.
    pub fn intensity(&self) -> Result<IntensityVolume> {
        aerial_intensity(&self.transmission()?, &self.recipe, &self.settings.exposure)
    }

    pub fn layout(&self) -> LensLayout {
        LensLayout::periodic(self.mask.unit_cell())
    }

    /// Expose, develop, cast and measure, starting from a precomputed intensity.
    pub fn develop(&self, intensity: &IntensityVolume) -> Result<Development> {
        let dose = ExposureVolume::from_intensity(
            intensity,
            self.recipe.exposure_scale,
            self.recipe.absorption_per_um,
        );
        let mold = develop_profile(&dose, &self.recipe)?;
        let replica = cast_replica(&mold)?;
        let report = measure_profile(
            &replica,
            &self.layout(),
            &self.mask,
            self.recipe.pdms_index,
            self.recipe.resist_thickness_um,
            &self.metrology,
        )?;
        Ok(Development {
            mold,
            replica,
            report,
        })
    }

    pub fn run(&self) -> Result<PipelineRun> {
        let transmission = self.transmission()?;
        let intensity = aerial_intensity(&transmission, &self.recipe, &self.settings.exposure)?;
        let Development {
            mold,
            replica,
            report,
        } = self.develop(&intensity)?;
        Ok(PipelineRun {
            transmission,
            mold,
            replica,
            report,
        })
    }

    /// Mean lens sag for a precomputed intensity.
    pub fn sag_from(&self, intensity: &IntensityVolume) -> Result<f64> {
        let dose = ExposureVolume::from_intensity(
            intensity,
            self.recipe.exposure_scale,
            self.recipe.absorption_per_um,
        );
        let mold = develop_profile(&dose, &self.recipe)?;
        let sags: Vec<f64> = extract_lens(&mold, &self.layout(), &self.metrology)
            .into_iter()
            .filter_map(|s| s.ok().map(|s| s.sag_um))
            .collect();
        if sags.is_empty() {
            return Err(Error::Extraction {
                lens: 0,
                reason: "no lens could be measured".into(),
            });
        }
        Ok(sags.iter().sum::<f64>() / sags.len() as f64)
    }

    pub fn sag(&self) -> Result<f64> {
        self.sag_from(&self.intensity()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    Gap,
    Pitch,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::Gap => "gap",
            SweepAxis::Pitch => "pitch",
        }
    }
}

/// Regime and geometry of one simulated print.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSummary {
    pub regime: Regime,
    /// `None` when no lens could be measured.
    pub metrics: Option<LensMetrics>,
    pub fill_factor_raster: f64,
}

impl From<&ProfileReport> for PointSummary {
    fn from(report: &ProfileReport) -> Self {
        Self {
            regime: report.regime,
            metrics: report.summary,
            fill_factor_raster: report.fill_factor_raster,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value_um: f64,
    pub outcome: Result<PointSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    /// Sorted by value; one entry per requested value.
    pub points: Vec<SweepPoint>,
}

/// Run the pipeline once per value of `axis`. Points are evaluated
/// concurrently; a failing point does not stop the others.
pub fn sweep(base: &Pipeline, axis: SweepAxis, values: &[f64]) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::Config(format!("sweep values must be positive, got {v}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let points = sorted
        .par_iter()
        .map(|&value_um| {
            let outcome = match axis {
                SweepAxis::Gap => Ok(base.with_gap(value_um)),
                SweepAxis::Pitch => base.with_pitch(value_um),
            }
            .and_then(|p| p.run())
            .map(|run| PointSummary::from(&run.report));
            SweepPoint { value_um, outcome }
        })
        .collect();
    Ok(SweepResult { axis, points })
}

/// Fitted resist parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResistParameters {
    pub exposure_scale: f64,
    pub contrast_gamma: f64,
    pub absorption_per_um: f64,
    pub rate_max_um_per_s: f64,
}

impl ResistParameters {
    pub fn of(recipe: &ProcessRecipe) -> Self {
        Self {
            exposure_scale: recipe.exposure_scale,
            contrast_gamma: recipe.contrast_gamma,
            absorption_per_um: recipe.absorption_per_um,
            rate_max_um_per_s: recipe.rate_max_um_per_s,
        }
    }

    pub fn apply(&self, recipe: &mut ProcessRecipe) {
        recipe.exposure_scale = self.exposure_scale;
        recipe.contrast_gamma = self.contrast_gamma;
        recipe.absorption_per_um = self.absorption_per_um;
        recipe.rate_max_um_per_s = self.rate_max_um_per_s;
    }

    fn to_array(self) -> [f64; 4] {
        [
            self.exposure_scale,
            self.contrast_gamma,
            self.absorption_per_um,
            self.rate_max_um_per_s,
        ]
    }

    fn from_array(v: [f64; 4]) -> Self {
        Self {
            exposure_scale: v[0],
            contrast_gamma: v[1],
            absorption_per_um: v[2],
            rate_max_um_per_s: v[3],
        }
    }
}

/// Inclusive `(lower, upper)` box for each fitted parameter. Equal bounds
/// pin a parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterBounds {
    pub exposure_scale: (f64, f64),
    pub contrast_gamma: (f64, f64),
    pub absorption_per_um: (f64, f64),
    pub rate_max_um_per_s: (f64, f64),
}

impl Default for ParameterBounds {
    fn default() -> Self {
        Self {
            exposure_scale: (0.1, 1000.0),
            contrast_gamma: (1.0, 8.0),
            absorption_per_um: (0.001, 2.0),
            rate_max_um_per_s: (0.01, 10.0),
        }
    }
}

impl ParameterBounds {
    /// Every parameter pinned at its value in `p`.
    pub fn pinned(p: &ResistParameters) -> Self {
        Self {
            exposure_scale: (p.exposure_scale, p.exposure_scale),
            contrast_gamma: (p.contrast_gamma, p.contrast_gamma),
            absorption_per_um: (p.absorption_per_um, p.absorption_per_um),
            rate_max_um_per_s: (p.rate_max_um_per_s, p.rate_max_um_per_s),
        }
    }

    fn to_array(self) -> [(f64, f64); 4] {
        [
            self.exposure_scale,
            self.contrast_gamma,
            self.absorption_per_um,
            self.rate_max_um_per_s,
        ]
    }

    fn validate(&self) -> Result<()> {
        for (lo, hi) in self.to_array() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo >= 0.0) {
                return Err(Error::Config(format!("malformed bounds ({lo}, {hi})")));
            }
        }
        if self.contrast_gamma.0 < 1.0 {
            return Err(Error::Config("contrast_gamma bounds must be >= 1".into()));
        }
        for (lo, _) in [self.exposure_scale, self.rate_max_um_per_s] {
            if lo <= 0.0 {
                return Err(Error::Config("scale and rate bounds must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    pub max_iterations: usize,
    /// Stop when the simplex spans less than this in normalized coordinates.
    pub tolerance: f64,
    /// Initial simplex edge in normalized coordinates.
    pub initial_step: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-3,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub fitted: ResistParameters,
    /// Root-mean-square sag error over the observations.
    pub residual_um: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Best objective after each iteration.
    pub history: Vec<f64>,
}

/// Maps a parameter box onto `[0, 1]`; log-scaled when the lower bound is positive.
#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn log(&self) -> bool {
        self.lo > 0.0
    }

    fn to_unit(&self, v: f64) -> f64 {
        let v = v.clamp(self.lo, self.hi);
        if self.log() {
            (v / self.lo).ln() / (self.hi / self.lo).ln()
        } else {
            (v - self.lo) / (self.hi - self.lo)
        }
    }

    fn from_unit(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let v = if self.log() {
            self.lo * (self.hi / self.lo).powf(u)
        } else {
            self.lo + u * (self.hi - self.lo)
        };
        v.clamp(self.lo, self.hi)
    }
}

/// Fit exposure scale, contrast, absorption and maximum rate so simulated
/// sags match `(gap, sag)` observations, by a bounded Nelder-Mead search
/// starting from the pipeline's current recipe.
pub fn calibrate(
    base: &Pipeline,
    observations: &[(f64, f64)],
    bounds: &ParameterBounds,
    options: &CalibrationOptions,
) -> Result<CalibrationResult> {
    if observations.is_empty() {
        return Err(Error::Config("calibration needs at least one observation".into()));
    }
    bounds.validate()?;
    let intensities: Vec<(IntensityVolume, f64)> = observations
        .iter()
        .map(|&(gap, sag)| Ok((base.with_gap(gap).intensity()?, sag)))
        .collect::<Result<_>>()?;

    let axes: Vec<Axis> = bounds
        .to_array()
        .iter()
        .map(|&(lo, hi)| Axis { lo, hi })
        .collect();
    let start = ResistParameters::of(&base.recipe).to_array();
    let free: Vec<usize> = (0..4).filter(|&k| axes[k].hi > axes[k].lo).collect();
    let fixed: [f64; 4] = std::array::from_fn(|k| start[k].clamp(axes[k].lo, axes[k].hi));

    let params_at = |u: &[f64]| -> [f64; 4] {
        let mut p = fixed;
        for (slot, &k) in free.iter().enumerate() {
            p[k] = axes[k].from_unit(u[slot]);
        }
        p
    };
    let mut evaluations = 0usize;
    let mut objective = |u: &[f64]| -> f64 {
        evaluations += 1;
        let mut pipeline = base.clone();
        ResistParameters::from_array(params_at(u)).apply(&mut pipeline.recipe);
        intensities
            .iter()
            .map(|(intensity, target)| {
                // an unmeasurable profile counts as zero sag
                let sag = pipeline.sag_from(intensity).unwrap_or(0.0);
                (sag - target).powi(2)
            })
            .sum()
    };

    let u0: Vec<f64> = free.iter().map(|&k| axes[k].to_unit(fixed[k])).collect();
    let f0 = objective(&u0);
    if !f0.is_finite() {
        return Err(Error::Calibration("objective is not finite at the initial point".into()));
    }
    let fit = nelder_mead(&mut objective, u0, f0, options);
    let n_obs = observations.len() as f64;
    Ok(CalibrationResult {
        fitted: ResistParameters::from_array(params_at(&fit.best)),
        residual_um: (fit.best_value / n_obs).sqrt(),
        iterations: fit.iterations,
        evaluations,
        history: fit.history,
    })
}

struct SimplexFit {
    best: Vec<f64>,
    best_value: f64,
    iterations: usize,
    history: Vec<f64>,
}

/// Nelder-Mead on the unit box; trial points are clamped into the box.
fn nelder_mead(
    f: &mut impl FnMut(&[f64]) -> f64,
    start: Vec<f64>,
    start_value: f64,
    options: &CalibrationOptions,
) -> SimplexFit {
    let n = start.len();
    if n == 0 {
        return SimplexFit {
            best: start,
            best_value: start_value,
            iterations: 0,
            history: Vec::new(),
        };
    }
    let clamp = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|x| x.clamp(0.0, 1.0)).collect() };
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(start.clone(), start_value)];
    for k in 0..n {
        let mut v = start.clone();
        v[k] += if v[k] + options.initial_step <= 1.0 {
            options.initial_step
        } else {
            -options.initial_step
        };
        let fv = f(&v);
        simplex.push((v, fv));
    }
    let order = |s: &mut Vec<(Vec<f64>, f64)>| {
        s.sort_by(|a, b| a.1.total_cmp(&b.1));
    };
    let mut history = Vec::new();
    let mut iterations = 0;
    order(&mut simplex);
    while iterations < options.max_iterations {
        let spread = simplex
            .iter()
            .skip(1)
            .flat_map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread < options.tolerance {
            break;
        }
        iterations += 1;
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|(v, _)| v[k]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> {
            clamp(
                centroid
                    .iter()
                    .zip(&worst.0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect(),
            )
        };
        let reflected = along(1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = along(2.0);
            let fe = f(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let (contracted, fc) = if fr < worst.1 {
                let c = along(0.5);
                let fc = f(&c);
                (c, fc)
            } else {
                let c = along(-0.5);
                let fc = f(&c);
                (c, fc)
            };
            if fc < worst.1.min(fr) {
                simplex[n] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let shrunk: Vec<f64> = best
                        .iter()
                        .zip(&vertex.0)
                        .map(|(b, v)| b + 0.5 * (v - b))
                        .collect();
                    let fs = f(&shrunk);
                    *vertex = (shrunk, fs);
                }
            }
        }
        order(&mut simplex);
        history.push(simplex[0].1);
    }
    SimplexFit {
        best: simplex[0].0.clone(),
        best_value: simplex[0].1,
        iterations,
        history,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseOptions {
    /// Accept a gap whose sag is this close to the target.
    pub sag_tolerance_um: f64,
    /// Stop once the bracket is this narrow.
    pub bracket_tolerance_um: f64,
    /// Gaps sampled up front to verify the monotone decrease.
    pub monotonicity_samples: usize,
}

impl Default for InverseOptions {
    fn default() -> Self {
        Self {
            sag_tolerance_um: 0.05,
            bracket_tolerance_um: 1.0,
            monotonicity_samples: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseResult {
    pub gap_um: f64,
    pub sag_um: f64,
    pub evaluations: usize,
}

/// Printing gap producing `target_sag_um`, by bisection over `gap_bounds`.
///
/// The sag must decrease strictly across the sampled gaps; the target must
/// lie between the sags at the two bounds.
pub fn inverse_gap(
    calibrated: &Pipeline,
    target_sag_um: f64,
    gap_bounds: (f64, f64),
    options: &InverseOptions,
) -> Result<InverseResult> {
    let (lo, hi) = gap_bounds;
    if !(lo >= 0.0 && hi > lo) || !hi.is_finite() {
        return Err(Error::Config(format!("malformed gap bounds ({lo}, {hi})")));
    }
    let count = options.monotonicity_samples.max(2);
    let sag_at = |gap: f64| calibrated.with_gap(gap).sag();
    let gaps: Vec<f64> = (0..count)
        .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
        .collect();
    let sags: Vec<f64> = gaps
        .par_iter()
        .map(|&g| sag_at(g))
        .collect::<Result<_>>()?;
    let mut evaluations = count;
    if let Some(w) = (0..count - 1).find(|&k| !(sags[k + 1] < sags[k])) {
        return Err(Error::NonMonotone(format!(
            "sag rises from {:.4} um at gap {} um to {:.4} um at gap {} um",
            sags[w],
            gaps[w],
            sags[w + 1],
            gaps[w + 1]
        )));
    }
    let (min_sag, max_sag) = (sags[count - 1], sags[0]);
    if !(target_sag_um >= min_sag && target_sag_um <= max_sag) {
        return Err(Error::OutOfRange {
            target_um: target_sag_um,
            min_um: min_sag,
            max_um: max_sag,
        });
    }
    if let Some(k) = sags.iter().position(|&s| s == target_sag_um) {
        return Ok(InverseResult {
            gap_um: gaps[k],
            sag_um: sags[k],
            evaluations,
        });
    }
    let k = (0..count - 1)
        .find(|&k| sags[k] >= target_sag_um && target_sag_um >= sags[k + 1])
        .expect("target lies inside the sampled range");
    let (mut a, mut b) = (gaps[k], gaps[k + 1]);
    let (mut sa, mut sb) = (sags[k], sags[k + 1]);
    while b - a > options.bracket_tolerance_um {
        let mid = 0.5 * (a + b);
        let s = sag_at(mid)?;
        evaluations += 1;
        if (s - target_sag_um).abs() <= options.sag_tolerance_um {
            return Ok(InverseResult {
                gap_um: mid,
                sag_um: s,
                evaluations,
            });
        }
        if s > target_sag_um {
            a = mid;
            sa = s;
        } else {
            b = mid;
            sb = s;
        }
    }
    let gap = 0.5 * (a + b);
    Ok(InverseResult {
        gap_um: gap,
        sag_um: 0.5 * (sa + sb),
        evaluations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleCheck {
    pub id: &'static str,
    pub description: String,
    pub passed: bool,
    /// Distance to the threshold in um; negative when failing.
    pub margin_um: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleReport {
    pub rules: Vec<RuleCheck>,
}

impl RuleReport {
    pub fn all_pass(&self) -> bool {
        self.rules.iter().all(|r| r.passed)
    }
}

/// Default closeness of pitch to aperture diameter for rule B.
pub const PITCH_CLOSENESS: f64 = 0.25;

/// Rule A: gap at least twice the pitch. Rule B: pitch within
/// `closeness` of the aperture diameter.
pub fn check_design_rules(spec: &MaskSpec, gap_um: f64, closeness: f64) -> RuleReport {
    let pitch = spec.pitch_um();
    let aperture = spec.aperture_diameter_um();
    let gap_margin = gap_um - 2.0 * pitch;
    let pitch_limit = (1.0 + closeness) * aperture;
    let pitch_margin = pitch_limit - pitch;
    RuleReport {
        rules: vec![
            RuleCheck {
                id: "A",
                description: format!("gap {gap_um} um >= 2 x pitch {pitch} um"),
                passed: gap_margin >= 0.0,
                margin_um: gap_margin,
            },
            RuleCheck {
                id: "B",
                description: format!(
                    "pitch {pitch} um <= {:.4} x aperture {aperture} um",
                    1.0 + closeness
                ),
                passed: pitch_margin >= 0.0,
                margin_um: pitch_margin,
            },
        ],
    }
}
