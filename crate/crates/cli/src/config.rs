//! Flat `section.key = value` recipe files.
//!
//! Lengths are in um, times in s and wavelengths in um; values are bare
//! numbers. Blank lines and lines starting with `#` are ignored.

use crate::error::{CliError, CliResult};
use proxlith_core::metrology::MetrologyConfig;
use proxlith_core::propagate::SpectralLine;
use proxlith_core::studio::{CalibrationOptions, InverseOptions, ParameterBounds, PITCH_CLOSENESS};
use proxlith_core::{MaskSpec, Pipeline, ProcessRecipe, Spectrum};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Number,
    Integer,
    Flag,
    List,
}

const KEYS: &[(&str, Kind)] = &[
    ("mask.aperture_um", Kind::Number),
    ("mask.pitch_um", Kind::Number),
    ("mask.row_offset_um", Kind::Number),
    ("mask.row_spacing_um", Kind::Number),
    ("mask.transmission_open", Kind::Number),
    ("mask.transmission_dark", Kind::Number),
    ("process.gap_um", Kind::Number),
    ("process.exposure_scale", Kind::Number),
    ("process.resist_thickness_um", Kind::Number),
    ("process.resist_index", Kind::Number),
    ("process.absorption_per_um", Kind::Number),
    ("process.develop_time_s", Kind::Number),
    ("process.rate_max_um_per_s", Kind::Number),
    ("process.dose_to_clear", Kind::Number),
    ("process.contrast_gamma", Kind::Number),
    ("process.pdms_index", Kind::Number),
    ("spectrum.wavelengths_um", Kind::List),
    ("spectrum.weights", Kind::List),
    ("simulation.dx_um", Kind::Number),
    ("simulation.z_slices", Kind::Integer),
    ("simulation.enforce_full_band", Kind::Flag),
    ("metrology.level_fraction", Kind::Number),
    ("metrology.fit_fraction", Kind::Number),
    ("metrology.directions", Kind::Integer),
    ("metrology.plateau_fraction", Kind::Number),
    ("metrology.plateau_span", Kind::Number),
    ("metrology.min_modulation", Kind::Number),
    ("metrology.max_rms_ratio", Kind::Number),
    ("calibration.exposure_scale_bounds", Kind::List),
    ("calibration.contrast_gamma_bounds", Kind::List),
    ("calibration.absorption_per_um_bounds", Kind::List),
    ("calibration.rate_max_um_per_s_bounds", Kind::List),
    ("calibration.max_iterations", Kind::Integer),
    ("calibration.tolerance", Kind::Number),
    ("calibration.initial_step", Kind::Number),
    ("inverse.sag_tolerance_um", Kind::Number),
    ("inverse.bracket_tolerance_um", Kind::Number),
    ("inverse.monotonicity_samples", Kind::Integer),
    ("rules.closeness", Kind::Number),
];

/// Everything a run needs, resolved from a config file over the defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub pipeline: Pipeline,
    pub bounds: ParameterBounds,
    pub calibration: CalibrationOptions,
    pub inverse: InverseOptions,
    pub closeness: f64,
    /// Entries as written in the file, for the manifest.
    pub entries: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pipeline: Pipeline::new(
                MaskSpec::hexagonal(80.0, 120.0).expect("default mask is valid"),
                ProcessRecipe::default(),
            ),
            bounds: ParameterBounds::default(),
            calibration: CalibrationOptions::default(),
            inverse: InverseOptions::default(),
            closeness: PITCH_CLOSENESS,
            entries: BTreeMap::new(),
        }
    }
}

pub fn load(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text, path)
}

fn parse_error(path: &Path, line: usize, reason: String) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    }
}

fn number(key: &str, raw: &str) -> CliResult<f64> {
    let raw = raw.trim();
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(CliError::Config(format!("{key}: value must be finite"))),
        Err(_) => {
            let unit = raw.trim_start_matches(|c: char| c.is_ascii_digit() || "+-.eE".contains(c));
            if !unit.is_empty() && unit.len() < raw.len() {
                Err(CliError::Config(format!(
                    "{key}: unit suffix {:?} not allowed; the key fixes the unit, write a bare number",
                    unit.trim()
                )))
            } else {
                Err(CliError::Config(format!("{key}: expected a number, got {raw:?}")))
            }
        }
    }
}

fn integer(key: &str, raw: &str) -> CliResult<usize> {
    raw.trim()
        .parse::<usize>()
        .map_err(|_| CliError::Config(format!("{key}: expected a non-negative integer, got {raw:?}")))
}

fn list(key: &str, raw: &str) -> CliResult<Vec<f64>> {
    raw.split(',').map(|v| number(key, v)).collect()
}

fn pair(key: &str, raw: &str) -> CliResult<(f64, f64)> {
    match list(key, raw)?.as_slice() {
        [lo, hi] => Ok((*lo, *hi)),
        _ => Err(CliError::Config(format!("{key}: expected `lower,upper`"))),
    }
}

/// Parse config text; `path` only labels errors.
pub fn parse(text: &str, path: &Path) -> CliResult<RunConfig> {
    let mut entries = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(parse_error(path, line_no, format!("expected `key = value`, got {line:?}")));
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(CliError::Config(format!("{}:{line_no}: unknown key {key:?}", path.display())));
        }
        if entries.insert(key.to_string(), value.to_string()).is_some() {
            return Err(CliError::Config(format!("{}:{line_no}: duplicate key {key:?}", path.display())));
        }
    }
    resolve(entries)
}

fn resolve(entries: BTreeMap<String, String>) -> CliResult<RunConfig> {
    let mut config = RunConfig::default();
    let get = |key: &str| entries.get(key).map(String::as_str);
    let num = |key: &str, default: f64| -> CliResult<f64> {
        get(key).map_or(Ok(default), |v| number(key, v))
    };
    let int = |key: &str, default: usize| -> CliResult<usize> {
        get(key).map_or(Ok(default), |v| integer(key, v))
    };

    let base = &config.pipeline.mask;
    let aperture = num("mask.aperture_um", base.aperture_diameter_um())?;
    let pitch = num("mask.pitch_um", base.pitch_um())?;
    let hex = MaskSpec::hexagonal(aperture, pitch)?;
    config.pipeline.mask = MaskSpec::new(
        aperture,
        pitch,
        num("mask.row_offset_um", hex.row_offset_um())?,
        num("mask.row_spacing_um", hex.row_spacing_um())?,
        num("mask.transmission_open", base.transmission_open())?,
        num("mask.transmission_dark", base.transmission_dark())?,
    )?;

    let r = &mut config.pipeline.recipe;
    r.gap_um = num("process.gap_um", r.gap_um)?;
    r.exposure_scale = num("process.exposure_scale", r.exposure_scale)?;
    r.resist_thickness_um = num("process.resist_thickness_um", r.resist_thickness_um)?;
    r.resist_index = num("process.resist_index", r.resist_index)?;
    r.absorption_per_um = num("process.absorption_per_um", r.absorption_per_um)?;
    r.develop_time_s = num("process.develop_time_s", r.develop_time_s)?;
    r.rate_max_um_per_s = num("process.rate_max_um_per_s", r.rate_max_um_per_s)?;
    r.dose_to_clear = num("process.dose_to_clear", r.dose_to_clear)?;
    r.contrast_gamma = num("process.contrast_gamma", r.contrast_gamma)?;
    r.pdms_index = num("process.pdms_index", r.pdms_index)?;
    if let Some(raw) = get("spectrum.wavelengths_um") {
        let wavelengths = list("spectrum.wavelengths_um", raw)?;
        let weights = match get("spectrum.weights") {
            Some(w) => list("spectrum.weights", w)?,
            None => vec![1.0; wavelengths.len()],
        };
        if weights.len() != wavelengths.len() {
            return Err(CliError::Config(format!(
                "spectrum.weights has {} entries for {} wavelengths",
                weights.len(),
                wavelengths.len()
            )));
        }
        r.spectrum = Spectrum::new(
            wavelengths
                .into_iter()
                .zip(weights)
                .map(|(wavelength_um, weight)| SpectralLine { wavelength_um, weight })
                .collect(),
        )?;
    } else if get("spectrum.weights").is_some() {
        return Err(CliError::Config("spectrum.weights given without spectrum.wavelengths_um".into()));
    }
    r.validate()?;

    let s = &mut config.pipeline.settings;
    s.dx_um = num("simulation.dx_um", s.dx_um)?;
    if !(s.dx_um > 0.0) {
        return Err(CliError::Config("simulation.dx_um must be positive".into()));
    }
    s.exposure.z_slices = int("simulation.z_slices", s.exposure.z_slices)?;
    if let Some(v) = get("simulation.enforce_full_band") {
        s.exposure.enforce_full_band = match v {
            "true" => true,
            "false" => false,
            other => {
                return Err(CliError::Config(format!(
                    "simulation.enforce_full_band: expected true or false, got {other:?}"
                )))
            }
        };
    }

    let m: &mut MetrologyConfig = &mut config.pipeline.metrology;
    m.level_fraction = num("metrology.level_fraction", m.level_fraction)?;
    m.fit_fraction = num("metrology.fit_fraction", m.fit_fraction)?;
    m.directions = int("metrology.directions", m.directions)?;
    m.plateau_fraction = num("metrology.plateau_fraction", m.plateau_fraction)?;
    m.plateau_span = num("metrology.plateau_span", m.plateau_span)?;
    m.min_modulation = num("metrology.min_modulation", m.min_modulation)?;
    m.max_rms_ratio = num("metrology.max_rms_ratio", m.max_rms_ratio)?;
    if !(m.level_fraction > 0.0 && m.level_fraction < 1.0) {
        return Err(CliError::Config("metrology.level_fraction must lie in (0, 1)".into()));
    }

    let b = &mut config.bounds;
    for (key, slot) in [
        ("calibration.exposure_scale_bounds", &mut b.exposure_scale),
        ("calibration.contrast_gamma_bounds", &mut b.contrast_gamma),
        ("calibration.absorption_per_um_bounds", &mut b.absorption_per_um),
        ("calibration.rate_max_um_per_s_bounds", &mut b.rate_max_um_per_s),
    ] {
        if let Some(v) = get(key) {
            *slot = pair(key, v)?;
        }
    }
    let c = &mut config.calibration;
    c.max_iterations = int("calibration.max_iterations", c.max_iterations)?;
    c.tolerance = num("calibration.tolerance", c.tolerance)?;
    c.initial_step = num("calibration.initial_step", c.initial_step)?;
    let i = &mut config.inverse;
    i.sag_tolerance_um = num("inverse.sag_tolerance_um", i.sag_tolerance_um)?;
    i.bracket_tolerance_um = num("inverse.bracket_tolerance_um", i.bracket_tolerance_um)?;
    i.monotonicity_samples = int("inverse.monotonicity_samples", i.monotonicity_samples)?;
    config.closeness = num("rules.closeness", config.closeness)?;

    config.entries = entries;
    Ok(config)
}

/// Every key of `config` in canonical form; parsing the text yields the same run.
pub fn render(config: &RunConfig) -> String {
    let p = &config.pipeline;
    let (mask, r, s, m) = (&p.mask, &p.recipe, &p.settings, &p.metrology);
    let f = |v: f64| format!("{v}");
    let join = |vs: Vec<f64>| vs.iter().map(|v| f(*v)).collect::<Vec<_>>().join(",");
    let lines = r.spectrum.lines();
    let b = &config.bounds;
    let pair = |(lo, hi): (f64, f64)| format!("{},{}", f(lo), f(hi));
    let rows: Vec<(&str, String)> = vec![
        ("mask.aperture_um", f(mask.aperture_diameter_um())),
        ("mask.pitch_um", f(mask.pitch_um())),
        ("mask.row_offset_um", f(mask.row_offset_um())),
        ("mask.row_spacing_um", f(mask.row_spacing_um())),
        ("mask.transmission_open", f(mask.transmission_open())),
        ("mask.transmission_dark", f(mask.transmission_dark())),
        ("process.gap_um", f(r.gap_um)),
        ("process.exposure_scale", f(r.exposure_scale)),
        ("process.resist_thickness_um", f(r.resist_thickness_um)),
        ("process.resist_index", f(r.resist_index)),
        ("process.absorption_per_um", f(r.absorption_per_um)),
        ("process.develop_time_s", f(r.develop_time_s)),
        ("process.rate_max_um_per_s", f(r.rate_max_um_per_s)),
        ("process.dose_to_clear", f(r.dose_to_clear)),
        ("process.contrast_gamma", f(r.contrast_gamma)),
        ("process.pdms_index", f(r.pdms_index)),
        ("spectrum.wavelengths_um", join(lines.iter().map(|l| l.wavelength_um).collect())),
        ("spectrum.weights", join(lines.iter().map(|l| l.weight).collect())),
        ("simulation.dx_um", f(s.dx_um)),
        ("simulation.z_slices", s.exposure.z_slices.to_string()),
        ("simulation.enforce_full_band", s.exposure.enforce_full_band.to_string()),
        ("metrology.level_fraction", f(m.level_fraction)),
        ("metrology.fit_fraction", f(m.fit_fraction)),
        ("metrology.directions", m.directions.to_string()),
        ("metrology.plateau_fraction", f(m.plateau_fraction)),
        ("metrology.plateau_span", f(m.plateau_span)),
        ("metrology.min_modulation", f(m.min_modulation)),
        ("metrology.max_rms_ratio", f(m.max_rms_ratio)),
        ("calibration.exposure_scale_bounds", pair(b.exposure_scale)),
        ("calibration.contrast_gamma_bounds", pair(b.contrast_gamma)),
        ("calibration.absorption_per_um_bounds", pair(b.absorption_per_um)),
        ("calibration.rate_max_um_per_s_bounds", pair(b.rate_max_um_per_s)),
        ("calibration.max_iterations", config.calibration.max_iterations.to_string()),
        ("calibration.tolerance", f(config.calibration.tolerance)),
        ("calibration.initial_step", f(config.calibration.initial_step)),
        ("inverse.sag_tolerance_um", f(config.inverse.sag_tolerance_um)),
        ("inverse.bracket_tolerance_um", f(config.inverse.bracket_tolerance_um)),
        ("inverse.monotonicity_samples", config.inverse.monotonicity_samples.to_string()),
        ("rules.closeness", f(config.closeness)),
    ];
    debug_assert_eq!(rows.len(), KEYS.len());
    let mut out = String::new();
    for (k, v) in rows {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    }
    out
}
