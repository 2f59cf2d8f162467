use crate::config::{self, RunConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::Recorder;
use crate::{hmap, pgm, table};
use clap::{Parser, Subcommand, ValueEnum};
use proxlith_core::metrology::{measure_profile, roughness_ra};
use proxlith_core::propagate::aerial_intensity;
use proxlith_core::studio::{calibrate, check_design_rules, inverse_gap, sweep};
use proxlith_core::{LensLayout, MaskSpec, SweepAxis};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "proxlith", version, about = "UV proximity-printing microlens simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mask, exposure, development, casting and metrology for one recipe.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides process.gap_um.
        #[arg(long)]
        gap: Option<f64>,
    },
    /// One simulation per printing gap or pitch.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated values in um.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the resist parameters to observed sags.
    Calibrate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// `gap_um:sag_um`, repeatable.
        #[arg(long = "observation", required = true, value_parser = parse_observation)]
        observations: Vec<(f64, f64)>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Printing gap that produces a target sag.
    Invert {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        target_sag: f64,
        #[arg(long)]
        gap_min: f64,
        #[arg(long)]
        gap_max: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lens metrology on an imported height map.
    Analyze {
        #[arg(long)]
        heightmap: PathBuf,
        #[arg(long)]
        pitch: f64,
        #[arg(long, default_value_t = 80.0)]
        aperture: f64,
        /// Replica refractive index.
        #[arg(long, default_value_t = 1.44)]
        index: f64,
        /// Film thickness the sag is compared against for the blurred test.
        #[arg(long, default_value_t = 18.0)]
        thickness: f64,
        /// Position of a lens center in the map, `x_um,y_um`.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.0])]
        origin: Vec<f64>,
        /// Also report Ra over the whole map.
        #[arg(long)]
        roughness: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the gap and pitch design rules.
    Rules {
        #[arg(long)]
        pitch: f64,
        #[arg(long)]
        aperture: f64,
        #[arg(long)]
        gap: f64,
        #[arg(long, default_value_t = proxlith_core::studio::PITCH_CLOSENESS)]
        closeness: f64,
    },
    /// Render a height map as a 16-bit PGM.
    ExportImage {
        #[arg(long)]
        heightmap: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Gap,
    Pitch,
}

fn parse_observation(s: &str) -> Result<(f64, f64), String> {
    let (g, h) = s
        .split_once(':')
        .ok_or_else(|| format!("expected gap_um:sag_um, got {s:?}"))?;
    let g: f64 = g.trim().parse().map_err(|_| format!("bad gap {g:?}"))?;
    let h: f64 = h.trim().parse().map_err(|_| format!("bad sag {h:?}"))?;
    Ok((g, h))
}

fn load_config(path: &Option<PathBuf>) -> CliResult<RunConfig> {
    match path {
        Some(p) => config::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn recipe_echo(config: &RunConfig) -> BTreeMap<String, String> {
    config::render(config)
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn recorder(dir: &Path, args: &[String], config: &RunConfig, input: &Option<PathBuf>) -> CliResult<Recorder> {
    let mut rec = Recorder::new(dir, args.to_vec(), recipe_echo(config))?;
    if let Some(p) = input {
        rec.input(p)?;
    }
    Ok(rec)
}

/// Parse `args` (program name first) and run the command, printing results to `stdout`.
pub fn execute(args: &[String], stdout: &mut dyn Write) -> CliResult<()> {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    write!(stdout, "{e}").map_err(|e| CliError::io("<stdout>", e))
                }
                _ => {
                    let text = e.to_string();
                    let first = text.lines().next().unwrap_or("usage error");
                    Err(CliError::Usage(first.trim_start_matches("error: ").to_string()))
                }
            };
        }
    };
    let print = |stdout: &mut dyn Write, s: &str| -> CliResult<()> {
        stdout.write_all(s.as_bytes()).map_err(|e| CliError::io("<stdout>", e))
    };
    let args: Vec<String> = args.iter().skip(1).cloned().collect();

    match cli.command {
        Command::Simulate { config, out, gap } => {
            let mut cfg = load_config(&config)?;
            if let Some(g) = gap {
                cfg.pipeline.recipe.gap_um = g;
                cfg.pipeline.recipe.validate()?;
            }
            let mut rec = recorder(&out, &args, &cfg, &config)?;
            let p = &cfg.pipeline;
            let transmission = p.transmission()?;
            rec.lap("mask");
            let intensity = aerial_intensity(&transmission, &p.recipe, &p.settings.exposure)?;
            rec.lap("expose");
            let dev = p.develop(&intensity)?;
            rec.lap("develop_cast_measure");
            rec.write("mold.hmap", hmap::to_string(&dev.mold).as_bytes())?;
            rec.write("replica.hmap", hmap::to_string(&dev.replica).as_bytes())?;
            let metrics = table::metrics_header("gap_um")
                + &table::metrics_row(p.recipe.gap_um, dev.report.summary.as_ref(), dev.report.regime);
            rec.write("metrics.tsv", metrics.as_bytes())?;
            rec.write("lenses.tsv", table::lens_table(&dev.report.lenses).as_bytes())?;
            rec.lap("write");
            rec.finish()?;
            print(stdout, &metrics)
        }
        Command::Sweep {
            config,
            axis,
            values,
            out,
        } => {
            let cfg = load_config(&config)?;
            let mut rec = recorder(&out, &args, &cfg, &config)?;
            let axis = match axis {
                Axis::Gap => SweepAxis::Gap,
                Axis::Pitch => SweepAxis::Pitch,
            };
            let result = sweep(&cfg.pipeline, axis, &values)?;
            rec.lap("sweep");
            let text = table::sweep_table(&result);
            rec.write("sweep.tsv", text.as_bytes())?;
            rec.finish()?;
            print(stdout, &text)
        }
        Command::Calibrate {
            config,
            observations,
            out,
        } => {
            let cfg = load_config(&config)?;
            let mut rec = recorder(&out, &args, &cfg, &config)?;
            let fit = calibrate(&cfg.pipeline, &observations, &cfg.bounds, &cfg.calibration)?;
            rec.lap("calibrate");
            let mut fitted = cfg.clone();
            fit.fitted.apply(&mut fitted.pipeline.recipe);
            let text = table::calibration_table(&fit);
            rec.write("calibration.tsv", text.as_bytes())?;
            rec.write("calibrated.cfg", config::render(&fitted).as_bytes())?;
            rec.finish()?;
            print(stdout, &text)
        }
        Command::Invert {
            config,
            target_sag,
            gap_min,
            gap_max,
            out,
        } => {
            let cfg = load_config(&config)?;
            let mut rec = match &out {
                Some(dir) => Some(recorder(dir, &args, &cfg, &config)?),
                None => None,
            };
            let result = inverse_gap(&cfg.pipeline, target_sag, (gap_min, gap_max), &cfg.inverse)?;
            let text = table::inverse_table(&result);
            if let Some(mut rec) = rec.take() {
                rec.lap("invert");
                rec.write("invert.tsv", text.as_bytes())?;
                rec.finish()?;
            }
            print(stdout, &text)
        }
        Command::Analyze {
            heightmap,
            pitch,
            aperture,
            index,
            thickness,
            origin,
            roughness,
            out,
        } => {
            if origin.len() != 2 {
                return Err(CliError::Usage("--origin takes x_um,y_um".into()));
            }
            let profile = hmap::import(&heightmap)?;
            let spec = MaskSpec::hexagonal(aperture, pitch)?;
            let cell = spec.unit_cell();
            let g = profile.grid;
            let origin = (origin[0], origin[1]);
            let layout = if origin == (0.0, 0.0) && g.tiles(cell.width_um, cell.height_um) {
                LensLayout::periodic(cell)
            } else {
                LensLayout::bounded(cell, origin, g.nx as f64 * g.dx_um, g.ny as f64 * g.dy_um)
            };
            if layout.is_empty() {
                return Err(CliError::Config(format!(
                    "height map holds no complete lens cell at pitch {pitch} um"
                )));
            }
            let mut cfg = RunConfig::default();
            cfg.pipeline.mask = spec;
            cfg.pipeline.recipe.pdms_index = index;
            cfg.pipeline.recipe.resist_thickness_um = thickness;
            let report = measure_profile(&profile, &layout, &spec, index, thickness, &cfg.pipeline.metrology)?;
            let mut text = table::metrics_header("pitch_um")
                + &table::metrics_row(pitch, report.summary.as_ref(), report.regime);
            if roughness {
                let ra = roughness_ra(&profile)?;
                text.push_str(&format!("ra_nm\t{}\n", crate::number::format_sig(ra.ra_nm, 6)));
            }
            if let Some(dir) = &out {
                let mut rec = Recorder::new(dir, args.clone(), recipe_echo(&cfg))?;
                rec.input(&heightmap)?;
                rec.lap("analyze");
                rec.write("analysis.tsv", text.as_bytes())?;
                rec.write("lenses.tsv", table::lens_table(&report.lenses).as_bytes())?;
                rec.finish()?;
            }
            print(stdout, &text)
        }
        Command::Rules {
            pitch,
            aperture,
            gap,
            closeness,
        } => {
            let spec = MaskSpec::hexagonal(aperture, pitch)?;
            let report = check_design_rules(&spec, gap, closeness);
            let mut text = String::from("rule\tpassed\tmargin_um\tdescription\n");
            for r in &report.rules {
                text.push_str(&format!(
                    "{}\t{}\t{}\t{}\n",
                    r.id,
                    r.passed,
                    crate::number::format_sig(r.margin_um, 6),
                    r.description
                ));
            }
            print(stdout, &text)
        }
        Command::ExportImage { heightmap, out } => {
            let profile = hmap::import(&heightmap)?;
            pgm::export(&profile, &out)
        }
    }
}
