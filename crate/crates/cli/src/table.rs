//! Tab-separated result tables.

use crate::number::format_sig;
use proxlith_core::metrology::LensReport;
use proxlith_core::studio::{CalibrationResult, InverseResult, PointSummary, SweepResult};
use proxlith_core::{LensMetrics, Regime};

const METRIC_COLUMNS: [&str; 8] = [
    "D_um",
    "h_um",
    "RC_um",
    "f_um",
    "NA",
    "fill_factor",
    "sphere_rms_um",
    "regime",
];

fn v(x: f64) -> String {
    format_sig(x, 6)
}

pub fn metrics_header(first: &str) -> String {
    let mut cols = vec![first];
    cols.extend(METRIC_COLUMNS);
    cols.join("\t") + "\n"
}

/// One row; unmeasurable points carry `-` cells and the regime.
pub fn metrics_row(first: f64, metrics: Option<&LensMetrics>, regime: Regime) -> String {
    let mut cells = vec![v(first)];
    match metrics {
        Some(m) => cells.extend([
            v(m.diameter_um),
            v(m.sag_um),
            v(m.radius_of_curvature_um),
            v(m.focal_length_um),
            v(m.numerical_aperture),
            v(m.fill_factor),
            v(m.sphere_rms_um),
        ]),
        None => cells.extend(std::iter::repeat("-".to_string()).take(7)),
    }
    cells.push(regime.to_string());
    cells.join("\t") + "\n"
}

pub fn sweep_table(result: &SweepResult) -> String {
    let mut out = metrics_header(&format!("{}_um", result.axis.as_str()));
    for p in &result.points {
        match &p.outcome {
            Ok(PointSummary { regime, metrics, .. }) => {
                out.push_str(&metrics_row(p.value_um, metrics.as_ref(), *regime))
            }
            Err(e) => {
                let mut cells = vec![v(p.value_um)];
                cells.extend(std::iter::repeat("-".to_string()).take(7));
                cells.push(format!("error: {e}"));
                out.push_str(&(cells.join("\t") + "\n"));
            }
        }
    }
    out
}

pub fn lens_table(lenses: &[LensReport]) -> String {
    let mut out = String::from("lens\tx_um\ty_um\tD_um\th_um\tRC_um\tsphere_rms_um\tstatus\n");
    for (n, l) in lenses.iter().enumerate() {
        let mut cells = vec![n.to_string(), v(l.center_um.0), v(l.center_um.1)];
        match &l.outcome {
            Ok(m) => {
                cells.extend([
                    v(m.diameter_um),
                    v(m.sag_um),
                    v(m.optics.radius_of_curvature_um),
                    v(m.sphere_rms_um),
                ]);
                cells.push("ok".into());
            }
            Err(e) => {
                cells.extend(std::iter::repeat("-".to_string()).take(4));
                cells.push(format!("error: {e}"));
            }
        }
        out.push_str(&(cells.join("\t") + "\n"));
    }
    out
}

pub fn calibration_table(fit: &CalibrationResult) -> String {
    let p = fit.fitted;
    let rows = [
        ("exposure_scale", v(p.exposure_scale)),
        ("contrast_gamma", v(p.contrast_gamma)),
        ("absorption_per_um", v(p.absorption_per_um)),
        ("rate_max_um_per_s", v(p.rate_max_um_per_s)),
        ("residual_um", v(fit.residual_um)),
        ("iterations", fit.iterations.to_string()),
        ("evaluations", fit.evaluations.to_string()),
    ];
    let mut out = String::from("parameter\tvalue\n");
    for (k, val) in rows {
        out.push_str(&format!("{k}\t{val}\n"));
    }
    out
}

pub fn inverse_table(r: &InverseResult) -> String {
    format!(
        "gap_um\tsag_um\tevaluations\n{}\t{}\t{}\n",
        v(r.gap_um),
        v(r.sag_um),
        r.evaluations
    )
}
