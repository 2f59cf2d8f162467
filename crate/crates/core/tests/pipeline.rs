use proxlith_core::propagate::Spectrum;
use proxlith_core::resist::cast_mold;
use proxlith_core::studio::sweep;
use proxlith_core::{MaskSpec, Pipeline, ProcessRecipe, SweepAxis};

fn small() -> Pipeline {
    let recipe = ProcessRecipe {
        gap_um: 20.0,
        spectrum: Spectrum::monochromatic(0.405).unwrap(),
        resist_thickness_um: 3.0,
        exposure_scale: 20.0,
        absorption_per_um: 1.0,
        rate_max_um_per_s: 0.02,
        ..ProcessRecipe::default()
    };
    let mut p = Pipeline::new(MaskSpec::hexagonal(8.0, 12.0).unwrap(), recipe);
    p.settings.dx_um = 0.2;
    p.settings.exposure.z_slices = 8;
    p
}

#[test]
fn replica_metrics_agree_with_mold_sag() {
    let p = small();
    let run = p.run().unwrap();
    let summary = run.report.summary.unwrap();
    assert!((summary.sag_um - p.sag().unwrap()).abs() < 1e-12);
    assert_eq!(cast_mold(&run.replica).unwrap(), run.mold);
    assert!(run.mold.max() <= p.recipe.resist_thickness_um);
    assert!(run.mold.min() >= 0.0);
}

#[test]
fn sweep_independent_of_value_order() {
    let p = small();
    let a = sweep(&p, SweepAxis::Gap, &[10.0, 20.0, 30.0]).unwrap();
    let b = sweep(&p, SweepAxis::Gap, &[30.0, 10.0, 20.0]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn transmission_matches_open_area() {
    let p = small();
    let t = p.transmission().unwrap();
    let disc = std::f64::consts::PI * 16.0;
    let cell = p.mask.unit_cell();
    let expected = 2.0 * disc / cell.area();
    assert!((t.open_fraction(&p.mask) - expected).abs() < 0.02);
}

#[test]
fn deeper_exposure_gives_deeper_floor() {
    let p = small();
    let intensity = p.intensity().unwrap();
    let mut strong = p.clone();
    strong.recipe.exposure_scale *= 2.0;
    let weak = p.develop(&intensity).unwrap().mold;
    let strong = strong.develop(&intensity).unwrap().mold;
    assert!(strong
        .heights_um
        .iter()
        .zip(weak.heights_um.iter())
        .all(|(s, w)| s <= w));
}
