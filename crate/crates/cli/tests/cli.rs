use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn proxlith(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_proxlith"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn recipe() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../recipes/broadband.cfg")
}

fn stderr_line(out: &Output) -> String {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(text.lines().count(), 1, "{text}");
    text.trim_end().to_string()
}

#[test]
fn rules_high_fill_layout_pass() {
    let out = proxlith(&["rules", "--pitch", "90", "--aperture", "80", "--gap", "360"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.split('\t').nth(1) == Some("true")), "{text}");
}

#[test]
fn rules_fig3_layout_fails_pitch_rule() {
    let out = proxlith(&["rules", "--pitch", "120", "--aperture", "80", "--gap", "360"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("A\ttrue\t120\t"), "{text}");
    assert!(text.contains("B\tfalse\t-20\t"), "{text}");
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = proxlith(&["rules", "--pitchh", "90"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_line(&out).starts_with("error kind=usage code=1 message="));
    let out = proxlith(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "process.gap_um = 360um\n").unwrap();
    let out = proxlith(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let line = stderr_line(&out);
    assert!(line.starts_with("error kind=config code=2"), "{line}");
    assert!(line.contains("unit suffix"), "{line}");

    std::fs::write(&cfg, "mask.pich_um = 90\n").unwrap();
    let out = proxlith(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn heightmap_errors_exit_3_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let map = dir.path().join("bad.hmap");
    std::fs::write(&map, "HMAP 1\n2 2 1 1 mold\n0 0\n0 oops\n").unwrap();
    let out = proxlith(&["export-image", "--heightmap", map.to_str().unwrap(), "--out", dir.path().join("x.pgm").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let line = stderr_line(&out);
    assert!(line.contains("bad.hmap:4:"), "{line}");
}

#[test]
fn undersampled_grid_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("coarse.cfg");
    std::fs::write(&cfg, "mask.aperture_um = 8\nmask.pitch_um = 12\nsimulation.dx_um = 0.4\n").unwrap();
    let out = proxlith(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr_line(&out).starts_with("error kind=numerical code=4"));
}

fn tiny_config(dir: &Path) -> PathBuf {
    let cfg = dir.join("tiny.cfg");
    std::fs::write(
        &cfg,
        "mask.aperture_um = 8\nmask.pitch_um = 12\nprocess.gap_um = 20\n\
         process.resist_thickness_um = 3\nprocess.exposure_scale = 20\n\
         process.absorption_per_um = 1\nprocess.rate_max_um_per_s = 0.02\n\
         spectrum.wavelengths_um = 0.405\nsimulation.dx_um = 0.2\nsimulation.z_slices = 8\n",
    )
    .unwrap();
    cfg
}

#[test]
fn unreachable_sag_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = proxlith(&[
        "invert", "--config", cfg.to_str().unwrap(), "--target-sag", "500",
        "--gap-min", "10", "--gap-max", "11",
    ]);
    assert_eq!(out.status.code(), Some(5), "{}", String::from_utf8_lossy(&out.stderr));
    let line = stderr_line(&out);
    assert!(line.starts_with("error kind=range code=5") || line.starts_with("error kind=monotonicity code=5"), "{line}");
}

#[test]
fn calibrate_then_sweep_small_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out_dir = dir.path().join("cal");
    let out = proxlith(&[
        "calibrate", "--config", cfg.to_str().unwrap(), "--observation", "20:2.5",
        "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(out_dir.join("calibration.tsv")).unwrap();
    assert!(table.starts_with("parameter\tvalue\nexposure_scale\t"));
    let fitted = out_dir.join("calibrated.cfg");
    let sweep_dir = dir.path().join("sweep");
    let out = proxlith(&[
        "sweep", "--config", fitted.to_str().unwrap(), "--axis", "gap", "--values", "30,10,20",
        "--out", sweep_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(sweep_dir.join("sweep.tsv")).unwrap();
    let gaps: Vec<&str> = text.lines().skip(1).map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(gaps, ["10", "20", "30"]);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(sweep_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"][0], "sweep.tsv");
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["recipe"]["mask.pitch_um"], "12");
}

/// Connected regions (4-neighbour, periodic) of pixels darker than `threshold`.
fn dark_regions(levels: &[u16], nx: usize, ny: usize, threshold: u16) -> usize {
    let mut seen = vec![false; levels.len()];
    let mut count = 0;
    for start in 0..levels.len() {
        if seen[start] || levels[start] >= threshold {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(k) = stack.pop() {
            let (i, j) = (k % nx, k / nx);
            for (di, dj) in [(1, 0), (nx - 1, 0), (0, 1), (0, ny - 1)] {
                let n = (j + dj) % ny * nx + (i + di) % nx;
                if !seen[n] && levels[n] < threshold {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
    }
    count
}

fn read_pgm(path: &Path) -> (usize, usize, Vec<u16>) {
    let bytes = std::fs::read(path).unwrap();
    let header_end = bytes
        .iter()
        .enumerate()
        .filter(|(_, b)| **b == b'\n')
        .nth(2)
        .unwrap()
        .0;
    let header = std::str::from_utf8(&bytes[..header_end]).unwrap();
    let fields: Vec<&str> = header.split_whitespace().collect();
    assert_eq!(fields[0], "P5");
    assert_eq!(fields[3], "65535");
    let (nx, ny) = (fields[1].parse().unwrap(), fields[2].parse().unwrap());
    let levels = bytes[header_end + 1..]
        .chunks(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect::<Vec<_>>();
    assert_eq!(levels.len(), nx * ny);
    (nx, ny, levels)
}

#[test]
fn simulate_fig3_layout_then_analyze_and_image() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = proxlith(&[
            "simulate", "--config", recipe().to_str().unwrap(), "--gap", "360",
            "--out", out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        out_dir
    };
    let a = run("a");
    let metrics = std::fs::read_to_string(a.join("metrics.tsv")).unwrap();
    let row: Vec<&str> = metrics.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(row[0], "360");
    assert_eq!(row[8], "Concave", "{metrics}");

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    for name in manifest["outputs"].as_array().unwrap() {
        assert!(a.join(name.as_str().unwrap()).is_file());
    }

    let b = run("b");
    for name in ["mold.hmap", "replica.hmap", "metrics.tsv", "lenses.tsv"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }

    let replica = a.join("replica.hmap");
    let out = proxlith(&["analyze", "--heightmap", replica.to_str().unwrap(), "--pitch", "120"]);
    assert_eq!(out.status.code(), Some(0));
    let analyzed = String::from_utf8(out.stdout).unwrap();
    let arow: Vec<&str> = analyzed.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(&arow[1..], &row[1..], "{analyzed}");

    let image = dir.path().join("mold.pgm");
    let out = proxlith(&[
        "export-image", "--heightmap", a.join("mold.hmap").to_str().unwrap(),
        "--out", image.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let (nx, ny, levels) = read_pgm(&image);
    assert_eq!(dark_regions(&levels, nx, ny, 65535 / 4), 2);
}

#[test]
fn analyze_synthetic_cap_grid() {
    use ndarray::Array2;
    use proxlith_core::{GridSpec, LensLayout, MaskSpec, Orientation, SurfaceProfile};
    let (d, h) = (116.16, 6.11);
    let rc = (h * h + d * d / 4.0) / (2.0 * h);
    let cell = MaskSpec::hexagonal(80.0, 120.0).unwrap().unit_cell();
    // three by two unit cells, lens center 0 at (60, 60)
    let grid = GridSpec::from_spacing(900, 1100, 0.4, 0.4).unwrap();
    let layout = LensLayout::bounded(cell.clone(), (60.0, 60.0), 360.0, 440.0);
    let heights = Array2::from_shape_fn(grid.shape(), |(j, i)| {
        let r2 = layout.locate(grid.x(i), grid.y(j)).dist_sq;
        if r2 < d * d / 4.0 {
            (rc * rc - r2).sqrt() - (rc - h)
        } else {
            0.0
        }
    });
    let profile = SurfaceProfile::new(grid, heights, Orientation::ReplicaConvex).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scan.hmap");
    proxlith_cli::hmap::export(&profile, &path).unwrap();
    let out = proxlith(&[
        "analyze", "--heightmap", path.to_str().unwrap(), "--pitch", "120", "--origin", "60,60",
        "--out", dir.path().join("an").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split('\t').take(6).map(|v| v.parse().unwrap()).collect();
    assert!((row[1] / d - 1.0).abs() < 0.01, "{text}");
    assert!((row[2] / h - 1.0).abs() < 0.01, "{text}");
    assert!((row[3] / rc - 1.0).abs() < 0.02, "{text}");
    assert!(text.contains("\tConcave"));
}
