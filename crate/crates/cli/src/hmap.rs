//! `HMAP 1` height-map text files.
//!
//! ```text
//! HMAP 1
//! <nx> <ny> <dx_um> <dy_um> <mold|replica>
//! <nx heights, um>   (ny rows, row-major)
//! ```

use crate::error::{CliError, CliResult};
use crate::number::format_sig;
use ndarray::Array2;
use proxlith_core::{GridSpec, Orientation, SurfaceProfile};
use std::path::Path;

pub const MAGIC: &str = "HMAP 1";
/// Significant digits written per height.
pub const DIGITS: usize = 12;

fn orientation_token(o: Orientation) -> &'static str {
    match o {
        Orientation::MoldConcave => "mold",
        Orientation::ReplicaConvex => "replica",
    }
}

pub fn to_string(profile: &SurfaceProfile) -> String {
    let g = profile.grid;
    let mut out = String::with_capacity(g.len() * (DIGITS + 4) + 64);
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format!(
        "{} {} {} {} {}\n",
        g.nx,
        g.ny,
        g.dx_um,
        g.dy_um,
        orientation_token(profile.orientation)
    ));
    for row in profile.heights_um.rows() {
        let cells: Vec<String> = row.iter().map(|&h| format_sig(h, DIGITS)).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

pub fn export(profile: &SurfaceProfile, path: &Path) -> CliResult<()> {
    std::fs::write(path, to_string(profile)).map_err(|e| CliError::io(path, e))
}

pub fn import(path: &Path) -> CliResult<SurfaceProfile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text, path)
}

/// Parse file contents; `path` only labels errors.
pub fn parse(text: &str, path: &Path) -> CliResult<SurfaceProfile> {
    let fail = |line: usize, reason: String| CliError::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text.split('\n').enumerate().map(|(n, l)| (n + 1, l));
    match lines.next() {
        Some((_, MAGIC)) => {}
        Some((n, other)) => return Err(fail(n, format!("bad magic {other:?}, expected {MAGIC:?}"))),
        None => return Err(fail(1, "empty file".into())),
    }
    let (n, header) = lines.next().ok_or_else(|| fail(2, "missing header".into()))?;
    let fields: Vec<&str> = header.split(' ').collect();
    if fields.len() != 5 {
        return Err(fail(n, format!("header needs 5 fields, found {}", fields.len())));
    }
    let count = |s: &str, what: &str| -> CliResult<usize> {
        s.parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| fail(n, format!("{what} must be a positive integer, got {s:?}")))
    };
    let spacing = |s: &str, what: &str| -> CliResult<f64> {
        s.parse::<f64>()
            .ok()
            .filter(|v| *v > 0.0 && v.is_finite())
            .ok_or_else(|| fail(n, format!("{what} must be a positive number, got {s:?}")))
    };
    let (nx, ny) = (count(fields[0], "nx")?, count(fields[1], "ny")?);
    let (dx, dy) = (spacing(fields[2], "dx_um")?, spacing(fields[3], "dy_um")?);
    let orientation = match fields[4] {
        "mold" => Orientation::MoldConcave,
        "replica" => Orientation::ReplicaConvex,
        other => return Err(fail(n, format!("orientation must be mold or replica, got {other:?}"))),
    };

    let mut heights = Vec::with_capacity(nx * ny);
    for row in 0..ny {
        let (n, line) = lines
            .next()
            .filter(|(_, l)| !l.is_empty())
            .ok_or_else(|| fail(3 + row, format!("expected {ny} rows, found {row}")))?;
        let before = heights.len();
        for cell in line.split(' ') {
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| fail(n, format!("non-numeric height {cell:?}")))?;
            heights.push(v);
        }
        let found = heights.len() - before;
        if found != nx {
            return Err(fail(n, format!("expected {nx} heights, found {found}")));
        }
    }
    for (n, line) in lines {
        if !line.is_empty() {
            return Err(fail(n, format!("expected {ny} rows, found extra data")));
        }
    }
    if !text.ends_with('\n') {
        return Err(fail(2 + ny, "missing final newline".into()));
    }
    let grid = GridSpec::from_spacing(nx, ny, dx, dy)?;
    let heights = Array2::from_shape_vec((ny, nx), heights).expect("row count checked");
    Ok(SurfaceProfile::new(grid, heights, orientation)?)
}
