//! 16-bit binary graymap (`P5`) export of height maps.

use crate::error::{CliError, CliResult};
use proxlith_core::SurfaceProfile;
use std::path::Path;

/// Heights mapped linearly from min to 0 and max to 65535; a constant map is mid-gray.
pub fn gray_levels(profile: &SurfaceProfile) -> Vec<u16> {
    let (lo, hi) = (profile.min(), profile.max());
    profile
        .heights_um
        .iter()
        .map(|&h| {
            if hi > lo {
                ((h - lo) / (hi - lo) * 65535.0).round().clamp(0.0, 65535.0) as u16
            } else {
                32768
            }
        })
        .collect()
}

pub fn encode(profile: &SurfaceProfile) -> Vec<u8> {
    let g = profile.grid;
    let mut out = format!("P5\n{} {}\n65535\n", g.nx, g.ny).into_bytes();
    for v in gray_levels(profile) {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

pub fn export(profile: &SurfaceProfile, path: &Path) -> CliResult<()> {
    std::fs::write(path, encode(profile)).map_err(|e| CliError::io(path, e))
}
