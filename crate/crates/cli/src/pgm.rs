//! 8-bit binary PGM heatmaps of feature matrices.

use anyhow::{bail, Result};
use dlr::features::Matrix;

/// Gray level of a value under per-image min–max scaling; a constant image
/// maps to mid-gray.
pub fn gray(v: f32, min: f32, max: f32) -> u8 {
    if max <= min {
        return 128;
    }
    (((v - min) as f64 / (max - min) as f64) * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Columns `start..start + frames` of `m` as a binary PGM: one image row per
/// matrix row, one image column per frame.
pub fn render(m: &Matrix, start: usize, frames: usize) -> Result<Vec<u8>> {
    if frames == 0 {
        bail!("segment must span at least one frame");
    }
    if start + frames > m.cols() {
        bail!("segment {start}..{} exceeds the {} available frames", start + frames, m.cols());
    }
    let cells = (0..m.rows()).flat_map(|r| m.row(r)[start..start + frames].iter().copied());
    let (min, max) = cells.clone().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let mut out = format!("P5\n{} {}\n255\n", frames, m.rows()).into_bytes();
    out.extend(cells.map(|v| gray(v, min, max)));
    Ok(out)
}
