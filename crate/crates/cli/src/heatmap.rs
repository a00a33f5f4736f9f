//! Heatmap emission: count grids, plain-text graymaps, and ridge overlays.
//!
//! For every key `k` three files land in the target directory:
//!
//! - `key_<k>_grid.csv`: `2^n` rows of `2^n` comma-separated counts,
//!   row `v`, column `u`;
//! - `key_<k>_grid.pgm`: the same grid as a plain (P2) graymap, scaled to
//!   a max level of 255;
//! - `key_<k>_overlay.csv`: the predicted ridge points, one `u,v` per line.

use std::fs;
use std::path::{Path, PathBuf};

use mobridge_core::metrics::{heatmap, Heatmap};
use mobridge_core::Dataset;

use crate::error::{CliError, Result};

pub fn grid_csv(map: &Heatmap) -> String {
    let side = 1usize << map.n;
    let mut out = String::new();
    for v in 0..side {
        for u in 0..side {
            if u > 0 {
                out.push(',');
            }
            out.push_str(&map.count(v as u32, u as u32).to_string());
        }
        out.push('\n');
    }
    out
}

pub fn grid_pgm(map: &Heatmap) -> String {
    let side = 1usize << map.n;
    let max = map.counts.iter().copied().max().unwrap_or(0).max(1);
    let mut out = format!("P2\n{side} {side}\n255\n");
    for v in 0..side {
        for u in 0..side {
            if u > 0 {
                out.push(' ');
            }
            let level = (map.count(v as u32, u as u32) * 255 + max / 2) / max;
            out.push_str(&level.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn overlay_csv(map: &Heatmap) -> String {
    let mut out = String::from("u,v\n");
    for &(u, v) in &map.overlay {
        out.push_str(&format!("{u},{v}\n"));
    }
    out
}

/// Write the three files for every key; returns the paths written.
pub fn write_heatmaps(ds: &Dataset, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for &key in &ds.spec().keys {
        let map = heatmap(ds, key)?;
        for (suffix, content) in [
            ("grid.csv", grid_csv(&map)),
            ("grid.pgm", grid_pgm(&map)),
            ("overlay.csv", overlay_csv(&map)),
        ] {
            let path = dir.join(format!("key_{key}_{suffix}"));
            fs::write(&path, content)
                .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            written.push(path);
        }
    }
    Ok(written)
}
