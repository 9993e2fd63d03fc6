//! File formats and reports: binary portable pixmaps, mask renders, mask
//! files and summary statistics.

pub mod pnm;
pub mod render;
pub mod stats;

use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::masker::Mask;

pub use pnm::{decode_pnm, encode_pnm, load_image, save_image};
pub use render::render_mask;
pub use stats::{stats_report, MaskStats};

/// Writes masks as one `'0'`/`'1'` line per image.
pub fn write_masks(path: &Path, masks: &[Mask]) -> Result<()> {
    let mut out = String::with_capacity(masks.iter().map(|m| m.len() + 1).sum());
    for mask in masks {
        out.push_str(&mask.to_bits());
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a mask file written by [`write_masks`]. Blank lines are skipped.
pub fn read_masks(path: &Path) -> Result<Vec<Mask>> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(Mask::from_bits)
        .collect()
}
