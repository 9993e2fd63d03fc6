use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masker::{mask_ratio, Mask};

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskStats {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Mask-ratio histogram over `[0, 1]`; the last bin includes 1.0.
    pub histogram: Vec<usize>,
    /// Mean number of 4-connected masked regions per mask.
    pub mean_cluster_count: f64,
}

impl MaskStats {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "masks: {}", self.count);
        let _ = writeln!(out, "mean ratio: {:.6}", self.mean);
        let _ = writeln!(out, "min ratio: {:.6}", self.min);
        let _ = writeln!(out, "max ratio: {:.6}", self.max);
        let _ = writeln!(out, "mean clusters: {:.6}", self.mean_cluster_count);
        let width = 1.0 / HISTOGRAM_BINS as f64;
        for (bin, count) in self.histogram.iter().enumerate() {
            let lo = bin as f64 * width;
            let _ = writeln!(
                out,
                "[{lo:.2}, {:.2}{} {count}",
                lo + width,
                if bin + 1 == HISTOGRAM_BINS { "]" } else { ")" }
            );
        }
        out
    }
}

/// Number of 4-connected components of masked cells on a `len / cols × cols` grid.
pub fn connected_regions(mask: &Mask, cols: usize) -> usize {
    let len = mask.len();
    let mut seen = vec![false; len];
    let mut regions = 0;
    let mut stack = Vec::new();
    for start in 0..len {
        if !mask.is_masked(start) || seen[start] {
            continue;
        }
        regions += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (r, c) = (i / cols, i % cols);
            let mut neighbours = Vec::with_capacity(4);
            if c > 0 {
                neighbours.push(i - 1);
            }
            if c + 1 < cols && i + 1 < len {
                neighbours.push(i + 1);
            }
            if r > 0 {
                neighbours.push(i - cols);
            }
            if i + cols < len {
                neighbours.push(i + cols);
            }
            for n in neighbours {
                if mask.is_masked(n) && !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
    }
    regions
}

/// Grid width used when none is given: `sqrt(L)` for square grids, else a single row.
pub fn default_cols(len: usize) -> usize {
    let side = (len as f64).sqrt().round() as usize;
    if side * side == len {
        side
    } else {
        len
    }
}

pub fn stats_report(masks: &[Mask], cols: Option<usize>) -> Result<MaskStats> {
    if masks.is_empty() {
        return Err(Error::Empty);
    }
    let ratios: Vec<f64> = masks.iter().map(mask_ratio).collect();
    let mut histogram = vec![0usize; HISTOGRAM_BINS];
    for r in &ratios {
        histogram[((r * HISTOGRAM_BINS as f64).floor() as usize).min(HISTOGRAM_BINS - 1)] += 1;
    }
    let clusters: usize = masks
        .iter()
        .map(|m| connected_regions(m, cols.unwrap_or_else(|| default_cols(m.len())).max(1)))
        .sum();
    Ok(MaskStats {
        count: masks.len(),
        mean: ratios.iter().sum::<f64>() / ratios.len() as f64,
        min: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        max: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        histogram,
        mean_cluster_count: clusters as f64 / masks.len() as f64,
    })
}
