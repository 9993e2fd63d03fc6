//! Fixed-width batching of variable-ratio masks.
//!
//! Every image in a batch exposes the same number of visible slots
//! `V = L − ⌈β·L⌉`. Images with too many visible patches are randomly thinned
//! to `V`; images with too few are padded with slots whose attention flag is
//! off.

use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::masker::Mask;

#[derive(Debug, Clone, PartialEq)]
pub struct ShapedBatch {
    length: usize,
    slots: usize,
    beta: f64,
    kept_indices: Vec<Vec<usize>>,
    attention: Vec<Vec<bool>>,
}

/// `L − ⌈β·L⌉`; the tiny offset keeps products like `0.1 · 10` from rounding up.
pub fn visible_slots(length: usize, beta: f64) -> usize {
    let masked = ((beta * length as f64) - 1e-9).ceil().max(0.0) as usize;
    length - masked.min(length)
}

impl ShapedBatch {
    pub fn batch(&self) -> usize {
        self.kept_indices.len()
    }

    /// Visible slots per image (`V`).
    pub fn slots(&self) -> usize {
        self.slots
    }

    /// Patches per source image (`L`).
    pub fn length(&self) -> usize {
        self.length
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Index stored in padding slots; never a valid patch index.
    pub fn padding_index(&self) -> usize {
        self.length
    }

    pub fn kept_indices(&self, image: usize) -> &[usize] {
        &self.kept_indices[image]
    }

    pub fn attention(&self, image: usize) -> &[bool] {
        &self.attention[image]
    }

    /// Indices of real (attended) slots for one image.
    pub fn real_indices(&self, image: usize) -> impl Iterator<Item = usize> + '_ {
        self.kept_indices[image]
            .iter()
            .zip(&self.attention[image])
            .filter_map(|(&i, &a)| a.then_some(i))
    }

    pub fn padding_count(&self, image: usize) -> usize {
        self.attention[image].iter().filter(|&&a| !a).count()
    }

    /// Debug dump: `kept: i1,i2,...` and `attn: 0101...` per image. Padding
    /// slots print the sentinel index.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (kept, attn) in self.kept_indices.iter().zip(&self.attention) {
            let kept: Vec<String> = kept.iter().map(usize::to_string).collect();
            let attn: String = attn.iter().map(|&a| if a { '1' } else { '0' }).collect();
            let _ = writeln!(out, "kept: {}", kept.join(","));
            let _ = writeln!(out, "attn: {attn}");
        }
        out
    }
}

/// Shapes per-image masks into a batch with `V` slots per image.
///
/// Kept indices are ascending with padding last.
pub fn shape_batch<R: Rng + ?Sized>(masks: &[Mask], beta: f64, rng: &mut R) -> Result<ShapedBatch> {
    let length = masks.first().map(Mask::len).ok_or(Error::Empty)?;
    if let Some(m) = masks.iter().find(|m| m.len() != length) {
        return Err(Error::SizeMismatch {
            expected: length,
            actual: m.len(),
        });
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid("beta", format!("{beta} outside (0, 1)")));
    }
    let slots = visible_slots(length, beta);
    let mut kept_indices = Vec::with_capacity(masks.len());
    let mut attention = Vec::with_capacity(masks.len());
    for mask in masks {
        let visible = mask.visible();
        let mut kept = if visible.len() > slots {
            let mut picks: Vec<usize> = index::sample(rng, visible.len(), slots)
                .into_iter()
                .map(|i| visible[i])
                .collect();
            picks.sort_unstable();
            picks
        } else {
            visible
        };
        let real = kept.len();
        kept.resize(slots, length);
        let mut attn = vec![true; real];
        attn.resize(slots, false);
        kept_indices.push(kept);
        attention.push(attn);
    }
    Ok(ShapedBatch {
        length,
        slots,
        beta,
        kept_indices,
        attention,
    })
}
