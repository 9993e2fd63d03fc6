//! Synthetic images for calibration runs, tests and demos.

use rand::Rng;

use crate::contrastive::Sample;
use crate::error::Result;
use crate::patch_grid::Image;
use crate::rng::{self, stream};

/// Lattice spacings (in pixels) of the value-noise octaves, coarse to fine.
const OCTAVE_CELLS: [usize; 4] = [56, 28, 14, 7];
const OCTAVE_WEIGHTS: [f64; 4] = [0.4, 0.25, 0.15, 0.1];
/// Weight of independent per-pixel grain.
const GRAIN_WEIGHT: f64 = 0.04;
/// Share of each channel drawn from its own coarse color field.
const CHROMA_WEIGHT: f64 = 0.35;

/// Bilinearly interpolated random lattice with spacing `cell`.
fn value_noise<R: Rng + ?Sized>(height: usize, width: usize, cell: usize, rng: &mut R) -> Vec<f64> {
    let (gh, gw) = (height / cell + 2, width / cell + 2);
    let lattice: Vec<f64> = (0..gh * gw).map(|_| rng.random::<f64>()).collect();
    let mut out = Vec::with_capacity(height * width);
    for y in 0..height {
        let fy = y as f64 / cell as f64;
        let (y0, ty) = (fy.floor() as usize, fy.fract());
        for x in 0..width {
            let fx = x as f64 / cell as f64;
            let (x0, tx) = (fx.floor() as usize, fx.fract());
            let at = |r: usize, c: usize| lattice[r * gw + c];
            let top = at(y0, x0) * (1.0 - tx) + at(y0, x0 + 1) * tx;
            let bottom = at(y0 + 1, x0) * (1.0 - tx) + at(y0 + 1, x0 + 1) * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    out
}

fn fractal_field<R: Rng + ?Sized>(height: usize, width: usize, rng: &mut R) -> Vec<f64> {
    let total: f64 = OCTAVE_WEIGHTS.iter().sum::<f64>() + GRAIN_WEIGHT;
    let mut field = vec![0.0; height * width];
    for (cell, weight) in OCTAVE_CELLS.iter().zip(OCTAVE_WEIGHTS) {
        let octave = value_noise(height, width, *cell, rng);
        field.iter_mut().zip(octave).for_each(|(f, v)| *f += weight * v);
    }
    field
        .iter_mut()
        .for_each(|f| *f = (*f + GRAIN_WEIGHT * rng.random::<f64>()) / total);
    field
}

/// Smoothed multi-octave noise with natural-image-like spatial correlation.
///
/// Channels share a luminance field and each add a private color field, so
/// neighbouring patches are correlated and colored regions form.
pub fn smooth_noise_image<R: Rng + ?Sized>(height: usize, width: usize, channels: usize, rng: &mut R) -> Result<Image> {
    let luminance = fractal_field(height, width, rng);
    let chroma: Vec<Vec<f64>> = (0..channels).map(|_| fractal_field(height, width, rng)).collect();
    let mut data = Vec::with_capacity(height * width * channels);
    for p in 0..height * width {
        for field in &chroma {
            let v = (1.0 - CHROMA_WEIGHT) * luminance[p] + CHROMA_WEIGHT * field[p];
            data.push(v.clamp(0.0, 1.0));
        }
    }
    Image::new(height, width, channels, data)
}

/// `count` smoothed-noise RGB images, image `i` drawn from its own derived stream.
pub fn smooth_noise_dataset(count: usize, size: usize, seed: u64) -> Result<Vec<Image>> {
    (0..count)
        .map(|i| smooth_noise_image(size, size, 3, &mut rng::derived(seed, stream::DATA, i as u64)))
        .collect()
}

/// Quadrant colors; chroma survives pixel normalization, so these stay apart.
pub const PALETTE: [[f64; 3]; 8] = [
    [0.8, 0.2, 0.2],
    [0.2, 0.75, 0.2],
    [0.2, 0.25, 0.8],
    [0.8, 0.8, 0.2],
    [0.8, 0.2, 0.8],
    [0.2, 0.8, 0.8],
    [0.8, 0.5, 0.2],
    [0.5, 0.2, 0.8],
];

/// Per-color texture frequencies `(fy, fx)` in cycles per patch, so that
/// patches of different colors are linearly independent vectors.
const TEXTURES: [(f64, f64); 8] = [
    (1.0, 0.0),
    (0.0, 1.0),
    (1.0, 1.0),
    (1.0, -1.0),
    (2.0, 0.0),
    (0.0, 2.0),
    (2.0, 1.0),
    (1.0, 2.0),
];

pub const COLOR_CAPTION_SIZE: usize = 32;
pub const COLOR_CAPTION_PATCH: usize = 8;
pub const COLOR_CAPTION_VOCAB: usize = PALETTE.len();
const TEXTURE_AMPLITUDE: f64 = 0.12;
const COLOR_NOISE: f64 = 0.03;

/// Images of four textured color quadrants with light noise; the caption is
/// the bag of quadrant color ids.
pub fn color_caption_dataset(count: usize, seed: u64) -> Result<Vec<Sample>> {
    let size = COLOR_CAPTION_SIZE;
    let half = size / 2;
    let period = COLOR_CAPTION_PATCH as f64;
    (0..count)
        .map(|i| {
            let mut rng = rng::derived(seed, stream::DATA, i as u64);
            let colors: Vec<usize> = (0..4).map(|_| rng.random_range(0..PALETTE.len())).collect();
            let mut data = Vec::with_capacity(size * size * 3);
            for y in 0..size {
                for x in 0..size {
                    let color = colors[(y / half) * 2 + x / half];
                    let (fy, fx) = TEXTURES[color];
                    let phase = std::f64::consts::TAU * (fy * y as f64 + fx * x as f64) / period;
                    let texture = TEXTURE_AMPLITUDE * phase.cos();
                    for c in PALETTE[color] {
                        let v = c + texture + rng.random_range(-COLOR_NOISE..COLOR_NOISE);
                        data.push(v.clamp(0.0, 1.0));
                    }
                }
            }
            Ok(Sample {
                image: Image::new(size, size, 3, data)?,
                tokens: colors,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patch_grid::{patchify, pixel_normalize};
    use crate::similarity::cosine_matrix;

    #[test]
    fn noise_images_are_valid_and_reproducible() {
        let a = smooth_noise_dataset(2, 32, 1).unwrap();
        let b = smooth_noise_dataset(2, 32, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        assert!(a[0].data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn neighbouring_patches_are_more_similar_than_distant_ones() {
        let mut near = 0.0;
        let mut far = 0.0;
        for image in smooth_noise_dataset(20, 224, 7).unwrap() {
            let sim = cosine_matrix(&pixel_normalize(&patchify(&image, 16).unwrap())).unwrap();
            near += sim.get(0, 1);
            far += sim.get(0, 195);
        }
        assert!(near > far, "near {near} far {far}");
    }

    #[test]
    fn captions_name_the_quadrant_colors() {
        let samples = color_caption_dataset(3, 0).unwrap();
        for s in &samples {
            assert_eq!(s.tokens.len(), 4);
            let top_left = [s.image.get(0, 0, 0), s.image.get(0, 0, 1), s.image.get(0, 0, 2)];
            let expected = PALETTE[s.tokens[0]];
            for (v, e) in top_left.iter().zip(expected) {
                assert!((v - e).abs() <= TEXTURE_AMPLITUDE + COLOR_NOISE + 1e-12);
            }
        }
    }
}
