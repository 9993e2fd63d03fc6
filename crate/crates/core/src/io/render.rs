use crate::error::{Error, Result};
use crate::masker::Mask;
use crate::patch_grid::Image;

/// Fill value for masked patches.
pub const MASK_GRAY: f64 = 0.5;
pub const ANCHOR_COLOR: [f64; 3] = [1.0, 0.0, 0.0];

/// Grays out masked patches and, for RGB images, outlines anchors in red.
pub fn render_mask(image: &Image, mask: &Mask, patch_size: usize) -> Result<Image> {
    if patch_size == 0 || !image.height().is_multiple_of(patch_size) || !image.width().is_multiple_of(patch_size) {
        return Err(Error::DimensionMismatch(format!(
            "patch size {patch_size} does not divide image {}x{}",
            image.height(),
            image.width()
        )));
    }
    let cols = image.width() / patch_size;
    let patches = (image.height() / patch_size) * cols;
    if mask.len() != patches {
        return Err(Error::SizeMismatch {
            expected: patches,
            actual: mask.len(),
        });
    }
    let mut out = image.clone();
    let channels = image.channels();
    for index in (0..patches).filter(|&i| mask.is_masked(i)) {
        let (y0, x0) = ((index / cols) * patch_size, (index % cols) * patch_size);
        for y in y0..y0 + patch_size {
            for x in x0..x0 + patch_size {
                for c in 0..channels {
                    out.set(y, x, c, MASK_GRAY);
                }
            }
        }
    }
    if channels == 3 {
        for &index in mask.anchors() {
            let (y0, x0) = ((index / cols) * patch_size, (index % cols) * patch_size);
            let last = patch_size - 1;
            for y in y0..y0 + patch_size {
                for x in x0..x0 + patch_size {
                    let edge = y == y0 || y == y0 + last || x == x0 || x == x0 + last;
                    if edge {
                        for (c, v) in ANCHOR_COLOR.iter().enumerate() {
                            out.set(y, x, c, *v);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize, c: usize) -> Image {
        let n = h * w * c;
        Image::new(h, w, c, (0..n).map(|i| i as f64 / n as f64).collect()).unwrap()
    }

    #[test]
    fn empty_mask_is_identity() {
        let image = ramp(8, 8, 3);
        assert_eq!(render_mask(&image, &Mask::unmasked(4), 4).unwrap(), image);
    }

    #[test]
    fn full_mask_is_uniform_gray() {
        let image = ramp(8, 8, 1);
        let out = render_mask(&image, &Mask::from_indices(4, 0..4), 4).unwrap();
        assert!(out.data().iter().all(|&v| v == MASK_GRAY));
    }

    #[test]
    fn checkerboard_pixel_oracle() {
        let image = ramp(8, 8, 3);
        let mask = Mask::from_indices(4, [0, 3]);
        let out = render_mask(&image, &mask, 4).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                let patch = (y / 4) * 2 + x / 4;
                for c in 0..3 {
                    let expected = if patch == 0 || patch == 3 {
                        MASK_GRAY
                    } else {
                        image.get(y, x, c)
                    };
                    assert_eq!(out.get(y, x, c), expected, "({y},{x},{c})");
                }
            }
        }
    }

    #[test]
    fn anchors_get_red_outline() {
        let image = ramp(8, 8, 3);
        let mask = Mask::new(vec![true, true, false, false], vec![1]).unwrap();
        let out = render_mask(&image, &mask, 4).unwrap();
        assert_eq!([out.get(0, 4, 0), out.get(0, 4, 1), out.get(0, 4, 2)], ANCHOR_COLOR);
        assert_eq!(out.get(1, 5, 0), MASK_GRAY);
        assert_eq!(out.get(4, 4, 0), image.get(4, 4, 0));
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let image = ramp(8, 8, 3);
        assert!(matches!(
            render_mask(&image, &Mask::unmasked(3), 4),
            Err(Error::SizeMismatch { .. })
        ));
    }
}
