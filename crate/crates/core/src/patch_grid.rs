//! Images and their decomposition into square patches.
//!
//! Pixel data is stored interleaved (`HWC`): the value of channel `c` at
//! `(y, x)` lives at `(y * width + x) * channels + c`. A patch is flattened in
//! the same order restricted to its block: row-major over the block's pixels,
//! channel-minor. That order is fixed; masks and renders depend on it.

use crate::error::{Error, Result};

/// Standard deviations below this are treated as a constant patch.
pub const CONSTANT_PATCH_STD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::DimensionMismatch(format!(
                "image dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::SizeMismatch {
                expected: height * width * channels,
                actual: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid("data", format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// An image with every intensity set to `value`.
    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.index(y, x, c)]
    }

    /// Sets one intensity, clamped to `[0, 1]`.
    pub fn set(&mut self, y: usize, x: usize, c: usize, value: f64) {
        let i = self.index(y, x, c);
        self.data[i] = value.clamp(0.0, 1.0);
    }
}

/// An image cut into `rows × cols` patches of `patch_dim` values each.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    rows: usize,
    cols: usize,
    patch_size: usize,
    channels: usize,
    patch_dim: usize,
    values: Vec<f64>,
    normalized: bool,
}

impl PatchGrid {
    /// Builds a grid directly from patch vectors; used for feature-space
    /// experiments and tests. `patch_size` is recorded as 1.
    pub fn from_patches(rows: usize, cols: usize, patches: Vec<Vec<f64>>) -> Result<Self> {
        if patches.len() != rows * cols {
            return Err(Error::SizeMismatch {
                expected: rows * cols,
                actual: patches.len(),
            });
        }
        let patch_dim = patches.first().map(Vec::len).ok_or(Error::Empty)?;
        if patch_dim == 0 {
            return Err(Error::Empty);
        }
        if let Some(p) = patches.iter().find(|p| p.len() != patch_dim) {
            return Err(Error::SizeMismatch {
                expected: patch_dim,
                actual: p.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            patch_size: 1,
            channels: patch_dim,
            patch_dim,
            values: patches.concat(),
            normalized: false,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of patches (`L`).
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_dim
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn patch(&self, index: usize) -> &[f64] {
        &self.values[index * self.patch_dim..(index + 1) * self.patch_dim]
    }

    pub fn patches(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.patch_dim)
    }

    /// Inverse of [`patchify`]. Fails on normalized grids, whose values are
    /// no longer intensities.
    pub fn unpatchify(&self) -> Result<Image> {
        if self.normalized {
            return Err(Error::invalid(
                "grid",
                "cannot reassemble an image from normalized patches",
            ));
        }
        let p = self.patch_size;
        let (height, width, channels) = (self.rows * p, self.cols * p, self.channels);
        let mut data = vec![0.0; height * width * channels];
        for (index, patch) in self.patches().enumerate() {
            let (pr, pc) = (index / self.cols, index % self.cols);
            for dy in 0..p {
                let y = pr * p + dy;
                let src = &patch[dy * p * channels..(dy + 1) * p * channels];
                let start = (y * width + pc * p) * channels;
                data[start..start + p * channels].copy_from_slice(src);
            }
        }
        Image::new(height, width, channels, data)
    }
}

/// Cuts `image` into non-overlapping `patch_size × patch_size` blocks.
pub fn patchify(image: &Image, patch_size: usize) -> Result<PatchGrid> {
    if patch_size == 0 || !image.height.is_multiple_of(patch_size) || !image.width.is_multiple_of(patch_size) {
        return Err(Error::DimensionMismatch(format!(
            "patch size {patch_size} does not divide image {}x{}",
            image.height, image.width
        )));
    }
    let (rows, cols, channels) = (image.height / patch_size, image.width / patch_size, image.channels);
    let row_len = patch_size * channels;
    let patch_dim = patch_size * row_len;
    let mut values = Vec::with_capacity(rows * cols * patch_dim);
    for pr in 0..rows {
        for pc in 0..cols {
            for dy in 0..patch_size {
                let start = image.index(pr * patch_size + dy, pc * patch_size, 0);
                values.extend_from_slice(&image.data[start..start + row_len]);
            }
        }
    }
    Ok(PatchGrid {
        rows,
        cols,
        patch_size,
        channels,
        patch_dim,
        values,
        normalized: false,
    })
}

/// Standardizes one vector in place to zero mean and unit population
/// standard deviation. Constant vectors become all zeros.
pub fn standardize(values: &mut [f64]) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < CONSTANT_PATCH_STD {
        values.fill(0.0);
    } else {
        values.iter_mut().for_each(|v| *v = (*v - mean) / std);
    }
}

/// Per-patch standardization over the whole flattened patch.
pub fn pixel_normalize(grid: &PatchGrid) -> PatchGrid {
    let mut out = grid.clone();
    out.values.chunks_exact_mut(out.patch_dim).for_each(standardize);
    out.normalized = true;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop, prop_assert, prop_assert_eq, proptest};

    fn ramp(height: usize, width: usize, channels: usize) -> Image {
        let n = height * width * channels;
        let data = (0..n).map(|i| i as f64 / n as f64).collect();
        Image::new(height, width, channels, data).unwrap()
    }

    #[test]
    fn vit_base_geometry() {
        let grid = patchify(&Image::filled(224, 224, 3, 0.3).unwrap(), 16).unwrap();
        assert_eq!((grid.rows(), grid.cols()), (14, 14));
        assert_eq!(grid.len(), 196);
        assert_eq!(grid.patch_dim(), 768);
        assert!(!grid.is_normalized());
    }

    #[test]
    fn single_patch_is_flattened_image() {
        let image = ramp(16, 16, 3);
        let grid = patchify(&image, 16).unwrap();
        assert_eq!(grid.len(), 1);
        assert_eq!(grid.patch(0), image.data());
    }

    #[test]
    fn block_constant_halves() {
        let mut data = vec![0.2; 16 * 16];
        data.extend(vec![0.8; 16 * 16]);
        let image = Image::new(32, 16, 1, data).unwrap();
        let grid = patchify(&image, 16).unwrap();
        assert_eq!((grid.rows(), grid.cols()), (2, 1));
        assert!(grid.patch(0).iter().all(|&v| v == 0.2));
        assert!(grid.patch(1).iter().all(|&v| v == 0.8));
    }

    #[test]
    fn patch_contents_match_indexing_oracle() {
        let image = ramp(12, 8, 3);
        let p = 4;
        let grid = patchify(&image, p).unwrap();
        for index in 0..grid.len() {
            let (pr, pc) = (index / grid.cols(), index % grid.cols());
            let mut expected = Vec::new();
            for dy in 0..p {
                for dx in 0..p {
                    for c in 0..3 {
                        expected.push(image.get(pr * p + dy, pc * p + dx, c));
                    }
                }
            }
            assert_eq!(grid.patch(index), expected.as_slice());
        }
    }

    #[test]
    fn non_dividing_patch_size_is_rejected() {
        let image = Image::filled(20, 16, 3, 0.0).unwrap();
        assert!(matches!(patchify(&image, 16), Err(Error::DimensionMismatch(_))));
        assert!(matches!(patchify(&image, 0), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn image_rejects_out_of_range_intensity() {
        assert!(Image::new(1, 1, 1, vec![1.5]).is_err());
        assert!(Image::new(1, 2, 1, vec![0.5]).is_err());
    }

    #[test]
    fn constant_patch_normalizes_to_zero() {
        let grid = PatchGrid::from_patches(1, 1, vec![vec![0.5; 12]]).unwrap();
        let norm = pixel_normalize(&grid);
        assert!(norm.is_normalized());
        assert!(norm.patch(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_computed_standardization() {
        let grid = PatchGrid::from_patches(1, 1, vec![vec![0.0, 2.0, 4.0]]).unwrap();
        let norm = pixel_normalize(&grid);
        let expected = [-1.2247, 0.0, 1.2247];
        for (v, e) in norm.patch(0).iter().zip(expected) {
            assert!((v - e).abs() < 1e-4, "{v} vs {e}");
        }
    }

    #[test]
    fn normalized_grid_cannot_be_reassembled() {
        let grid = patchify(&ramp(4, 4, 1), 2).unwrap();
        assert!(pixel_normalize(&grid).unpatchify().is_err());
    }

    proptest! {
        #[test]
        fn unpatchify_inverts_patchify(
            rows in 1usize..4, cols in 1usize..4, p in 1usize..5, channels in 1usize..4,
            seed in any::<u64>(),
        ) {
            use rand::Rng;
            let mut rng = crate::rng::seeded(seed);
            let (h, w) = (rows * p, cols * p);
            let data = (0..h * w * channels).map(|_| rng.random::<f64>()).collect();
            let image = Image::new(h, w, channels, data).unwrap();
            let grid = patchify(&image, p).unwrap();
            prop_assert_eq!(grid.unpatchify().unwrap(), image);
        }

        #[test]
        fn normalization_is_idempotent(values in prop::collection::vec(0.0f64..1.0, 8..64)) {
            let n = values.len();
            let grid = PatchGrid::from_patches(1, 1, vec![values]).unwrap();
            let once = pixel_normalize(&grid);
            let twice = pixel_normalize(&once);
            let std = {
                let p = once.patch(0);
                (p.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt()
            };
            if std > 0.0 {
                for (a, b) in once.patch(0).iter().zip(twice.patch(0)) {
                    prop_assert!((a - b).abs() < 1e-6);
                }
            }
        }

        #[test]
        fn normalized_patch_has_zero_mean_unit_std(values in prop::collection::vec(0.0f64..1.0, 2..64)) {
            let n = values.len() as f64;
            let grid = PatchGrid::from_patches(1, 1, vec![values]).unwrap();
            let p = pixel_normalize(&grid).patch(0).to_vec();
            let mean = p.iter().sum::<f64>() / n;
            let std = (p.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() < 1e-6);
            prop_assert!((std - 1.0).abs() < 1e-6 || p.iter().all(|&v| v == 0.0));
        }
    }
}
