//! Pairwise patch similarities.
//!
//! Similarity here is always "higher = closer": an epsilon-guarded cosine in
//! `[-1, 1]`, optionally blended between raw-pixel and embedding features.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::patch_grid::PatchGrid;
use crate::rng;

/// Guard added to the cosine denominator so zero vectors give 0, not NaN.
pub const COSINE_EPS: f64 = 1e-8;

/// Default width of the toy patch embedding.
pub const DEFAULT_EMBED_DIM: usize = 64;

/// Anything that exposes one vector per patch.
pub trait PatchVectors {
    fn count(&self) -> usize;
    fn dim(&self) -> usize;
    fn vector(&self, index: usize) -> &[f64];

    /// Checks that the vectors are ready for a similarity computation.
    fn check_ready(&self) -> Result<()> {
        Ok(())
    }
}

impl PatchVectors for PatchGrid {
    fn count(&self) -> usize {
        self.len()
    }

    fn dim(&self) -> usize {
        self.patch_dim()
    }

    fn vector(&self, index: usize) -> &[f64] {
        self.patch(index)
    }

    fn check_ready(&self) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(Error::NotNormalized)
        }
    }
}

/// Per-patch feature vectors standing in for patch-embedding outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    rows: usize,
    cols: usize,
    dim: usize,
    values: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(rows: usize, cols: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols * dim {
            return Err(Error::SizeMismatch {
                expected: rows * cols * dim,
                actual: values.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            dim,
            values,
        })
    }

    /// Single-row grid, convenient for hand-built vectors.
    pub fn from_vectors(vectors: &[Vec<f64>]) -> Result<Self> {
        let dim = vectors.first().map(Vec::len).ok_or(Error::Empty)?;
        if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::SizeMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
        Self::new(1, vectors.len(), dim, vectors.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn features(&self, index: usize) -> &[f64] {
        &self.values[index * self.dim..(index + 1) * self.dim]
    }
}

impl PatchVectors for FeatureGrid {
    fn count(&self) -> usize {
        self.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn vector(&self, index: usize) -> &[f64] {
        self.features(index)
    }
}

/// Symmetric `L × L` similarity matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    size: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    /// Wraps raw row-major values. Symmetry is the caller's responsibility.
    pub fn from_values(size: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != size * size {
            return Err(Error::SizeMismatch {
                expected: size * size,
                actual: values.len(),
            });
        }
        Ok(Self { size, values })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.size..(i + 1) * self.size]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Tab-separated dump, one row per line, for debugging.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.size {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v:.6}")).collect();
            let _ = writeln!(out, "{}", row.join("\t"));
        }
        out
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `⟨xᵢ,xⱼ⟩ / (‖xᵢ‖·‖xⱼ‖ + ε)` for every pair of patch vectors.
pub fn cosine_matrix<G: PatchVectors + ?Sized>(grid: &G) -> Result<SimilarityMatrix> {
    let n = grid.count();
    if n == 0 || grid.dim() == 0 {
        return Err(Error::Empty);
    }
    grid.check_ready()?;
    let norms: Vec<f64> = (0..n)
        .map(|i| {
            let v = grid.vector(i);
            dot(v, v).sqrt()
        })
        .collect();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        let vi = grid.vector(i);
        for j in i..n {
            let s = dot(vi, grid.vector(j)) / (norms[i] * norms[j] + COSINE_EPS);
            values[i * n + j] = s;
            values[j * n + i] = s;
        }
    }
    Ok(SimilarityMatrix { size: n, values })
}

/// `alpha · rgb + (1 − alpha) · emb`, entry-wise.
pub fn blend(rgb: &SimilarityMatrix, emb: &SimilarityMatrix, alpha: f64) -> Result<SimilarityMatrix> {
    if rgb.size != emb.size {
        return Err(Error::SizeMismatch {
            expected: rgb.size,
            actual: emb.size,
        });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid("alpha", format!("{alpha} outside [0, 1]")));
    }
    let values = rgb
        .values
        .iter()
        .zip(&emb.values)
        .map(|(r, e)| alpha * r + (1.0 - alpha) * e)
        .collect();
    Ok(SimilarityMatrix { size: rgb.size, values })
}

/// 2-D sinusoidal position code for grid cell `(row, col)`.
///
/// The first half of the dimensions encodes the row, the second half the
/// column; within each half, even slots are sines and odd slots cosines at
/// geometrically spaced frequencies.
pub fn positional_encoding(row: usize, col: usize, dim: usize) -> Vec<f64> {
    let half = dim.div_ceil(2);
    (0..dim)
        .map(|i| {
            let (coord, local, width) = if i < half {
                (row, i, half)
            } else {
                (col, i - half, dim - half)
            };
            let freq = 1.0 / 10_000f64.powf((local / 2 * 2) as f64 / width.max(1) as f64);
            let angle = coord as f64 * freq;
            if local % 2 == 0 {
                angle.sin()
            } else {
                angle.cos()
            }
        })
        .collect()
}

/// Frozen random linear projection of each patch to `dim` features, plus a
/// sinusoidal code for the patch's grid position.
pub fn toy_patch_embedding(grid: &PatchGrid, projection_seed: u64, dim: usize) -> Result<FeatureGrid> {
    if grid.is_empty() {
        return Err(Error::Empty);
    }
    if dim == 0 {
        return Err(Error::invalid("dim", "embedding width must be positive"));
    }
    let input = grid.patch_dim();
    let scale = (3.0 / input as f64).sqrt();
    let mut rng = rng::seeded(projection_seed);
    let projection: Vec<f64> = (0..dim * input).map(|_| rng.random_range(-scale..scale)).collect();

    let mut values = Vec::with_capacity(grid.len() * dim);
    for (index, patch) in grid.patches().enumerate() {
        let pe = positional_encoding(index / grid.cols(), index % grid.cols(), dim);
        for (row, pos) in projection.chunks_exact(input).zip(pe) {
            values.push(dot(row, patch) + pos);
        }
    }
    FeatureGrid::new(grid.rows(), grid.cols(), dim, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patch_grid::pixel_normalize;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};

    fn features(vectors: &[&[f64]]) -> FeatureGrid {
        FeatureGrid::from_vectors(&vectors.iter().map(|v| v.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn identical_patches_have_unit_similarity() {
        let m = cosine_matrix(&features(&[&[0.3, -2.0, 1.0], &[0.3, -2.0, 1.0]])).unwrap();
        assert!((m.get(0, 1) - 1.0).abs() < 1e-6);
        assert!((m.get(0, 0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn hand_computed_cosines() {
        let m = cosine_matrix(&features(&[
            &[1.0, 0.0],
            &[0.0, 1.0],
            &[1.0, 1.0],
            &[1.0, -1.0],
            &[-1.0, -1.0],
        ]))
        .unwrap();
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(2, 3), 0.0);
        assert!((m.get(2, 4) + 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_vector_is_similar_to_nothing() {
        let m = cosine_matrix(&features(&[&[0.0, 0.0], &[1.0, 2.0]])).unwrap();
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert!((m.get(1, 1) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn unnormalized_patch_grid_is_rejected() {
        let grid = PatchGrid::from_patches(1, 2, vec![vec![0.1, 0.2], vec![0.3, 0.5]]).unwrap();
        assert!(matches!(cosine_matrix(&grid), Err(Error::NotNormalized)));
        assert!(cosine_matrix(&pixel_normalize(&grid)).is_ok());
    }

    #[test]
    fn blend_endpoints_and_midpoint() {
        let rgb = SimilarityMatrix::from_values(1, vec![0.8]).unwrap();
        let emb = SimilarityMatrix::from_values(1, vec![0.4]).unwrap();
        assert_eq!(blend(&rgb, &emb, 1.0).unwrap(), rgb);
        assert_eq!(blend(&rgb, &emb, 0.0).unwrap(), emb);
        assert!((blend(&rgb, &emb, 0.5).unwrap().get(0, 0) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn blend_rejects_mismatched_sizes() {
        let a = SimilarityMatrix::from_values(1, vec![1.0]).unwrap();
        let b = SimilarityMatrix::from_values(2, vec![1.0; 4]).unwrap();
        assert!(matches!(blend(&a, &b, 0.5), Err(Error::SizeMismatch { .. })));
        assert!(blend(&a, &a, 1.5).is_err());
    }

    fn random_grid(seed: u64, rows: usize, cols: usize, dim: usize) -> PatchGrid {
        let mut rng = rng::seeded(seed);
        let patches = (0..rows * cols)
            .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
            .collect();
        PatchGrid::from_patches(rows, cols, patches).unwrap()
    }

    #[test]
    fn embedding_is_deterministic() {
        let grid = random_grid(1, 3, 3, 12);
        assert_eq!(
            toy_patch_embedding(&grid, 9, 16).unwrap(),
            toy_patch_embedding(&grid, 9, 16).unwrap()
        );
        assert_ne!(
            toy_patch_embedding(&grid, 9, 16).unwrap(),
            toy_patch_embedding(&grid, 10, 16).unwrap()
        );
    }

    #[test]
    fn zero_grid_embeds_to_positional_codes() {
        let grid = PatchGrid::from_patches(2, 3, vec![vec![0.0; 5]; 6]).unwrap();
        let emb = toy_patch_embedding(&grid, 4, 10).unwrap();
        for index in 0..6 {
            assert_eq!(
                emb.features(index),
                positional_encoding(index / 3, index % 3, 10).as_slice()
            );
        }
    }

    #[test]
    fn embedding_changes_are_local() {
        let grid = random_grid(2, 3, 4, 8);
        let mut patches: Vec<Vec<f64>> = grid.patches().map(<[f64]>::to_vec).collect();
        patches[5][3] += 0.25;
        let changed = PatchGrid::from_patches(3, 4, patches).unwrap();
        let (a, b) = (
            toy_patch_embedding(&grid, 3, 16).unwrap(),
            toy_patch_embedding(&changed, 3, 16).unwrap(),
        );
        for index in 0..12 {
            assert_eq!(a.features(index) == b.features(index), index != 5, "patch {index}");
        }
    }

    #[test]
    fn positional_codes_differ_across_cells() {
        assert_ne!(positional_encoding(0, 1, 8), positional_encoding(1, 0, 8));
        assert_eq!(positional_encoding(0, 0, 4), vec![0.0, 1.0, 0.0, 1.0]);
    }

    fn naive_cosine(a: &[f64], b: &[f64]) -> f64 {
        let mut d = 0.0;
        let mut na = 0.0;
        let mut nb = 0.0;
        for k in 0..a.len() {
            d += a[k] * b[k];
            na += a[k] * a[k];
            nb += b[k] * b[k];
        }
        d / (na.sqrt() * nb.sqrt() + COSINE_EPS)
    }

    proptest! {
        #[test]
        fn matches_double_loop_oracle(seed in any::<u64>(), l in 4usize..=16, dim in 1usize..24) {
            let grid = pixel_normalize(&random_grid(seed, 1, l, dim));
            let m = cosine_matrix(&grid).unwrap();
            for i in 0..l {
                for j in 0..l {
                    let expected = naive_cosine(grid.patch(i), grid.patch(j));
                    prop_assert!((m.get(i, j) - expected).abs() < 1e-9);
                    prop_assert_eq!(m.get(i, j), m.get(j, i));
                    prop_assert!(m.get(i, j).abs() <= 1.0 + 1e-6);
                }
            }
        }

        #[test]
        fn invariant_to_uniform_scaling(seed in any::<u64>(), scale in 0.1f64..10.0) {
            let grid = random_grid(seed, 2, 4, 6);
            let scaled = PatchGrid::from_patches(
                2, 4, grid.patches().map(|p| p.iter().map(|v| v * scale).collect()).collect(),
            ).unwrap();
            let a = cosine_matrix(&FeatureGrid::from_vectors(&grid.patches().map(<[f64]>::to_vec).collect::<Vec<_>>()).unwrap()).unwrap();
            let b = cosine_matrix(&FeatureGrid::from_vectors(&scaled.patches().map(<[f64]>::to_vec).collect::<Vec<_>>()).unwrap()).unwrap();
            // Exact up to the epsilon, whose relative weight grows as norms shrink.
            let norms: Vec<f64> = grid.patches().map(|p| dot(p, p).sqrt()).collect();
            for i in 0..8 {
                for j in 0..8 {
                    let product = norms[i] * norms[j] * scale.min(1.0).powi(2);
                    let bound = 1e-12 + 2.0 * COSINE_EPS / product;
                    prop_assert!((a.get(i, j) - b.get(i, j)).abs() <= bound);
                }
            }
        }

        #[test]
        fn blend_moves_linearly_toward_rgb(r in -1.0f64..1.0, e in -1.0f64..1.0, a1 in 0.0f64..1.0, a2 in 0.0f64..1.0) {
            let rgb = SimilarityMatrix::from_values(1, vec![r]).unwrap();
            let emb = SimilarityMatrix::from_values(1, vec![e]).unwrap();
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            let v_lo = blend(&rgb, &emb, lo).unwrap().get(0, 0);
            let v_hi = blend(&rgb, &emb, hi).unwrap().get(0, 0);
            prop_assert!((v_hi - r).abs() <= (v_lo - r).abs() + 1e-12);
        }
    }
}
