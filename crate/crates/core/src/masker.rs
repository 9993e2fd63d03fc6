//! Per-image patch masks.
//!
//! Cluster masking samples a few anchor patches and masks every patch whose
//! similarity to some anchor is at least the threshold `r`, together with the
//! anchors themselves. The K-Means variant clusters patch vectors with
//! Lloyd's algorithm and masks whole clusters; random masking is the
//! uniform-dropout baseline.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patch_grid::PatchGrid;
use crate::similarity::{self, blend, cosine_matrix, toy_patch_embedding, PatchVectors, SimilarityMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    ClusterRgb,
    ClusterEmbedding,
    Kmeans,
    Random,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::ClusterRgb => "cluster-rgb",
            Strategy::ClusterEmbedding => "cluster-embedding",
            Strategy::Kmeans => "kmeans",
            Strategy::Random => "random",
        }
    }

    pub fn is_cluster(self) -> bool {
        matches!(self, Strategy::ClusterRgb | Strategy::ClusterEmbedding)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cluster-rgb" => Ok(Strategy::ClusterRgb),
            "cluster-embedding" => Ok(Strategy::ClusterEmbedding),
            "kmeans" => Ok(Strategy::Kmeans),
            "random" => Ok(Strategy::Random),
            other => Err(Error::invalid("strategy", format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskerConfig {
    pub strategy: Strategy,
    /// Fraction of patches sampled as anchors.
    pub anchor_ratio: f64,
    /// Similarity threshold; a patch joins an anchor's cluster when `sim >= threshold_r`.
    pub threshold_r: f64,
    pub kmeans_k: usize,
    pub kmeans_max_iters: usize,
    pub kmeans_mask_fraction: f64,
    pub random_mask_ratio: f64,
    pub seed: u64,
}

impl Default for MaskerConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::ClusterRgb,
            anchor_ratio: 0.03,
            threshold_r: 0.5,
            kmeans_k: 12,
            kmeans_max_iters: 10,
            kmeans_mask_fraction: 0.5,
            random_mask_ratio: 0.5,
            seed: 0,
        }
    }
}

fn open_unit(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("{value} outside (0, 1)")))
    }
}

impl MaskerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.anchor_ratio > 0.0 && self.anchor_ratio <= 0.5) {
            return Err(Error::invalid(
                "anchor_ratio",
                format!("{} outside (0, 0.5]", self.anchor_ratio),
            ));
        }
        if !self.threshold_r.is_finite() {
            return Err(Error::invalid("threshold_r", "must be finite"));
        }
        if self.kmeans_k < 2 {
            return Err(Error::invalid("kmeans_k", "need at least 2 clusters"));
        }
        open_unit("kmeans_mask_fraction", self.kmeans_mask_fraction)?;
        open_unit("random_mask_ratio", self.random_mask_ratio)
    }

    /// Similarity matrix the cluster strategies threshold. `alpha` weights the
    /// raw-pixel similarity against the embedding similarity and is ignored
    /// by [`Strategy::ClusterRgb`].
    pub fn similarity(&self, normalized: &PatchGrid, alpha: f64) -> Result<SimilarityMatrix> {
        let rgb = cosine_matrix(normalized)?;
        match self.strategy {
            Strategy::ClusterEmbedding => {
                let emb = toy_patch_embedding(normalized, self.seed, similarity::DEFAULT_EMBED_DIM)?;
                blend(&rgb, &cosine_matrix(&emb)?, alpha)
            }
            _ => Ok(rgb),
        }
    }

    /// Masks one pixel-normalized patch grid with the configured strategy.
    pub fn mask_grid<R: Rng + ?Sized>(&self, normalized: &PatchGrid, alpha: f64, rng: &mut R) -> Result<Mask> {
        match self.strategy {
            Strategy::ClusterRgb | Strategy::ClusterEmbedding => {
                let sim = self.similarity(normalized, alpha)?;
                cluster_mask(&sim, self.anchor_ratio, self.threshold_r, rng)
            }
            Strategy::Kmeans => Ok(kmeans_mask(
                normalized,
                self.kmeans_k,
                self.kmeans_max_iters,
                self.kmeans_mask_fraction,
                rng,
            )?
            .mask),
            Strategy::Random => random_mask(normalized.len(), self.random_mask_ratio, rng),
        }
    }
}

/// Boolean mask over an image's patches (`true` = hidden from the encoder).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    masked: Vec<bool>,
    anchors: Vec<usize>,
}

impl Mask {
    pub fn new(masked: Vec<bool>, anchors: Vec<usize>) -> Result<Self> {
        if let Some(&a) = anchors.iter().find(|&&a| a >= masked.len() || !masked[a]) {
            return Err(Error::invalid("anchors", format!("anchor {a} is not a masked patch")));
        }
        Ok(Self { masked, anchors })
    }

    pub fn unmasked(len: usize) -> Self {
        Self {
            masked: vec![false; len],
            anchors: Vec::new(),
        }
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut masked = vec![false; len];
        for i in indices {
            masked[i] = true;
        }
        Self {
            masked,
            anchors: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.masked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masked.is_empty()
    }

    pub fn masked(&self) -> &[bool] {
        &self.masked
    }

    pub fn is_masked(&self, index: usize) -> bool {
        self.masked[index]
    }

    pub fn anchors(&self) -> &[usize] {
        &self.anchors
    }

    pub fn masked_count(&self) -> usize {
        self.masked.iter().filter(|&&m| m).count()
    }

    /// Unmasked patch indices in ascending order.
    pub fn visible(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.masked[i]).collect()
    }

    /// One `'0'`/`'1'` character per patch.
    pub fn to_bits(&self) -> String {
        self.masked.iter().map(|&m| if m { '1' } else { '0' }).collect()
    }

    pub fn from_bits(line: &str) -> Result<Self> {
        let masked = line
            .trim_end()
            .chars()
            .enumerate()
            .map(|(offset, c)| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse {
                    offset,
                    message: format!("unexpected mask character {other:?}"),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        if masked.is_empty() {
            return Err(Error::Empty);
        }
        Ok(Self {
            masked,
            anchors: Vec::new(),
        })
    }
}

/// Fraction of patches that are masked.
pub fn mask_ratio(mask: &Mask) -> f64 {
    mask.masked_count() as f64 / mask.len() as f64
}

/// `max(1, round(anchor_ratio · len))`, capped at `len`.
pub fn anchor_count(len: usize, anchor_ratio: f64) -> usize {
    ((anchor_ratio * len as f64).round() as usize).clamp(1, len)
}

/// Uniformly samples anchor indices without replacement, returned sorted.
pub fn sample_anchors<R: Rng + ?Sized>(len: usize, anchor_ratio: f64, rng: &mut R) -> Result<Vec<usize>> {
    if len == 0 {
        return Err(Error::Empty);
    }
    open_unit("anchor_ratio", anchor_ratio)?;
    let mut anchors = index::sample(rng, len, anchor_count(len, anchor_ratio)).into_vec();
    anchors.sort_unstable();
    Ok(anchors)
}

/// For each patch, the best similarity to any anchor; anchors score `+∞`.
///
/// A patch is masked at threshold `r` exactly when its score is `>= r`, so
/// one score vector answers the membership question for every threshold.
pub fn anchor_scores(sim: &SimilarityMatrix, anchors: &[usize]) -> Vec<f64> {
    let mut scores = vec![f64::NEG_INFINITY; sim.size()];
    for &a in anchors {
        for (score, &s) in scores.iter_mut().zip(sim.row(a)) {
            if s > *score {
                *score = s;
            }
        }
    }
    for &a in anchors {
        scores[a] = f64::INFINITY;
    }
    scores
}

/// Cluster mask for a fixed anchor set.
pub fn cluster_mask_with_anchors(sim: &SimilarityMatrix, anchors: &[usize], threshold_r: f64) -> Mask {
    let masked = anchor_scores(sim, anchors)
        .into_iter()
        .map(|s| s >= threshold_r)
        .collect();
    Mask {
        masked,
        anchors: anchors.to_vec(),
    }
}

/// Samples anchors, then masks each anchor's cluster `{j : sim[a][j] >= r}`.
pub fn cluster_mask<R: Rng + ?Sized>(
    sim: &SimilarityMatrix,
    anchor_ratio: f64,
    threshold_r: f64,
    rng: &mut R,
) -> Result<Mask> {
    let anchors = sample_anchors(sim.size(), anchor_ratio, rng)?;
    Ok(cluster_mask_with_anchors(sim, &anchors, threshold_r))
}

/// Masks exactly `round(ratio · len)` uniformly chosen patches.
pub fn random_mask<R: Rng + ?Sized>(len: usize, ratio: f64, rng: &mut R) -> Result<Mask> {
    if len == 0 {
        return Err(Error::Empty);
    }
    open_unit("ratio", ratio)?;
    let count = ((ratio * len as f64).round() as usize).min(len);
    Ok(Mask::from_indices(len, index::sample(rng, len, count)))
}

/// Result of Lloyd's algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    /// Effective cluster count (may be below the requested `k`).
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansMasking {
    pub mask: Mask,
    pub fit: KMeansFit,
    /// Cluster ids that were masked, ascending.
    pub masked_clusters: Vec<usize>,
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = squared_distance(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign<G: PatchVectors + ?Sized>(data: &G, centroids: &[Vec<f64>]) -> Vec<usize> {
    (0..data.count())
        .map(|i| nearest(data.vector(i), centroids).0)
        .collect()
}

/// Indices of the first occurrence of each distinct vector.
fn distinct_representatives<G: PatchVectors + ?Sized>(data: &G) -> Vec<usize> {
    let mut seen = HashSet::new();
    (0..data.count())
        .filter(|&i| seen.insert(data.vector(i).iter().map(|v| v.to_bits()).collect::<Vec<_>>()))
        .collect()
}

/// Lloyd's algorithm under squared Euclidean distance.
///
/// Centroids start at `k` distinct patch vectors sampled uniformly. Each
/// round recomputes centroids as cluster means and reassigns; it stops when
/// assignments stop changing or after `max_iters` rounds. A cluster that
/// empties is re-seeded at the point farthest from its current centroid.
/// The returned assignment is always nearest-centroid for the returned
/// centroids. If fewer than `k` distinct vectors exist, `k` is reduced.
pub fn kmeans<G: PatchVectors + ?Sized, R: Rng + ?Sized>(
    data: &G,
    k: usize,
    max_iters: usize,
    rng: &mut R,
) -> Result<KMeansFit> {
    let n = data.count();
    if k < 2 {
        return Err(Error::invalid("k", "need at least 2 clusters"));
    }
    if n < k {
        return Err(Error::Degenerate(format!("{n} patches cannot form {k} clusters")));
    }
    let distinct = distinct_representatives(data);
    let k = if distinct.len() < k {
        warn!("only {} distinct patches; reducing k from {k}", distinct.len());
        distinct.len()
    } else {
        k
    };
    let mut centroids: Vec<Vec<f64>> = index::sample(rng, distinct.len(), k)
        .into_iter()
        .map(|i| data.vector(distinct[i]).to_vec())
        .collect();

    let dim = data.dim();
    let mut assignments = assign(data, &centroids);
    let mut iterations = 0;
    for round in 1..=max_iters {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignments.iter().enumerate() {
            counts[c] += 1;
            sums[c].iter_mut().zip(data.vector(i)).for_each(|(s, v)| *s += v);
        }
        let mut reseeded = HashSet::new();
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                centroids[c] = sums[c].iter().map(|s| s * inv).collect();
                continue;
            }
            let farthest = (0..n)
                .filter(|i| !reseeded.contains(i))
                .map(|i| (i, squared_distance(data.vector(i), &centroids[assignments[i]])))
                .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                    Some((_, bd)) if bd >= d => best,
                    _ => Some((i, d)),
                });
            if let Some((i, _)) = farthest {
                reseeded.insert(i);
                centroids[c] = data.vector(i).to_vec();
            }
        }
        let next = assign(data, &centroids);
        iterations = round;
        if next == assignments {
            break;
        }
        assignments = next;
    }
    Ok(KMeansFit {
        k,
        centroids,
        assignments,
        iterations,
    })
}

/// Runs [`kmeans`] and fully masks `⌈mask_fraction · k⌉` random clusters.
pub fn kmeans_mask<G: PatchVectors + ?Sized, R: Rng + ?Sized>(
    data: &G,
    k: usize,
    max_iters: usize,
    mask_fraction: f64,
    rng: &mut R,
) -> Result<KMeansMasking> {
    open_unit("mask_fraction", mask_fraction)?;
    let fit = kmeans(data, k, max_iters, rng)?;
    let chosen = ((mask_fraction * fit.k as f64 - 1e-9).ceil() as usize).clamp(1, fit.k);
    let mut masked_clusters = index::sample(rng, fit.k, chosen).into_vec();
    masked_clusters.sort_unstable();
    let mut in_masked = vec![false; fit.k];
    masked_clusters.iter().for_each(|&c| in_masked[c] = true);
    let mask = Mask {
        masked: fit.assignments.iter().map(|&c| in_masked[c]).collect(),
        anchors: Vec::new(),
    };
    Ok(KMeansMasking {
        mask,
        fit,
        masked_clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::similarity::FeatureGrid;
    use proptest::prelude::{any, prop_assert, proptest};

    fn sim_of(vectors: &[Vec<f64>]) -> SimilarityMatrix {
        cosine_matrix(&FeatureGrid::from_vectors(vectors).unwrap()).unwrap()
    }

    fn random_sim(rng: &mut impl Rng, l: usize) -> SimilarityMatrix {
        let vectors: Vec<Vec<f64>> = (0..l)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        sim_of(&vectors)
    }

    #[test]
    fn impossible_threshold_masks_only_anchors() {
        let sim = random_sim(&mut seeded(1), 20);
        let mask = cluster_mask(&sim, 0.1, 1.01, &mut seeded(2)).unwrap();
        assert_eq!(mask.anchors().len(), 2);
        let masked: Vec<usize> = (0..20).filter(|&i| mask.is_masked(i)).collect();
        assert_eq!(masked, mask.anchors());
    }

    #[test]
    fn trivial_threshold_masks_everything() {
        let sim = random_sim(&mut seeded(3), 20);
        let mask = cluster_mask(&sim, 0.1, -1.01, &mut seeded(4)).unwrap();
        assert_eq!(mask.masked_count(), 20);
        assert_eq!(mask_ratio(&mask), 1.0);
    }

    #[test]
    fn four_patch_hand_example() {
        let sim = sim_of(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let mask = cluster_mask_with_anchors(&sim, &[0], 0.5);
        assert_eq!(mask.masked(), &[true, true, false, false]);
    }

    #[test]
    fn anchor_count_rounds_with_floor_of_one() {
        assert_eq!(anchor_count(196, 0.03), 6);
        assert_eq!(anchor_count(196, 0.05), 10);
        assert_eq!(anchor_count(10, 0.01), 1);
        assert_eq!(anchor_count(4, 0.5), 2);
    }

    #[test]
    fn random_mask_counts() {
        let mask = random_mask(196, 0.5, &mut seeded(0)).unwrap();
        assert_eq!(mask.masked_count(), 98);
        assert!(mask.anchors().is_empty());
        let nearly_all = random_mask(10, 0.9, &mut seeded(0)).unwrap();
        assert_eq!(nearly_all.visible().len(), 1);
    }

    #[test]
    fn random_mask_is_seed_deterministic() {
        let a = random_mask(196, 0.5, &mut seeded(11)).unwrap();
        assert_eq!(a, random_mask(196, 0.5, &mut seeded(11)).unwrap());
        assert_ne!(a, random_mask(196, 0.5, &mut seeded(12)).unwrap());
    }

    #[test]
    fn random_mask_rejects_bad_ratio() {
        assert!(random_mask(10, 0.0, &mut seeded(0)).is_err());
        assert!(random_mask(10, 1.0, &mut seeded(0)).is_err());
    }

    #[test]
    fn mask_ratio_counts() {
        assert_eq!(mask_ratio(&Mask::from_indices(4, 0..4)), 1.0);
        assert_eq!(mask_ratio(&Mask::unmasked(4)), 0.0);
        assert_eq!(mask_ratio(&Mask::from_indices(196, 0..98)), 0.5);
    }

    #[test]
    fn bits_round_trip() {
        let mask = Mask::from_indices(6, [1, 4]);
        assert_eq!(mask.to_bits(), "010010");
        assert_eq!(Mask::from_bits("010010\n").unwrap().masked(), mask.masked());
        assert!(matches!(Mask::from_bits("01x"), Err(Error::Parse { offset: 2, .. })));
    }

    #[test]
    fn anchors_must_be_masked() {
        assert!(Mask::new(vec![true, false], vec![1]).is_err());
        assert!(Mask::new(vec![true, false], vec![0]).is_ok());
    }

    #[test]
    fn kmeans_masks_half_of_twelve_clusters() {
        let mut rng = seeded(5);
        let vectors: Vec<Vec<f64>> = (0..196)
            .map(|_| (0..6).map(|_| rng.random::<f64>()).collect())
            .collect();
        let data = FeatureGrid::from_vectors(&vectors).unwrap();
        let out = kmeans_mask(&data, 12, 10, 0.5, &mut seeded(6)).unwrap();
        assert_eq!(out.fit.k, 12);
        assert_eq!(out.masked_clusters.len(), 6);
        assert!(out.fit.iterations <= 10);
        for (i, &c) in out.fit.assignments.iter().enumerate() {
            assert_eq!(out.mask.is_masked(i), out.masked_clusters.contains(&c));
        }
    }

    #[test]
    fn singleton_clusters() {
        let vectors: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let data = FeatureGrid::from_vectors(&vectors).unwrap();
        let out = kmeans_mask(&data, 8, 10, 0.5, &mut seeded(1)).unwrap();
        assert_eq!(out.mask.masked_count(), 4);
        let mut sorted = out.fit.assignments.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn separated_blobs_are_recovered() {
        let mut rng = seeded(9);
        let mut vectors = Vec::new();
        for blob in 0..2 {
            let center = if blob == 0 { [-10.0, -10.0] } else { [10.0, 10.0] };
            for _ in 0..15 {
                vectors.push(vec![
                    center[0] + rng.random_range(-0.5..0.5),
                    center[1] + rng.random_range(-0.5..0.5),
                ]);
            }
        }
        let data = FeatureGrid::from_vectors(&vectors).unwrap();
        let out = kmeans_mask(&data, 2, 10, 0.5, &mut seeded(2)).unwrap();
        // Exhaustive oracle: the only 2-partitions consistent with blob labels.
        let labels: Vec<usize> = (0..30).map(|i| i / 15).collect();
        let a = &out.fit.assignments;
        let same = a.iter().zip(&labels).all(|(x, y)| x == y);
        let flipped = a.iter().zip(&labels).all(|(x, y)| *x == 1 - y);
        assert!(same || flipped);
        let masked = out.mask.masked_count();
        assert_eq!(masked, 15);
        let first = out.mask.is_masked(0);
        assert!((0..15).all(|i| out.mask.is_masked(i) == first));
        assert!((15..30).all(|i| out.mask.is_masked(i) != first));
    }

    #[test]
    fn too_few_distinct_patches_reduces_k() {
        let vectors = vec![vec![0.0, 1.0]; 6]
            .into_iter()
            .chain(vec![vec![1.0, 0.0]; 6])
            .collect::<Vec<_>>();
        let data = FeatureGrid::from_vectors(&vectors).unwrap();
        let out = kmeans_mask(&data, 4, 10, 0.5, &mut seeded(0)).unwrap();
        assert_eq!(out.fit.k, 2);
        assert_eq!(out.mask.masked_count(), 6);
    }

    #[test]
    fn fewer_patches_than_clusters_is_an_error() {
        let data = FeatureGrid::from_vectors(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(matches!(
            kmeans(&data, 3, 10, &mut seeded(0)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(MaskerConfig::default().validate().is_ok());
        let bad = MaskerConfig {
            anchor_ratio: 0.6,
            ..MaskerConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = MaskerConfig {
            kmeans_k: 1,
            ..MaskerConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in [
            Strategy::ClusterRgb,
            Strategy::ClusterEmbedding,
            Strategy::Kmeans,
            Strategy::Random,
        ] {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
    }

    proptest! {
        #[test]
        fn raising_threshold_never_masks_more(seed in any::<u64>(), l in 2usize..32, r1 in -1.0f64..1.0, r2 in -1.0f64..1.0) {
            let mut rng = seeded(seed);
            let sim = random_sim(&mut rng, l);
            let anchors = sample_anchors(l, 0.1, &mut rng).unwrap();
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            let loose = cluster_mask_with_anchors(&sim, &anchors, lo);
            let tight = cluster_mask_with_anchors(&sim, &anchors, hi);
            for i in 0..l {
                prop_assert!(!tight.is_masked(i) || loose.is_masked(i));
            }
        }

        #[test]
        fn kmeans_assignment_is_nearest_centroid(seed in any::<u64>(), l in 12usize..60) {
            let mut rng = seeded(seed);
            let vectors: Vec<Vec<f64>> = (0..l)
                .map(|_| (0..3).map(|_| rng.random::<f64>()).collect())
                .collect();
            let data = FeatureGrid::from_vectors(&vectors).unwrap();
            let fit = kmeans(&data, 5, 10, &mut rng).unwrap();
            for (i, v) in vectors.iter().enumerate() {
                let own = squared_distance(v, &fit.centroids[fit.assignments[i]]);
                for c in &fit.centroids {
                    prop_assert!(own <= squared_distance(v, c) + 1e-9);
                }
            }
        }
    }
}
