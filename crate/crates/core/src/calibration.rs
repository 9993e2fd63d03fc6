//! Threshold search ahead of training.
//!
//! The mean mask ratio over a calibration sample is a non-increasing step
//! function of the threshold `r` once every image's anchors are frozen, so
//! plain bisection finds the `r` that hits a target mean ratio.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masker::{anchor_scores, cluster_mask, sample_anchors};
use crate::rng::{self, stream};
use crate::similarity::SimilarityMatrix;

pub const LOWER_BOUND: f64 = -1.0;
/// Headroom above the cosine maximum so the anchors-only regime is reachable.
pub const UPPER_MARGIN: f64 = 0.05;
pub const UPPER_BOUND: f64 = 1.0 + UPPER_MARGIN;
pub const DEFAULT_TOLERANCE: f64 = 0.02;
pub const DEFAULT_MAX_ITERS: usize = 40;
pub const DEFAULT_SAMPLE_SIZE: usize = 1024;
/// Bisection stops once the bracket is this narrow.
pub const BRACKET_WIDTH: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub target_ratio: f64,
    pub found_r: f64,
    pub achieved_ratio: f64,
    pub iterations: usize,
    pub trace: Vec<(f64, f64)>,
    pub sample_size: usize,
    /// False when the achieved ratio is outside the requested tolerance.
    pub converged: bool,
}

/// Mean mask ratio over a sample as a function of `r`, with anchors frozen.
#[derive(Debug, Clone)]
pub struct CalibrationObjective {
    /// Per image: anchor scores sorted ascending.
    sorted_scores: Vec<Vec<f64>>,
    anchor_floor: f64,
}

impl CalibrationObjective {
    /// Freezes one anchor draw per image, from a generator derived from a
    /// seed drawn off `rng` and the image's position in the sample.
    pub fn new<R: Rng + ?Sized>(sample: &[SimilarityMatrix], anchor_ratio: f64, rng: &mut R) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::Empty);
        }
        let base: u64 = rng.random();
        let mut sorted_scores = Vec::with_capacity(sample.len());
        let mut anchor_total = 0.0;
        for (i, sim) in sample.iter().enumerate() {
            let anchors = sample_anchors(
                sim.size(),
                anchor_ratio,
                &mut rng::derived(base, stream::CALIBRATION, i as u64),
            )?;
            anchor_total += anchors.len() as f64 / sim.size() as f64;
            let mut scores = anchor_scores(sim, &anchors);
            scores.sort_unstable_by(f64::total_cmp);
            sorted_scores.push(scores);
        }
        Ok(Self {
            sorted_scores,
            anchor_floor: anchor_total / sample.len() as f64,
        })
    }

    /// Mean fraction of anchors, i.e. the objective for any `r > 1`.
    pub fn anchor_floor(&self) -> f64 {
        self.anchor_floor
    }

    pub fn mean_ratio(&self, r: f64) -> f64 {
        let total: f64 = self
            .sorted_scores
            .iter()
            .map(|scores| {
                let below = scores.partition_point(|&s| s < r);
                (scores.len() - below) as f64 / scores.len() as f64
            })
            .sum();
        total / self.sorted_scores.len() as f64
    }
}

/// Bisects `r` over `[-1, 1.05]` until the mean mask ratio with frozen
/// anchors matches `target_ratio`.
pub fn calibrate_threshold<R: Rng + ?Sized>(
    sample: &[SimilarityMatrix],
    anchor_ratio: f64,
    target_ratio: f64,
    tolerance: f64,
    max_iters: usize,
    rng: &mut R,
) -> Result<CalibrationReport> {
    if !(tolerance > 0.0) {
        return Err(Error::invalid("tolerance", "must be positive"));
    }
    if !(target_ratio < 1.0) {
        return Err(Error::invalid(
            "target_ratio",
            format!("{target_ratio} must be below 1"),
        ));
    }
    let objective = CalibrationObjective::new(sample, anchor_ratio, rng)?;
    if target_ratio < objective.anchor_floor() {
        return Err(Error::UnreachableTarget {
            target: target_ratio,
            floor: objective.anchor_floor(),
        });
    }

    let (mut lo, mut hi) = (LOWER_BOUND, UPPER_BOUND);
    let mut trace = vec![(lo, objective.mean_ratio(lo)), (hi, objective.mean_ratio(hi))];
    let mut iterations = 0;
    while iterations < max_iters && hi - lo > BRACKET_WIDTH {
        let mid = 0.5 * (lo + hi);
        let ratio = objective.mean_ratio(mid);
        trace.push((mid, ratio));
        iterations += 1;
        if ratio > target_ratio {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let found_r = 0.5 * (lo + hi);
    let achieved_ratio = objective.mean_ratio(found_r);
    Ok(CalibrationReport {
        target_ratio,
        found_r,
        achieved_ratio,
        iterations,
        trace,
        sample_size: sample.len(),
        converged: (achieved_ratio - target_ratio).abs() <= tolerance,
    })
}

/// Mean mask ratio at `r` with freshly drawn anchors, via the masker itself.
pub fn reevaluate_threshold(sample: &[SimilarityMatrix], anchor_ratio: f64, r: f64, seed: u64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::Empty);
    }
    let mut total = 0.0;
    for (i, sim) in sample.iter().enumerate() {
        let mask = cluster_mask(
            sim,
            anchor_ratio,
            r,
            &mut rng::derived(seed, stream::REEVALUATE, i as u64),
        )?;
        total += crate::masker::mask_ratio(&mask);
    }
    Ok(total / sample.len() as f64)
}
