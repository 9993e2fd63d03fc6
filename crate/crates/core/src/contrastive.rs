//! Symmetric InfoNCE over toy linear encoders.
//!
//! The image encoder mean-pools the visible patch vectors of a shaped batch
//! slot list and applies an affine map followed by L2 normalization; the text
//! encoder does the same for a bag-of-tokens count vector. Gradients of the
//! symmetric loss are computed analytically and applied with plain
//! full-batch gradient descent.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::batch::{shape_batch, ShapedBatch};
use crate::error::{Error, Result};
use crate::masker::{mask_ratio, Mask, MaskerConfig};
use crate::patch_grid::{patchify, pixel_normalize, Image, PatchGrid};
use crate::rng::{self, stream};
use crate::similarity::dot;

pub const DEFAULT_TEMPERATURE: f64 = 0.07;

/// Tolerance for the unit-norm precondition on embeddings.
const UNIT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub epoch_current: usize,
    pub epoch_total: usize,
    /// Exponent `k` of the blend schedule `(E_c / E_t)^k`.
    pub alpha_exponent: f64,
    pub temperature: f64,
    pub step: u64,
}

impl TrainState {
    pub fn new(epoch_total: usize) -> Self {
        Self {
            epoch_current: 0,
            epoch_total,
            alpha_exponent: 1.0,
            temperature: DEFAULT_TEMPERATURE,
            step: 0,
        }
    }
}

/// Blend weight on raw-pixel similarity for the current epoch.
pub fn alpha_schedule(state: &TrainState) -> Result<f64> {
    if state.epoch_total == 0 {
        return Err(Error::invalid("epoch_total", "must be positive"));
    }
    if state.epoch_current > state.epoch_total {
        return Err(Error::invalid("epoch_current", "exceeds epoch_total"));
    }
    Ok((state.epoch_current as f64 / state.epoch_total as f64).powf(state.alpha_exponent))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingPair {
    pub image_embed: Vec<f64>,
    pub text_embed: Vec<f64>,
}

fn check_pairs(pairs: &[EmbeddingPair], tau: f64) -> Result<usize> {
    if pairs.len() < 2 {
        return Err(Error::invalid("pairs", "need at least two pairs"));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::invalid("tau", format!("{tau} must be positive")));
    }
    let dim = pairs[0].image_embed.len();
    for p in pairs {
        for v in [&p.image_embed, &p.text_embed] {
            if v.len() != dim {
                return Err(Error::SizeMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("embedding"));
            }
            if (dot(v, v).sqrt() - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::invalid("embedding", "not unit norm"));
            }
        }
    }
    Ok(pairs.len())
}

/// `logits[i][j] = I_i · T_j / tau`, row-major.
fn logits(images: &[&[f64]], texts: &[&[f64]], tau: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(images.len() * texts.len());
    for i in images {
        out.extend(texts.iter().map(|t| dot(i, t) / tau));
    }
    out
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Mean cross-entropy of rows (`by_rows`) or columns of an `n × n` logit
/// matrix against the diagonal.
fn diagonal_cross_entropy(logits: &[f64], n: usize, by_rows: bool) -> f64 {
    let at = |a: usize, b: usize| if by_rows { logits[a * n + b] } else { logits[b * n + a] };
    (0..n)
        .map(|a| log_sum_exp((0..n).map(move |b| at(a, b))) - at(a, a))
        .sum::<f64>()
        / n as f64
}

fn split(pairs: &[EmbeddingPair]) -> (Vec<&[f64]>, Vec<&[f64]>) {
    pairs
        .iter()
        .map(|p| (p.image_embed.as_slice(), p.text_embed.as_slice()))
        .unzip()
}

/// Vision-to-language InfoNCE: each image against all captions.
pub fn info_nce_v2l(pairs: &[EmbeddingPair], tau: f64) -> Result<f64> {
    let n = check_pairs(pairs, tau)?;
    let (images, texts) = split(pairs);
    Ok(diagonal_cross_entropy(&logits(&images, &texts, tau), n, true))
}

/// Language-to-vision InfoNCE: each caption against all images.
pub fn info_nce_l2v(pairs: &[EmbeddingPair], tau: f64) -> Result<f64> {
    let n = check_pairs(pairs, tau)?;
    let (images, texts) = split(pairs);
    Ok(diagonal_cross_entropy(&logits(&images, &texts, tau), n, false))
}

/// Mean of the two directional losses.
pub fn info_nce_symmetric(pairs: &[EmbeddingPair], tau: f64) -> Result<f64> {
    let n = check_pairs(pairs, tau)?;
    let (images, texts) = split(pairs);
    let l = logits(&images, &texts, tau);
    Ok(0.5 * (diagonal_cross_entropy(&l, n, true) + diagonal_cross_entropy(&l, n, false)))
}

/// Loss and `dLoss/dI`, `dLoss/dT` for unit embeddings.
fn symmetric_loss_grad(images: &[Vec<f64>], texts: &[Vec<f64>], tau: f64) -> (f64, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = images.len();
    let dim = images[0].len();
    let img: Vec<&[f64]> = images.iter().map(Vec::as_slice).collect();
    let txt: Vec<&[f64]> = texts.iter().map(Vec::as_slice).collect();
    let l = logits(&img, &txt, tau);
    let loss = 0.5 * (diagonal_cross_entropy(&l, n, true) + diagonal_cross_entropy(&l, n, false));

    // dLoss/dlogits = ((P − I) + (Q − I)) / 2n with P row-softmax, Q column-softmax.
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        let lse = log_sum_exp((0..n).map(|j| l[i * n + j]));
        for j in 0..n {
            g[i * n + j] += (l[i * n + j] - lse).exp();
        }
    }
    for j in 0..n {
        let lse = log_sum_exp((0..n).map(|i| l[i * n + j]));
        for i in 0..n {
            g[i * n + j] += (l[i * n + j] - lse).exp();
        }
    }
    let scale = 1.0 / (2.0 * n as f64);
    for i in 0..n {
        g[i * n + i] -= 2.0;
    }
    g.iter_mut().for_each(|v| *v *= scale);

    let mut g_img = vec![vec![0.0; dim]; n];
    let mut g_txt = vec![vec![0.0; dim]; n];
    for i in 0..n {
        for j in 0..n {
            let w = g[i * n + j] / tau;
            for d in 0..dim {
                g_img[i][d] += w * texts[j][d];
                g_txt[j][d] += w * images[i][d];
            }
        }
    }
    (loss, g_img, g_txt)
}

/// Affine image and text encoders sharing one flat parameter vector:
/// `[image weights (D×P) | image bias (D) | text weights (D×V) | text bias (D)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    embed_dim: usize,
    patch_dim: usize,
    vocab: usize,
    params: Vec<f64>,
}

impl ToyModel {
    /// Weights uniform in `±sqrt(3 / fan_in)`, biases uniform in `±0.1`.
    pub fn init(embed_dim: usize, patch_dim: usize, vocab: usize, seed: u64) -> Result<Self> {
        if embed_dim == 0 || patch_dim == 0 || vocab == 0 {
            return Err(Error::invalid("model", "dimensions must be positive"));
        }
        let mut rng = rng::derived(seed, stream::INIT, 0);
        let mut params = Vec::with_capacity(embed_dim * (patch_dim + vocab + 2));
        let mut fill = |count: usize, bound: f64| {
            params.extend((0..count).map(|_| rng.random_range(-bound..bound)));
        };
        fill(embed_dim * patch_dim, (3.0 / patch_dim as f64).sqrt());
        fill(embed_dim, 0.1);
        fill(embed_dim * vocab, (3.0 / vocab as f64).sqrt());
        fill(embed_dim, 0.1);
        Ok(Self {
            embed_dim,
            patch_dim,
            vocab,
            params,
        })
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_dim
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self) -> [usize; 4] {
        let image_bias = self.embed_dim * self.patch_dim;
        let text_weights = image_bias + self.embed_dim;
        let text_bias = text_weights + self.embed_dim * self.vocab;
        [0, image_bias, text_weights, text_bias]
    }

    fn project(weights: &[f64], bias: &[f64], input: &[f64]) -> Vec<f64> {
        weights
            .chunks_exact(input.len())
            .zip(bias)
            .map(|(row, b)| dot(row, input) + b)
            .collect()
    }

    fn image_pre(&self, pooled: &[f64]) -> Vec<f64> {
        let [w, b, _, _] = self.offsets();
        Self::project(&self.params[w..b], &self.params[b..b + self.embed_dim], pooled)
    }

    fn text_pre(&self, bag: &[f64]) -> Vec<f64> {
        let [_, _, w, b] = self.offsets();
        Self::project(&self.params[w..b], &self.params[b..b + self.embed_dim], bag)
    }

    pub fn encode_image(&self, pooled: &[f64]) -> Result<Vec<f64>> {
        normalize(self.image_pre(pooled)).map(|(u, _)| u)
    }

    pub fn encode_text(&self, bag: &[f64]) -> Result<Vec<f64>> {
        normalize(self.text_pre(bag)).map(|(u, _)| u)
    }

    /// Symmetric loss and its gradient with respect to [`ToyModel::params`].
    pub fn loss_and_gradient(&self, pooled: &[Vec<f64>], bags: &[Vec<f64>], tau: f64) -> Result<(f64, Vec<f64>)> {
        if pooled.len() != bags.len() {
            return Err(Error::SizeMismatch {
                expected: pooled.len(),
                actual: bags.len(),
            });
        }
        if pooled.len() < 2 {
            return Err(Error::invalid("batch", "need at least two pairs"));
        }
        let (images, image_norms): (Vec<_>, Vec<_>) = pooled
            .iter()
            .map(|x| normalize(self.image_pre(x)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        let (texts, text_norms): (Vec<_>, Vec<_>) = bags
            .iter()
            .map(|t| normalize(self.text_pre(t)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        let (loss, g_img, g_txt) = symmetric_loss_grad(&images, &texts, tau);
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss"));
        }

        let mut grad = vec![0.0; self.params.len()];
        let [iw, ib, tw, tb] = self.offsets();
        let d = self.embed_dim;
        let sides = [
            (pooled, &images, &image_norms, &g_img, iw, ib, self.patch_dim),
            (bags, &texts, &text_norms, &g_txt, tw, tb, self.vocab),
        ];
        for (inputs, units, norms, g_units, w_off, b_off, width) in sides {
            for (((x, u), &norm), gu) in inputs.iter().zip(units.iter()).zip(norms.iter()).zip(g_units.iter()) {
                // Backprop through u = z / |z|.
                let along = dot(u, gu);
                for r in 0..d {
                    let gz = (gu[r] - u[r] * along) / norm;
                    grad[b_off + r] += gz;
                    let row = &mut grad[w_off + r * width..w_off + (r + 1) * width];
                    row.iter_mut().zip(x).for_each(|(g, xv)| *g += gz * xv);
                }
            }
        }
        Ok((loss, grad))
    }

    /// Symmetric loss only.
    pub fn loss(&self, pooled: &[Vec<f64>], bags: &[Vec<f64>], tau: f64) -> Result<f64> {
        let pairs = pooled
            .iter()
            .zip(bags)
            .map(|(x, t)| {
                Ok(EmbeddingPair {
                    image_embed: self.encode_image(x)?,
                    text_embed: self.encode_text(t)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        info_nce_symmetric(&pairs, tau)
    }
}

fn normalize(z: Vec<f64>) -> Result<(Vec<f64>, f64)> {
    let norm = dot(&z, &z).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::NonFinite("encoder output norm"));
    }
    Ok((z.iter().map(|v| v / norm).collect(), norm))
}

/// One image-caption pair. `tokens` are vocabulary ids; repeats count.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Image,
    pub tokens: Vec<usize>,
}

/// Bag-of-tokens count vector.
pub fn token_bag(tokens: &[usize], vocab: usize) -> Result<Vec<f64>> {
    let mut bag = vec![0.0; vocab];
    for &t in tokens {
        *bag.get_mut(t)
            .ok_or_else(|| Error::invalid("tokens", format!("token {t} outside vocabulary of {vocab}")))? += 1.0;
    }
    Ok(bag)
}

/// Mean of the real slots' raw patch vectors; zeros when every slot is padding.
pub fn pool_visible(grid: &PatchGrid, shaped: &ShapedBatch, image: usize) -> Vec<f64> {
    let mut pooled = vec![0.0; grid.patch_dim()];
    let mut count = 0usize;
    for index in shaped.real_indices(image) {
        pooled.iter_mut().zip(grid.patch(index)).for_each(|(p, v)| *p += v);
        count += 1;
    }
    if count > 0 {
        let inv = 1.0 / count as f64;
        pooled.iter_mut().for_each(|p| *p *= inv);
    }
    pooled
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepOptions {
    pub patch_size: usize,
    pub beta: f64,
    /// Base seed for per-step masking and shaping generators.
    pub seed: u64,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            patch_size: 8,
            beta: 0.5,
            seed: 0,
        }
    }
}

/// Masks and slot layout for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPlan {
    pub alpha: f64,
    pub masks: Vec<Mask>,
    pub shaped: ShapedBatch,
}

impl StepPlan {
    pub fn mean_mask_ratio(&self) -> f64 {
        self.masks.iter().map(mask_ratio).sum::<f64>() / self.masks.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub step: u64,
    pub loss: f64,
    pub alpha: f64,
    pub mean_mask_ratio: f64,
}

/// Builds the step's masks with generators derived from `(seed, step, image)`
/// and shapes them into fixed-width slot lists.
pub fn plan_step(
    grids: &[PatchGrid],
    masker: &MaskerConfig,
    state: &TrainState,
    options: &StepOptions,
) -> Result<StepPlan> {
    let alpha = alpha_schedule(state)?;
    let step_seed = rng::sub_seed(options.seed, stream::MASK, state.step);
    let masks = grids
        .iter()
        .enumerate()
        .map(|(i, grid)| {
            let mut rng = rng::derived(step_seed, stream::MASK, i as u64);
            masker.mask_grid(&pixel_normalize(grid), alpha, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let shaped = shape_batch(&masks, options.beta, &mut rng::derived(step_seed, stream::SHAPE, 0))?;
    Ok(StepPlan { alpha, masks, shaped })
}

/// Pooled visible-patch inputs for every image under a plan.
pub fn pooled_inputs(grids: &[PatchGrid], shaped: &ShapedBatch) -> Vec<Vec<f64>> {
    grids
        .iter()
        .enumerate()
        .map(|(i, grid)| pool_visible(grid, shaped, i))
        .collect()
}

pub fn prepare(batch: &[Sample], patch_size: usize, vocab: usize) -> Result<(Vec<PatchGrid>, Vec<Vec<f64>>)> {
    let grids = batch
        .iter()
        .map(|s| patchify(&s.image, patch_size))
        .collect::<Result<Vec<_>>>()?;
    let bags = batch
        .iter()
        .map(|s| token_bag(&s.tokens, vocab))
        .collect::<Result<Vec<_>>>()?;
    Ok((grids, bags))
}

/// One full-batch gradient-descent step on the symmetric loss. Returns the
/// loss before the update.
pub fn train_step(
    model: &mut ToyModel,
    batch: &[Sample],
    masker: &MaskerConfig,
    state: &TrainState,
    options: &StepOptions,
    learning_rate: f64,
) -> Result<StepOutcome> {
    let (grids, bags) = prepare(batch, options.patch_size, model.vocab)?;
    if grids.iter().any(|g| g.patch_dim() != model.patch_dim) {
        return Err(Error::DimensionMismatch(
            "patch dimension does not match the model".into(),
        ));
    }
    let plan = plan_step(&grids, masker, state, options)?;
    let pooled = pooled_inputs(&grids, &plan.shaped);
    let (loss, grad) = model.loss_and_gradient(&pooled, &bags, state.temperature)?;
    model
        .params
        .iter_mut()
        .zip(&grad)
        .for_each(|(p, g)| *p -= learning_rate * g);
    Ok(StepOutcome {
        step: state.step,
        loss,
        alpha: plan.alpha,
        mean_mask_ratio: plan.mean_mask_ratio(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub temperature: f64,
    pub alpha_exponent: f64,
    pub embed_dim: usize,
    /// Images per step; 0 means the whole dataset.
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 0.1,
            temperature: DEFAULT_TEMPERATURE,
            alpha_exponent: 1.0,
            embed_dim: 16,
            batch_size: 0,
        }
    }
}

/// Trains a fresh model for `config.epochs` epochs. Alpha advances once per
/// epoch; each epoch walks the dataset in order in `batch_size` chunks.
pub fn train(
    dataset: &[Sample],
    vocab: usize,
    masker: &MaskerConfig,
    config: &TrainConfig,
    options: &StepOptions,
) -> Result<(ToyModel, Vec<StepOutcome>)> {
    let first = dataset.first().ok_or(Error::Empty)?;
    let patch = options.patch_size;
    let patch_dim = patch * patch * first.image.channels();
    let mut model = ToyModel::init(config.embed_dim, patch_dim, vocab, options.seed)?;
    let mut state = TrainState {
        epoch_current: 0,
        epoch_total: config.epochs,
        alpha_exponent: config.alpha_exponent,
        temperature: config.temperature,
        step: 0,
    };
    let batch_size = if config.batch_size == 0 {
        dataset.len()
    } else {
        config.batch_size
    };
    let mut log = Vec::new();
    for epoch in 0..config.epochs {
        state.epoch_current = epoch;
        for chunk in dataset.chunks(batch_size) {
            log.push(train_step(
                &mut model,
                chunk,
                masker,
                &state,
                options,
                config.learning_rate,
            )?);
            state.step += 1;
        }
    }
    Ok((model, log))
}
