//! Deep identity learning: train a linear network so that its collapsed kernel
//! inverts every kernel of a gallery at once.
//!
//! The network never sees an image. Each step collapses the model into its
//! restoration kernel, scores `K * D` against a centered impulse plus three
//! regularizers (area, zero phase, unit magnitude) for every kernel in the
//! batch, and pulls the averaged kernel gradient back onto the taps.

mod adam;
mod loss;

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use adam::{adam_step, AdamState, ADAM_EPSILON};
pub use loss::{
    identity_loss, identity_target, loss_for_drk, r1_conv_area, r2_zero_phase, r3_unit_mag,
    total_loss, PreparedKernel,
};

use crate::error::{Error, Result};
use crate::gallery::{Kernel, RkgDataset};
use crate::grid::Grid2D;
use crate::lcnn::{Composition, LcnnModel};

/// Which residual the identity term measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IdentityMode {
    /// Full `(k + d - 1)` convolution against a centered impulse.
    #[default]
    Full,
    /// The network's same-size output on the kernel (central crop of the full
    /// convolution) against a centered impulse of the kernel's size.
    Same,
}

impl std::str::FromStr for IdentityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(IdentityMode::Full),
            "same" => Ok(IdentityMode::Same),
            other => Err(Error::Config(format!("unknown identity mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for IdentityMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            IdentityMode::Full => "full",
            IdentityMode::Same => "same",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub spectrum_dims: (usize, usize),
    pub epsilon_spec: f64,
    pub identity_mode: IdentityMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda1: 0.8,
            lambda2: 0.8,
            lambda3: 0.4,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epochs: 40,
            batch_size: 32,
            seed: 0,
            spectrum_dims: (21, 21),
            epsilon_spec: 1e-12,
            identity_mode: IdentityMode::Full,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if [self.lambda1, self.lambda2, self.lambda3]
            .iter()
            .any(|l| !(*l >= 0.0) || !l.is_finite())
        {
            return bad("lambdas must be finite and non-negative".into());
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if !(self.epsilon_spec > 0.0) {
            return bad("spectral floor must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub identity: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(identity: f64, r1: f64, r2: f64, r3: f64, cfg: &TrainConfig) -> Self {
        Self {
            identity,
            r1,
            r2,
            r3,
            total: identity + cfg.lambda1 * r1 + cfg.lambda2 * r2 + cfg.lambda3 * r3,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.identity, self.r1, self.r2, self.r3, self.total]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Component-wise mean in slice order.
    pub fn mean(items: &[LossBreakdown]) -> LossBreakdown {
        let n = items.len().max(1) as f64;
        let mut acc = LossBreakdown::default();
        for b in items {
            acc.identity += b.identity;
            acc.r1 += b.r1;
            acc.r2 += b.r2;
            acc.r3 += b.r3;
            acc.total += b.total;
        }
        LossBreakdown {
            identity: acc.identity / n,
            r1: acc.r1 / n,
            r2: acc.r2 / n,
            r3: acc.r3 / n,
            total: acc.total / n,
        }
    }
}

/// Per-layer tap gradients laid out like [`crate::lcnn::ConvLayer::taps`].
pub type ModelGrads = Vec<Vec<f64>>;

fn batch_grads(
    model: &LcnnModel,
    batch: &[&PreparedKernel],
    cfg: &TrainConfig,
) -> Result<(Vec<LossBreakdown>, ModelGrads)> {
    if batch.is_empty() {
        return Err(Error::contract("gradient batch is empty"));
    }
    let comp = Composition::new(model);
    let drk = comp.drk();
    let per_kernel: Vec<(LossBreakdown, Grid2D)> = batch
        .par_iter()
        .map(|k| k.loss_and_grad(drk.grid(), cfg))
        .collect::<Result<_>>()?;
    // Fixed summation order keeps results independent of the thread count.
    let mut grad = Grid2D::zeros(drk.grid().rows(), drk.grid().cols());
    for (_, g) in &per_kernel {
        for (a, b) in grad.data_mut().iter_mut().zip(g.data()) {
            *a += b;
        }
    }
    let inv = 1.0 / batch.len() as f64;
    for a in grad.data_mut() {
        *a *= inv;
    }
    let grads = comp.backprop(model, &grad);
    for (layer, g) in grads.iter().enumerate() {
        if let Some(tap) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { layer, tap });
        }
    }
    Ok((per_kernel.into_iter().map(|(b, _)| b).collect(), grads))
}

/// Gradient of the mean total loss over `batch` with respect to every tap.
pub fn gradients(model: &LcnnModel, batch: &[Kernel], cfg: &TrainConfig) -> Result<ModelGrads> {
    let prepared = batch
        .iter()
        .map(|k| PreparedKernel::new(k, cfg))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&PreparedKernel> = prepared.iter().collect();
    Ok(batch_grads(model, &refs, cfg)?.1)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: LcnnModel,
    /// Mean loss per epoch, over every kernel seen during that epoch.
    pub history: Vec<LossBreakdown>,
}

/// Mini-batch Adam over the gallery, reshuffled every epoch from `cfg.seed`.
pub fn train(model: LcnnModel, rkg: &RkgDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if rkg.is_empty() {
        return Err(Error::contract("training gallery is empty"));
    }
    let prepared = rkg
        .kernels
        .iter()
        .map(|k| PreparedKernel::new(k, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut model = model;
    let mut state = AdamState::new(&model);
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut seen = Vec::with_capacity(order.len());
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&PreparedKernel> = chunk.iter().map(|&i| &prepared[i]).collect();
            let outcome = batch_grads(&model, &batch, cfg);
            let (losses, grads) = match outcome {
                Ok(v) => v,
                Err(Error::NonFiniteGradient { .. }) => {
                    return Err(Error::Diverged {
                        epoch,
                        step,
                        last_good: Box::new(model),
                    })
                }
                Err(e) => return Err(e),
            };
            if losses.iter().any(|b| !b.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    last_good: Box::new(model),
                });
            }
            let previous = model.clone();
            adam_step(&mut model, &grads, &mut state, cfg)?;
            if model.layers().iter().any(|l| l.taps().iter().any(|t| !t.is_finite())) {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    last_good: Box::new(previous),
                });
            }
            seen.extend(losses);
        }
        let mean = LossBreakdown::mean(&seen);
        log::info!(
            "epoch {:>3}: total {:.6} identity {:.6} r1 {:.6} r2 {:.6} r3 {:.6}",
            epoch + 1,
            mean.total,
            mean.identity,
            mean.r1,
            mean.r2,
            mean.r3
        );
        history.push(mean);
    }
    Ok(TrainOutcome { model, history })
}

/// Mean loss of `model` over `kernels`.
pub fn evaluate_loss(model: &LcnnModel, kernels: &[Kernel], cfg: &TrainConfig) -> Result<LossBreakdown> {
    let drk = crate::lcnn::compose_drk(model);
    let items = kernels
        .par_iter()
        .map(|k| loss_for_drk(k, &drk, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(LossBreakdown::mean(&items))
}

pub const LOSS_CSV_HEADER: &str = "epoch,identity,r1,r2,r3,total";

/// Loss history as CSV, values with 17 significant digits.
pub fn write_loss_csv<W: Write>(history: &[LossBreakdown], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{LOSS_CSV_HEADER}")?;
    for (i, b) in history.iter().enumerate() {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            i + 1,
            b.identity,
            b.r1,
            b.r2,
            b.r3,
            b.total
        )?;
    }
    Ok(())
}
