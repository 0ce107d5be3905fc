//! Mini-batch ADAM training with training-loss early stopping.

use ndarray::{ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::models::TrainingConfig;
use crate::numerics::adam::{adam_step, AdamState};
use crate::scalar::Scalar;

/// A model trained by gradient descent on a flat parameter vector.
pub trait Differentiable<T: Scalar> {
    fn params(&self) -> &[T];
    fn params_mut(&mut self) -> &mut [T];
    /// Batch MSE; writes its gradient into `grad`.
    fn loss_and_grad(&self, x: ArrayView2<T>, y: ArrayView1<T>, grad: &mut [T]) -> T;
    fn loss(&self, x: ArrayView2<T>, y: ArrayView1<T>) -> T;
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    /// Mean batch loss of every epoch run.
    pub loss_curve: Vec<f64>,
    pub stopped_early: bool,
}

/// Shuffles rows every epoch, steps ADAM once per mini-batch, and stops when
/// the epoch loss has set no new minimum for `patience` consecutive epochs
/// or after `max_epochs`. The parameters of the last epoch are kept.
pub fn train<T, M, R>(model: &mut M, x: ArrayView2<T>, y: ArrayView1<T>, cfg: &TrainingConfig, rng: &mut R) -> Result<TrainReport>
where
    T: Scalar,
    M: Differentiable<T>,
    R: Rng,
{
    let n = x.nrows();
    if n == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let batch = cfg.batch_size.max(1);
    let mut state = AdamState::new(model.params().len(), cfg.adam);
    let mut grad = vec![T::zero(); model.params().len()];
    let mut order: Vec<usize> = (0..n).collect();
    let mut curve = Vec::with_capacity(cfg.max_epochs);
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    // a single full batch never needs row gathering
    let full = n <= batch;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        if full {
            let loss = model.loss_and_grad(x, y, &mut grad).to_f64_lossy();
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            adam_step(model.params_mut(), &grad, &mut state);
            total = loss * n as f64;
        } else {
            for chunk in order.chunks(batch) {
                let xb = x.select(Axis(0), chunk);
                let yb = y.select(Axis(0), chunk);
                let loss = model.loss_and_grad(xb.view(), yb.view(), &mut grad).to_f64_lossy();
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch });
                }
                adam_step(model.params_mut(), &grad, &mut state);
                total += loss * chunk.len() as f64;
            }
        }
        let epoch_loss = total / n as f64;
        curve.push(epoch_loss);
        if epoch_loss < best {
            best = epoch_loss;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                return Ok(TrainReport {
                    loss_curve: curve,
                    stopped_early: true,
                });
            }
        }
    }
    Ok(TrainReport {
        loss_curve: curve,
        stopped_early: false,
    })
}

/// Whether a loss curve is consistent with the stopping rule: it either ran
/// `max_epochs`, or its last `patience` epochs set no new minimum and the
/// epoch before them did.
pub fn stopping_rule_holds(curve: &[f64], cfg: &TrainingConfig) -> bool {
    let e = curve.len();
    if e == cfg.max_epochs {
        return true;
    }
    if e <= cfg.patience {
        return false;
    }
    let best_before = curve[..e - cfg.patience].iter().cloned().fold(f64::INFINITY, f64::min);
    curve[e - cfg.patience..].iter().all(|&l| l >= best_before)
}
