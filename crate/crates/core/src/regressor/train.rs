//! Mini-batch training with Adam and an exponentially decaying step size.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::{NetworkConfig, NetworkParams};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::rng;

/// One training example: a canonical cloud and its target vector.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub points: &'a [Vec3],
    pub target: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Per-epoch multiplicative decay.
    pub decay: f64,
    pub lr_floor: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Worker threads for batch gradients (only used with the `std` feature).
    pub threads: usize,
    /// Halve the step and retry an epoch whenever the train loss rises.
    pub safeguard: bool,
    /// Fit standardized targets (per output mean and spread of the train
    /// split) and fold the affine back into the last layer afterwards.
    /// Losses in the history are then in standardized units.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            decay: 0.9,
            lr_floor: 1e-5,
            batch_size: 128,
            epochs: 100,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            threads: 1,
            safeguard: false,
            standardize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(self.learning_rate > 0.0) || !(self.lr_floor > 0.0) || self.lr_floor > self.learning_rate {
            return Err(Error::invalid("need 0 < lr_floor <= learning_rate"));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::invalid("decay must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Step size used during epoch `k` (0-based).
pub fn lr_at_epoch(cfg: &TrainConfig, k: usize) -> f64 {
    (cfg.learning_rate * cfg.decay.powi(k as i32)).max(cfg.lr_floor)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    /// `NaN` when there is no test split.
    pub test_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the lowest test loss (last epoch without a test split).
    pub params: NetworkParams,
    pub best_epoch: usize,
    pub history: Vec<EpochLog>,
    /// Train loss of the initial parameters.
    pub initial_loss: f64,
}

/// Adam optimizer state.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl Adam {
    pub fn new(n: usize, cfg: &TrainConfig) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + self.epsilon);
        }
    }
}

/// Trains a freshly initialized network. Deterministic given the seed,
/// config and data, independent of `threads`.
pub fn train(
    net: NetworkConfig,
    train_set: &[Sample<'_>],
    test_set: &[Sample<'_>],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    // fresh weights already live in standardized units, so no unfolding
    run(NetworkParams::init(net, cfg.seed)?, train_set, test_set, cfg, false)
}

/// Per-output mean and spread of the targets. Spreads below a millionth of
/// the largest one are raised to it so constant outputs stay finite.
pub fn target_moments(data: &[Sample<'_>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = data.first().map(|s| s.target.len()).ok_or_else(|| Error::invalid("no targets"))?;
    if data.iter().any(|s| s.target.len() != m) {
        return Err(Error::invalid("targets differ in length"));
    }
    let n = data.len() as f64;
    let mut mean = vec![0.0; m];
    for s in data {
        for (a, t) in mean.iter_mut().zip(s.target) {
            *a += t / n;
        }
    }
    let mut sd = vec![0.0; m];
    for s in data {
        for ((v, t), mu) in sd.iter_mut().zip(s.target).zip(&mean) {
            *v += (t - mu) * (t - mu) / n;
        }
    }
    sd.iter_mut().for_each(|v| *v = v.sqrt());
    let floor = sd.iter().fold(0.0f64, |a, &b| a.max(b)).max(1e-300) * 1e-6;
    sd.iter_mut().for_each(|v| *v = v.max(floor));
    Ok((mean, sd))
}

fn standardized(data: &[Sample<'_>], mean: &[f64], sd: &[f64]) -> Vec<Vec<f64>> {
    data.iter()
        .map(|s| s.target.iter().zip(mean).zip(sd).map(|((t, m), d)| (t - m) / d).collect())
        .collect()
}

/// Trains starting from the given parameters.
pub fn train_from(
    params: NetworkParams,
    train_set: &[Sample<'_>],
    test_set: &[Sample<'_>],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    run(params, train_set, test_set, cfg, true)
}

fn run(
    params: NetworkParams,
    train_set: &[Sample<'_>],
    test_set: &[Sample<'_>],
    cfg: &TrainConfig,
    unfold: bool,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    if !cfg.standardize {
        return fit(params, train_set, test_set, cfg);
    }
    let (mean, sd) = target_moments(train_set)?;
    let tr_t = standardized(train_set, &mean, &sd);
    let te_t = standardized(test_set, &mean, &sd);
    let tr: Vec<Sample<'_>> = train_set
        .iter()
        .zip(&tr_t)
        .map(|(s, t)| Sample { points: s.points, target: t })
        .collect();
    let te: Vec<Sample<'_>> = test_set
        .iter()
        .zip(&te_t)
        .map(|(s, t)| Sample { points: s.points, target: t })
        .collect();
    let inv: Vec<f64> = sd.iter().map(|d| 1.0 / d).collect();
    let shift: Vec<f64> = mean.iter().zip(&sd).map(|(m, d)| -m / d).collect();
    let mut start = params;
    if unfold {
        start.affine_output(&inv, &shift)?;
    }
    let mut out = fit(start, &tr, &te, cfg)?;
    out.params.affine_output(&sd, &mean)?;
    Ok(out)
}

fn fit(
    mut params: NetworkParams,
    train_set: &[Sample<'_>],
    test_set: &[Sample<'_>],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let mut adam = Adam::new(params.param_count(), cfg);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut shuffler = rng::stream(cfg.seed, 1);
    let initial_loss = params.mean_loss(train_set)?;
    let mut prev_train = initial_loss;
    let mut best = (f64::INFINITY, 0usize, params.clone());
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut lr_scale = 1.0;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffler);
        let snapshot = cfg.safeguard.then(|| (params.clone(), adam.clone()));
        let mut lr = lr_at_epoch(cfg, epoch) * lr_scale;
        let mut train_loss = run_epoch(&mut params, &mut adam, train_set, &order, cfg, lr, epoch)?;

        if let Some((p0, a0)) = snapshot {
            train_loss = params.mean_loss(train_set)?;
            let mut retries = 0;
            while train_loss > prev_train && retries < 20 {
                lr_scale *= 0.5;
                lr = lr_at_epoch(cfg, epoch) * lr_scale;
                params = p0.clone();
                adam = a0.clone();
                run_epoch(&mut params, &mut adam, train_set, &order, cfg, lr, epoch)?;
                train_loss = params.mean_loss(train_set)?;
                retries += 1;
            }
            if train_loss > prev_train {
                params = p0;
                adam = a0;
                train_loss = prev_train;
            }
        }
        if !train_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        prev_train = train_loss;

        let test_loss = if test_set.is_empty() {
            f64::NAN
        } else {
            params.mean_loss(test_set)?
        };
        let score = if test_set.is_empty() { train_loss } else { test_loss };
        if !score.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        if score < best.0 || test_set.is_empty() {
            best = (score, epoch, params.clone());
        }
        history.push(EpochLog {
            epoch,
            train_loss,
            test_loss,
            lr,
        });
    }
    Ok(TrainOutcome {
        params: best.2,
        best_epoch: best.1,
        history,
        initial_loss,
    })
}

fn run_epoch(
    params: &mut NetworkParams,
    adam: &mut Adam,
    data: &[Sample<'_>],
    order: &[usize],
    cfg: &TrainConfig,
    lr: f64,
    epoch: usize,
) -> Result<f64> {
    let mut total = 0.0;
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for chunk in order.chunks(cfg.batch_size) {
        batch.clear();
        batch.extend(chunk.iter().map(|&i| data[i]));
        let (loss, grad) = params.gradient(&batch, cfg.threads)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::TrainingDiverged { epoch });
        }
        adam.step(params.values_mut(), &grad, lr);
        total += loss * chunk.len() as f64;
    }
    Ok(total / data.len() as f64)
}
