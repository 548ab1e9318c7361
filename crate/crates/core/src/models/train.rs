use loadcast_nn::{mse_loss, AdamState, Network, NnError, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::svr::{fit_epsilon, fit_ridge};
use super::{build_model, ModelError, ModelKind, ModelParams, ModelSpec, Result, SvrMode, TrainedModel, PREDICT_CHUNK};
use crate::dataset::{fit_normalizer, Normalizer, Split, WindowedDataset};
use crate::featureset::FeatureSelector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean normalized MSE over the epoch's mini-batches (dropout active).
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: Option<usize>,
}

impl History {
    pub fn best_val_loss(&self) -> Option<f64> {
        self.best_epoch.map(|e| self.epochs[e].val_loss)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for r in &self.epochs {
            s.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, r.val_loss));
        }
        s
    }
}

/// Fits `spec` on the train split of `dataset`, using the validation split
/// for early stopping. The normalizer is fitted on the train split.
pub fn train(spec: &ModelSpec, selector: &FeatureSelector, dataset: &WindowedDataset) -> Result<TrainedModel> {
    spec.validate().map_err(ModelError::InvalidSpec)?;
    if dataset.split(Split::Train).is_empty() {
        return Err(ModelError::EmptySplit(Split::Train));
    }
    let layout = &dataset.layout;
    if spec.kind == ModelKind::Persistence {
        return Ok(TrainedModel::persistence(selector.clone(), layout, dataset.fractions));
    }
    let normalizer = fit_normalizer(dataset)?;
    let (params, history) = match spec.kind {
        ModelKind::Svr => (ModelParams::Svr(fit_svr(spec, dataset, &normalizer)?), History::default()),
        _ => {
            let (net, history) = fit_network(spec, dataset, &normalizer)?;
            (ModelParams::Network(net), history)
        }
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        selector: selector.clone(),
        window: layout.window,
        fractions: dataset.fractions,
        channel_names: layout.channel_names.clone(),
        load_index: layout.load_index,
        normalizer,
        history,
        params,
    })
}

fn fit_svr(spec: &ModelSpec, dataset: &WindowedDataset, norm: &Normalizer) -> Result<Vec<super::LinearPredictor>> {
    let (x, y) = dataset.arrays(Split::Train, norm)?;
    let t2 = dataset.layout.window.t2;
    let d = dataset.layout.window.t1 * dataset.layout.channels();
    let cfg = &spec.svr;
    (0..t2)
        .map(|h| {
            let yh: Vec<f64> = y.iter().skip(h).step_by(t2).copied().collect();
            match cfg.mode {
                SvrMode::Ridge => fit_ridge(&x, &yh, d, cfg.lambda),
                SvrMode::Epsilon => fit_epsilon(&x, &yh, d, cfg.epsilon, cfg.c, cfg.max_iter, cfg.tol),
            }
        })
        .collect()
}

fn non_finite(epoch: usize) -> impl Fn(NnError) -> ModelError {
    move |e| match e {
        NnError::NonFinite { .. } => ModelError::NonFiniteLoss { epoch },
        other => ModelError::Nn(other),
    }
}

/// Normalized MSE of `net` over flattened inputs and targets.
fn evaluate_loss(net: &Network, x: &[f64], y: &[f64], shape: (usize, usize, usize)) -> std::result::Result<f64, NnError> {
    let (t1, c, t2) = shape;
    let n = y.len() / t2;
    let mut sum = 0.0;
    for start in (0..n).step_by(PREDICT_CHUNK) {
        let end = (start + PREDICT_CHUNK).min(n);
        let xb = Tensor::from_vec(&[end - start, t1, c], x[start * t1 * c..end * t1 * c].to_vec())?;
        let yb = Tensor::from_vec(&[end - start, t2], y[start * t2..end * t2].to_vec())?;
        let (loss, _) = mse_loss(&net.forward(&xb)?, &yb)?;
        sum += loss * (end - start) as f64;
    }
    Ok(sum / n as f64)
}

fn fit_network(spec: &ModelSpec, dataset: &WindowedDataset, norm: &Normalizer) -> Result<(Network, History)> {
    if dataset.split(Split::Val).is_empty() {
        return Err(ModelError::EmptySplit(Split::Val));
    }
    let cfg = &spec.training;
    let (t1, c, t2) = (dataset.layout.window.t1, dataset.layout.channels(), dataset.layout.window.t2);
    let row = t1 * c;
    let (xt, yt) = dataset.arrays(Split::Train, norm)?;
    let (xv, yv) = dataset.arrays(Split::Val, norm)?;
    let n = yt.len() / t2;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = build_model(spec, dataset.layout.window, c, &mut rng)?;
    let mut adam = AdamState::new(cfg.adam, &net.params());
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = History::default();
    let mut best = (f64::INFINITY, net.snapshot());
    let mut stale = 0;

    for epoch in 0..cfg.max_epochs {
        let fail = non_finite(epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut xb = Vec::with_capacity(batch.len() * row);
            let mut yb = Vec::with_capacity(batch.len() * t2);
            for &i in batch {
                xb.extend_from_slice(&xt[i * row..(i + 1) * row]);
                yb.extend_from_slice(&yt[i * t2..(i + 1) * t2]);
            }
            let x = Tensor::from_vec(&[batch.len(), t1, c], xb)?;
            let y = Tensor::from_vec(&[batch.len(), t2], yb)?;
            net.zero_grad();
            let pred = net.forward_train(&x, &mut rng).map_err(&fail)?;
            let (loss, grad) = mse_loss(&pred, &y)?;
            if !loss.is_finite() {
                return Err(ModelError::NonFiniteLoss { epoch });
            }
            total += loss * batch.len() as f64;
            net.backward(&grad).map_err(&fail)?;
            adam.step(&mut net.params_mut(), epoch)?;
        }
        let val_loss = evaluate_loss(&net, &xv, &yv, (t1, c, t2)).map_err(&fail)?;
        if !val_loss.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch });
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: total / n as f64,
            val_loss,
        });
        if val_loss < best.0 {
            best = (val_loss, net.snapshot());
            history.best_epoch = Some(epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale > cfg.patience {
                break;
            }
        }
    }
    net.restore(&best.1)?;
    Ok((net, history))
}

#[cfg(test)]
pub(super) fn evaluate_loss_for_tests(net: &Network, x: &[f64], y: &[f64], shape: (usize, usize, usize)) -> f64 {
    evaluate_loss(net, x, y, shape).unwrap()
}
