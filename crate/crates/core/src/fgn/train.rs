//! SGD training, single-pass incremental updates and evaluation.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgn::grain::Grain;
use crate::fgn::model::{argmax, loss_and_grad, SubModel};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub lr: f64,
    pub epochs: usize,
    /// Keep attention parameters at their initial values.
    pub freeze_attention: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            lr: 0.05,
            epochs: 200,
            freeze_attention: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub grains: usize,
    pub steps: usize,
    /// Mean cross-entropy over the training grains after the last epoch.
    pub final_loss: f64,
    pub valid_f1: Option<f64>,
}

fn check_labeled(model: &SubModel, g: &Grain) -> Result<usize> {
    let y = g
        .label
        .ok_or_else(|| Error::Data(format!("grain of node {} has no label", g.node)))?;
    if y >= model.dims.classes {
        return Err(Error::Shape(format!("label {y} outside a {}-class head", model.dims.classes)));
    }
    model.check_grain(g)?;
    Ok(y)
}

/// Resets `model` from its seed and trains it from scratch on `grains`.
pub fn train(model: &mut SubModel, grains: &[Grain], valid: &[Grain], opts: &TrainOptions) -> Result<TrainReport> {
    if grains.is_empty() {
        return Err(Error::Empty("no training grains".into()));
    }
    for g in grains {
        check_labeled(model, g)?;
    }
    model.reset();
    let mut order: Vec<usize> = (0..grains.len()).collect();
    let mut rng = rng::stream(model.seed, "shuffle");
    let mut steps = 0;
    for _ in 0..opts.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (_, grad) = loss_and_grad(model, &grains[i], !opts.freeze_attention)?;
            if opts.lr != 0.0 {
                model.params.add_scaled(&grad, -opts.lr);
            }
            steps += 1;
        }
    }
    if opts.epochs > 0 {
        model.trained_on.extend(grains.iter().map(|g| g.node));
    }
    let final_loss = mean_loss(model, grains)?;
    let valid_f1 = if valid.is_empty() { None } else { Some(accuracy(model, valid)?) };
    Ok(TrainReport {
        grains: grains.len(),
        steps,
        final_loss,
        valid_f1,
    })
}

/// Exactly one SGD step on a grain the model has never seen.
pub fn incremental_step(model: &mut SubModel, grain: &Grain, lr: f64, freeze_attention: bool) -> Result<f64> {
    if model.trained_on.contains(&grain.node) {
        return Err(Error::DoublePresentation(grain.node));
    }
    check_labeled(model, grain)?;
    let (loss, grad) = loss_and_grad(model, grain, !freeze_attention)?;
    if lr != 0.0 {
        model.params.add_scaled(&grad, -lr);
    }
    model.trained_on.insert(grain.node);
    Ok(loss)
}

pub fn mean_loss(model: &SubModel, grains: &[Grain]) -> Result<f64> {
    let mut total = 0.0;
    for g in grains {
        let y = check_labeled(model, g)?;
        total += model.forward(g)?.loss(y);
    }
    Ok(total / grains.len().max(1) as f64)
}

pub fn predict(model: &SubModel, grains: &[Grain]) -> Result<Vec<usize>> {
    grains.iter().map(|g| Ok(argmax(&model.predict_proba(g)?))).collect()
}

/// Fraction of labeled grains predicted correctly.
pub fn accuracy(model: &SubModel, grains: &[Grain]) -> Result<f64> {
    if grains.is_empty() {
        return Err(Error::Empty("no grains to evaluate".into()));
    }
    let mut hit = 0usize;
    for g in grains {
        let y = g
            .label
            .ok_or_else(|| Error::Data(format!("grain of node {} has no label", g.node)))?;
        if argmax(&model.predict_proba(g)?) == y {
            hit += 1;
        }
    }
    Ok(hit as f64 / grains.len() as f64)
}
