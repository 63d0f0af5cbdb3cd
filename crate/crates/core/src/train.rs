//! Supervised training: normalization, Adam with cosine annealing, the
//! relative L2 metric and the Fourier-truncation reference.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diff::{Tape, Tensor};
use crate::error::{Error, Result};
use crate::field::{rel_l2_error, Field, Grid2D};
use crate::neuralop::{forward_on, model_forward_in, GridContext, NnoModel};
use crate::pde::Dataset;
use crate::spectral::truncate_modes;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub lr: f64,
    pub train_mse: f64,
    pub test_rel_l2: Option<f64>,
}

/// Training loss above which a run counts as diverged.
pub const DIVERGENCE_LOSS: f64 = 1e6;

/// `lr0 (1 + cos(pi step / total)) / 2`.
pub fn cosine_lr(lr0: f64, step: usize, total: usize) -> f64 {
    if total == 0 {
        return lr0;
    }
    let s = step.min(total) as f64 / total as f64;
    lr0 * 0.5 * (1.0 + (std::f64::consts::PI * s).cos())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &[&Tensor]) -> Self {
        Self {
            step: 0,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// One Adam update with bias correction.
///
/// Weight decay is decoupled (`p -= lr wd p` before the moment update)
/// unless `coupled`, in which case `wd p` is added to the gradient. Fails
/// without touching anything when a gradient entry is not finite.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
    coupled: bool,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} parameters, {} gradients, {} optimizer slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || state.m[i].len() != p.len() {
            return Err(Error::ShapeMismatch(format!(
                "gradient {i}: {:?} vs {:?}",
                g.shape(),
                p.shape()
            )));
        }
        if let Some(entry) = g.data().iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteGradient { param: i, entry });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for (((x, &gi), mi), vi) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            let gi = if coupled { gi + weight_decay * *x } else { gi };
            if !coupled {
                *x -= lr * weight_decay * *x;
            }
            *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * gi;
            *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * gi * gi;
            *x -= lr * (*mi / c1) / ((*vi / c2).sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}

fn default_eval_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub shuffle: bool,
    /// Add weight decay to the gradient instead of shrinking the weights.
    pub coupled_wd: bool,
    /// Evaluate on the test split every this many epochs (and after the last).
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 16,
            lr0: 1e-3,
            weight_decay: 1e-4,
            seed: 0,
            shuffle: true,
            coupled_wd: false,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config(format!(
                "lr0 must be positive, got {}",
                self.lr0
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Pointwise standardization of inputs and outputs, `(f - mean) / (std + eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub in_mean: Field,
    pub in_std: Field,
    pub out_mean: Field,
    pub out_std: Field,
    pub eps: f64,
}

fn pointwise_stats(fields: &[Field]) -> (Field, Field) {
    let n = fields.len() as f64;
    let len = fields[0].data().len();
    let mut mean = vec![0.0; len];
    for f in fields {
        for (m, x) in mean.iter_mut().zip(f.data()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; len];
    for f in fields {
        for ((s, x), m) in var.iter_mut().zip(f.data()).zip(&mean) {
            *s += (x - m) * (x - m);
        }
    }
    let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
    let grid = *fields[0].grid();
    let c = fields[0].channels();
    (
        Field::new(grid, c, mean).expect("finite mean"),
        Field::new(grid, c, std).expect("finite std"),
    )
}

fn standardize(f: &Field, mean: &Field, std: &Field, eps: f64) -> Result<Field> {
    if f.data().len() != mean.data().len() {
        return Err(Error::ShapeMismatch(
            "field does not match normalizer".into(),
        ));
    }
    let data = f
        .data()
        .iter()
        .zip(mean.data())
        .zip(std.data())
        .map(|((x, m), s)| (x - m) / (s + eps))
        .collect();
    Field::new(*f.grid(), f.channels(), data)
}

fn unstandardize(f: &Field, mean: &Field, std: &Field, eps: f64) -> Result<Field> {
    if f.data().len() != mean.data().len() {
        return Err(Error::ShapeMismatch(
            "field does not match normalizer".into(),
        ));
    }
    let data = f
        .data()
        .iter()
        .zip(mean.data())
        .zip(std.data())
        .map(|((x, m), s)| x * (s + eps) + m)
        .collect();
    Field::new(*f.grid(), f.channels(), data)
}

impl Normalizer {
    pub const EPS: f64 = 1e-8;

    /// Statistics of a training split.
    pub fn fit(train: &Dataset) -> Self {
        let (in_mean, in_std) = pointwise_stats(&train.inputs);
        let (out_mean, out_std) = pointwise_stats(&train.outputs);
        Self {
            in_mean,
            in_std,
            out_mean,
            out_std,
            eps: Self::EPS,
        }
    }

    /// Zero mean, unit scale: every map is the identity.
    pub fn identity(grid: &Grid2D, in_channels: usize, out_channels: usize) -> Self {
        Self {
            in_mean: Field::zeros(*grid, in_channels),
            in_std: Field::constant(*grid, in_channels, 1.0),
            out_mean: Field::zeros(*grid, out_channels),
            out_std: Field::constant(*grid, out_channels, 1.0),
            eps: 0.0,
        }
    }

    pub fn normalize_input(&self, f: &Field) -> Result<Field> {
        standardize(f, &self.in_mean, &self.in_std, self.eps)
    }

    pub fn normalize_output(&self, f: &Field) -> Result<Field> {
        standardize(f, &self.out_mean, &self.out_std, self.eps)
    }

    pub fn denormalize_input(&self, f: &Field) -> Result<Field> {
        unstandardize(f, &self.in_mean, &self.in_std, self.eps)
    }

    pub fn denormalize_output(&self, f: &Field) -> Result<Field> {
        unstandardize(f, &self.out_mean, &self.out_std, self.eps)
    }
}

/// Mean and per-sample relative L2 errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean: f64,
    pub per_sample: Vec<f64>,
}

/// Denormalized model prediction for one raw input.
pub fn predict(
    model: &NnoModel,
    ctx: &GridContext,
    normalizer: &Normalizer,
    u: &Field,
) -> Result<Field> {
    let out = model_forward_in(model, ctx, &normalizer.normalize_input(u)?)?;
    normalizer.denormalize_output(&out)
}

/// Relative L2 error of the denormalized predictions against the truth.
pub fn evaluate(model: &NnoModel, data: &Dataset, normalizer: &Normalizer) -> Result<EvalReport> {
    let ctx = model.context(data.grid())?;
    let per_sample = data
        .inputs
        .par_iter()
        .zip(data.outputs.par_iter())
        .map(|(u, y)| rel_l2_error(&predict(model, &ctx, normalizer, u)?, y))
        .collect::<Result<Vec<f64>>>()?;
    let mean = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
    Ok(EvalReport { mean, per_sample })
}

/// Loss and parameter gradients of `mean((model(x) - y)^2)` for one sample.
fn sample_gradient(
    model: &NnoModel,
    ctx: &GridContext,
    x: &Field,
    y: &Tensor,
) -> Result<(f64, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let vars = model.bind(&mut tape);
    let pred = forward_on(&mut tape, model, &vars, ctx, x)?;
    let target = tape.constant(y.clone());
    let diff = tape.sub(pred, target)?;
    let sq = tape.mul(diff, diff)?;
    let loss = tape.mean_all(sq);
    let grads = tape.grad(loss, &vars.vars())?;
    Ok((tape.value(loss).data()[0], grads))
}

/// Minimizes the normalized-field MSE with Adam and per-step cosine
/// annealing.
///
/// Per-sample gradients are summed in batch order, so results depend only
/// on the seed and not on the number of threads. `test` (if any) is scored
/// with [`evaluate`] every `eval_every` epochs and after the last one.
pub fn fit(
    model: &NnoModel,
    train: &Dataset,
    test: Option<&Dataset>,
    cfg: &TrainConfig,
    normalizer: &Normalizer,
) -> Result<(NnoModel, Vec<HistoryRow>)> {
    cfg.validate()?;
    let mut model = model.clone();
    let mut history = Vec::with_capacity(cfg.epochs);
    if cfg.epochs == 0 {
        return Ok((model, history));
    }
    let ctx = model.context(train.grid())?;
    let xs = train
        .inputs
        .iter()
        .map(|u| normalizer.normalize_input(u))
        .collect::<Result<Vec<_>>>()?;
    let ys = train
        .outputs
        .iter()
        .map(|y| {
            let f = normalizer.normalize_output(y)?;
            Tensor::matrix(f.grid().len(), f.channels(), f.into_data())
        })
        .collect::<Result<Vec<_>>>()?;

    let n = train.len();
    let batches = n.div_ceil(cfg.batch_size);
    let total = cfg.epochs * batches;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = AdamState::new(&model.params());
    let mut step = 0;

    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let lr_epoch = cosine_lr(cfg.lr0, step, total);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let results = batch
                .par_iter()
                .map(|&i| sample_gradient(&model, &ctx, &xs[i], &ys[i]))
                .collect::<Result<Vec<_>>>()?;
            let inv = 1.0 / batch.len() as f64;
            let mut grads: Vec<Tensor> = model
                .params()
                .iter()
                .map(|p| Tensor::zeros(p.shape().to_vec()))
                .collect();
            for (loss, g) in &results {
                loss_sum += loss;
                for (acc, gi) in grads.iter_mut().zip(g) {
                    for (a, b) in acc.data_mut().iter_mut().zip(gi.data()) {
                        *a += b * inv;
                    }
                }
            }
            let batch_loss = results.iter().map(|r| r.0).sum::<f64>() * inv;
            if !batch_loss.is_finite() || batch_loss > DIVERGENCE_LOSS {
                history.push(HistoryRow {
                    epoch,
                    lr: lr_epoch,
                    train_mse: batch_loss,
                    test_rel_l2: None,
                });
                return Err(Error::Divergence {
                    epoch,
                    loss: batch_loss,
                    history,
                });
            }
            let lr = cosine_lr(cfg.lr0, step, total);
            adam_step(
                &mut model.params_mut(),
                &grads,
                &mut state,
                lr,
                cfg.weight_decay,
                cfg.coupled_wd,
            )?;
            step += 1;
        }
        let train_mse = loss_sum / n as f64;
        let test_rel_l2 = match test {
            Some(t) if epoch % cfg.eval_every == 0 || epoch == cfg.epochs => {
                Some(evaluate(&model, t, normalizer)?.mean)
            }
            _ => None,
        };
        log::debug!(
            "epoch {epoch}: lr {lr_epoch:.3e} train mse {train_mse:.4e} test {test_rel_l2:?}"
        );
        history.push(HistoryRow {
            epoch,
            lr: lr_epoch,
            train_mse,
            test_rel_l2,
        });
    }
    Ok((model, history))
}

/// Mean relative L2 error of projecting each true output onto
/// `|k|_inf <= k`.
///
/// With a normalizer the projection happens in standardized coordinates:
/// `mean + (std + eps) P_K((y - mean) / (std + eps))`.
pub fn fourier_truncation_baseline(
    data: &Dataset,
    k: usize,
    normalizer: Option<&Normalizer>,
) -> Result<f64> {
    let errs = data
        .outputs
        .par_iter()
        .map(|y| {
            let approx = match normalizer {
                Some(nz) => nz.denormalize_output(&truncate_modes(&nz.normalize_output(y)?, k)?)?,
                None => truncate_modes(y, k)?,
            };
            rel_l2_error(&approx, y)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::Activation;
    use crate::field::mean_over_domain;
    use crate::neuralop::{DecoderParams, NnoConfig};
    use crate::pde::{generate_dataset, DatasetMeta, Task, TaskParams};
    use crate::random_field::{sample_grf, GrfSpec};
    use rand::Rng;

    fn synthetic(grid: Grid2D, n: usize, seed: u64, f: impl Fn(&Field) -> Field) -> Dataset {
        with_spec(
            GrfSpec {
                max_mode: Some(4),
                ..GrfSpec::neumann(seed)
            },
            grid,
            n,
            f,
        )
    }

    fn with_spec(spec: GrfSpec, grid: Grid2D, n: usize, f: impl Fn(&Field) -> Field) -> Dataset {
        let seed = spec.seed;
        let inputs = sample_grf(&spec, &grid, n).unwrap();
        let outputs = inputs.iter().map(f).collect();
        let meta = DatasetMeta {
            task: Task::DarcyPc,
            grid,
            seed,
            grf: spec,
            params: TaskParams::default(),
            groups: (0..n).collect(),
        };
        Dataset::new(inputs, outputs, meta).unwrap()
    }

    #[test]
    fn cosine_schedule() {
        assert_eq!(cosine_lr(0.1, 0, 10), 0.1);
        assert!(cosine_lr(0.1, 10, 10).abs() < 1e-18);
        assert!((cosine_lr(0.1, 5, 10) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn adam_examples() {
        let mut x = Tensor::scalar(1.0);
        let mut state = AdamState::new(&[&x]);
        adam_step(
            &mut [&mut x],
            &[Tensor::scalar(2.0)],
            &mut state,
            0.1,
            0.0,
            false,
        )
        .unwrap();
        // m_hat = 2, v_hat = 4: x = 1 - 0.1 * 2 / (2 + 1e-8).
        let expect = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8);
        assert!((x.data()[0] - expect).abs() < 1e-15);
        assert!((x.data()[0] - 0.9).abs() < 1e-9);

        let mut y = Tensor::matrix(1, 3, vec![1.0, -2.0, 0.5]).unwrap();
        let orig = y.clone();
        let mut state = AdamState::new(&[&y]);
        adam_step(
            &mut [&mut y],
            &[Tensor::zeros(vec![1, 3])],
            &mut state,
            0.1,
            0.0,
            false,
        )
        .unwrap();
        assert_eq!(y, orig);
        adam_step(
            &mut [&mut y],
            &[Tensor::zeros(vec![1, 3])],
            &mut state,
            0.1,
            0.5,
            false,
        )
        .unwrap();
        for (a, b) in y.data().iter().zip(orig.data()) {
            assert!((a - b * 0.95).abs() < 1e-15);
        }

        let mut bad = Tensor::zeros(vec![1, 2]);
        let mut g = Tensor::zeros(vec![1, 2]);
        g.data_mut()[1] = f64::NAN;
        let mut state = AdamState::new(&[&bad]);
        let err = adam_step(&mut [&mut bad], &[g], &mut state, 0.1, 0.0, false).unwrap_err();
        assert!(matches!(
            err,
            Error::NonFiniteGradient { param: 0, entry: 1 }
        ));
        assert_eq!(state.step, 0);
    }

    #[test]
    fn adam_first_update_is_scale_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p0 = Tensor::matrix(1, 20, vec![0.0; 20]).unwrap();
        let step = |scale: f64| {
            let mut p = p0.clone();
            let mut state = AdamState::new(&[&p]);
            let grad = Tensor::matrix(1, 20, g.iter().map(|x| x * scale).collect()).unwrap();
            adam_step(&mut [&mut p], &[grad], &mut state, 1e-3, 0.0, false).unwrap();
            p
        };
        let (a, b) = (step(1.0), step(10.0));
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() / x.abs() < 1e-6);
        }
    }

    #[test]
    fn coupled_decay_enters_gradient() {
        let mut x = Tensor::scalar(2.0);
        let mut state = AdamState::new(&[&x]);
        adam_step(
            &mut [&mut x],
            &[Tensor::scalar(0.0)],
            &mut state,
            0.1,
            0.5,
            true,
        )
        .unwrap();
        // Gradient becomes 0.5 * 2 = 1, first Adam step moves by lr.
        assert!((x.data()[0] - (2.0 - 0.1 / (1.0 + 1e-8))).abs() < 1e-12);
    }

    #[test]
    fn config_checks() {
        assert!(TrainConfig {
            lr0: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            batch_size: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        let json = serde_json::json!({ "epochs": 3, "lr0": 0.01 });
        let cfg: TrainConfig = serde_json::from_value(json).unwrap();
        assert_eq!(cfg.batch_size, 16);
        assert!(serde_json::from_value::<TrainConfig>(serde_json::json!({ "epoch": 3 })).is_err());
    }

    #[test]
    fn normalizer_round_trip() {
        let g = Grid2D::unit(16).unwrap();
        let ds = synthetic(g, 12, 1, |u| u.map(|x| x * x + 1.0).unwrap());
        let nz = Normalizer::fit(&ds);
        for f in &ds.outputs {
            let back = nz
                .denormalize_output(&nz.normalize_output(f).unwrap())
                .unwrap();
            let err = back
                .data()
                .iter()
                .zip(f.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-10);
        }
        assert!(nz.in_std.data().iter().all(|s| s + nz.eps > 0.0));
        // Standardized training outputs have zero pointwise mean.
        let normed: Vec<Field> = ds
            .outputs
            .iter()
            .map(|f| nz.normalize_output(f).unwrap())
            .collect();
        for p in 0..g.len() {
            let m: f64 = normed.iter().map(|f| f.data()[p]).sum::<f64>() / 12.0;
            assert!(m.abs() < 1e-12);
        }
    }

    fn zero_output_model() -> NnoModel {
        let mut m = NnoModel::init(&NnoConfig::fno(1, 1, 2, 1), 0).unwrap();
        let DecoderParams::Mlp(q) = &mut m.decoder else {
            unreachable!()
        };
        *q = crate::diff::MlpParams::zeros(&q.widths, Activation::Gelu).unwrap();
        m
    }

    #[test]
    fn evaluate_examples() {
        let g = Grid2D::unit(8).unwrap();
        let ds = synthetic(g, 10, 2, |u| u.map(|x| x.sin() + 0.5).unwrap());
        let nz = Normalizer::fit(&ds);
        // A model whose normalized output is zero predicts the training mean.
        let m = zero_output_model();
        let r = evaluate(&m, &ds, &nz).unwrap();
        let oracle: Vec<f64> = ds
            .outputs
            .iter()
            .map(|y| rel_l2_error(&nz.out_mean, y).unwrap())
            .collect();
        for (a, b) in r.per_sample.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-7 * b.max(1.0));
        }
        assert_eq!(evaluate(&m, &ds, &nz).unwrap(), r);

        // Perfect prediction: identity normalizer and target = model output.
        let id = Normalizer::identity(&g, 1, 1);
        let model = NnoModel::init(&NnoConfig::fno(1, 1, 2, 1), 1).unwrap();
        let outs = ds
            .inputs
            .iter()
            .map(|u| crate::neuralop::model_forward(&model, u).unwrap())
            .collect();
        let exact = Dataset::new(ds.inputs.clone(), outs, ds.meta.clone()).unwrap();
        assert_eq!(evaluate(&model, &exact, &id).unwrap().mean, 0.0);
    }

    #[test]
    fn zero_epochs_keep_the_model() {
        let g = Grid2D::unit(8).unwrap();
        let ds = synthetic(g, 4, 3, |u| u.clone());
        let m = NnoModel::init(&NnoConfig::fno(1, 1, 2, 1), 0).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        let (out, hist) = fit(&m, &ds, None, &cfg, &Normalizer::fit(&ds)).unwrap();
        assert_eq!(out, m);
        assert!(hist.is_empty());
    }

    #[test]
    fn divergence_is_reported() {
        let g = Grid2D::unit(8).unwrap();
        let ds = synthetic(g, 4, 4, |u| u.map(|x| 1e5 * x).unwrap());
        let m = NnoModel::init(&NnoConfig::fno(1, 1, 2, 1), 0).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 2,
            ..Default::default()
        };
        let err = fit(&m, &ds, None, &cfg, &Normalizer::identity(&g, 1, 1)).unwrap_err();
        match err {
            Error::Divergence { epoch, history, .. } => {
                assert_eq!(epoch, 1);
                assert_eq!(history.len(), 1);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn fit_is_reproducible_without_shuffle() {
        let g = Grid2D::unit(8).unwrap();
        let ds = synthetic(g, 6, 5, |u| u.map(|x| x.tanh()).unwrap());
        let (train, test) = ds.split(2, 0).unwrap();
        let nz = Normalizer::fit(&train);
        let m = NnoModel::init(&NnoConfig::fno(1, 1, 4, 1), 2).unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 2,
            shuffle: false,
            ..Default::default()
        };
        let a = fit(&m, &train, Some(&test), &cfg, &nz).unwrap();
        let b = fit(&m, &train, Some(&test), &cfg, &nz).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.1.len(), 3);
        assert!(a.1.iter().all(|h| h.test_rel_l2.is_some()));
    }

    #[test]
    fn learns_the_identity_operator() {
        let g = Grid2D::unit(16).unwrap();
        let ds = synthetic(g, 40, 6, |u| u.clone());
        let (train, test) = ds.split(8, 1).unwrap();
        assert_eq!(train.len(), 32);
        let nz = Normalizer::fit(&train);
        // The identity is translation equivariant; coordinates would only
        // give the small training set something to overfit.
        let mut c = NnoConfig::fno(1, 1, 8, 2);
        c.positional_encoding = false;
        let m = NnoModel::init(&c, 3).unwrap();
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 2,
            lr0: 2e-3,
            eval_every: 50,
            ..Default::default()
        };
        let (trained, hist) = fit(&m, &train, Some(&test), &cfg, &nz).unwrap();
        let err = evaluate(&trained, &test, &nz).unwrap().mean;
        assert_eq!(hist.last().unwrap().test_rel_l2, Some(err));
        assert!(err < 1e-2, "identity test error {err}");
    }

    #[test]
    fn darcy_loss_decreases_early() {
        let g = Grid2D::unit(16).unwrap();
        let ds = generate_dataset(Task::DarcyPc, &g, 24, 7, &TaskParams::default()).unwrap();
        let nz = Normalizer::fit(&ds);
        let m = NnoModel::init(&NnoConfig::fno(1, 1, 8, 2), 4).unwrap();
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 4,
            lr0: 1e-3,
            ..Default::default()
        };
        let (_, hist) = fit(&m, &ds, None, &cfg, &nz).unwrap();
        for w in hist.windows(2) {
            assert!(w[1].train_mse < w[0].train_mse, "{hist:?}");
        }
    }

    #[test]
    fn truncation_baseline_examples() {
        let g = Grid2D::unit(16).unwrap();
        // Band-limited outputs carry no Nyquist content: the maximal radius
        // reproduces them.
        let ds = with_spec(
            GrfSpec {
                max_mode: Some(7),
                ..GrfSpec::periodic(8)
            },
            g,
            6,
            |u| u.clone(),
        );
        assert!(fourier_truncation_baseline(&ds, 7, None).unwrap() <= 1e-10);

        let darcy = generate_dataset(Task::DarcyPc, &g, 6, 9, &TaskParams::default()).unwrap();
        let errs: Vec<f64> = (0..=7)
            .map(|k| fourier_truncation_baseline(&darcy, k, None).unwrap())
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "{errs:?}");
        }
        // K = 0 keeps only the mean.
        let mean_err: f64 = darcy
            .outputs
            .iter()
            .map(|y| {
                let m = mean_over_domain(y)[0];
                rel_l2_error(&Field::constant(g, 1, m), y).unwrap()
            })
            .sum::<f64>()
            / 6.0;
        assert!((errs[0] - mean_err).abs() < 1e-12);
    }
}
