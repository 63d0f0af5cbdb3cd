//! Numerical witnesses for averaging-operator universality: fitting
//! continuous functionals by a single average, encoder-decoder fits of
//! operators, and the shift operator that no pointwise model can learn.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diff::{mlp_forward, Activation, Tape, Tensor};
use crate::error::{Error, Result};
use crate::field::{mean_over_domain, Field, Grid2D};
use crate::neuralop::{Basis, Decoder, NnoConfig, NnoModel};
use crate::pde::{Dataset, DatasetMeta, Task, TaskParams};
use crate::random_field::{sample_grf_one, GrfSpec};
use crate::train::{evaluate, fit, predict, HistoryRow, Normalizer, TrainConfig};

/// A continuous functional `alpha: L^1 -> R` with a closed form.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionalTarget {
    /// `mean(u xi)`.
    Linear { xi: Field },
    /// `mean(u^2)`.
    Energy,
    /// `log mean(exp u)`, a smooth stand-in for the maximum.
    MaxSmooth,
}

impl FunctionalTarget {
    /// `xi = cos(2 pi x_1)`.
    pub fn cosine(grid: &Grid2D) -> Self {
        let xi = Field::from_fn(*grid, 1, |x, _, _| (2.0 * std::f64::consts::PI * x).cos())
            .expect("finite weight");
        FunctionalTarget::Linear { xi }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FunctionalTarget::Linear { .. } => "linear",
            FunctionalTarget::Energy => "energy",
            FunctionalTarget::MaxSmooth => "max-smooth",
        }
    }

    pub fn eval(&self, u: &Field) -> Result<f64> {
        if u.channels() != 1 {
            return Err(Error::ShapeMismatch(
                "functionals act on scalar fields".into(),
            ));
        }
        let n = u.data().len() as f64;
        Ok(match self {
            FunctionalTarget::Linear { xi } => {
                if !xi.grid().same_points(u.grid()) {
                    return Err(Error::ShapeMismatch(
                        "weight and input live on different grids".into(),
                    ));
                }
                u.data()
                    .iter()
                    .zip(xi.data())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    / n
            }
            FunctionalTarget::Energy => u.data().iter().map(|a| a * a).sum::<f64>() / n,
            FunctionalTarget::MaxSmooth => {
                let m = u.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
                m + (u.data().iter().map(|a| (a - m).exp()).sum::<f64>() / n).ln()
            }
        })
    }
}

/// Compact input family: band-limited GRF samples clipped to `[-clip, clip]`,
/// plus a per-sample constant offset drawn uniformly from `offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputFamily {
    pub grf: GrfSpec,
    pub clip: f64,
    pub offset: (f64, f64),
}

impl InputFamily {
    /// `|k|_inf <= max_mode` with the default covariance in `basis`.
    pub fn band_limited(grf: GrfSpec, max_mode: usize) -> Self {
        Self {
            grf: GrfSpec {
                max_mode: Some(max_mode),
                ..grf
            },
            clip: 3.0,
            offset: (0.0, 0.0),
        }
    }

    pub fn sample(&self, grid: &Grid2D, index: u64) -> Result<Field> {
        let g = sample_grf_one(&self.grf, grid, index)?;
        let (lo, hi) = self.offset;
        let c = if hi > lo {
            let mut rng = ChaCha8Rng::seed_from_u64(self.grf.seed ^ 0x6f66_6673_6574);
            rng.set_stream(index);
            rng.random_range(lo..hi)
        } else {
            lo
        };
        g.map(|v| (v + c).clamp(-self.clip, self.clip))
    }

    pub fn samples(&self, grid: &Grid2D, n: usize) -> Result<Vec<Field>> {
        (0..n as u64).map(|i| self.sample(grid, i)).collect()
    }
}

fn synthetic_dataset(inputs: Vec<Field>, outputs: Vec<Field>, grf: GrfSpec) -> Result<Dataset> {
    let grid = *inputs
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty dataset".into()))?
        .grid();
    let meta = DatasetMeta {
        task: Task::Synthetic,
        grid,
        seed: grf.seed,
        grf,
        params: TaskParams::default(),
        groups: (0..inputs.len()).collect(),
    };
    Dataset::new(inputs, outputs, meta)
}

/// Training and held-out sizes plus the optimizer schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitBudget {
    pub n_train: usize,
    pub n_test: usize,
    pub train: TrainConfig,
}

fn split_first(ds: &Dataset, n_train: usize) -> Result<(Dataset, Dataset)> {
    let train: Vec<usize> = (0..n_train).collect();
    let test: Vec<usize> = (n_train..ds.len()).collect();
    Ok((ds.subset(&train)?, ds.subset(&test)?))
}

/// Inputs paired with constant output fields equal to `target(u)`.
pub fn functional_dataset(
    target: &FunctionalTarget,
    family: &InputFamily,
    grid: &Grid2D,
    n: usize,
) -> Result<Dataset> {
    let inputs = family.samples(grid, n)?;
    let outputs = inputs
        .iter()
        .map(|u| Ok(Field::constant(*grid, 1, target.eval(u)?)))
        .collect::<Result<Vec<_>>>()?;
    synthetic_dataset(inputs, outputs, family.grf)
}

/// `u -> q(act(T mean R(u(x), x) + b))` with affine `q` and no `x` in the
/// decoder, so the output field is constant.
pub fn functional_config(d_c: usize) -> NnoConfig {
    NnoConfig {
        activation: Activation::Gelu,
        projection_depth: 0,
        projection_coords: false,
        ..NnoConfig::ano(1, 1, d_c)
    }
}

/// Fresh parameters, optionally with spread coordinate features.
pub fn init_model(
    config: &NnoConfig,
    seed: u64,
    coord_scale: Option<f64>,
    grid: &Grid2D,
) -> Result<NnoModel> {
    let mut m = NnoModel::init(config, seed)?;
    if let Some(scale) = coord_scale {
        m.spread_coordinate_features(scale, grid, seed ^ 0x636f_6f72_6473)?;
    }
    Ok(m)
}

/// Input family, width and training budget of a functional fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalSetup {
    pub grid: usize,
    pub family: InputFamily,
    pub d_c: usize,
    /// Scale of the spread coordinate features; plain initialization when absent.
    pub coord_scale: Option<f64>,
    pub budget: FitBudget,
}

impl FunctionalSetup {
    pub fn new(family: InputFamily, d_c: usize, n_train: usize) -> Self {
        Self {
            grid: 16,
            family,
            d_c,
            coord_scale: Some(20.0),
            budget: FitBudget {
                n_train,
                n_test: 200,
                train: TrainConfig {
                    epochs: 80,
                    batch_size: 32,
                    lr0: 1e-2,
                    ..Default::default()
                },
            },
        }
    }
}

impl Default for FunctionalSetup {
    /// Neumann inputs band-limited to `|k|_inf <= 4`, `d_c = 32`, 2000 samples.
    fn default() -> Self {
        Self::new(InputFamily::band_limited(GrfSpec::neumann(11), 4), 32, 2000)
    }
}

#[derive(Debug, Clone)]
pub struct FunctionalFit {
    pub model: NnoModel,
    pub normalizer: Normalizer,
    /// Held-out mean absolute error over the targets' sample standard deviation.
    pub test_err: f64,
    pub predictions: Vec<f64>,
    pub targets: Vec<f64>,
    pub history: Vec<HistoryRow>,
}

impl FunctionalFit {
    pub fn predict(&self, u: &Field) -> Result<f64> {
        let ctx = self.model.context(u.grid())?;
        Ok(mean_over_domain(&predict(&self.model, &ctx, &self.normalizer, u)?)[0])
    }

    /// `|a(u + v) - a(u) - a(v) + a(0)|`, zero for an affine functional.
    pub fn additivity_defect(&self, u: &Field, v: &Field) -> Result<f64> {
        let zero = Field::zeros(*u.grid(), 1);
        Ok(
            (self.predict(&u.add(v)?)? - self.predict(u)? - self.predict(v)?
                + self.predict(&zero)?)
            .abs(),
        )
    }
}

/// Mean absolute error relative to the sample standard deviation of `targets`.
pub fn relative_mae(predictions: &[f64], targets: &[f64]) -> f64 {
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let std = (targets.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n).sqrt();
    let mae = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / n;
    mae / std
}

/// Trains a single-average network on `target` over samples of the setup's family.
pub fn train_functional_average(
    target: &FunctionalTarget,
    setup: &FunctionalSetup,
    seed: u64,
) -> Result<FunctionalFit> {
    let grid = Grid2D::unit(setup.grid)?;
    let budget = &setup.budget;
    let ds = functional_dataset(target, &setup.family, &grid, budget.n_train + budget.n_test)?;
    let (train, test) = split_first(&ds, budget.n_train)?;
    let normalizer = Normalizer::fit(&train);
    let init = init_model(
        &functional_config(setup.d_c),
        seed,
        setup.coord_scale,
        &grid,
    )?;
    let (model, history) = fit(&init, &train, None, &budget.train, &normalizer)?;
    let ctx = model.context(&grid)?;
    let predictions = test
        .inputs
        .iter()
        .map(|u| Ok(mean_over_domain(&predict(&model, &ctx, &normalizer, u)?)[0]))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<f64> = test.outputs.iter().map(|y| y.data()[0]).collect();
    let test_err = relative_mae(&predictions, &targets);
    Ok(FunctionalFit {
        model,
        normalizer,
        test_err,
        predictions,
        targets,
        history,
    })
}

/// Encoded vector `act(T mean_p R(u_p, x_p) + b)` of a strict averaging
/// operator from scattered samples: `values` is `[points, c_in]`, `coords`
/// `[points, 2]` (ignored without positional encoding).
pub fn averaged_encoding(model: &NnoModel, values: &[f64], coords: &[f64]) -> Result<Vec<f64>> {
    let c = &model.config;
    if !c.is_strict_ano() {
        return Err(Error::Config(
            "averaged_encoding needs a strict averaging operator".into(),
        ));
    }
    let points = values.len() / c.in_channels;
    if points == 0 || values.len() != points * c.in_channels || coords.len() != points * 2 {
        return Err(Error::ShapeMismatch(
            "values and coordinates disagree".into(),
        ));
    }
    let mut tape = Tape::new();
    let lifting = model.lifting.bind(&mut tape);
    let u = tape.constant(Tensor::matrix(points, c.in_channels, values.to_vec())?);
    let input = if c.positional_encoding {
        let x = tape.constant(Tensor::matrix(points, 2, coords.to_vec())?);
        tape.concat_cols(&[u, x])?
    } else {
        u
    };
    let r = mlp_forward(&mut tape, &lifting, input)?;
    let m = tape.mean_rows(r);
    let layer = &model.layers[0];
    let t = tape.constant(layer.t.clone().expect("constant basis has T"));
    let b = tape.constant(layer.b.clone());
    let mt = tape.matmul(m, t)?;
    let pre = tape.add_row(mt, b)?;
    let h = tape.activation(pre, c.activation);
    Ok(tape.value(h).data().to_vec())
}

/// `Psi(u)(x) = u(x + h)` for a grid-aligned offset `h`.
pub fn shift_target(u: &Field, h: (f64, f64)) -> Result<Field> {
    let g = u.grid();
    let cells = |off: f64, d: f64| -> Result<isize> {
        let s = off / d;
        if (s - s.round()).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "shift {off} is not a multiple of the spacing {d}"
            )));
        }
        Ok(s.round() as isize)
    };
    Ok(u.roll(cells(h.0, g.dx())?, cells(h.1, g.dy())?))
}

pub fn shift_dataset(
    family: &InputFamily,
    grid: &Grid2D,
    n: usize,
    h: (f64, f64),
) -> Result<Dataset> {
    let inputs = family.samples(grid, n)?;
    let outputs = inputs
        .iter()
        .map(|u| shift_target(u, h))
        .collect::<Result<Vec<_>>>()?;
    synthetic_dataset(inputs, outputs, family.grf)
}

/// `Psi(u) = mean(u) eta` on inputs offset to keep `mean(u)` away from zero.
pub fn rank_one_dataset(
    family: &InputFamily,
    grid: &Grid2D,
    n: usize,
    eta: &Field,
) -> Result<Dataset> {
    let inputs = family.samples(grid, n)?;
    let outputs = inputs
        .iter()
        .map(|u| eta.scaled(mean_over_domain(u)[0]))
        .collect::<Result<Vec<_>>>()?;
    synthetic_dataset(inputs, outputs, family.grf)
}

#[derive(Debug, Clone)]
pub struct OperatorFit {
    pub model: NnoModel,
    pub normalizer: Normalizer,
    pub train_err: f64,
    pub test_err: f64,
    pub history: Vec<HistoryRow>,
}

/// Trains `config` on `train` and scores both splits with relative L2.
pub fn fit_operator(
    config: &NnoConfig,
    train: &Dataset,
    test: &Dataset,
    cfg: &TrainConfig,
    seed: u64,
    coord_scale: Option<f64>,
) -> Result<OperatorFit> {
    let normalizer = Normalizer::fit(train);
    let init = init_model(config, seed, coord_scale, train.grid())?;
    let (model, history) = fit(&init, train, None, cfg, &normalizer)?;
    let train_err = evaluate(&model, train, &normalizer)?.mean;
    let test_err = evaluate(&model, test, &normalizer)?.mean;
    Ok(OperatorFit {
        model,
        normalizer,
        train_err,
        test_err,
        history,
    })
}

/// Averaging encoder with a `J`-term linear decoder,
/// `Psi(u) ~ sum_j alpha_j(u) eta_j`.
pub fn encoder_decoder_config(
    in_channels: usize,
    out_channels: usize,
    d_c: usize,
    j: usize,
) -> Result<NnoConfig> {
    if j == 0 {
        return Err(Error::Config("J must be at least 1".into()));
    }
    let c = NnoConfig {
        decoder: Decoder::Linear { j },
        ..NnoConfig::ano(in_channels, out_channels, d_c)
    };
    c.validate()?;
    Ok(c)
}

pub fn encoder_decoder_fit(
    train: &Dataset,
    test: &Dataset,
    j: usize,
    d_c: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<OperatorFit> {
    let config = encoder_decoder_config(train.in_channels(), train.out_channels(), d_c, j)?;
    fit_operator(&config, train, test, cfg, seed, None)
}

/// Pointwise network of the same depth as an FNO: no nonlocal term at all.
pub fn local_config(d_c: usize) -> NnoConfig {
    NnoConfig {
        basis: Basis::Local,
        ..NnoConfig::fno(1, 1, d_c, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftDemo {
    pub local_test_err: f64,
    pub ano_test_err: f64,
}

/// Setup shared by the shift experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftSetup {
    pub grid: usize,
    pub family: InputFamily,
    pub h: (f64, f64),
    pub budget: FitBudget,
    pub ano: NnoConfig,
    pub local: NnoConfig,
    /// Spread coordinate features of the averaging operator.
    pub coord_scale: Option<f64>,
}

impl ShiftSetup {
    /// Quarter-period shift of periodic fields band-limited to `|k|_inf <= 4`.
    pub fn quarter_period(seed: u64) -> Self {
        Self {
            grid: 16,
            family: InputFamily::band_limited(GrfSpec::periodic(seed), 4),
            h: (0.25, 0.0),
            budget: FitBudget {
                n_train: 400,
                n_test: 100,
                train: TrainConfig {
                    epochs: 60,
                    batch_size: 4,
                    lr0: 2e-3,
                    ..Default::default()
                },
            },
            ano: NnoConfig {
                activation: Activation::Gelu,
                decoder: Decoder::Linear { j: 64 },
                ..NnoConfig::ano(1, 1, 64)
            },
            local: local_config(32),
            coord_scale: Some(20.0),
        }
    }

    pub fn datasets(&self) -> Result<(Dataset, Dataset)> {
        let grid = Grid2D::unit(self.grid)?;
        let ds = shift_dataset(
            &self.family,
            &grid,
            self.budget.n_train + self.budget.n_test,
            self.h,
        )?;
        split_first(&ds, self.budget.n_train)
    }
}

pub fn shift_demo(setup: &ShiftSetup, seed: u64) -> Result<ShiftDemo> {
    let (train, test) = setup.datasets()?;
    let local = fit_operator(&setup.local, &train, &test, &setup.budget.train, seed, None)?;
    let ano = fit_operator(
        &setup.ano,
        &train,
        &test,
        &setup.budget.train,
        seed,
        setup.coord_scale,
    )?;
    Ok(ShiftDemo {
        local_test_err: local.test_err,
        ano_test_err: ano.test_err,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthRow {
    pub d_c: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub param_count: usize,
    pub train_err: f64,
    pub test_err: f64,
    /// Error of the held-out outputs' domain means alone (truncation at `K = 0`).
    pub mean_only_err: f64,
    pub seconds: f64,
}

/// Test error of the setup's averaging operator for every `(d_c, seed)`.
pub fn width_study(setup: &ShiftSetup, widths: &[usize], seeds: &[u64]) -> Result<Vec<WidthRow>> {
    let (train, test) = setup.datasets()?;
    let mean_only_err = crate::train::fourier_truncation_baseline(&test, 0, None)?;
    let mut rows = Vec::new();
    for &d_c in widths {
        for &seed in seeds {
            let config = NnoConfig {
                d_c,
                ..setup.ano.clone()
            };
            let t = std::time::Instant::now();
            let r = fit_operator(
                &config,
                &train,
                &test,
                &setup.budget.train,
                seed,
                setup.coord_scale,
            )?;
            log::info!("width study d_c={d_c} seed={seed}: test {:.4}", r.test_err);
            rows.push(WidthRow {
                d_c,
                seed,
                n_train: train.len(),
                n_test: test.len(),
                param_count: r.model.param_count(),
                train_err: r.train_err,
                test_err: r.test_err,
                mean_only_err,
                seconds: t.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(rows)
}

/// Median of a non-empty slice (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median test error per width, in the order widths first appear.
pub fn median_by_width(rows: &[WidthRow]) -> Vec<(usize, f64)> {
    let mut widths: Vec<usize> = Vec::new();
    for r in rows {
        if !widths.contains(&r.d_c) {
            widths.push(r.d_c);
        }
    }
    widths
        .into_iter()
        .map(|d| {
            let errs: Vec<f64> = rows
                .iter()
                .filter(|r| r.d_c == d)
                .map(|r| r.test_err)
                .collect();
            (d, median(&errs))
        })
        .collect()
}

/// Test error per `J`, `Psi(u) ~ sum_{j <= J} alpha_j(u) eta_j`.
pub fn encoder_decoder_sweep(
    train: &Dataset,
    test: &Dataset,
    js: &[usize],
    d_c: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    js.iter()
        .map(|&j| {
            Ok((
                j,
                encoder_decoder_fit(train, test, j, d_c, cfg, seed)?.test_err,
            ))
        })
        .collect()
}

/// Prediction of a functional fit on constant inputs `u = c`.
pub fn constant_input_curve(
    fit: &FunctionalFit,
    grid: &Grid2D,
    values: &[f64],
) -> Result<Vec<(f64, f64)>> {
    values
        .iter()
        .map(|&c| Ok((c, fit.predict(&Field::constant(*grid, 1, c))?)))
        .collect()
}

/// `eta(x, y) = 1 + sin(pi x) cos(2 pi y) / 2`.
pub fn rank_one_eta(grid: &Grid2D) -> Field {
    use std::f64::consts::PI;
    Field::from_fn(*grid, 1, |x, y, _| {
        1.0 + 0.5 * (PI * x).sin() * (2.0 * PI * y).cos()
    })
    .expect("finite profile")
}

/// Setup of the rank-one witness `Psi(u) = mean(u) eta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankOneSetup {
    pub grid: usize,
    /// Inputs are offset by one so `mean(u)` stays away from zero.
    pub family: InputFamily,
    pub d_c: usize,
    pub budget: FitBudget,
}

impl Default for RankOneSetup {
    fn default() -> Self {
        Self {
            grid: 16,
            family: InputFamily {
                offset: (1.0, 1.0),
                ..InputFamily::band_limited(GrfSpec::neumann(3), 4)
            },
            d_c: 8,
            budget: FitBudget {
                n_train: 200,
                n_test: 50,
                train: TrainConfig {
                    epochs: 60,
                    batch_size: 10,
                    lr0: 5e-3,
                    ..Default::default()
                },
            },
        }
    }
}

pub fn rank_one_fit(setup: &RankOneSetup, seed: u64) -> Result<OperatorFit> {
    let grid = Grid2D::unit(setup.grid)?;
    let ds = rank_one_dataset(
        &setup.family,
        &grid,
        setup.budget.n_train + setup.budget.n_test,
        &rank_one_eta(&grid),
    )?;
    let (train, test) = split_first(&ds, setup.budget.n_train)?;
    encoder_decoder_fit(&train, &test, 1, setup.d_c, &setup.budget.train, seed)
}

/// All universality witnesses with their budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub functional: FunctionalSetup,
    pub rank_one: RankOneSetup,
    /// Local versus averaging models on the shift operator.
    pub shift: ShiftSetup,
    /// Shift setup of the width study; its `ano.d_c` is replaced by each width.
    pub width: ShiftSetup,
    pub widths: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Input pairs for the additivity diagnostic.
    pub additivity_pairs: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        let shift = ShiftSetup::quarter_period(12);
        let mut width = shift.clone();
        width.budget = FitBudget {
            n_train: 200,
            n_test: 100,
            train: TrainConfig {
                epochs: 40,
                batch_size: 4,
                lr0: 2e-3,
                ..Default::default()
            },
        };
        Self {
            functional: FunctionalSetup::default(),
            rank_one: RankOneSetup::default(),
            width,
            shift,
            widths: vec![4, 16, 64],
            seeds: vec![0, 1, 2],
            additivity_pairs: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub functional_err: f64,
    /// Mean additivity defect over held-out pairs, relative to the target's
    /// standard deviation.
    pub additivity_defect: f64,
    pub shift: ShiftDemo,
    pub rank_one_err: f64,
    pub widths: Vec<WidthRow>,
    pub width_medians: Vec<(usize, f64)>,
    /// Wall-clock seconds of the functional, shift, rank-one and width parts.
    pub seconds: [f64; 4],
}

impl SuiteReport {
    /// Median test error never increases with the width.
    pub fn widths_monotone(&self) -> bool {
        self.width_medians.windows(2).all(|w| w[1].1 <= w[0].1)
    }
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let clock = std::time::Instant::now();
    let mut seconds = [0.0; 4];
    let mut lap = |i: usize, t: &mut f64| {
        seconds[i] = clock.elapsed().as_secs_f64() - *t;
        *t += seconds[i];
    };
    let mut t = 0.0;

    let grid = Grid2D::unit(cfg.functional.grid)?;
    let target = FunctionalTarget::cosine(&grid);
    let f = train_functional_average(&target, &cfg.functional, 0)?;
    let std = {
        let n = f.targets.len() as f64;
        let m = f.targets.iter().sum::<f64>() / n;
        (f.targets.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt()
    };
    let base = cfg.functional.budget.n_train as u64 + cfg.functional.budget.n_test as u64;
    let mut defect = 0.0;
    for i in 0..cfg.additivity_pairs as u64 {
        let u = cfg.functional.family.sample(&grid, base + 2 * i)?;
        let v = cfg.functional.family.sample(&grid, base + 2 * i + 1)?;
        defect += f.additivity_defect(&u, &v)?;
    }
    let additivity_defect = defect / cfg.additivity_pairs.max(1) as f64 / std;
    log::info!(
        "functional fit: test {:.4}, additivity defect {:.4}",
        f.test_err,
        additivity_defect
    );
    lap(0, &mut t);

    let shift = shift_demo(&cfg.shift, 0)?;
    log::info!(
        "shift: local {:.4}, averaging {:.4}",
        shift.local_test_err,
        shift.ano_test_err
    );
    lap(1, &mut t);

    let rank_one_err = rank_one_fit(&cfg.rank_one, 0)?.test_err;
    log::info!("rank-one: {:.4}", rank_one_err);
    lap(2, &mut t);

    let widths = width_study(&cfg.width, &cfg.widths, &cfg.seeds)?;
    let width_medians = median_by_width(&widths);
    lap(3, &mut t);

    Ok(SuiteReport {
        functional_err: f.test_err,
        additivity_defect,
        shift,
        rank_one_err,
        widths,
        width_medians,
        seconds,
    })
}
