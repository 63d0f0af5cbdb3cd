//! Nonlocal neural operators `Q o L_L o ... o L_1 o R`.
//!
//! Every hidden layer has the form
//! `v -> act(v W + b + sum_m <T_m v, psi_m> phi_m)` where the basis
//! `{psi_m, phi_m}` is fixed and only the multipliers `T_m` are trained. The
//! basis kinds are the domain average (ANO), truncated Fourier modes (FNO),
//! truncated Neumann-Laplacian eigenfunctions and, for comparison, nothing at
//! all (a purely pointwise network).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::diff::{
    mlp_forward, Activation, CosineConvPlan, MlpParams, MlpVars, SpectralConvPlan, Tape, Tensor,
    Var,
};
use crate::error::{Error, Result};
use crate::field::{coords_field, Field, Grid2D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Basis {
    /// Fourier modes with `|k|_inf <= modes`.
    Fourier { modes: usize },
    /// The constant function: the nonlocal term is `T mean(v)`.
    Constant,
    /// Neumann cosine eigenfunctions with `0 <= k1, k2 <= modes`.
    LaplaceNeumann { modes: usize },
    /// No nonlocal term.
    Local,
}

impl Basis {
    pub fn modes(&self) -> Option<usize> {
        match *self {
            Basis::Fourier { modes } | Basis::LaplaceNeumann { modes } => Some(modes),
            Basis::Constant | Basis::Local => None,
        }
    }

    /// True when the nonlocal term only sees the domain average.
    pub fn is_averaging(&self) -> bool {
        matches!(self, Basis::Constant) || self.modes() == Some(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Decoder {
    /// Pointwise network `Q(v(x), x)`.
    Mlp,
    /// `sum_j beta_j(v) tau_j(x)`: a linear map of the (constant) encoded
    /// vector to `j` coefficients times `j` trunk fields produced by an MLP
    /// of `x`.
    Linear { j: usize },
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NnoConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub d_c: usize,
    pub layers: usize,
    pub basis: Basis,
    pub activation: Activation,
    /// Hidden layers of the lifting network (0 makes it affine).
    pub lifting_depth: usize,
    pub lifting_width: usize,
    pub projection_depth: usize,
    pub projection_width: usize,
    pub decoder: Decoder,
    /// Append grid coordinates to the lifting input.
    #[serde(default = "default_true")]
    pub positional_encoding: bool,
    /// Let the projection network see the coordinates too.
    #[serde(default)]
    pub projection_coords: bool,
    /// Pointwise matrix `W` in the hidden layers.
    #[serde(default = "default_true")]
    pub use_w: bool,
}

impl NnoConfig {
    /// Four GeLU Fourier layers with an affine lift and one hidden
    /// projection layer.
    pub fn fno(in_channels: usize, out_channels: usize, d_c: usize, modes: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            d_c,
            layers: 4,
            basis: Basis::Fourier { modes },
            activation: Activation::Gelu,
            lifting_depth: 0,
            lifting_width: 64,
            projection_depth: 1,
            projection_width: 64,
            decoder: Decoder::Mlp,
            positional_encoding: true,
            projection_coords: false,
            use_w: true,
        }
    }

    /// One averaging layer without `W`, tanh, coordinates fed to both
    /// pointwise networks.
    pub fn ano(in_channels: usize, out_channels: usize, d_c: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            d_c,
            layers: 1,
            basis: Basis::Constant,
            activation: Activation::Tanh,
            lifting_depth: 1,
            lifting_width: 64,
            projection_depth: 1,
            projection_width: 64,
            decoder: Decoder::Mlp,
            positional_encoding: true,
            projection_coords: true,
            use_w: false,
        }
    }

    /// True when the hidden state is constant in `x` by construction.
    pub fn encodes_constant(&self) -> bool {
        !self.use_w && self.basis.is_averaging()
    }

    pub fn is_strict_ano(&self) -> bool {
        self.layers == 1 && self.basis == Basis::Constant && !self.use_w
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.in_channels == 0 || self.out_channels == 0 {
            return bad("channel counts must be positive");
        }
        if self.d_c == 0 {
            return bad("d_c must be at least 1");
        }
        if self.layers == 0 {
            return bad("at least one hidden layer is required");
        }
        if self.lifting_depth > 0 && self.lifting_width == 0
            || self.projection_depth > 0 && self.projection_width == 0
        {
            return bad("hidden widths must be positive");
        }
        if let Decoder::Linear { j } = self.decoder {
            if j == 0 {
                return bad("linear decoder needs j >= 1");
            }
            if !self.encodes_constant() {
                return bad("linear decoder needs an x-independent encoding (averaging basis, use_w = false)");
            }
        }
        Ok(())
    }

    fn lift_input(&self) -> usize {
        self.in_channels + if self.positional_encoding { 2 } else { 0 }
    }

    fn hidden_widths(input: usize, depth: usize, width: usize, output: usize) -> Vec<usize> {
        let mut w = vec![input];
        w.extend(std::iter::repeat_n(width, depth));
        w.push(output);
        w
    }

    fn lifting_widths(&self) -> Vec<usize> {
        Self::hidden_widths(
            self.lift_input(),
            self.lifting_depth,
            self.lifting_width,
            self.d_c,
        )
    }

    fn projection_widths(&self) -> Vec<usize> {
        let input = self.d_c + if self.projection_coords { 2 } else { 0 };
        Self::hidden_widths(
            input,
            self.projection_depth,
            self.projection_width,
            self.out_channels,
        )
    }

    fn trunk_widths(&self, j: usize) -> Vec<usize> {
        Self::hidden_widths(
            2,
            self.projection_depth,
            self.projection_width,
            j * self.out_channels,
        )
    }

    fn multiplier_blocks(&self) -> usize {
        match self.basis {
            Basis::Fourier { modes } => (2 * modes + 1).pow(2),
            Basis::LaplaceNeumann { modes } => (modes + 1).pow(2),
            Basis::Constant => 1,
            Basis::Local => 0,
        }
    }
}

fn mlp_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Exact number of trainable scalars of a model with this configuration.
///
/// A Fourier layer stores `(2K+1)^2` real `d_c x d_c` blocks: the real
/// zero mode plus real and imaginary parts of the `((2K+1)^2 - 1) / 2`
/// modes of the half lattice (conjugate symmetry supplies the rest).
pub fn param_count(config: &NnoConfig) -> usize {
    let d = config.d_c;
    let layer = config.multiplier_blocks() * d * d + d + if config.use_w { d * d } else { 0 };
    let decoder = match config.decoder {
        Decoder::Mlp => mlp_count(&config.projection_widths()),
        Decoder::Linear { j } => d * j + j + mlp_count(&config.trunk_widths(j)),
    };
    mlp_count(&config.lifting_widths()) + config.layers * layer + decoder
}

/// `(d_c, K)` pairs with `d_c K = budget`, `K` in `{2, 4, 8, ...}` and
/// `d_c >= 2`.
pub fn budget_pairs(budget: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut k = 2;
    while k <= budget / 2 {
        if budget % k == 0 {
            out.push((budget / k, k));
        }
        k *= 2;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// `[d_c, d_c]`, absent when `use_w` is off.
    pub w: Option<Tensor>,
    /// `[1, d_c]`.
    pub b: Tensor,
    /// Basis multipliers: `[d_c, d_c]` for the constant basis,
    /// `[blocks, d_c, d_c]` for Fourier and cosine bases, absent for `Local`.
    pub t: Option<Tensor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DecoderParams {
    Mlp(MlpParams),
    Linear {
        /// `[d_c, J]`.
        a: Tensor,
        /// `[1, J]`.
        bias: Tensor,
        trunk: MlpParams,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnoModel {
    pub config: NnoConfig,
    pub lifting: MlpParams,
    pub layers: Vec<LayerParams>,
    pub decoder: DecoderParams,
}

/// Tape handles of a bound model.
#[derive(Debug, Clone)]
pub struct ModelVars {
    lifting: MlpVars,
    layers: Vec<(Option<Var>, Var, Option<Var>)>,
    decoder: DecoderVars,
}

#[derive(Debug, Clone)]
enum DecoderVars {
    Mlp(MlpVars),
    Linear { a: Var, bias: Var, trunk: MlpVars },
}

impl ModelVars {
    /// Handles in parameter declaration order.
    pub fn vars(&self) -> Vec<Var> {
        let mut out = self.lifting.vars();
        for &(w, b, t) in &self.layers {
            out.extend(w);
            out.push(b);
            out.extend(t);
        }
        match &self.decoder {
            DecoderVars::Mlp(q) => out.extend(q.vars()),
            DecoderVars::Linear { a, bias, trunk } => {
                out.push(*a);
                out.push(*bias);
                out.extend(trunk.vars());
            }
        }
        out
    }
}

/// Grid-dependent pieces shared by every forward pass on one grid.
#[derive(Debug, Clone)]
pub struct GridContext {
    grid: Grid2D,
    coords: Tensor,
    spectral: Option<Arc<SpectralConvPlan>>,
    cosine: Option<Arc<CosineConvPlan>>,
}

impl GridContext {
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }
}

fn uniform(shape: Vec<usize>, scale: f64, rng: &mut impl Rng) -> Result<Tensor> {
    let n = shape.iter().product();
    Tensor::new(
        shape,
        (0..n).map(|_| rng.random_range(-scale..scale)).collect(),
    )
}

impl NnoModel {
    /// Glorot-uniform pointwise weights, zero biases and basis multipliers
    /// uniform in `+-1 / (d_c (2K+1))`.
    pub fn init(config: &NnoConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.d_c;
        let lifting = MlpParams::glorot(&config.lifting_widths(), config.activation, &mut rng)?;
        let t_scale = 1.0 / (d * (2 * config.basis.modes().unwrap_or(0) + 1)) as f64;
        let glorot = (6.0 / (2 * d) as f64).sqrt();
        let mut layers = Vec::with_capacity(config.layers);
        for _ in 0..config.layers {
            let w = if config.use_w {
                Some(uniform(vec![d, d], glorot, &mut rng)?)
            } else {
                None
            };
            let t = match config.basis {
                Basis::Local => None,
                Basis::Constant => Some(uniform(vec![d, d], t_scale, &mut rng)?),
                _ => Some(uniform(
                    vec![config.multiplier_blocks(), d, d],
                    t_scale,
                    &mut rng,
                )?),
            };
            layers.push(LayerParams {
                w,
                b: Tensor::zeros(vec![1, d]),
                t,
            });
        }
        let decoder = match config.decoder {
            Decoder::Mlp => DecoderParams::Mlp(MlpParams::glorot(
                &config.projection_widths(),
                config.activation,
                &mut rng,
            )?),
            Decoder::Linear { j } => DecoderParams::Linear {
                a: uniform(vec![d, j], (6.0 / (d + j) as f64).sqrt(), &mut rng)?,
                bias: Tensor::zeros(vec![1, j]),
                trunk: MlpParams::glorot(&config.trunk_widths(j), config.activation, &mut rng)?,
            },
        };
        Ok(Self {
            config: config.clone(),
            lifting,
            layers,
            decoder,
        })
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// Re-initializes the first hidden layer of every network that reads the
    /// coordinates: coordinate weights are multiplied by `scale` and each
    /// unit's bias is set so its pre-activation vanishes at a uniformly random
    /// point of `[0, lx] x [0, ly]`. With the default tiny coordinate weights
    /// every unit is nearly affine in `x`, and oscillatory position
    /// dependence is then very slow to learn.
    pub fn spread_coordinate_features(
        &mut self,
        scale: f64,
        grid: &Grid2D,
        seed: u64,
    ) -> Result<()> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "coordinate scale must be positive, got {scale}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lx, ly) = (grid.lx(), grid.ly());
        let mut spread = |mlp: &mut MlpParams, row: usize| {
            if mlp.weights.len() < 2 {
                return;
            }
            let cols = mlp.weights[0].shape()[1];
            let w = mlp.weights[0].data_mut();
            for v in &mut w[row * cols..(row + 2) * cols] {
                *v *= scale;
            }
            let (wx, wy) = (
                w[row * cols..(row + 1) * cols].to_vec(),
                w[(row + 1) * cols..(row + 2) * cols].to_vec(),
            );
            for (i, b) in mlp.biases[0].data_mut().iter_mut().enumerate() {
                let (px, py) = (rng.random_range(0.0..lx), rng.random_range(0.0..ly));
                *b = -(wx[i] * px + wy[i] * py);
            }
        };
        if self.config.positional_encoding {
            spread(&mut self.lifting, self.config.in_channels);
        }
        match &mut self.decoder {
            DecoderParams::Mlp(q) if self.config.projection_coords => spread(q, self.config.d_c),
            DecoderParams::Mlp(_) => {}
            DecoderParams::Linear { trunk, .. } => spread(trunk, 0),
        }
        Ok(())
    }

    /// Parameter tensors in declaration order: lifting network, then per
    /// layer `W`, `b`, `T`, then the decoder.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = self.lifting.tensors();
        for l in &self.layers {
            out.extend(l.w.as_ref());
            out.push(&l.b);
            out.extend(l.t.as_ref());
        }
        match &self.decoder {
            DecoderParams::Mlp(q) => out.extend(q.tensors()),
            DecoderParams::Linear { a, bias, trunk } => {
                out.push(a);
                out.push(bias);
                out.extend(trunk.tensors());
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.lifting.tensors_mut();
        for l in &mut self.layers {
            out.extend(l.w.as_mut());
            out.push(&mut l.b);
            out.extend(l.t.as_mut());
        }
        match &mut self.decoder {
            DecoderParams::Mlp(q) => out.extend(q.tensors_mut()),
            DecoderParams::Linear { a, bias, trunk } => {
                out.push(a);
                out.push(bias);
                out.extend(trunk.tensors_mut());
            }
        }
        out
    }

    /// Replaces every parameter, checking shapes.
    pub fn set_params(&mut self, values: Vec<Tensor>) -> Result<()> {
        let mut slots = self.params_mut();
        if slots.len() != values.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} tensors, got {}",
                slots.len(),
                values.len()
            )));
        }
        for (slot, v) in slots.iter().zip(&values) {
            if slot.shape() != v.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "parameter shape {:?} vs {:?}",
                    slot.shape(),
                    v.shape()
                )));
            }
        }
        for (slot, v) in slots.iter_mut().zip(values) {
            **slot = v;
        }
        Ok(())
    }

    /// Registers every parameter as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape) -> ModelVars {
        let lifting = self.lifting.bind(tape);
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let w = l.w.as_ref().map(|w| tape.param(w.clone()));
                let b = tape.param(l.b.clone());
                let t = l.t.as_ref().map(|t| tape.param(t.clone()));
                (w, b, t)
            })
            .collect();
        let decoder = match &self.decoder {
            DecoderParams::Mlp(q) => DecoderVars::Mlp(q.bind(tape)),
            DecoderParams::Linear { a, bias, trunk } => DecoderVars::Linear {
                a: tape.param(a.clone()),
                bias: tape.param(bias.clone()),
                trunk: trunk.bind(tape),
            },
        };
        ModelVars {
            lifting,
            layers,
            decoder,
        }
    }

    /// Coordinates and convolution plans for `grid`.
    pub fn context(&self, grid: &Grid2D) -> Result<GridContext> {
        let coords = coords_field(grid);
        let coords = Tensor::matrix(grid.len(), 2, coords.into_data())?;
        let (spectral, cosine) = match self.config.basis {
            Basis::Fourier { modes } => (Some(Arc::new(SpectralConvPlan::new(grid, modes)?)), None),
            Basis::LaplaceNeumann { modes } => {
                (None, Some(Arc::new(CosineConvPlan::new(grid, modes)?)))
            }
            Basis::Constant | Basis::Local => (None, None),
        };
        Ok(GridContext {
            grid: *grid,
            coords,
            spectral,
            cosine,
        })
    }
}

fn field_tensor(u: &Field) -> Tensor {
    Tensor::matrix(u.grid().len(), u.channels(), u.data().to_vec())
        .expect("field data is finite and sized")
}

/// `R(u(x), x)` at every grid point, `[points, d_c]`.
pub fn lift_on(
    tape: &mut Tape,
    model: &NnoModel,
    vars: &ModelVars,
    ctx: &GridContext,
    u: &Field,
) -> Result<Var> {
    if u.channels() != model.config.in_channels {
        return Err(Error::ShapeMismatch(format!(
            "model expects {} input channels, field has {}",
            model.config.in_channels,
            u.channels()
        )));
    }
    if !u.grid().same_points(&ctx.grid) {
        return Err(Error::InvalidGrid(
            "field grid differs from the context grid".into(),
        ));
    }
    let x = tape.constant(field_tensor(u));
    let input = if model.config.positional_encoding {
        let c = tape.constant(ctx.coords.clone());
        tape.concat_cols(&[x, c])?
    } else {
        x
    };
    mlp_forward(tape, &vars.lifting, input)
}

/// Hidden layer `l` applied to `v: [points, d_c]`.
pub fn nno_layer_on(
    tape: &mut Tape,
    model: &NnoModel,
    vars: &ModelVars,
    ctx: &GridContext,
    l: usize,
    v: Var,
) -> Result<Var> {
    let (w, b, t) = vars.layers[l];
    let mut acc = match w {
        Some(w) => Some(tape.matmul(v, w)?),
        None => None,
    };
    let nonlocal = match (model.config.basis, t) {
        (Basis::Local, _) | (_, None) => None,
        (Basis::Constant, Some(t)) => {
            let m = tape.mean_rows(v);
            let mt = tape.matmul(m, t)?;
            Some(tape.broadcast_rows(mt, ctx.grid.len())?)
        }
        (Basis::Fourier { .. }, Some(t)) => {
            let plan = ctx
                .spectral
                .as_ref()
                .ok_or_else(|| Error::Config("context lacks a Fourier plan".into()))?;
            Some(tape.spectral_conv(v, t, plan)?)
        }
        (Basis::LaplaceNeumann { .. }, Some(t)) => {
            let plan = ctx
                .cosine
                .as_ref()
                .ok_or_else(|| Error::Config("context lacks a cosine plan".into()))?;
            Some(tape.cosine_conv(v, t, plan)?)
        }
    };
    if let Some(n) = nonlocal {
        acc = Some(match acc {
            Some(a) => tape.add(a, n)?,
            None => n,
        });
    }
    let pre = match acc {
        Some(a) => tape.add_row(a, b)?,
        None => {
            let zero = tape.constant(Tensor::zeros(vec![ctx.grid.len(), model.config.d_c]));
            tape.add_row(zero, b)?
        }
    };
    Ok(tape.activation(pre, model.config.activation))
}

/// Decoder applied to `v: [points, d_c]`, giving `[points, out_channels]`.
pub fn project_on(
    tape: &mut Tape,
    model: &NnoModel,
    vars: &ModelVars,
    ctx: &GridContext,
    v: Var,
) -> Result<Var> {
    match &vars.decoder {
        DecoderVars::Mlp(q) => {
            let input = if model.config.projection_coords {
                let c = tape.constant(ctx.coords.clone());
                tape.concat_cols(&[v, c])?
            } else {
                v
            };
            mlp_forward(tape, q, input)
        }
        DecoderVars::Linear { a, bias, trunk } => {
            let code = tape.mean_rows(v);
            let coded = tape.matmul(code, *a)?;
            let beta = tape.add_row(coded, *bias)?;
            let c = tape.constant(ctx.coords.clone());
            let tau = mlp_forward(tape, trunk, c)?;
            tape.linear_combine(beta, tau)
        }
    }
}

/// Full model on the tape; returns the `[points, out_channels]` output.
pub fn forward_on(
    tape: &mut Tape,
    model: &NnoModel,
    vars: &ModelVars,
    ctx: &GridContext,
    u: &Field,
) -> Result<Var> {
    let mut v = lift_on(tape, model, vars, ctx, u)?;
    for l in 0..model.layers.len() {
        v = nno_layer_on(tape, model, vars, ctx, l, v)?;
    }
    project_on(tape, model, vars, ctx, v)
}

fn into_field(tape: &Tape, grid: &Grid2D, out: Var) -> Result<Field> {
    let t = tape.value(out);
    Field::new(*grid, t.cols(), t.data().to_vec())
}

/// Lifted representation `[points, d_c]`.
pub fn lift(model: &NnoModel, u: &Field) -> Result<Tensor> {
    let ctx = model.context(u.grid())?;
    let mut tape = Tape::new();
    let vars = model.bind(&mut tape);
    let v = lift_on(&mut tape, model, &vars, &ctx, u)?;
    Ok(tape.value(v).clone())
}

/// Hidden layer `l` on a `[points, d_c]` tensor sampled on `grid`.
pub fn nno_layer(model: &NnoModel, l: usize, v: &Tensor, grid: &Grid2D) -> Result<Tensor> {
    if l >= model.layers.len() {
        return Err(Error::Config(format!(
            "layer {l} of {}",
            model.layers.len()
        )));
    }
    if v.shape() != [grid.len(), model.config.d_c] {
        return Err(Error::ShapeMismatch(format!(
            "hidden state {:?}",
            v.shape()
        )));
    }
    let ctx = model.context(grid)?;
    let mut tape = Tape::new();
    let vars = model.bind(&mut tape);
    let x = tape.constant(v.clone());
    let y = nno_layer_on(&mut tape, model, &vars, &ctx, l, x)?;
    Ok(tape.value(y).clone())
}

/// Decoder applied to a `[points, d_c]` tensor sampled on `grid`.
pub fn project(model: &NnoModel, v: &Tensor, grid: &Grid2D) -> Result<Field> {
    if v.shape() != [grid.len(), model.config.d_c] {
        return Err(Error::ShapeMismatch(format!(
            "hidden state {:?}",
            v.shape()
        )));
    }
    let ctx = model.context(grid)?;
    let mut tape = Tape::new();
    let vars = model.bind(&mut tape);
    let x = tape.constant(v.clone());
    let y = project_on(&mut tape, model, &vars, &ctx, x)?;
    into_field(&tape, grid, y)
}

/// Evaluates any configuration.
pub fn model_forward(model: &NnoModel, u: &Field) -> Result<Field> {
    let ctx = model.context(u.grid())?;
    model_forward_in(model, &ctx, u)
}

/// [`model_forward`] with a prebuilt context.
pub fn model_forward_in(model: &NnoModel, ctx: &GridContext, u: &Field) -> Result<Field> {
    let mut tape = Tape::new();
    let vars = model.bind(&mut tape);
    let y = forward_on(&mut tape, model, &vars, ctx, u)?;
    into_field(&tape, u.grid(), y)
}

/// The averaging operator: one constant-basis layer without `W`. Returns
/// the output and the encoded vector `act(T mean(R) + b)`.
pub fn ano_forward(model: &NnoModel, u: &Field) -> Result<(Field, Vec<f64>)> {
    if !model.config.is_strict_ano() {
        return Err(Error::Config(
            "ano_forward needs layers = 1, constant basis and use_w = false".into(),
        ));
    }
    let ctx = model.context(u.grid())?;
    let mut tape = Tape::new();
    let vars = model.bind(&mut tape);
    let v = lift_on(&mut tape, model, &vars, &ctx, u)?;
    let h = nno_layer_on(&mut tape, model, &vars, &ctx, 0, v)?;
    let code = tape.value(h).data()[..model.config.d_c].to_vec();
    let y = project_on(&mut tape, model, &vars, &ctx, h)?;
    Ok((into_field(&tape, u.grid(), y)?, code))
}

/// Evaluates a Fourier-basis model.
pub fn fno_forward(model: &NnoModel, u: &Field) -> Result<Field> {
    if !matches!(model.config.basis, Basis::Fourier { .. }) {
        return Err(Error::Config("fno_forward needs a Fourier basis".into()));
    }
    model_forward(model, u)
}
