use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Activation, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Fully connected network `w_0 -> w_1 -> ... -> w_D` with the activation
/// between layers and none after the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub widths: Vec<usize>,
    pub activation: Activation,
    /// `[w_i, w_{i+1}]` per layer.
    pub weights: Vec<Tensor>,
    /// `[1, w_{i+1}]` per layer.
    pub biases: Vec<Tensor>,
}

/// Tape handles of an [`MlpParams`].
#[derive(Debug, Clone)]
pub struct MlpVars {
    pub weights: Vec<Var>,
    pub biases: Vec<Var>,
    pub activation: Activation,
}

impl MlpParams {
    /// Glorot-uniform weights and zero biases.
    pub fn glorot(widths: &[usize], activation: Activation, rng: &mut impl Rng) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Config(format!("invalid MLP widths {widths:?}")));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in widths.windows(2) {
            let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
            let data = (0..w[0] * w[1])
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            weights.push(Tensor::matrix(w[0], w[1], data)?);
            biases.push(Tensor::zeros(vec![1, w[1]]));
        }
        Ok(Self {
            widths: widths.to_vec(),
            activation,
            weights,
            biases,
        })
    }

    /// All-zero parameters.
    pub fn zeros(widths: &[usize], activation: Activation) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Config(format!("invalid MLP widths {widths:?}")));
        }
        let weights = widths
            .windows(2)
            .map(|w| Tensor::zeros(vec![w[0], w[1]]))
            .collect();
        let biases = widths
            .windows(2)
            .map(|w| Tensor::zeros(vec![1, w[1]]))
            .collect();
        Ok(Self {
            widths: widths.to_vec(),
            activation,
            weights,
            biases,
        })
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("at least two widths")
    }

    pub fn param_count(&self) -> usize {
        self.weights
            .iter()
            .chain(&self.biases)
            .map(Tensor::len)
            .sum()
    }

    /// Parameter tensors in declaration order (weight, bias per layer).
    pub fn tensors(&self) -> Vec<&Tensor> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    pub fn bind(&self, tape: &mut Tape) -> MlpVars {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            weights.push(tape.param(w.clone()));
            biases.push(tape.param(b.clone()));
        }
        MlpVars {
            weights,
            biases,
            activation: self.activation,
        }
    }
}

impl MlpVars {
    /// Handles in declaration order, matching [`MlpParams::tensors`].
    pub fn vars(&self) -> Vec<Var> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [*w, *b])
            .collect()
    }
}

/// Applies the network row-wise to `x: [batch, w_0]`.
pub fn mlp_forward(tape: &mut Tape, p: &MlpVars, x: Var) -> Result<Var> {
    let mut h = x;
    let last = p.weights.len() - 1;
    for (l, (&w, &b)) in p.weights.iter().zip(&p.biases).enumerate() {
        let z = tape.matmul(h, w)?;
        h = tape.add_row(z, b)?;
        if l < last {
            h = tape.activation(h, p.activation);
        }
    }
    Ok(h)
}
