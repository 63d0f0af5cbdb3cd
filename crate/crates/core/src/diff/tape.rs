use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use super::conv::{CosineConvPlan, SpectralConvPlan};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// Exact `0.5 x (1 + erf(x / sqrt 2))`.
    Gelu,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => 0.5 * x * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2)),
            Activation::Tanh => x.tanh(),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => {
                let cdf = 0.5 * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2));
                let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
                cdf + x * pdf
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }
}

/// Handle to a node of a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddRow(Var, Var),
    Activation(Var, Activation),
    MeanRows(Var),
    MeanAll(Var),
    SumAll(Var),
    BroadcastRows(Var),
    ConcatCols(Vec<Var>),
    SliceRows(Var, usize),
    SpectralConv {
        input: Var,
        weights: Var,
        plan: Arc<SpectralConvPlan>,
        spectrum: Vec<Complex64>,
    },
    CosineConv {
        input: Var,
        weights: Var,
        plan: Arc<CosineConvPlan>,
        coeffs: Vec<f64>,
    },
    LinearCombine(Var, Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records primitive applications in evaluation order for reverse-mode
/// differentiation. One tape serves one forward/backward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn mismatch(op: &str, a: &[usize], b: &[usize]) -> Error {
    Error::ShapeMismatch(format!("{op}: {a:?} vs {b:?}"))
}

fn as_matrix(t: &Tensor) -> (usize, usize) {
    (t.rows(), t.cols())
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A constant input; gradients are not propagated into it.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// A trainable leaf.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = as_matrix(self.value(a));
        let (k2, n) = as_matrix(self.value(b));
        if k != k2 {
            return Err(mismatch(
                "matmul",
                self.value(a).shape(),
                self.value(b).shape(),
            ));
        }
        let out = matmul_raw(self.value(a).data(), self.value(b).data(), m, k, n);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::MatMul(a, b), rg))
    }

    fn zip(
        &mut self,
        a: Var,
        b: Var,
        name: &str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch(name, ta.shape(), tb.shape()));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| f(*x, *y))
            .collect();
        let t = Tensor::from_parts(ta.shape().to_vec(), data);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let t = self.value(a);
        let out = Tensor::from_parts(t.shape().to_vec(), t.data().iter().map(|x| x * s).collect());
        let rg = self.rg(a);
        self.push(out, Op::Scale(a, s), rg)
    }

    /// `[m, n] + [1, n]`, the row broadcast to every row.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (m, n) = as_matrix(self.value(a));
        let (r, n2) = as_matrix(self.value(row));
        if r != 1 || n != n2 {
            return Err(mismatch(
                "add_row",
                self.value(a).shape(),
                self.value(row).shape(),
            ));
        }
        let b = self.value(row).data();
        let mut out = self.value(a).data().to_vec();
        for chunk in out.chunks_exact_mut(n) {
            for (o, x) in chunk.iter_mut().zip(b) {
                *o += x;
            }
        }
        let rg = self.rg(a) || self.rg(row);
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::AddRow(a, row), rg))
    }

    pub fn activation(&mut self, a: Var, act: Activation) -> Var {
        let t = self.value(a);
        let out = Tensor::from_parts(
            t.shape().to_vec(),
            t.data().iter().map(|&x| act.apply(x)).collect(),
        );
        let rg = self.rg(a);
        self.push(out, Op::Activation(a, act), rg)
    }

    /// Column means, `[m, n] -> [1, n]`.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let (m, n) = as_matrix(self.value(a));
        let mut out = vec![0.0; n];
        for chunk in self.value(a).data().chunks_exact(n) {
            for (o, x) in out.iter_mut().zip(chunk) {
                *o += x;
            }
        }
        let inv = 1.0 / m as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        let rg = self.rg(a);
        self.push(Tensor::from_parts(vec![1, n], out), Op::MeanRows(a), rg)
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::MeanAll(a), rg)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum::<f64>();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::SumAll(a), rg)
    }

    /// `[1, n] -> [m, n]` by repetition.
    pub fn broadcast_rows(&mut self, a: Var, m: usize) -> Result<Var> {
        let (r, n) = as_matrix(self.value(a));
        if r != 1 {
            return Err(mismatch("broadcast_rows", self.value(a).shape(), &[1, n]));
        }
        let row = self.value(a).data();
        let out = (0..m).flat_map(|_| row.iter().copied()).collect();
        let rg = self.rg(a);
        Ok(self.push(
            Tensor::from_parts(vec![m, n], out),
            Op::BroadcastRows(a),
            rg,
        ))
    }

    /// Horizontal concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let m = self.value(parts[0]).rows();
        let widths: Vec<usize> = parts.iter().map(|&p| self.value(p).cols()).collect();
        if parts.iter().any(|&p| self.value(p).rows() != m) {
            return Err(Error::ShapeMismatch(
                "concat_cols: row counts differ".into(),
            ));
        }
        let n: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(m * n);
        for r in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(
            Tensor::from_parts(vec![m, n], out),
            Op::ConcatCols(parts.to_vec()),
            rg,
        ))
    }

    /// Rows `start..start + len` of a matrix.
    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (m, n) = as_matrix(self.value(a));
        if start + len > m {
            return Err(Error::ShapeMismatch(format!(
                "slice_rows {start}+{len} of {m} rows"
            )));
        }
        let out = self.value(a).data()[start * n..(start + len) * n].to_vec();
        let rg = self.rg(a);
        Ok(self.push(
            Tensor::from_parts(vec![len, n], out),
            Op::SliceRows(a, start),
            rg,
        ))
    }

    /// Fourier multiplier of `v` (`[points, c_in]`) with weights
    /// `[(2K+1)^2, c_in, c_out]`, see [`SpectralConvPlan`].
    pub fn spectral_conv(
        &mut self,
        v: Var,
        weights: Var,
        plan: &Arc<SpectralConvPlan>,
    ) -> Result<Var> {
        let (pts, cin) = as_matrix(self.value(v));
        let ws = self.value(weights).shape();
        if pts != plan.points() || ws.len() != 3 || ws[0] != plan.weight_blocks() || ws[1] != cin {
            return Err(mismatch("spectral_conv", self.value(v).shape(), ws));
        }
        let cout = ws[2];
        let (out, spectrum) =
            plan.forward(self.value(v).data(), self.value(weights).data(), cin, cout);
        let rg = self.rg(v) || self.rg(weights);
        let op = Op::SpectralConv {
            input: v,
            weights,
            plan: Arc::clone(plan),
            spectrum,
        };
        Ok(self.push(Tensor::from_parts(vec![pts, cout], out), op, rg))
    }

    /// Neumann-cosine multiplier, see [`CosineConvPlan`].
    pub fn cosine_conv(&mut self, v: Var, weights: Var, plan: &Arc<CosineConvPlan>) -> Result<Var> {
        let (pts, cin) = as_matrix(self.value(v));
        let ws = self.value(weights).shape();
        if ws.len() != 3 || ws[0] != plan.weight_blocks() || ws[1] != cin {
            return Err(mismatch("cosine_conv", self.value(v).shape(), ws));
        }
        let cout = ws[2];
        let (out, coeffs) =
            plan.forward(self.value(v).data(), self.value(weights).data(), cin, cout);
        let rg = self.rg(v) || self.rg(weights);
        let op = Op::CosineConv {
            input: v,
            weights,
            plan: Arc::clone(plan),
            coeffs,
        };
        Ok(self.push(Tensor::from_parts(vec![pts, cout], out), op, rg))
    }

    /// `out[x, o] = sum_j beta[j] * trunk[x, j * c + o]` for `beta: [1, J]`,
    /// `trunk: [points, J * c]`.
    pub fn linear_combine(&mut self, beta: Var, trunk: Var) -> Result<Var> {
        let (r, j) = as_matrix(self.value(beta));
        let (pts, w) = as_matrix(self.value(trunk));
        if r != 1 || j == 0 || w % j != 0 {
            return Err(mismatch(
                "linear_combine",
                self.value(beta).shape(),
                self.value(trunk).shape(),
            ));
        }
        let c = w / j;
        let b = self.value(beta).data();
        let t = self.value(trunk).data();
        let mut out = vec![0.0; pts * c];
        for x in 0..pts {
            for (jj, bj) in b.iter().enumerate() {
                let src = &t[x * w + jj * c..x * w + (jj + 1) * c];
                for (o, s) in out[x * c..(x + 1) * c].iter_mut().zip(src) {
                    *o += bj * s;
                }
            }
        }
        let rg = self.rg(beta) || self.rg(trunk);
        Ok(self.push(
            Tensor::from_parts(vec![pts, c], out),
            Op::LinearCombine(beta, trunk),
            rg,
        ))
    }

    /// Gradients of the scalar `root` with respect to each of `wrt`.
    pub fn grad(&self, root: Var, wrt: &[Var]) -> Result<Vec<Tensor>> {
        if root.0 >= self.nodes.len() {
            return Err(Error::Tape("root is not on this tape".into()));
        }
        if self.value(root).len() != 1 {
            return Err(Error::Tape(format!(
                "root must be scalar, has shape {:?}",
                self.value(root).shape()
            )));
        }
        for &w in wrt {
            if w.0 >= self.nodes.len() || !matches!(self.nodes[w.0].op, Op::Leaf) || !self.rg(w) {
                return Err(Error::Tape(format!(
                    "node {} is not a parameter of this tape",
                    w.0
                )));
            }
        }
        let mut adj: Vec<Option<Vec<f64>>> = (0..=root.0).map(|_| None).collect();
        adj[root.0] = Some(vec![1.0]);
        for idx in (0..=root.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            self.backprop(&node.op, &node.value, &g, &mut adj);
            if matches!(node.op, Op::Leaf) {
                adj[idx] = Some(g);
            }
        }
        Ok(wrt
            .iter()
            .map(|&w| {
                let shape = self.value(w).shape().to_vec();
                match adj.get_mut(w.0).and_then(Option::take) {
                    Some(g) => Tensor::from_parts(shape, g),
                    None => Tensor::zeros(shape),
                }
            })
            .collect())
    }

    fn backprop(&self, op: &Op, out: &Tensor, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let mut acc = |v: Var, delta: Vec<f64>| {
            if !self.rg(v) {
                return;
            }
            match &mut adj[v.0] {
                Some(a) => a.iter_mut().zip(&delta).for_each(|(x, d)| *x += d),
                slot @ None => *slot = Some(delta),
            }
        };
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k) = as_matrix(ta);
                let n = tb.cols();
                if self.rg(*a) {
                    // dA = G B^T
                    let mut da = vec![0.0; m * k];
                    for i in 0..m {
                        let gi = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let bp = &tb.data()[p * n..(p + 1) * n];
                            da[i * k + p] = gi.iter().zip(bp).map(|(x, y)| x * y).sum();
                        }
                    }
                    acc(*a, da);
                }
                if self.rg(*b) {
                    // dB = A^T G
                    let mut db = vec![0.0; k * n];
                    for i in 0..m {
                        let gi = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let aip = ta.data()[i * k + p];
                            if aip != 0.0 {
                                for (d, x) in db[p * n..(p + 1) * n].iter_mut().zip(gi) {
                                    *d += aip * x;
                                }
                            }
                        }
                    }
                    acc(*b, db);
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.to_vec());
                acc(*b, g.to_vec());
            }
            Op::Sub(a, b) => {
                acc(*a, g.to_vec());
                acc(*b, g.iter().map(|x| -x).collect());
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                acc(*a, g.iter().zip(tb.data()).map(|(x, y)| x * y).collect());
                acc(*b, g.iter().zip(ta.data()).map(|(x, y)| x * y).collect());
            }
            Op::Scale(a, s) => acc(*a, g.iter().map(|x| x * s).collect()),
            Op::AddRow(a, row) => {
                acc(*a, g.to_vec());
                let n = out.cols();
                let mut db = vec![0.0; n];
                for chunk in g.chunks_exact(n) {
                    db.iter_mut().zip(chunk).for_each(|(d, x)| *d += x);
                }
                acc(*row, db);
            }
            Op::Activation(a, act) => {
                let x = self.value(*a).data();
                acc(
                    *a,
                    g.iter()
                        .zip(x)
                        .map(|(gi, xi)| gi * act.derivative(*xi))
                        .collect(),
                );
            }
            Op::MeanRows(a) => {
                let m = self.value(*a).rows();
                let inv = 1.0 / m as f64;
                let row: Vec<f64> = g.iter().map(|x| x * inv).collect();
                acc(*a, (0..m).flat_map(|_| row.iter().copied()).collect());
            }
            Op::MeanAll(a) => {
                let n = self.value(*a).len();
                acc(*a, vec![g[0] / n as f64; n]);
            }
            Op::SumAll(a) => {
                let n = self.value(*a).len();
                acc(*a, vec![g[0]; n]);
            }
            Op::BroadcastRows(a) => {
                let n = out.cols();
                let mut d = vec![0.0; n];
                for chunk in g.chunks_exact(n) {
                    d.iter_mut().zip(chunk).for_each(|(x, y)| *x += y);
                }
                acc(*a, d);
            }
            Op::ConcatCols(parts) => {
                let m = out.rows();
                let n = out.cols();
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    let mut d = Vec::with_capacity(m * w);
                    for r in 0..m {
                        d.extend_from_slice(&g[r * n + offset..r * n + offset + w]);
                    }
                    acc(p, d);
                    offset += w;
                }
            }
            Op::SliceRows(a, start) => {
                let t = self.value(*a);
                let n = t.cols();
                let mut d = vec![0.0; t.len()];
                d[start * n..start * n + g.len()].copy_from_slice(g);
                acc(*a, d);
            }
            Op::SpectralConv {
                input,
                weights,
                plan,
                spectrum,
            } => {
                let w = self.value(*weights);
                let (cin, cout) = (w.shape()[1], w.shape()[2]);
                let (gv, gw) = plan.backward(g, spectrum, w.data(), cin, cout);
                acc(*input, gv);
                acc(*weights, gw);
            }
            Op::CosineConv {
                input,
                weights,
                plan,
                coeffs,
            } => {
                let w = self.value(*weights);
                let (cin, cout) = (w.shape()[1], w.shape()[2]);
                let (gv, gw) = plan.backward(g, coeffs, w.data(), cin, cout);
                acc(*input, gv);
                acc(*weights, gw);
            }
            Op::LinearCombine(beta, trunk) => {
                let b = self.value(*beta).data();
                let t = self.value(*trunk).data();
                let (j, w) = (b.len(), self.value(*trunk).cols());
                let c = w / j;
                let pts = out.rows();
                if self.rg(*beta) {
                    let mut db = vec![0.0; j];
                    for x in 0..pts {
                        let gx = &g[x * c..(x + 1) * c];
                        for (jj, d) in db.iter_mut().enumerate() {
                            let tx = &t[x * w + jj * c..x * w + (jj + 1) * c];
                            *d += gx.iter().zip(tx).map(|(p, q)| p * q).sum::<f64>();
                        }
                    }
                    acc(*beta, db);
                }
                if self.rg(*trunk) {
                    let mut dt = vec![0.0; pts * w];
                    for x in 0..pts {
                        for (jj, bj) in b.iter().enumerate() {
                            for o in 0..c {
                                dt[x * w + jj * c + o] = bj * g[x * c + o];
                            }
                        }
                    }
                    acc(*trunk, dt);
                }
            }
        }
    }
}

/// `[m, k] x [k, n]` row-major product.
pub fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            for (o, bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += aip * bv;
            }
        }
    }
    out
}
