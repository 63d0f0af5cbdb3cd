//! Reverse-mode differentiation over a fixed set of primitives.
//!
//! A [`Tape`] records every primitive applied during one forward pass;
//! [`Tape::grad`] then accumulates vector-Jacobian products from a scalar root
//! back to the requested parameter leaves.

pub mod conv;
pub mod mlp;
pub mod tape;
pub mod tensor;

pub use conv::{CosineConvPlan, SpectralConvPlan};
pub use mlp::{mlp_forward, MlpParams, MlpVars};
pub use tape::{matmul_raw, Activation, Tape, Var};
pub use tensor::Tensor;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{mean_over_domain, Field, Grid2D};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn random(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Central-difference check of `f` (built on a fresh tape from the given
    /// parameters) along random directions.
    fn check_gradients(
        params: &[Tensor],
        probes: usize,
        seed: u64,
        f: impl Fn(&mut Tape, &[Var]) -> Var,
    ) {
        let eval = |ps: &[Tensor]| {
            let mut tape = Tape::new();
            let vars: Vec<Var> = ps.iter().map(|p| tape.param(p.clone())).collect();
            let root = f(&mut tape, &vars);
            tape.value(root).item().unwrap()
        };
        let mut tape = Tape::new();
        let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
        let root = f(&mut tape, &vars);
        let grads = tape.grad(root, &vars).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = 1e-5;
        for _ in 0..probes {
            let dirs: Vec<Tensor> = params
                .iter()
                .map(|p| random(p.shape().to_vec(), &mut rng))
                .collect();
            let dd: f64 = grads
                .iter()
                .zip(&dirs)
                .map(|(g, d)| {
                    g.data()
                        .iter()
                        .zip(d.data())
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                })
                .sum();
            let shifted = |sign: f64| -> Vec<Tensor> {
                params
                    .iter()
                    .zip(&dirs)
                    .map(|(p, d)| {
                        let data = p
                            .data()
                            .iter()
                            .zip(d.data())
                            .map(|(a, b)| a + sign * h * b)
                            .collect();
                        Tensor::new(p.shape().to_vec(), data).unwrap()
                    })
                    .collect()
            };
            let fd = (eval(&shifted(1.0)) - eval(&shifted(-1.0))) / (2.0 * h);
            let rel = (dd - fd).abs() / (dd.abs() + 1e-12);
            assert!(
                rel < 1e-4,
                "directional derivative {dd} vs finite difference {fd}"
            );
        }
    }

    #[test]
    fn sum_of_squares_and_mean() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::matrix(2, 3, vec![1.0, -2.0, 0.5, 3.0, 0.0, -1.5]).unwrap());
        let sq = tape.mul(x, x).unwrap();
        let s = tape.sum_all(sq);
        let g = tape.grad(s, &[x]).unwrap();
        let expect: Vec<f64> = tape.value(x).data().iter().map(|v| 2.0 * v).collect();
        assert_eq!(g[0].data(), expect.as_slice());

        let m = tape.mean_all(x);
        let g = tape.grad(m, &[x]).unwrap();
        assert!(g[0].data().iter().all(|&v| v == 1.0 / 6.0));
    }

    #[test]
    fn grad_errors() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::zeros(vec![2, 2]));
        let c = tape.constant(Tensor::zeros(vec![2, 2]));
        let y = tape.add(x, c).unwrap();
        assert!(matches!(tape.grad(y, &[x]), Err(crate::Error::Tape(_))));
        let s = tape.sum_all(y);
        assert!(tape.grad(s, &[c]).is_err());
        assert!(tape.grad(s, &[y]).is_err());
        let mut other = Tape::new();
        let far = other.param(Tensor::zeros(vec![1, 1]));
        for _ in 0..10 {
            other.param(Tensor::zeros(vec![1, 1]));
        }
        let far_root = other.sum_all(far);
        assert!(tape.grad(s, &[far_root]).is_err());
    }

    #[test]
    fn gelu_values() {
        assert_eq!(Activation::Gelu.apply(0.0), 0.0);
        assert!((Activation::Gelu.apply(10.0) - 10.0).abs() < 1e-6);
        let x = 0.7;
        let fd = (Activation::Gelu.apply(x + 1e-6) - Activation::Gelu.apply(x - 1e-6)) / 2e-6;
        assert!((fd - Activation::Gelu.derivative(x)).abs() < 1e-8);
    }

    #[test]
    fn primitive_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random(vec![4, 3], &mut rng);
        let b = random(vec![3, 5], &mut rng);
        let row = random(vec![1, 5], &mut rng);
        check_gradients(&[a.clone(), b.clone(), row.clone()], 20, 2, |t, v| {
            let ab = t.matmul(v[0], v[1]).unwrap();
            let z = t.add_row(ab, v[2]).unwrap();
            let g = t.activation(z, Activation::Gelu);
            let h = t.activation(g, Activation::Tanh);
            let m = t.mean_rows(h);
            let bm = t.broadcast_rows(m, 4).unwrap();
            let d = t.sub(h, bm).unwrap();
            let sc = t.scale(d, 1.7);
            let cat = t.concat_cols(&[sc, z]).unwrap();
            let sl = t.slice_rows(cat, 1, 2).unwrap();
            let sq = t.mul(sl, sl).unwrap();
            t.mean_all(sq)
        });

        let beta = random(vec![1, 3], &mut rng);
        let trunk = random(vec![6, 6], &mut rng);
        check_gradients(&[beta, trunk], 20, 3, |t, v| {
            let out = t.linear_combine(v[0], v[1]).unwrap();
            let sq = t.mul(out, out).unwrap();
            t.sum_all(sq)
        });
    }

    #[test]
    fn conv_gradients() {
        let g = Grid2D::unit(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sp = Arc::new(SpectralConvPlan::new(&g, 2).unwrap());
        let v = random(vec![64, 3], &mut rng);
        let w = random(vec![sp.weight_blocks(), 3, 2], &mut rng);
        check_gradients(&[v.clone(), w], 20, 5, |t, p| {
            let y = t.spectral_conv(p[0], p[1], &sp).unwrap();
            let z = t.activation(y, Activation::Tanh);
            let sq = t.mul(z, z).unwrap();
            t.mean_all(sq)
        });
        let cp = Arc::new(CosineConvPlan::new(&g, 2).unwrap());
        let w = random(vec![cp.weight_blocks(), 3, 2], &mut rng);
        check_gradients(&[v, w], 20, 6, |t, p| {
            let y = t.cosine_conv(p[0], p[1], &cp).unwrap();
            let z = t.activation(y, Activation::Gelu);
            let sq = t.mul(z, z).unwrap();
            t.mean_all(sq)
        });
    }

    #[test]
    fn mlp_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut zero = MlpParams::zeros(&[3, 4, 2], Activation::Tanh).unwrap();
        zero.biases[1] = Tensor::matrix(1, 2, vec![0.5, -1.0]).unwrap();
        let mut tape = Tape::new();
        let vars = zero.bind(&mut tape);
        let x = tape.constant(random(vec![5, 3], &mut rng));
        let y = mlp_forward(&mut tape, &vars, x).unwrap();
        for r in tape.value(y).data().chunks(2) {
            assert_eq!(r, &[0.5, -1.0]);
        }

        let mut id = MlpParams::zeros(&[3, 3], Activation::Gelu).unwrap();
        id.weights[0] =
            Tensor::matrix(3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let mut tape = Tape::new();
        let vars = id.bind(&mut tape);
        let xt = random(vec![4, 3], &mut rng);
        let x = tape.constant(xt.clone());
        let y = mlp_forward(&mut tape, &vars, x).unwrap();
        assert_eq!(tape.value(y).data(), xt.data());

        let mlp = MlpParams::glorot(&[2, 6, 6, 1], Activation::Gelu, &mut rng).unwrap();
        assert_eq!(mlp.param_count(), 2 * 6 + 6 + 6 * 6 + 6 + 6 + 1);
        let x = random(vec![7, 2], &mut rng);
        let tensors: Vec<Tensor> = mlp.tensors().into_iter().cloned().collect();
        check_gradients(&tensors, 20, 8, |t, v| {
            let vars = MlpVars {
                weights: v.iter().step_by(2).copied().collect(),
                biases: v.iter().skip(1).step_by(2).copied().collect(),
                activation: Activation::Gelu,
            };
            let xi = t.constant(x.clone());
            let y = mlp_forward(t, &vars, xi).unwrap();
            let sq = t.mul(y, y).unwrap();
            t.mean_all(sq)
        });

        let bad = Tensor::zeros(vec![5, 4]);
        let mut tape = Tape::new();
        let vars = mlp.bind(&mut tape);
        let x = tape.constant(bad);
        assert!(mlp_forward(&mut tape, &vars, x).is_err());
    }

    #[test]
    fn spectral_conv_zero_mode_is_mean() {
        let g = Grid2D::unit(16).unwrap();
        let plan = Arc::new(SpectralConvPlan::new(&g, 0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v = random(vec![256, 2], &mut rng);
        let mut tape = Tape::new();
        let vv = tape.constant(v.clone());
        let w = tape.constant(Tensor::new(vec![1, 2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let y = tape.spectral_conv(vv, w, &plan).unwrap();
        let means = mean_over_domain(&Field::new(g, 2, v.into_data()).unwrap());
        for r in tape.value(y).data().chunks(2) {
            assert!((r[0] - means[0]).abs() < 1e-12 && (r[1] - means[1]).abs() < 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]

            #[test]
            fn spectral_conv_is_linear_and_transposes(seed in 0u64..1000, k in 0usize..4) {
                let g = Grid2D::new(8, 16, 1.0, 1.0).unwrap();
                let plan = SpectralConvPlan::new(&g, k).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let v = random(vec![128, 2], &mut rng);
                let u = random(vec![128, 3], &mut rng);
                let w = random(vec![plan.weight_blocks(), 2, 3], &mut rng);
                let (av, spec) = plan.forward(v.data(), w.data(), 2, 3);
                let (atu, _) = plan.backward(u.data(), &spec, w.data(), 2, 3);
                let lhs: f64 = av.iter().zip(u.data()).map(|(a, b)| a * b).sum();
                let rhs: f64 = v.data().iter().zip(&atu).map(|(a, b)| a * b).sum();
                prop_assert!((lhs - rhs).abs() < 1e-10);

                let v2: Vec<f64> = v.data().iter().map(|x| 2.5 * x).collect();
                let (av2, _) = plan.forward(&v2, w.data(), 2, 3);
                for (a, b) in av.iter().zip(&av2) {
                    prop_assert!((2.5 * a - b).abs() < 1e-12);
                }
            }
        }
    }
}
