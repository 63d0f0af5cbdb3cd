//! Orthonormal type-II cosine transform (and its inverse, type III) computed
//! through a half-length reordering and one complex FFT per line.

use num_complex::Complex64;
use std::f64::consts::PI;

use super::fft::FftPlan;

#[derive(Debug, Clone)]
pub struct DctPlan {
    n: usize,
    fft: FftPlan,
    // exp(-i pi k / 2n)
    shift: Vec<Complex64>,
    scale: Vec<f64>,
}

impl DctPlan {
    pub fn new(n: usize) -> Self {
        let shift = (0..n)
            .map(|k| {
                let th = -PI * k as f64 / (2.0 * n as f64);
                Complex64::new(th.cos(), th.sin())
            })
            .collect();
        let scale = (0..n)
            .map(|k| {
                if k == 0 {
                    (1.0 / n as f64).sqrt()
                } else {
                    (2.0 / n as f64).sqrt()
                }
            })
            .collect();
        Self {
            n,
            fft: FftPlan::new(n),
            shift,
            scale,
        }
    }

    /// Orthonormal DCT-II of `x` into `out`.
    pub fn forward(&self, x: &[f64], out: &mut [f64], buf: &mut Vec<Complex64>) {
        let n = self.n;
        buf.clear();
        buf.resize(n, Complex64::default());
        for i in 0..n / 2 {
            buf[i] = Complex64::new(x[2 * i], 0.0);
            buf[n - 1 - i] = Complex64::new(x[2 * i + 1], 0.0);
        }
        if n == 1 {
            buf[0] = Complex64::new(x[0], 0.0);
        }
        self.fft.forward(buf);
        for k in 0..n {
            out[k] = self.scale[k] * (self.shift[k] * buf[k]).re;
        }
    }

    /// Inverse of [`DctPlan::forward`] (orthonormal DCT-III).
    pub fn inverse(&self, coeffs: &[f64], out: &mut [f64], buf: &mut Vec<Complex64>) {
        let n = self.n;
        buf.clear();
        buf.resize(n, Complex64::default());
        for k in 0..n {
            let y = coeffs[k] / self.scale[k];
            let y_mirror = if k == 0 {
                0.0
            } else {
                coeffs[n - k] / self.scale[n - k]
            };
            buf[k] = self.shift[k].conj() * Complex64::new(y, -y_mirror);
        }
        self.fft.inverse(buf);
        let inv_n = 1.0 / n as f64;
        if n == 1 {
            out[0] = buf[0].re;
            return;
        }
        for i in 0..n / 2 {
            out[2 * i] = buf[i].re * inv_n;
            out[2 * i + 1] = buf[n - 1 - i].re * inv_n;
        }
    }
}

/// Value of the `k`-th discrete orthonormal cosine basis vector at sample `i`.
pub fn cosine_basis(k: usize, i: usize, n: usize) -> f64 {
    let w = if k == 0 {
        (1.0 / n as f64).sqrt()
    } else {
        (2.0 / n as f64).sqrt()
    };
    w * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n as f64)).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_orthonormal_sum() {
        for n in [2usize, 8, 16, 64] {
            let x: Vec<f64> = (0..n)
                .map(|i| ((i * i) as f64 * 0.13).sin() + 0.3)
                .collect();
            let plan = DctPlan::new(n);
            let mut out = vec![0.0; n];
            let mut buf = Vec::new();
            plan.forward(&x, &mut out, &mut buf);
            for k in 0..n {
                let direct: f64 = (0..n).map(|i| x[i] * cosine_basis(k, i, n)).sum();
                assert!((out[k] - direct).abs() < 1e-12, "n={n} k={k}");
            }
            let mut back = vec![0.0; n];
            plan.inverse(&out, &mut back, &mut buf);
            for i in 0..n {
                assert!((back[i] - x[i]).abs() < 1e-12);
            }
        }
    }
}
