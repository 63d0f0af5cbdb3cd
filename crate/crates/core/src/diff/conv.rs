//! Mode-truncated convolution kernels: the Fourier multiplier of FNO layers
//! and the Neumann-cosine multiplier of Laplace-eigenbasis layers.
//!
//! Both act on `[nx * ny, channels]` arrays in the field layout and only ever
//! touch the retained modes, so the cost of a layer grows with `K` rather
//! than with the full spectrum.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::Grid2D;
use crate::spectral::dct::cosine_basis;
use crate::spectral::fft::{index_of, FftPlan};

/// Fourier multiplier restricted to `|k|_inf <= K`.
///
/// Multipliers `P_k` are complex `c_in x c_out` matrices acting on
/// normalized coefficients, with `P_{-k} = conj(P_k)` so the output is real.
/// Only the half-lattice
/// `H = {(0,0)} u {(0,ky): 0 < ky <= K} u {(kx,ky): 0 < kx <= K, |ky| <= K}`
/// is stored. The weight tensor has shape `[(2K+1)^2, c_in, c_out]`: block 0
/// is the (real) `P_0`, blocks `2m-1` and `2m` the real and imaginary parts
/// of the `m`-th mode of `H` in the order listed above.
#[derive(Debug, Clone)]
pub struct SpectralConvPlan {
    nx: usize,
    ny: usize,
    k: usize,
    px: FftPlan,
    py: FftPlan,
}

impl SpectralConvPlan {
    pub fn new(grid: &Grid2D, k: usize) -> Result<Self> {
        let max = grid.nx().min(grid.ny()) / 2 - 1;
        if k > max {
            return Err(Error::ModeOutOfRange { k, max });
        }
        Ok(Self {
            nx: grid.nx(),
            ny: grid.ny(),
            k,
            px: FftPlan::new(grid.nx()),
            py: FftPlan::new(grid.ny()),
        })
    }

    pub fn modes(&self) -> usize {
        self.k
    }

    pub fn points(&self) -> usize {
        self.nx * self.ny
    }

    /// Number of `c_in x c_out` weight blocks, `(2K+1)^2`.
    pub fn weight_blocks(&self) -> usize {
        (2 * self.k + 1).pow(2)
    }

    fn ky_count(&self) -> usize {
        2 * self.k + 1
    }

    fn spec_index(&self, kx: usize, ky: i64, c: usize, ch: usize) -> usize {
        (kx * self.ky_count() + (ky + self.k as i64) as usize) * c + ch
    }

    /// Half-lattice modes `(kx, ky, m)` in weight order.
    fn half_modes(&self) -> impl Iterator<Item = (usize, i64, usize)> + '_ {
        let k = self.k as i64;
        let zero_col = (0..=k).map(|ky| (0usize, ky));
        let rest = (1..=self.k).flat_map(move |kx| (-k..=k).map(move |ky| (kx, ky)));
        zero_col
            .chain(rest)
            .enumerate()
            .map(|(m, (kx, ky))| (kx, ky, m))
    }

    /// Unnormalized DFT of `v` (`[points, c]`) on `0 <= kx <= K`, `|ky| <= K`.
    pub fn analyze(&self, v: &[f64], c: usize) -> Vec<Complex64> {
        let (nx, ny, k) = (self.nx, self.ny, self.k);
        debug_assert_eq!(v.len(), nx * ny * c);
        let mut rows = vec![Complex64::default(); (k + 1) * ny * c];
        let mut buf = vec![Complex64::default(); nx];
        for j in 0..ny {
            let base = j * nx * c;
            let mut ch = 0;
            while ch < c {
                let pair = ch + 1 < c;
                for (i, z) in buf.iter_mut().enumerate() {
                    let re = v[base + i * c + ch];
                    let im = if pair { v[base + i * c + ch + 1] } else { 0.0 };
                    *z = Complex64::new(re, im);
                }
                self.px.forward(&mut buf);
                for kx in 0..=k {
                    let z = buf[kx];
                    let zm = buf[(nx - kx) % nx].conj();
                    let r = (kx * ny + j) * c + ch;
                    if pair {
                        rows[r] = (z + zm) * 0.5;
                        rows[r + 1] = (z - zm) * Complex64::new(0.0, -0.5);
                    } else {
                        rows[r] = z;
                    }
                }
                ch += 2;
            }
        }
        let mut out = vec![Complex64::default(); (k + 1) * self.ky_count() * c];
        let mut col = vec![Complex64::default(); ny];
        for kx in 0..=k {
            for ch in 0..c {
                for (j, z) in col.iter_mut().enumerate() {
                    *z = rows[(kx * ny + j) * c + ch];
                }
                self.py.forward(&mut col);
                for ky in -(k as i64)..=k as i64 {
                    out[self.spec_index(kx, ky, c, ch)] = col[index_of(ky, ny)];
                }
            }
        }
        out
    }

    /// `(1/N) sum_{|k|_inf <= K} w_k exp(i k.x)` with `w_{-k} = conj(w_k)`.
    ///
    /// Entries with `kx = 0, ky < 0` are ignored and rebuilt from their
    /// conjugate partners; only the real part of `w_0` is used.
    pub fn synthesize(&self, w: &[Complex64], c: usize) -> Vec<f64> {
        let (nx, ny, k) = (self.nx, self.ny, self.k);
        let mut cols = vec![Complex64::default(); (k + 1) * ny * c];
        let mut col = vec![Complex64::default(); ny];
        for kx in 0..=k {
            for ch in 0..c {
                col.fill(Complex64::default());
                if kx == 0 {
                    col[0] = Complex64::new(w[self.spec_index(0, 0, c, ch)].re, 0.0);
                    for ky in 1..=k as i64 {
                        let z = w[self.spec_index(0, ky, c, ch)];
                        col[index_of(ky, ny)] = z;
                        col[index_of(-ky, ny)] = z.conj();
                    }
                } else {
                    for ky in -(k as i64)..=k as i64 {
                        col[index_of(ky, ny)] = w[self.spec_index(kx, ky, c, ch)];
                    }
                }
                self.py.inverse(&mut col);
                for (j, z) in col.iter().enumerate() {
                    cols[(kx * ny + j) * c + ch] = *z;
                }
            }
        }
        let scale = 1.0 / (nx * ny) as f64;
        let mut out = vec![0.0; nx * ny * c];
        let mut buf = vec![Complex64::default(); nx];
        let i_unit = Complex64::i();
        for j in 0..ny {
            let mut ch = 0;
            while ch < c {
                let pair = ch + 1 < c;
                buf.fill(Complex64::default());
                for kx in 0..=k {
                    let a = cols[(kx * ny + j) * c + ch];
                    let b = if pair {
                        cols[(kx * ny + j) * c + ch + 1]
                    } else {
                        Complex64::default()
                    };
                    if kx == 0 {
                        buf[0] = Complex64::new(a.re, b.re);
                    } else {
                        buf[kx] = a + i_unit * b;
                        buf[nx - kx] = a.conj() + i_unit * b.conj();
                    }
                }
                self.px.inverse(&mut buf);
                let base = j * nx * c;
                for (i, z) in buf.iter().enumerate() {
                    out[base + i * c + ch] = z.re * scale;
                    if pair {
                        out[base + i * c + ch + 1] = z.im * scale;
                    }
                }
                ch += 2;
            }
        }
        out
    }

    /// Applies `P_k` (or `P_k^H` when `adjoint`) on the half lattice.
    fn multiply(
        &self,
        spec: &[Complex64],
        weights: &[f64],
        cin: usize,
        cout: usize,
        adjoint: bool,
    ) -> Vec<Complex64> {
        let block = cin * cout;
        let (src_c, dst_c) = if adjoint { (cout, cin) } else { (cin, cout) };
        let mut out = vec![Complex64::default(); (self.k + 1) * self.ky_count() * dst_c];
        for (kx, ky, m) in self.half_modes() {
            let (re, im) = if m == 0 {
                (&weights[..block], None)
            } else {
                (
                    &weights[(2 * m - 1) * block..2 * m * block],
                    Some(&weights[2 * m * block..(2 * m + 1) * block]),
                )
            };
            let s0 = self.spec_index(kx, ky, src_c, 0);
            let d0 = self.spec_index(kx, ky, dst_c, 0);
            for i in 0..cin {
                for o in 0..cout {
                    let p = Complex64::new(re[i * cout + o], im.map_or(0.0, |w| w[i * cout + o]));
                    if adjoint {
                        out[d0 + i] += spec[s0 + o] * p.conj();
                    } else {
                        out[d0 + o] += spec[s0 + i] * p;
                    }
                }
            }
        }
        out
    }

    /// Output `[points, cout]` and the input spectrum (kept for the backward pass).
    pub fn forward(
        &self,
        v: &[f64],
        weights: &[f64],
        cin: usize,
        cout: usize,
    ) -> (Vec<f64>, Vec<Complex64>) {
        let v_hat = self.analyze(v, cin);
        let w_hat = self.multiply(&v_hat, weights, cin, cout, false);
        (self.synthesize(&w_hat, cout), v_hat)
    }

    /// Vector-Jacobian products with respect to the input and the weights.
    pub fn backward(
        &self,
        g: &[f64],
        v_hat: &[Complex64],
        weights: &[f64],
        cin: usize,
        cout: usize,
    ) -> (Vec<f64>, Vec<f64>) {
        let g_hat = self.analyze(g, cout);
        let grad_v = self.synthesize(&self.multiply(&g_hat, weights, cin, cout, true), cin);
        let block = cin * cout;
        let inv_n = 1.0 / self.points() as f64;
        let mut grad_w = vec![0.0; self.weight_blocks() * block];
        for (kx, ky, m) in self.half_modes() {
            let vi = self.spec_index(kx, ky, cin, 0);
            let go = self.spec_index(kx, ky, cout, 0);
            for i in 0..cin {
                for o in 0..cout {
                    let z = v_hat[vi + i].conj() * g_hat[go + o];
                    if m == 0 {
                        grad_w[i * cout + o] += z.re * inv_n;
                    } else {
                        grad_w[(2 * m - 1) * block + i * cout + o] += 2.0 * z.re * inv_n;
                        grad_w[2 * m * block + i * cout + o] += 2.0 * z.im * inv_n;
                    }
                }
            }
        }
        (grad_v, grad_w)
    }
}

/// Multiplier on the discrete orthonormal Neumann-cosine modes
/// `0 <= k1, k2 <= K`; weight tensor `[(K+1)^2, c_in, c_out]` with block
/// `k2 * (K+1) + k1`.
#[derive(Debug, Clone)]
pub struct CosineConvPlan {
    nx: usize,
    ny: usize,
    k: usize,
    cx: Vec<f64>,
    cy: Vec<f64>,
}

impl CosineConvPlan {
    pub fn new(grid: &Grid2D, k: usize) -> Result<Self> {
        let max = grid.nx().min(grid.ny()) - 1;
        if k > max {
            return Err(Error::ModeOutOfRange { k, max });
        }
        let (nx, ny) = (grid.nx(), grid.ny());
        let table = |n: usize| -> Vec<f64> {
            (0..=k)
                .flat_map(|m| (0..n).map(move |i| cosine_basis(m, i, n)))
                .collect()
        };
        Ok(Self {
            nx,
            ny,
            k,
            cx: table(nx),
            cy: table(ny),
        })
    }

    pub fn modes(&self) -> usize {
        self.k
    }

    pub fn weight_blocks(&self) -> usize {
        (self.k + 1).pow(2)
    }

    /// Orthonormal cosine coefficients `[(K+1)^2, c]`.
    pub fn analyze(&self, v: &[f64], c: usize) -> Vec<f64> {
        let (nx, ny, m) = (self.nx, self.ny, self.k + 1);
        let mut rows = vec![0.0; ny * m * c];
        for j in 0..ny {
            for k1 in 0..m {
                let basis = &self.cx[k1 * nx..(k1 + 1) * nx];
                let dst = &mut rows[(j * m + k1) * c..(j * m + k1 + 1) * c];
                for (i, b) in basis.iter().enumerate() {
                    let src = &v[(j * nx + i) * c..(j * nx + i + 1) * c];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += b * s;
                    }
                }
            }
        }
        let mut out = vec![0.0; m * m * c];
        for k2 in 0..m {
            for j in 0..ny {
                let b = self.cy[k2 * ny + j];
                for k1 in 0..m {
                    let dst = (k2 * m + k1) * c;
                    let src = (j * m + k1) * c;
                    for ch in 0..c {
                        out[dst + ch] += b * rows[src + ch];
                    }
                }
            }
        }
        out
    }

    /// Adjoint (and inverse on the retained span) of [`CosineConvPlan::analyze`].
    pub fn synthesize(&self, a: &[f64], c: usize) -> Vec<f64> {
        let (nx, ny, m) = (self.nx, self.ny, self.k + 1);
        let mut rows = vec![0.0; ny * m * c];
        for j in 0..ny {
            for k2 in 0..m {
                let b = self.cy[k2 * ny + j];
                for k1 in 0..m {
                    let src = (k2 * m + k1) * c;
                    let dst = (j * m + k1) * c;
                    for ch in 0..c {
                        rows[dst + ch] += b * a[src + ch];
                    }
                }
            }
        }
        let mut out = vec![0.0; nx * ny * c];
        for j in 0..ny {
            for k1 in 0..m {
                let basis = &self.cx[k1 * nx..(k1 + 1) * nx];
                let src = &rows[(j * m + k1) * c..(j * m + k1 + 1) * c];
                for (i, b) in basis.iter().enumerate() {
                    let dst = &mut out[(j * nx + i) * c..(j * nx + i + 1) * c];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += b * s;
                    }
                }
            }
        }
        out
    }

    fn multiply(
        &self,
        a: &[f64],
        weights: &[f64],
        cin: usize,
        cout: usize,
        adjoint: bool,
    ) -> Vec<f64> {
        let block = cin * cout;
        let (src_c, dst_c) = if adjoint { (cout, cin) } else { (cin, cout) };
        let mut out = vec![0.0; self.weight_blocks() * dst_c];
        for m in 0..self.weight_blocks() {
            let t = &weights[m * block..(m + 1) * block];
            let s = &a[m * src_c..(m + 1) * src_c];
            let d = &mut out[m * dst_c..(m + 1) * dst_c];
            for i in 0..cin {
                for o in 0..cout {
                    if adjoint {
                        d[i] += t[i * cout + o] * s[o];
                    } else {
                        d[o] += t[i * cout + o] * s[i];
                    }
                }
            }
        }
        out
    }

    pub fn forward(
        &self,
        v: &[f64],
        weights: &[f64],
        cin: usize,
        cout: usize,
    ) -> (Vec<f64>, Vec<f64>) {
        let a = self.analyze(v, cin);
        (
            self.synthesize(&self.multiply(&a, weights, cin, cout, false), cout),
            a,
        )
    }

    pub fn backward(
        &self,
        g: &[f64],
        a: &[f64],
        weights: &[f64],
        cin: usize,
        cout: usize,
    ) -> (Vec<f64>, Vec<f64>) {
        let ga = self.analyze(g, cout);
        let grad_v = self.synthesize(&self.multiply(&ga, weights, cin, cout, true), cin);
        let block = cin * cout;
        let mut grad_w = vec![0.0; self.weight_blocks() * block];
        for m in 0..self.weight_blocks() {
            for i in 0..cin {
                for o in 0..cout {
                    grad_w[m * block + i * cout + o] = a[m * cin + i] * ga[m * cout + o];
                }
            }
        }
        (grad_v, grad_w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{mean_over_domain, Field};
    use crate::spectral::{fft2, ifft2, SpectralField};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (0..n)
            .map(|_| {
                s = s
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect()
    }

    /// Dense oracle: expand the half-lattice weights to every mode of the
    /// square lattice and multiply the full normalized spectrum.
    fn dense_oracle(
        grid: &Grid2D,
        k: usize,
        v: &[f64],
        w: &[f64],
        cin: usize,
        cout: usize,
    ) -> Vec<f64> {
        let plan = SpectralConvPlan::new(grid, k).unwrap();
        let f = Field::new(*grid, cin, v.to_vec()).unwrap();
        let s = fft2(&f);
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut out = vec![Complex64::default(); nx * ny * cout];
        let block = cin * cout;
        let p_of = |kx: i64, ky: i64, i: usize, o: usize| -> Complex64 {
            let (ax, ay, conj) = if kx > 0 || (kx == 0 && ky >= 0) {
                (kx, ky, false)
            } else {
                (-kx, -ky, true)
            };
            let m = plan
                .half_modes()
                .find(|&(x, y, _)| x as i64 == ax && y == ay)
                .unwrap()
                .2;
            let p = if m == 0 {
                Complex64::new(w[i * cout + o], 0.0)
            } else {
                Complex64::new(
                    w[(2 * m - 1) * block + i * cout + o],
                    w[2 * m * block + i * cout + o],
                )
            };
            if conj {
                p.conj()
            } else {
                p
            }
        };
        let kk = k as i64;
        for ky in -kk..=kk {
            for kx in -kk..=kk {
                for o in 0..cout {
                    let mut acc = Complex64::default();
                    for i in 0..cin {
                        acc += s.coeff(kx, ky, i) * p_of(kx, ky, i, o);
                    }
                    out[(index_of(ky, ny) * nx + index_of(kx, nx)) * cout + o] = acc;
                }
            }
        }
        ifft2(&SpectralField::new(*grid, cout, out).unwrap())
            .unwrap()
            .into_data()
    }

    #[test]
    fn matches_dense_multiplier() {
        let g = Grid2D::new(16, 8, 1.0, 2.0).unwrap();
        for (k, cin, cout) in [(0, 2, 3), (1, 3, 2), (2, 4, 4), (3, 1, 1)] {
            let plan = SpectralConvPlan::new(&g, k).unwrap();
            let v = noise(g.len() * cin, 1);
            let w = noise(plan.weight_blocks() * cin * cout, 2);
            let (y, _) = plan.forward(&v, &w, cin, cout);
            let expect = dense_oracle(&g, k, &v, &w, cin, cout);
            for (a, b) in y.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-12, "K={k}");
            }
        }
    }

    #[test]
    fn zero_mode_identity_is_mean() {
        let g = Grid2D::unit(8).unwrap();
        let plan = SpectralConvPlan::new(&g, 0).unwrap();
        let v = noise(g.len() * 2, 3);
        let w = vec![1.0, 0.0, 0.0, 1.0];
        let (y, _) = plan.forward(&v, &w, 2, 2);
        let means = mean_over_domain(&Field::new(g, 2, v).unwrap());
        for p in 0..g.len() {
            for c in 0..2 {
                assert!((y[p * 2 + c] - means[c]).abs() < 1e-12);
            }
        }
        assert!(SpectralConvPlan::new(&g, 4).is_err());
    }

    #[test]
    fn adjoint_identity() {
        let g = Grid2D::new(8, 16, 1.0, 1.0).unwrap();
        for (k, cin, cout) in [(1, 2, 3), (3, 3, 2)] {
            let plan = SpectralConvPlan::new(&g, k).unwrap();
            let v = noise(g.len() * cin, 4);
            let u = noise(g.len() * cout, 5);
            let w = noise(plan.weight_blocks() * cin * cout, 6);
            let (av, v_hat) = plan.forward(&v, &w, cin, cout);
            let (atu, _) = plan.backward(&u, &v_hat, &w, cin, cout);
            let lhs: f64 = av.iter().zip(&u).map(|(a, b)| a * b).sum();
            let rhs: f64 = v.iter().zip(&atu).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn cosine_plan_round_trip_and_adjoint() {
        let g = Grid2D::unit(8).unwrap();
        let full = CosineConvPlan::new(&g, 7).unwrap();
        let v = noise(g.len() * 2, 7);
        let back = full.synthesize(&full.analyze(&v, 2), 2);
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        let plan = CosineConvPlan::new(&g, 2).unwrap();
        let w = noise(plan.weight_blocks() * 6, 8);
        let u = noise(g.len() * 3, 9);
        let (av, a) = plan.forward(&v, &w, 2, 3);
        let (atu, _) = plan.backward(&u, &a, &w, 2, 3);
        let lhs: f64 = av.iter().zip(&u).map(|(a, b)| a * b).sum();
        let rhs: f64 = v.iter().zip(&atu).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }
}
