//! Fourier and cosine transforms of [`Field`]s, mode truncation and
//! spectral differential operators.
//!
//! Fourier coefficients use physical coordinates and carry the `1/(nx ny)`
//! factor on the forward transform:
//!
//! `u_hat(k) = 1/(nx ny) * sum_x u(x) exp(-2 pi i k.x / L)`
//!
//! so `u_hat(0)` is the spatial mean. Because samples sit at cell centres the
//! coefficients differ from a plain index DFT by the phase
//! `exp(-i pi (kx/nx + ky/ny))`.

pub mod dct;
pub mod fft;

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::{mean_over_domain, Field, Grid2D};
use dct::DctPlan;
use fft::{fft2_in_place, index_of, wavenumber, FftPlan};

/// Residue (relative to the field magnitude, floored at 1) above which an
/// inverse transform is rejected as non-real.
pub const IMAG_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid2D,
    channels: usize,
    /// Natural DFT order: entry for wavenumber index `(kx, ky)` and channel
    /// `c` lives at `(ky * nx + kx) * channels + c`.
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: Grid2D, channels: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() * channels || channels == 0 {
            return Err(Error::ShapeMismatch(format!(
                "spectral field needs {} coefficients, got {}",
                grid.len() * channels,
                coeffs.len()
            )));
        }
        Ok(Self {
            grid,
            channels,
            coeffs,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient for signed wavenumber `(kx, ky)`.
    pub fn coeff(&self, kx: i64, ky: i64, c: usize) -> Complex64 {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        self.coeffs[(index_of(ky, ny) * nx + index_of(kx, nx)) * self.channels + c]
    }
}

fn phase(kx: i64, ky: i64, grid: &Grid2D) -> Complex64 {
    let th = -PI * (kx as f64 / grid.nx() as f64 + ky as f64 / grid.ny() as f64);
    Complex64::new(th.cos(), th.sin())
}

pub fn fft2(f: &Field) -> SpectralField {
    let grid = *f.grid();
    let (nx, ny, c) = (grid.nx(), grid.ny(), f.channels());
    let (px, py) = (FftPlan::new(nx), FftPlan::new(ny));
    let mut coeffs = vec![Complex64::default(); grid.len() * c];
    let mut buf = vec![Complex64::default(); grid.len()];
    let mut scratch = Vec::new();
    let norm = 1.0 / grid.len() as f64;
    for ch in 0..c {
        for (b, v) in buf.iter_mut().zip(f.data().iter().skip(ch).step_by(c)) {
            *b = Complex64::new(*v, 0.0);
        }
        fft2_in_place(&mut buf, &px, &py, false, &mut scratch);
        for j in 0..ny {
            let ky = wavenumber(j, ny);
            for i in 0..nx {
                let kx = wavenumber(i, nx);
                coeffs[(j * nx + i) * c + ch] = buf[j * nx + i] * phase(kx, ky, &grid) * norm;
            }
        }
    }
    SpectralField {
        grid,
        channels: c,
        coeffs,
    }
}

pub fn ifft2(s: &SpectralField) -> Result<Field> {
    let grid = s.grid;
    let (nx, ny, c) = (grid.nx(), grid.ny(), s.channels);
    let (px, py) = (FftPlan::new(nx), FftPlan::new(ny));
    let mut data = vec![0.0; grid.len() * c];
    let mut buf = vec![Complex64::default(); grid.len()];
    let mut scratch = Vec::new();
    for ch in 0..c {
        for j in 0..ny {
            let ky = wavenumber(j, ny);
            for i in 0..nx {
                let kx = wavenumber(i, nx);
                buf[j * nx + i] = s.coeffs[(j * nx + i) * c + ch] * phase(kx, ky, &grid).conj();
            }
        }
        fft2_in_place(&mut buf, &px, &py, true, &mut scratch);
        let scale = buf.iter().fold(1.0f64, |m, z| m.max(z.re.abs()));
        let residue = buf.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
        if residue > IMAG_TOLERANCE * scale {
            return Err(Error::NonRealSpectrum(residue / scale));
        }
        for (d, z) in data.iter_mut().skip(ch).step_by(c).zip(&buf) {
            *d = z.re;
        }
    }
    Field::new(grid, c, data)
}

/// Largest admissible truncation radius for a grid (`min(nx, ny)/2 - 1`).
pub fn max_modes(grid: &Grid2D) -> usize {
    grid.nx().min(grid.ny()) / 2 - 1
}

/// Projection onto the square lattice `|k|_inf <= k_max`.
pub fn truncate_modes(f: &Field, k_max: usize) -> Result<Field> {
    let max = max_modes(f.grid());
    if k_max > max {
        return Err(Error::ModeOutOfRange { k: k_max, max });
    }
    let mut s = fft2(f);
    let (nx, ny, c) = (f.grid().nx(), f.grid().ny(), f.channels());
    let k_max = k_max as i64;
    for j in 0..ny {
        let ky = wavenumber(j, ny);
        for i in 0..nx {
            let kx = wavenumber(i, nx);
            if kx.abs() > k_max || ky.abs() > k_max {
                let base = (j * nx + i) * c;
                s.coeffs[base..base + c].fill(Complex64::default());
            }
        }
    }
    ifft2(&s)
}

/// Multiplies every coefficient by `-|2 pi k / L|^2` (periodic interpretation).
pub fn spectral_laplacian(f: &Field) -> Result<Field> {
    let mut s = fft2(f);
    apply_symbol(&mut s, |kx2, ky2| -(kx2 + ky2));
    ifft2(&s)
}

/// Inverts [`spectral_laplacian`] on mean-zero fields; the `k = 0` mode is set to zero.
pub fn inverse_laplacian(f: &Field) -> Result<Field> {
    for m in mean_over_domain(f) {
        if m.abs() > 1e-10 {
            return Err(Error::NotMeanZero(m));
        }
    }
    let mut s = fft2(f);
    apply_symbol(&mut s, |kx2, ky2| {
        let k2 = kx2 + ky2;
        if k2 == 0.0 {
            0.0
        } else {
            -1.0 / k2
        }
    });
    ifft2(&s)
}

fn apply_symbol(s: &mut SpectralField, symbol: impl Fn(f64, f64) -> f64) {
    let grid = s.grid;
    let (nx, ny, c) = (grid.nx(), grid.ny(), s.channels);
    for j in 0..ny {
        let ky = 2.0 * PI * wavenumber(j, ny) as f64 / grid.ly();
        for i in 0..nx {
            let kx = 2.0 * PI * wavenumber(i, nx) as f64 / grid.lx();
            let m = symbol(kx * kx, ky * ky);
            for z in &mut s.coeffs[(j * nx + i) * c..(j * nx + i + 1) * c] {
                *z *= m;
            }
        }
    }
}

/// Coefficients of the orthonormal 2-D DCT-II.
///
/// Entry `(k1, k2)` of channel `c` lives at `(k2 * nx + k1) * channels + c`.
/// With the orthonormal scaling, coefficient `(0, 0)` equals
/// `sqrt(nx * ny) * mean`.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineSpectrum {
    grid: Grid2D,
    channels: usize,
    coeffs: Vec<f64>,
}

impl CosineSpectrum {
    pub fn new(grid: Grid2D, channels: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != grid.len() * channels || channels == 0 {
            return Err(Error::ShapeMismatch(format!(
                "cosine spectrum needs {} coefficients, got {}",
                grid.len() * channels,
                coeffs.len()
            )));
        }
        Ok(Self {
            grid,
            channels,
            coeffs,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, k1: usize, k2: usize, c: usize) -> f64 {
        self.coeffs[(k2 * self.grid.nx() + k1) * self.channels + c]
    }
}

fn separable_dct(data: &[f64], grid: &Grid2D, channels: usize, inverse: bool) -> Vec<f64> {
    let (nx, ny, c) = (grid.nx(), grid.ny(), channels);
    let (dx, dy) = (DctPlan::new(nx), DctPlan::new(ny));
    let mut out = data.to_vec();
    let mut line_in = vec![0.0; nx.max(ny)];
    let mut line_out = vec![0.0; nx.max(ny)];
    let mut buf = Vec::new();
    for ch in 0..c {
        for j in 0..ny {
            for i in 0..nx {
                line_in[i] = out[(j * nx + i) * c + ch];
            }
            if inverse {
                dx.inverse(&line_in[..nx], &mut line_out[..nx], &mut buf);
            } else {
                dx.forward(&line_in[..nx], &mut line_out[..nx], &mut buf);
            }
            for i in 0..nx {
                out[(j * nx + i) * c + ch] = line_out[i];
            }
        }
        for i in 0..nx {
            for j in 0..ny {
                line_in[j] = out[(j * nx + i) * c + ch];
            }
            if inverse {
                dy.inverse(&line_in[..ny], &mut line_out[..ny], &mut buf);
            } else {
                dy.forward(&line_in[..ny], &mut line_out[..ny], &mut buf);
            }
            for j in 0..ny {
                out[(j * nx + i) * c + ch] = line_out[j];
            }
        }
    }
    out
}

pub fn dct2(f: &Field) -> CosineSpectrum {
    CosineSpectrum {
        grid: *f.grid(),
        channels: f.channels(),
        coeffs: separable_dct(f.data(), f.grid(), f.channels(), false),
    }
}

pub fn idct2(s: &CosineSpectrum) -> Result<Field> {
    Field::new(
        s.grid,
        s.channels,
        separable_dct(&s.coeffs, &s.grid, s.channels, true),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::rel_l2_error;

    fn noise(grid: Grid2D, c: usize, seed: u64) -> Field {
        let mut s = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
        Field::from_fn(grid, c, |_, _, _| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .unwrap()
    }

    fn max_diff(a: &Field, b: &Field) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn constant_is_dc_only() {
        let g = Grid2D::unit(16).unwrap();
        let s = fft2(&Field::constant(g, 1, 2.0));
        assert!((s.coeff(0, 0, 0) - Complex64::new(2.0, 0.0)).norm() < 1e-13);
        for (idx, z) in s.coeffs().iter().enumerate().skip(1) {
            assert!(z.norm() < 1e-13, "mode {idx}");
        }
    }

    #[test]
    fn cosine_coefficients_are_one_half() {
        let g = Grid2D::unit(32).unwrap();
        let f = Field::from_fn(g, 1, |x, _, _| (2.0 * PI * x).cos()).unwrap();
        let s = fft2(&f);
        assert!((s.coeff(1, 0, 0) - Complex64::new(0.5, 0.0)).norm() < 1e-13);
        assert!((s.coeff(-1, 0, 0) - Complex64::new(0.5, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn round_trip_and_symmetry() {
        let g = Grid2D::new(32, 16, 1.0, 2.5).unwrap();
        let f = noise(g, 2, 1);
        let s = fft2(&f);
        let back = ifft2(&s).unwrap();
        assert!(max_diff(&f, &back) < 1e-12);
        let means = mean_over_domain(&f);
        for c in 0..2 {
            assert!((s.coeff(0, 0, c).re - means[c]).abs() < 1e-12);
            for ky in -7i64..8 {
                for kx in -15i64..16 {
                    let d = s.coeff(-kx, -ky, c) - s.coeff(kx, ky, c).conj();
                    assert!(d.norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn ifft_rejects_complex_output() {
        let g = Grid2D::unit(8).unwrap();
        let mut s = fft2(&Field::zeros(g, 1));
        s.coeffs_mut()[1] = Complex64::new(0.0, 1.0);
        assert!(matches!(ifft2(&s), Err(Error::NonRealSpectrum(_))));
    }

    #[test]
    fn truncation_examples() {
        let g = Grid2D::unit(32).unwrap();
        let f = noise(g, 1, 5);
        let full = truncate_modes(&f, 15).unwrap();
        // Only the Nyquist lines are removed at the largest admissible radius,
        // so compare against the field with those lines removed explicitly.
        let mut s = fft2(&f);
        for j in 0..32 {
            for i in 0..32 {
                if i == 16 || j == 16 {
                    s.coeffs_mut()[j * 32 + i] = Complex64::default();
                }
            }
        }
        assert!(max_diff(&full, &ifft2(&s).unwrap()) < 1e-12);

        let dc = truncate_modes(&f, 0).unwrap();
        let m = mean_over_domain(&f)[0];
        assert!(dc.data().iter().all(|v| (v - m).abs() < 1e-12));

        let two =
            Field::from_fn(g, 1, |x, _, _| (2.0 * PI * x).cos() + (6.0 * PI * x).cos()).unwrap();
        let one = Field::from_fn(g, 1, |x, _, _| (2.0 * PI * x).cos()).unwrap();
        assert!(max_diff(&truncate_modes(&two, 2).unwrap(), &one) < 1e-12);

        assert!(matches!(
            truncate_modes(&f, 16),
            Err(Error::ModeOutOfRange { .. })
        ));
    }

    #[test]
    fn smooth_field_truncated_at_max_radius_is_identity() {
        let g = Grid2D::unit(32).unwrap();
        let f = Field::from_fn(g, 1, |x, y, _| {
            (2.0 * PI * x).sin() * (4.0 * PI * y).cos() + 0.3
        })
        .unwrap();
        assert!(max_diff(&truncate_modes(&f, 15).unwrap(), &f) < 1e-12);
    }

    #[test]
    fn laplacian_examples() {
        let g = Grid2D::periodic_2pi(32).unwrap();
        let f = Field::from_fn(g, 1, |x, _, _| x.sin()).unwrap();
        let lap = spectral_laplacian(&f).unwrap();
        assert!(max_diff(&lap, &f.scaled(-1.0).unwrap()) < 1e-11);

        let c = spectral_laplacian(&Field::constant(g, 1, 4.0)).unwrap();
        assert!(c.max_abs() < 1e-12);

        let r = noise(g, 1, 8);
        let back = inverse_laplacian(&spectral_laplacian(&r).unwrap()).unwrap();
        let m = mean_over_domain(&r)[0];
        assert!(max_diff(&back, &r.map(|v| v - m).unwrap()) < 1e-10);

        assert!(matches!(
            inverse_laplacian(&Field::constant(g, 1, 1.0)),
            Err(Error::NotMeanZero(_))
        ));
    }

    #[test]
    fn dct_examples() {
        let g = Grid2D::new(16, 32, 1.0, 1.0).unwrap();
        let s = dct2(&Field::constant(g, 1, 1.5));
        assert!((s.coeff(0, 0, 0) - 1.5 * (16.0f64 * 32.0).sqrt()).abs() < 1e-12);
        assert!(s.coeffs().iter().skip(1).all(|v| v.abs() < 1e-12));

        let cx = Field::from_fn(g, 1, |x, _, _| (PI * x).cos()).unwrap();
        let s = dct2(&cx);
        for k2 in 0..32 {
            for k1 in 0..16 {
                if (k1, k2) != (1, 0) {
                    assert!(s.coeff(k1, k2, 0).abs() < 1e-12);
                }
            }
        }
        assert!(s.coeff(1, 0, 0).abs() > 1.0);

        let f = noise(g, 3, 2);
        let back = idct2(&dct2(&f)).unwrap();
        assert!(max_diff(&f, &back) < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn parseval(seed in 0u64..10_000) {
                let g = Grid2D::new(16, 32, 1.0, 3.0).unwrap();
                let f = noise(g, 1, seed);
                let energy = f.data().iter().map(|v| v * v).sum::<f64>() / g.len() as f64;
                let spec: f64 = fft2(&f).coeffs().iter().map(|z| z.norm_sqr()).sum();
                prop_assert!((energy - spec).abs() < 1e-10);
            }

            #[test]
            fn truncation_is_an_idempotent_linear_projection(
                seed in 0u64..10_000, k in 0usize..8, alpha in -2.0f64..2.0
            ) {
                let g = Grid2D::unit(16).unwrap();
                let f = noise(g, 1, seed);
                let h = noise(g, 1, seed + 1);
                let once = truncate_modes(&f, k).unwrap();
                let twice = truncate_modes(&once, k).unwrap();
                prop_assert!(max_diff(&once, &twice) <= 1e-13);

                let lhs = truncate_modes(&f.scaled(alpha).unwrap().add(&h).unwrap(), k).unwrap();
                let rhs = once.scaled(alpha).unwrap().add(&truncate_modes(&h, k).unwrap()).unwrap();
                prop_assert!(max_diff(&lhs, &rhs) < 1e-12);
            }

            #[test]
            fn truncation_error_non_increasing_in_k(seed in 0u64..10_000) {
                let g = Grid2D::unit(16).unwrap();
                let f = noise(g, 1, seed);
                let mut prev = f64::INFINITY;
                for k in 0..=max_modes(&g) {
                    let e = rel_l2_error(&truncate_modes(&f, k).unwrap(), &f).unwrap();
                    prop_assert!(e <= prev + 1e-14);
                    prev = e;
                }
            }
        }
    }
}
