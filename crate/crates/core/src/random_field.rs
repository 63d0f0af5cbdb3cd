//! Gaussian random field priors with covariance `(-Laplacian + tau_sq)^(-power)`
//! and the pointwise transforms that turn samples into PDE coefficients.
//!
//! Randomness is counter-based: the standard normals attached to one
//! eigenmode are a pure function of `(seed, sample index, mode)`, so samples
//! can be drawn in any order or in parallel with identical results, and the
//! low modes of a sample do not depend on the grid resolution.

use num_complex::Complex64;
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::{Field, Grid2D};
use crate::spectral::fft::{index_of, wavenumber};
use crate::spectral::{idct2, ifft2, CosineSpectrum, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrfBasis {
    /// Cosine eigenfunctions of the Laplacian with homogeneous Neumann conditions.
    NeumannCosine,
    /// Fourier modes of the periodic Laplacian.
    PeriodicFourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrfSpec {
    pub tau_sq: f64,
    pub power: f64,
    pub basis: GrfBasis,
    pub seed: u64,
    /// Keep only modes with `|k|_inf <= max_mode`.
    #[serde(default)]
    pub max_mode: Option<usize>,
    /// Sample the constant mode; requires `tau_sq > 0`.
    #[serde(default = "default_true")]
    pub include_mean: bool,
}

fn default_true() -> bool {
    true
}

impl GrfSpec {
    /// `N(0, (-Laplacian + 9)^-2)` with Neumann conditions.
    pub fn neumann(seed: u64) -> Self {
        Self {
            tau_sq: 9.0,
            power: 2.0,
            basis: GrfBasis::NeumannCosine,
            seed,
            max_mode: None,
            include_mean: true,
        }
    }

    /// Mean-free periodic field with the same covariance family.
    pub fn periodic(seed: u64) -> Self {
        Self {
            basis: GrfBasis::PeriodicFourier,
            include_mean: false,
            ..Self::neumann(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_sq >= 0.0 && self.tau_sq.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau_sq = {}", self.tau_sq)));
        }
        if !(self.power >= 1.0 && self.power.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "power = {} (must be >= 1 for a square-summable spectrum)",
                self.power
            )));
        }
        if self.include_mean && self.tau_sq == 0.0 {
            return Err(Error::InvalidParameter(
                "the constant mode has infinite variance when tau_sq = 0".into(),
            ));
        }
        Ok(())
    }

    /// Covariance eigenvalue of mode `(k1, k2)`; signed for the periodic basis.
    pub fn eigenvalue(&self, grid: &Grid2D, k1: i64, k2: i64) -> f64 {
        let (a, b) = (k1 as f64 / grid.lx(), k2 as f64 / grid.ly());
        let lap = match self.basis {
            GrfBasis::NeumannCosine => PI * PI * (a * a + b * b),
            GrfBasis::PeriodicFourier => 4.0 * PI * PI * (a * a + b * b),
        };
        (lap + self.tau_sq).powf(-self.power)
    }

    fn keeps(&self, k1: i64, k2: i64) -> bool {
        if k1 == 0 && k2 == 0 && !self.include_mean {
            return false;
        }
        self.max_mode
            .is_none_or(|m| k1.unsigned_abs() as usize <= m && k2.unsigned_abs() as usize <= m)
    }
}

/// Two independent standard normals for one mode of one sample.
fn mode_normals(seed: u64, index: u64, key: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.set_word_pos(u128::from(key) * 4);
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 / (1u64 << 53) as f64;
    let u2 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let r = (-2.0 * u1.ln()).sqrt();
    let th = 2.0 * PI * u2;
    (r * th.cos(), r * th.sin())
}

fn neumann_key(k1: usize, k2: usize) -> u64 {
    k1 as u64 | (k2 as u64) << 16
}

fn periodic_key(kx: i64, ky: i64) -> u64 {
    (kx + 32768) as u64 | ((ky + 32768) as u64) << 16
}

/// Sample `index` of the field described by `spec` on `grid`.
pub fn sample_grf_one(spec: &GrfSpec, grid: &Grid2D, index: u64) -> Result<Field> {
    spec.validate()?;
    let (nx, ny) = (grid.nx(), grid.ny());
    match spec.basis {
        GrfBasis::NeumannCosine => {
            // Discrete orthonormal cosine vectors equal the L2-orthonormal
            // eigenfunctions scaled by sqrt(cell area).
            let scale = (grid.len() as f64 / grid.area()).sqrt();
            let mut coeffs = vec![0.0; grid.len()];
            for k2 in 0..ny {
                for k1 in 0..nx {
                    if !spec.keeps(k1 as i64, k2 as i64) {
                        continue;
                    }
                    let (xi, _) = mode_normals(spec.seed, index, neumann_key(k1, k2));
                    let lam = spec.eigenvalue(grid, k1 as i64, k2 as i64);
                    coeffs[k2 * nx + k1] = scale * lam.sqrt() * xi;
                }
            }
            idct2(&CosineSpectrum::new(*grid, 1, coeffs)?)
        }
        GrfBasis::PeriodicFourier => {
            let inv_area = 1.0 / grid.area();
            let mut coeffs = vec![Complex64::default(); grid.len()];
            let (hx, hy) = ((nx / 2) as i64, (ny / 2) as i64);
            for j in 0..ny {
                let ky = wavenumber(j, ny);
                for i in 0..nx {
                    let kx = wavenumber(i, nx);
                    // Nyquist lines have no real partner and are left empty.
                    let upper = kx > 0 || (kx == 0 && ky >= 0);
                    if kx == -hx || ky == -hy || !upper || !spec.keeps(kx, ky) {
                        continue;
                    }
                    let lam = spec.eigenvalue(grid, kx, ky);
                    let (a, b) = mode_normals(spec.seed, index, periodic_key(kx, ky));
                    if kx == 0 && ky == 0 {
                        coeffs[0] = Complex64::new((lam * inv_area).sqrt() * a, 0.0);
                        continue;
                    }
                    let c = Complex64::new(a, -b) * (lam * inv_area * 0.5).sqrt();
                    coeffs[j * nx + i] = c;
                    coeffs[index_of(-ky, ny) * nx + index_of(-kx, nx)] = c.conj();
                }
            }
            ifft2(&SpectralField::new(*grid, 1, coeffs)?)
        }
    }
}

/// Samples `0..n` of the field described by `spec`.
pub fn sample_grf(spec: &GrfSpec, grid: &Grid2D, n: usize) -> Result<Vec<Field>> {
    (0..n as u64)
        .map(|i| sample_grf_one(spec, grid, i))
        .collect()
}

/// `c(x) = 20 + tanh(g(x))`.
pub fn transform_helmholtz(g: &Field) -> Field {
    g.map(|v| 20.0 + v.tanh())
        .expect("tanh of a finite value is finite")
}

/// `a(x) = 4` where `g(x) <= 0`, else `12`.
pub fn transform_darcy_pc(g: &Field) -> Field {
    g.map(|v| if v <= 0.0 { 4.0 } else { 12.0 })
        .expect("two-valued map is finite")
}

/// `a(x) = exp(g(x))`.
pub fn transform_darcy_lognormal(g: &Field) -> Result<Field> {
    g.map(f64::exp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{dct2, fft2};

    #[test]
    fn deterministic_per_index() {
        let g = Grid2D::unit(16).unwrap();
        for spec in [GrfSpec::neumann(3), GrfSpec::periodic(3)] {
            let a = sample_grf_one(&spec, &g, 5).unwrap();
            let b = sample_grf_one(&spec, &g, 5).unwrap();
            assert_eq!(a.data(), b.data());
            let c = sample_grf_one(&spec, &g, 6).unwrap();
            assert_ne!(a.data(), c.data());
            let all = sample_grf(&spec, &g, 7).unwrap();
            assert_eq!(all[5].data(), a.data());
        }
    }

    #[test]
    fn eigenvalue_ratio_flattens_for_large_shift() {
        let g = Grid2D::unit(16).unwrap();
        let spec = GrfSpec {
            tau_sq: 1e6,
            ..GrfSpec::neumann(0)
        };
        let r = spec.eigenvalue(&g, 1, 0) / spec.eigenvalue(&g, 0, 0);
        assert!((r - 1.0).abs() < 1e-4);
        let expected = (PI * PI + 9.0f64).powi(-2);
        assert!((GrfSpec::neumann(0).eigenvalue(&g, 1, 0) - expected).abs() < 1e-16);
    }

    #[test]
    fn rejects_bad_specs() {
        let g = Grid2D::unit(8).unwrap();
        let bad = [
            GrfSpec {
                power: 0.5,
                ..GrfSpec::neumann(0)
            },
            GrfSpec {
                tau_sq: -1.0,
                ..GrfSpec::neumann(0)
            },
            GrfSpec {
                tau_sq: 0.0,
                ..GrfSpec::neumann(0)
            },
        ];
        for spec in bad {
            assert!(sample_grf_one(&spec, &g, 0).is_err());
        }
        let ok = GrfSpec {
            tau_sq: 0.0,
            include_mean: false,
            ..GrfSpec::periodic(0)
        };
        assert!(sample_grf_one(&ok, &g, 0).is_ok());
    }

    #[test]
    fn low_modes_do_not_depend_on_resolution() {
        let spec = GrfSpec {
            max_mode: Some(3),
            ..GrfSpec::neumann(11)
        };
        let coarse = dct2(&sample_grf_one(&spec, &Grid2D::unit(16).unwrap(), 2).unwrap());
        let fine = dct2(&sample_grf_one(&spec, &Grid2D::unit(32).unwrap(), 2).unwrap());
        // Projected L2 coefficient = sqrt(cell area) * discrete coefficient.
        for k2 in 0..4 {
            for k1 in 0..4 {
                let a = coarse.coeff(k1, k2, 0) / 16.0;
                let b = fine.coeff(k1, k2, 0) / 32.0;
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn periodic_mean_free_and_band_limited() {
        let g = Grid2D::periodic_2pi(32).unwrap();
        let spec = GrfSpec {
            max_mode: Some(4),
            ..GrfSpec::periodic(1)
        };
        let f = sample_grf_one(&spec, &g, 0).unwrap();
        let s = fft2(&f);
        assert!(s.coeff(0, 0, 0).norm() < 1e-14);
        assert!(s.coeff(5, 0, 0).norm() < 1e-14);
        assert!(s.coeff(3, -4, 0).norm() > 0.0);
    }

    #[test]
    fn neumann_samples_are_even_across_the_boundary() {
        // Evaluating the cosine series at the mirrored ghost centre -x_0
        // reproduces the first interior sample, so the one-sided normal
        // difference vanishes.
        let g = Grid2D::unit(16).unwrap();
        let f = sample_grf_one(&GrfSpec::neumann(4), &g, 0).unwrap();
        let s = dct2(&f);
        let n = 16usize;
        let series = |x: f64, y: f64| {
            let mut acc = 0.0;
            for k2 in 0..n {
                for k1 in 0..n {
                    let w1 = if k1 == 0 { 1.0 } else { 2.0f64.sqrt() };
                    let w2 = if k2 == 0 { 1.0 } else { 2.0f64.sqrt() };
                    acc += s.coeff(k1, k2, 0) / n as f64
                        * w1
                        * w2
                        * (PI * k1 as f64 * x).cos()
                        * (PI * k2 as f64 * y).cos();
                }
            }
            acc
        };
        for j in 0..n {
            let y = g.y(j);
            assert!((series(-g.x(0), y) - f.at(0, j, 0)).abs() < 1e-10);
            assert!((series(2.0 - g.x(n - 1), y) - f.at(n - 1, j, 0)).abs() < 1e-10);
        }
    }

    #[test]
    fn transforms() {
        let g = Grid2D::unit(8).unwrap();
        let vals = [0.0, -1.0, 1.0, 20.0, 2.0f64.ln()];
        let mut it = vals.iter().cycle();
        let f = Field::from_fn(g, 1, |_, _, _| *it.next().unwrap()).unwrap();
        let h = transform_helmholtz(&f);
        let p = transform_darcy_pc(&f);
        let l = transform_darcy_lognormal(&f).unwrap();
        assert_eq!(h.data()[0], 20.0);
        assert!((h.data()[3] - 21.0).abs() < 1e-8);
        assert_eq!(&p.data()[..3], &[4.0, 4.0, 12.0]);
        assert_eq!(l.data()[0], 1.0);
        assert!((l.data()[4] - 2.0).abs() < 1e-14);

        let r = sample_grf_one(&GrfSpec::neumann(0), &g, 0).unwrap();
        let h = transform_helmholtz(&r);
        let p = transform_darcy_pc(&r);
        let l = transform_darcy_lognormal(&r).unwrap();
        for (idx, v) in r.data().iter().enumerate() {
            assert_eq!(h.data()[idx], 20.0 + v.tanh());
            assert!(h.data()[idx] > 19.0 && h.data()[idx] < 21.0);
            assert!(p.data()[idx] == 4.0 || p.data()[idx] == 12.0);
            assert!(l.data()[idx] > 0.0);
        }
    }
}
