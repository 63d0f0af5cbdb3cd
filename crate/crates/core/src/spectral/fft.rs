//! Iterative radix-2 complex FFT.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Precomputed twiddles and bit-reversal table for one power-of-two length.
///
/// Both directions are unnormalised: `forward` uses `exp(-2 pi i k m / n)`,
/// `inverse` uses the conjugate kernel.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    rev: Vec<u32>,
    // Stage-major twiddles: stage with half-length h occupies [h - 1, 2h - 1).
    fwd: Vec<Complex64>,
    inv: Vec<Complex64>,
}

impl FftPlan {
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two(), "FFT length {n} is not a power of two");
        let bits = n.trailing_zeros();
        let rev = (0..n as u32)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (32 - bits)
                }
            })
            .collect();
        let mut fwd = Vec::with_capacity(n.saturating_sub(1));
        let mut half = 1;
        while half < n {
            for k in 0..half {
                let theta = -PI * k as f64 / half as f64;
                fwd.push(Complex64::new(theta.cos(), theta.sin()));
            }
            half *= 2;
        }
        let inv = fwd.iter().map(|w| w.conj()).collect();
        Self { n, rev, fwd, inv }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.fwd);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.inv);
    }

    fn run(&self, buf: &mut [Complex64], twiddles: &[Complex64]) {
        assert_eq!(buf.len(), self.n, "buffer length does not match plan");
        for (i, &r) in self.rev.iter().enumerate() {
            let r = r as usize;
            if r > i {
                buf.swap(i, r);
            }
        }
        let mut half = 1;
        while half < self.n {
            let tw = &twiddles[half - 1..2 * half - 1];
            for block in buf.chunks_exact_mut(2 * half) {
                let (lo, hi) = block.split_at_mut(half);
                for ((a, b), w) in lo.iter_mut().zip(hi.iter_mut()).zip(tw) {
                    let t = *b * w;
                    *b = *a - t;
                    *a += t;
                }
            }
            half *= 2;
        }
    }
}

/// In-place 2-D transform of an `ny x nx` row-major complex array.
pub fn fft2_in_place(
    buf: &mut [Complex64],
    px: &FftPlan,
    py: &FftPlan,
    inverse: bool,
    scratch: &mut Vec<Complex64>,
) {
    let (nx, ny) = (px.len(), py.len());
    assert_eq!(buf.len(), nx * ny);
    for row in buf.chunks_exact_mut(nx) {
        if inverse {
            px.inverse(row)
        } else {
            px.forward(row)
        }
    }
    scratch.resize(ny, Complex64::default());
    for i in 0..nx {
        for j in 0..ny {
            scratch[j] = buf[j * nx + i];
        }
        if inverse {
            py.inverse(scratch)
        } else {
            py.forward(scratch)
        }
        for j in 0..ny {
            buf[j * nx + i] = scratch[j];
        }
    }
}

/// Signed wavenumber of DFT index `idx` for length `n`, in `[-n/2, n/2)`.
#[inline]
pub fn wavenumber(idx: usize, n: usize) -> i64 {
    if idx < n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

/// DFT index of signed wavenumber `k`.
#[inline]
pub fn index_of(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}
