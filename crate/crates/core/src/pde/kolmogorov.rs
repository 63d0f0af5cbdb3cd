//! Forced 2-D Navier-Stokes on the torus in vorticity form,
//!
//! `d_t w + u . grad w = (1/Re) Laplace w - n cos(n y)`,
//!
//! with the velocity recovered from the stream function (`w = -Laplace psi`,
//! `u = d_y psi`, `v = -d_x psi`). Pseudo-spectral in space with 2/3-rule
//! dealiasing of the advection term; three-stage strong-stability-preserving
//! Runge-Kutta in time with an exact integrating factor for viscosity.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{mean_over_domain, Field, Grid2D};
use crate::spectral::fft::{fft2_in_place, wavenumber, FftPlan};

/// Tolerance on the mean vorticity of the initial condition and of the result.
pub const MEAN_TOLERANCE: f64 = 1e-8;

/// Forcing `-n cos(n y)` sampled at cell centres; `n = 0` means unforced.
pub fn kolmogorov_forcing(grid: &Grid2D, n: usize) -> Field {
    let nf = n as f64;
    let ky = 2.0 * std::f64::consts::PI / grid.ly();
    Field::from_fn(*grid, 1, |_, y, _| -nf * (nf * ky * y).cos()).expect("finite forcing")
}

/// Pseudo-spectral integrator for one grid, Reynolds number and forcing.
pub struct KolmogorovSolver {
    grid: Grid2D,
    nu: f64,
    px: FftPlan,
    py: FftPlan,
    kx: Vec<f64>,
    ky: Vec<f64>,
    k2: Vec<f64>,
    dealias: Vec<bool>,
    forcing_hat: Vec<Complex64>,
}

struct Scratch {
    u: Vec<Complex64>,
    v: Vec<Complex64>,
    wx: Vec<Complex64>,
    wy: Vec<Complex64>,
    col: Vec<Complex64>,
}

impl KolmogorovSolver {
    pub fn new(grid: Grid2D, re: f64, n: usize) -> Result<Self> {
        if !(re > 0.0 && re.is_finite()) {
            return Err(Error::InvalidParameter(format!("Reynolds number {re}")));
        }
        let (nx, ny) = (grid.nx(), grid.ny());
        let sx = 2.0 * std::f64::consts::PI / grid.lx();
        let sy = 2.0 * std::f64::consts::PI / grid.ly();
        let mut kx = vec![0.0; grid.len()];
        let mut ky = vec![0.0; grid.len()];
        let mut k2 = vec![0.0; grid.len()];
        let mut dealias = vec![false; grid.len()];
        for j in 0..ny {
            let wj = wavenumber(j, ny);
            for i in 0..nx {
                let wi = wavenumber(i, nx);
                let p = j * nx + i;
                // Odd derivatives drop the unpaired Nyquist mode.
                kx[p] = if 2 * wi.unsigned_abs() as usize == nx {
                    0.0
                } else {
                    sx * wi as f64
                };
                ky[p] = if 2 * wj.unsigned_abs() as usize == ny {
                    0.0
                } else {
                    sy * wj as f64
                };
                let (fx, fy) = (sx * wi as f64, sy * wj as f64);
                k2[p] = fx * fx + fy * fy;
                dealias[p] = 3 * wi.unsigned_abs() < nx as u64 && 3 * wj.unsigned_abs() < ny as u64;
            }
        }
        let mut solver = Self {
            grid,
            nu: 1.0 / re,
            px: FftPlan::new(nx),
            py: FftPlan::new(ny),
            kx,
            ky,
            k2,
            dealias,
            forcing_hat: Vec::new(),
        };
        let f = kolmogorov_forcing(&grid, n);
        let mut fh = solver.to_spectral(f.data());
        fh[0] = Complex64::default();
        solver.forcing_hat = fh;
        Ok(solver)
    }

    fn to_spectral(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut col = Vec::new();
        fft2_in_place(&mut buf, &self.px, &self.py, false, &mut col);
        buf
    }

    fn to_physical(&self, buf: &mut [Complex64], col: &mut Vec<Complex64>) {
        fft2_in_place(buf, &self.px, &self.py, true, col);
        let s = 1.0 / self.grid.len() as f64;
        for z in buf.iter_mut() {
            *z = Complex64::new(z.re * s, 0.0);
        }
    }

    /// Spectral right-hand side without the viscous term; also returns max |u|.
    fn nonlinear(&self, w: &[Complex64], out: &mut [Complex64], s: &mut Scratch) -> f64 {
        let i = Complex64::i();
        for p in 0..w.len() {
            let psi = if self.k2[p] > 0.0 {
                w[p] / self.k2[p]
            } else {
                Complex64::default()
            };
            s.u[p] = i * self.ky[p] * psi;
            s.v[p] = -i * self.kx[p] * psi;
            s.wx[p] = i * self.kx[p] * w[p];
            s.wy[p] = i * self.ky[p] * w[p];
        }
        self.to_physical(&mut s.u, &mut s.col);
        self.to_physical(&mut s.v, &mut s.col);
        self.to_physical(&mut s.wx, &mut s.col);
        self.to_physical(&mut s.wy, &mut s.col);
        let mut umax = 0.0f64;
        for p in 0..w.len() {
            let (u, v) = (s.u[p].re, s.v[p].re);
            umax = umax.max(u.abs()).max(v.abs());
            out[p] = Complex64::new(u * s.wx[p].re + v * s.wy[p].re, 0.0);
        }
        fft2_in_place(out, &self.px, &self.py, false, &mut s.col);
        for p in 0..w.len() {
            out[p] = if self.dealias[p] && p != 0 {
                self.forcing_hat[p] - out[p]
            } else {
                Complex64::default()
            };
        }
        umax
    }

    /// Advances `omega0` to time `t_final` in `ceil(t_final / dt)` equal steps.
    pub fn run(&self, omega0: &Field, t_final: f64, dt: f64) -> Result<Field> {
        self.run_with(omega0, t_final, dt, |_, _| {})
    }

    /// As [`KolmogorovSolver::run`], calling `observe(step, w_hat)` after every step.
    pub fn run_with(
        &self,
        omega0: &Field,
        t_final: f64,
        dt: f64,
        mut observe: impl FnMut(usize, &[Complex64]),
    ) -> Result<Field> {
        if !self.grid.same_points(omega0.grid()) || omega0.channels() != 1 {
            return Err(Error::ShapeMismatch(
                "initial vorticity does not match the solver grid".into(),
            ));
        }
        if !(dt > 0.0 && t_final >= 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t_final = {t_final}, dt = {dt}"
            )));
        }
        let m0 = mean_over_domain(omega0)[0];
        if m0.abs() > MEAN_TOLERANCE {
            return Err(Error::NotMeanZero(m0));
        }
        let steps = (t_final / dt).ceil() as usize;
        let h = if steps == 0 {
            0.0
        } else {
            t_final / steps as f64
        };
        let n = self.grid.len();
        let dx = self.grid.dx().min(self.grid.dy());
        let decay = |tau: f64| -> Vec<f64> {
            self.k2
                .iter()
                .map(|k2| (-self.nu * k2 * tau).exp())
                .collect()
        };
        let (e_full, e_half, e_back) = (decay(h), decay(h / 2.0), decay(-h / 2.0));

        let mut w = self.to_spectral(omega0.data());
        let mut s = Scratch {
            u: vec![Complex64::default(); n],
            v: vec![Complex64::default(); n],
            wx: vec![Complex64::default(); n],
            wy: vec![Complex64::default(); n],
            col: Vec::new(),
        };
        let mut nl = vec![Complex64::default(); n];
        let mut w1 = vec![Complex64::default(); n];
        let mut w2 = vec![Complex64::default(); n];
        for step in 0..steps {
            let umax = self.nonlinear(&w, &mut nl, &mut s);
            let limit = 0.5 * dx / umax;
            if h > limit {
                return Err(Error::Cfl { dt: h, limit });
            }
            for p in 0..n {
                w1[p] = e_full[p] * (w[p] + h * nl[p]);
            }
            self.nonlinear(&w1, &mut nl, &mut s);
            for p in 0..n {
                w2[p] = 0.75 * e_half[p] * w[p] + 0.25 * e_back[p] * (w1[p] + h * nl[p]);
            }
            self.nonlinear(&w2, &mut nl, &mut s);
            for p in 0..n {
                w[p] = w[p] * (e_full[p] / 3.0) + (2.0 / 3.0) * e_half[p] * (w2[p] + h * nl[p]);
            }
            observe(step, &w);
        }
        self.to_physical(&mut w, &mut s.col);
        let out = Field::new(self.grid, 1, w.iter().map(|z| z.re).collect())?;
        let m = mean_over_domain(&out)[0];
        if m.abs() > MEAN_TOLERANCE {
            return Err(Error::MeanDrift(m));
        }
        Ok(out)
    }

    /// Kinetic energy `0.5 * mean(|u|^2)` of a spectral vorticity state.
    pub fn kinetic_energy(&self, w_hat: &[Complex64]) -> f64 {
        let n2 = (self.grid.len() as f64).powi(2);
        let sum: f64 = w_hat
            .iter()
            .zip(&self.k2)
            .filter(|(_, &k2)| k2 > 0.0)
            .map(|(w, k2)| w.norm_sqr() / k2)
            .sum();
        0.5 * sum / n2
    }
}

/// Vorticity at `t_final` for forcing wavenumber `n` (use `n = 0` for unforced flow).
pub fn solve_kolmogorov(omega0: &Field, re: f64, n: usize, t_final: f64, dt: f64) -> Result<Field> {
    KolmogorovSolver::new(*omega0.grid(), re, n)?.run(omega0, t_final, dt)
}
