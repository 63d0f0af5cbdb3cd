//! `(-Laplace - omega^2 / c^2) u = 0` on the unit square with Neumann data:
//! zero flux on the lower, left and right edges and a prescribed flux on the
//! upper edge. Discretised with cell-centred five-point differences and
//! solved by banded Gaussian elimination with partial pivoting.

use crate::error::{Error, Result};
use crate::field::{Field, Grid2D};

/// Relative pivot size below which the system is treated as singular.
const PIVOT_TOLERANCE: f64 = 1e-10;

/// Default upper-edge flux `1` on `0.35 <= x <= 0.65`, sampled at the top-row cell centres.
pub fn top_edge_flux(grid: &Grid2D) -> Vec<f64> {
    (0..grid.nx())
        .map(|i| {
            let x = grid.x(i) / grid.lx();
            if (0.35..=0.65).contains(&x) {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Solves with the default upper-edge flux [`top_edge_flux`].
pub fn solve_helmholtz(c: &Field, omega: f64, tol: f64) -> Result<Field> {
    solve_helmholtz_flux(c, omega, &top_edge_flux(c.grid()), tol)
}

/// Solves with an arbitrary upper-edge flux (one value per top-row cell).
///
/// The returned solution satisfies `||A u - b|| <= tol ||b||` for the
/// assembled system. A vanishing pivot or a residual that cannot be brought
/// below `tol` is reported as [`Error::Resonance`].
pub fn solve_helmholtz_flux(c: &Field, omega: f64, flux: &[f64], tol: f64) -> Result<Field> {
    let grid = *c.grid();
    if c.channels() != 1 {
        return Err(Error::ShapeMismatch(
            "wave speed must have one channel".into(),
        ));
    }
    if flux.len() != grid.nx() {
        return Err(Error::ShapeMismatch(format!(
            "flux has {} entries, grid has {} columns",
            flux.len(),
            grid.nx()
        )));
    }
    if !(tol > 0.0) || !omega.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "omega = {omega}, tol = {tol}"
        )));
    }
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            if c.at(i, j, 0) <= 0.0 {
                return Err(Error::NonPositiveCoefficient {
                    value: c.at(i, j, 0),
                    i,
                    j,
                });
            }
        }
    }
    let sys = Stencil::new(c, omega);
    let mut b = vec![0.0; grid.len()];
    let top = (grid.ny() - 1) * grid.nx();
    for (bi, g) in b[top..].iter_mut().zip(flux) {
        *bi = g / grid.dy();
    }
    let b_norm = norm(&b);
    if b_norm == 0.0 {
        return Field::new(grid, 1, b);
    }

    let lu = BandLu::factor(&sys)?;
    let mut u = b.clone();
    lu.solve(&mut u);
    let mut r = sys.residual(&u, &b);
    if norm(&r) > tol * b_norm {
        lu.solve(&mut r);
        for (ui, di) in u.iter_mut().zip(&r) {
            *ui += di;
        }
        r = sys.residual(&u, &b);
    }
    let rel = norm(&r) / b_norm;
    if !(rel <= tol) {
        return Err(Error::Resonance(format!(
            "residual stagnated at {rel:e} (omega = {omega})"
        )));
    }
    Field::new(grid, 1, u)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

struct Stencil {
    nx: usize,
    ny: usize,
    ix2: f64,
    iy2: f64,
    // omega^2 / c^2 per cell
    k2: Vec<f64>,
}

impl Stencil {
    fn new(c: &Field, omega: f64) -> Self {
        let g = c.grid();
        Self {
            nx: g.nx(),
            ny: g.ny(),
            ix2: 1.0 / (g.dx() * g.dx()),
            iy2: 1.0 / (g.dy() * g.dy()),
            k2: c.data().iter().map(|v| omega * omega / (v * v)).collect(),
        }
    }

    /// Non-zero entries of row `p` as `(column, value)`.
    fn row(&self, p: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let (i, j) = (p % self.nx, p / self.nx);
        let mut diag = -self.k2[p];
        // A missing neighbour is a Neumann ghost: its difference moves to the
        // right-hand side, so it contributes nothing here.
        if i > 0 {
            out.push((p - 1, -self.ix2));
            diag += self.ix2;
        }
        if i + 1 < self.nx {
            out.push((p + 1, -self.ix2));
            diag += self.ix2;
        }
        if j > 0 {
            out.push((p - self.nx, -self.iy2));
            diag += self.iy2;
        }
        if j + 1 < self.ny {
            out.push((p + self.nx, -self.iy2));
            diag += self.iy2;
        }
        out.push((p, diag));
    }

    fn residual(&self, u: &[f64], b: &[f64]) -> Vec<f64> {
        let mut row = Vec::with_capacity(5);
        (0..u.len())
            .map(|p| {
                self.row(p, &mut row);
                b[p] - row.iter().map(|&(q, a)| a * u[q]).sum::<f64>()
            })
            .collect()
    }
}

/// LU factors of a banded matrix with `kl = ku = nx`.
///
/// Row `r` stores columns `[r - kl, r + kl + ku]`, wide enough for the
/// fill-in produced by partial pivoting.
struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    rows: Vec<f64>,
    pivots: Vec<usize>,
    lower: Vec<f64>,
}

impl BandLu {
    fn factor(sys: &Stencil) -> Result<Self> {
        let n = sys.nx * sys.ny;
        let kl = sys.nx;
        let ku = sys.nx;
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            rows: vec![0.0; n * width],
            pivots: vec![0; n],
            lower: vec![0.0; n * kl],
        };
        let mut entries = Vec::with_capacity(5);
        let mut scale = 0.0f64;
        for r in 0..n {
            sys.row(r, &mut entries);
            for &(c, v) in &entries {
                let at = lu.idx(r, c);
                lu.rows[at] = v;
                scale = scale.max(v.abs());
            }
        }
        lu.eliminate(scale)?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        r * self.width + c + self.kl - r
    }

    fn eliminate(&mut self, scale: f64) -> Result<()> {
        let (n, kl) = (self.n, self.kl);
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let hi = (k + kl + self.ku).min(n - 1);
            let mut p = k;
            let mut best = self.rows[self.idx(k, k)].abs();
            for r in k + 1..=last {
                let v = self.rows[self.idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= PIVOT_TOLERANCE * scale {
                return Err(Error::Resonance(format!(
                    "near-singular system (pivot {best:e} at row {k})"
                )));
            }
            self.pivots[k] = p;
            if p != k {
                for c in k..=hi {
                    let (a, b) = (self.idx(k, c), self.idx(p, c));
                    self.rows.swap(a, b);
                }
            }
            let pivot = self.rows[self.idx(k, k)];
            let k_base = self.idx(k, k);
            for r in k + 1..=last {
                let m = self.rows[self.idx(r, k)] / pivot;
                self.lower[k * kl + (r - k - 1)] = m;
                if m == 0.0 {
                    continue;
                }
                let r_base = self.idx(r, k);
                for d in 1..=hi - k {
                    let src = self.rows[k_base + d];
                    self.rows[r_base + d] -= m * src;
                }
            }
        }
        Ok(())
    }

    fn solve(&self, b: &mut [f64]) {
        let (n, kl) = (self.n, self.kl);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for r in k + 1..=(k + kl).min(n - 1) {
                b[r] -= self.lower[k * kl + (r - k - 1)] * bk;
            }
        }
        for k in (0..n).rev() {
            let hi = (k + kl + self.ku).min(n - 1);
            let base = self.idx(k, k);
            let mut acc = b[k];
            for c in k + 1..=hi {
                acc -= self.rows[base + (c - k)] * b[c];
            }
            b[k] = acc / self.rows[base];
        }
    }
}
