//! `-div(a grad u) = 1` with homogeneous Dirichlet data, cell-centred finite
//! volumes and a Jacobi-preconditioned conjugate gradient solve.

use crate::error::{Error, Result};
use crate::field::{Field, Grid2D};

/// Assembled five-point operator: `(A u)_P = diag_P u_P - sum_nb w_{P,nb} u_nb`.
struct DarcyOperator {
    nx: usize,
    ny: usize,
    diag: Vec<f64>,
    // Coupling to the east and north neighbour (zero on the boundary).
    east: Vec<f64>,
    north: Vec<f64>,
}

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

impl DarcyOperator {
    fn assemble(a: &Field) -> Result<Self> {
        let g = *a.grid();
        let (nx, ny) = (g.nx(), g.ny());
        if a.channels() != 1 {
            return Err(Error::ShapeMismatch(
                "Darcy coefficient must have one channel".into(),
            ));
        }
        for j in 0..ny {
            for i in 0..nx {
                let v = a.at(i, j, 0);
                if v <= 0.0 {
                    return Err(Error::NonPositiveCoefficient { value: v, i, j });
                }
            }
        }
        let (ix2, iy2) = (1.0 / (g.dx() * g.dx()), 1.0 / (g.dy() * g.dy()));
        let mut diag = vec![0.0; g.len()];
        let mut east = vec![0.0; g.len()];
        let mut north = vec![0.0; g.len()];
        let at = |i: usize, j: usize| a.at(i, j, 0);
        for j in 0..ny {
            for i in 0..nx {
                let p = j * nx + i;
                let ap = at(i, j);
                // Boundary faces: the ghost value mirrors u to zero at the face,
                // giving a half-cell gradient and the factor 2.
                let face = |inside: bool, nb: f64, inv_h2: f64| {
                    if inside {
                        harmonic(ap, nb) * inv_h2
                    } else {
                        2.0 * ap * inv_h2
                    }
                };
                let we = face(i > 0, if i > 0 { at(i - 1, j) } else { ap }, ix2);
                let ea = face(i + 1 < nx, if i + 1 < nx { at(i + 1, j) } else { ap }, ix2);
                let so = face(j > 0, if j > 0 { at(i, j - 1) } else { ap }, iy2);
                let no = face(j + 1 < ny, if j + 1 < ny { at(i, j + 1) } else { ap }, iy2);
                diag[p] = we + ea + so + no;
                east[p] = if i + 1 < nx { ea } else { 0.0 };
                north[p] = if j + 1 < ny { no } else { 0.0 };
            }
        }
        Ok(Self {
            nx,
            ny,
            diag,
            east,
            north,
        })
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let nx = self.nx;
        for j in 0..self.ny {
            for i in 0..nx {
                let p = j * nx + i;
                let mut acc = self.diag[p] * u[p];
                if i + 1 < nx {
                    acc -= self.east[p] * u[p + 1];
                }
                if i > 0 {
                    acc -= self.east[p - 1] * u[p - 1];
                }
                if j + 1 < self.ny {
                    acc -= self.north[p] * u[p + nx];
                }
                if j > 0 {
                    acc -= self.north[p - nx] * u[p - nx];
                }
                out[p] = acc;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves for the pressure `u` given a strictly positive permeability `a`.
///
/// Iterates until `||b - A u|| <= tol ||b||`, giving up after
/// `20 nx ny` iterations.
pub fn solve_darcy(a: &Field, tol: f64) -> Result<Field> {
    if !(tol > 0.0 && tol <= 1e-4) {
        return Err(Error::InvalidParameter(format!(
            "Darcy tolerance {tol} not in (0, 1e-4]"
        )));
    }
    let op = DarcyOperator::assemble(a)?;
    let grid: Grid2D = *a.grid();
    let n = grid.len();
    let b = vec![1.0; n];
    let b_norm = dot(&b, &b).sqrt();
    let inv_diag: Vec<f64> = op.diag.iter().map(|d| 1.0 / d).collect();

    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let max_iter = 20 * n;
    for _ in 0..max_iter {
        op.apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        if dot(&r, &r).sqrt() <= tol * b_norm {
            return Field::new(grid, 1, x);
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: dot(&r, &r).sqrt() / b_norm,
    })
}
