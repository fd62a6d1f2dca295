//! Discrete Neumann Laplacian, reaction operators `m*lap + a`, and
//! tridiagonal (Thomas) solves.
//!
//! The Neumann condition is imposed by ghost-node reflection, which keeps the
//! stencil second order at the boundary:
//!
//! ```text
//! row 0:      (2m/h^2) (f_1     - f_0)
//! row i:      ( m/h^2) (f_{i-1} - 2 f_i + f_{i+1})
//! row n-1:    (2m/h^2) (f_{n-2} - f_{n-1})
//! ```
//!
//! The matrix is not symmetric as stored, but it is self-adjoint with respect
//! to the trapezoid inner product (half weights at the endpoints), which is
//! what every spectral routine in this crate relies on. Constants are mapped
//! to zero exactly and the trapezoid mass of the image of any field is zero,
//! so implicit diffusion steps conserve mass exactly.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::params::SpeciesParams;

/// Pivot magnitude below which a tridiagonal solve is declared singular.
const PIVOT_TOL: f64 = 1e-14;

/// Tridiagonal linear map on fields over a fixed grid.
#[derive(Debug, Clone)]
pub struct TridiagonalOperator {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    grid: Grid,
}

impl TridiagonalOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn sub(&self) -> &[f64] {
        &self.sub
    }

    pub fn sup(&self) -> &[f64] {
        &self.sup
    }

    /// Apply the operator to a field.
    pub fn apply(&self, f: &Field) -> Result<Field> {
        self.grid.check_same(f.grid())?;
        let v = f.values();
        let n = v.len();
        let mut out = vec![0.0; n];
        out[0] = self.diag[0] * v[0] + self.sup[0] * v[1];
        for i in 1..n - 1 {
            out[i] = self.sub[i - 1] * v[i - 1] + self.diag[i] * v[i] + self.sup[i] * v[i + 1];
        }
        out[n - 1] = self.sub[n - 2] * v[n - 2] + self.diag[n - 1] * v[n - 1];
        Field::new(self.grid, out)
    }

    /// Add `c` to every diagonal entry, in place.
    pub fn shift_diagonal(&mut self, c: f64) {
        for d in &mut self.diag {
            *d += c;
        }
    }

    /// Add a field to the diagonal (pointwise multiplication operator).
    pub fn add_diagonal_field(&mut self, a: &Field) -> Result<()> {
        self.grid.check_same(a.grid())?;
        for (d, &av) in self.diag.iter_mut().zip(a.values()) {
            *d += av;
        }
        Ok(())
    }
}

/// Second-order Neumann Laplacian scaled by the diffusion rate `m`.
pub fn assemble_neumann_laplacian(m: f64, grid: Grid) -> Result<TridiagonalOperator> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "diffusion rate must be positive and finite, got {m}"
        )));
    }
    let n = grid.n();
    let h = grid.h();
    let c = m / (h * h);
    let mut sub = vec![c; n - 1];
    let mut diag = vec![-2.0 * c; n];
    let mut sup = vec![c; n - 1];
    // ghost reflection doubles the inward coupling at both ends
    sup[0] = 2.0 * c;
    sub[n - 2] = 2.0 * c;
    diag[0] = -2.0 * c;
    diag[n - 1] = -2.0 * c;
    Ok(TridiagonalOperator {
        sub,
        diag,
        sup,
        grid,
    })
}

/// `m * lap + a`: the linear part of the reaction-diffusion dynamics.
pub fn assemble_reaction_operator(params: &SpeciesParams, grid: Grid) -> Result<TridiagonalOperator> {
    grid.check_same(params.grid())?;
    let mut op = assemble_neumann_laplacian(params.m(), grid)?;
    op.add_diagonal_field(params.a())?;
    Ok(op)
}

/// Solve `(shift * Id - op) f = rhs` by Thomas elimination.
///
/// The caller is responsible for `shift` being separated from the spectrum
/// (or the system being diagonally dominant); a near-zero pivot is reported
/// with its row index.
pub fn solve_shifted(op: &TridiagonalOperator, shift: f64, rhs: &Field) -> Result<Field> {
    op.grid.check_same(rhs.grid())?;
    let n = op.diag.len();
    let b = rhs.values();

    // system bands: diag = shift - op.diag, off-diagonals negated
    let mut c_prime = vec![0.0; n - 1];
    let mut d_prime = vec![0.0; n];

    let mut denom = shift - op.diag[0];
    if denom.abs() < PIVOT_TOL {
        return Err(Error::SingularSystem {
            row: 0,
            pivot: denom,
        });
    }
    c_prime[0] = -op.sup[0] / denom;
    d_prime[0] = b[0] / denom;

    for i in 1..n {
        let sub_i = -op.sub[i - 1];
        denom = (shift - op.diag[i]) - sub_i * c_prime[i - 1];
        if denom.abs() < PIVOT_TOL {
            return Err(Error::SingularSystem {
                row: i,
                pivot: denom,
            });
        }
        if i < n - 1 {
            c_prime[i] = -op.sup[i] / denom;
        }
        d_prime[i] = (b[i] - sub_i * d_prime[i - 1]) / denom;
    }

    let mut x = vec![0.0; n];
    x[n - 1] = d_prime[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d_prime[i] - c_prime[i] * x[i + 1];
    }
    Field::new(op.grid, x)
}
