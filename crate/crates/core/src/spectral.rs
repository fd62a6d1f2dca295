//! Principal eigenpairs of `m*lap + a` with Neumann conditions, the
//! simulation-based eigenvalue estimate, and the 2x2 interaction matrix.
//!
//! The operator is self-adjoint in the trapezoid inner product, so the
//! principal pair is computed by shift-and-invert power iteration: a few
//! fixed-shift sweeps (shift just above the Gershgorin upper bound, which
//! keeps the resolvent positivity-preserving and locks the iterate onto the
//! positive eigenvector) followed by Rayleigh-quotient steps for the final
//! digits. The second eigenvalue comes from the same machinery restricted to
//! the orthogonal complement of the principal eigenfunction.

use crate::dynamics::{run_to_stationarity, Model, SimState, StepControl};
use crate::error::{Error, Result};
use crate::grid::{inner_l2, integrate, Field, Grid};
use crate::operators::{assemble_reaction_operator, solve_shifted, TridiagonalOperator};
use crate::params::{DimorphicParams, SpeciesParams};

/// Fixed-shift iterations per lock-in round.
const FIXED_SHIFT_ITERS: usize = 40;
/// Rayleigh-quotient iterations after lock-in.
const RQI_ITERS: usize = 60;
/// Lock-in rounds before giving up on the positive eigenvector.
const MAX_ROUNDS: usize = 3;
/// Relative eigen-residual target (scaled by the operator magnitude).
const RESIDUAL_TARGET: f64 = 1e-13;
/// Relative determinant tolerance below which the interaction matrix is
/// flagged degenerate.
const EPS_DET: f64 = 1e-8;
/// Mass below which a simulated population counts as extinct.
const EXTINCTION_MASS: f64 = 1e-10;

/// Principal eigenvalue, positive L1-normalized eigenfunction, second
/// eigenvalue, and the eigen-residual actually achieved.
#[derive(Debug, Clone)]
pub struct SpectralSummary {
    pub h: f64,
    pub a1: Field,
    pub lambda2: f64,
    pub residual: f64,
}

/// Interaction coefficients `mu_ij = \int I_ij A1^j` and their determinant.
#[derive(Debug, Clone, Copy)]
pub struct InteractionMatrix {
    mu: [[f64; 2]; 2],
    det: f64,
    degenerate: bool,
}

impl InteractionMatrix {
    /// Build from explicit entries (used by the mass-ODE tools and tests).
    pub fn from_entries(mu11: f64, mu12: f64, mu21: f64, mu22: f64) -> Result<Self> {
        if !(mu11 > 0.0 && mu22 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "self-interaction coefficients must be positive, got mu11 = {mu11}, mu22 = {mu22}"
            )));
        }
        if mu12 < 0.0 || mu21 < 0.0 {
            return Err(Error::InvalidParameter(
                "cross-interaction coefficients must be nonnegative".into(),
            ));
        }
        let det = mu11 * mu22 - mu12 * mu21;
        let degenerate = det.abs() <= EPS_DET * (mu11 * mu22 + (mu12 * mu21).abs());
        Ok(InteractionMatrix {
            mu: [[mu11, mu12], [mu21, mu22]],
            det,
            degenerate,
        })
    }

    pub fn mu11(&self) -> f64 {
        self.mu[0][0]
    }

    pub fn mu12(&self) -> f64 {
        self.mu[0][1]
    }

    pub fn mu21(&self) -> f64 {
        self.mu[1][0]
    }

    pub fn mu22(&self) -> f64 {
        self.mu[1][1]
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Multiply every coefficient by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        InteractionMatrix::from_entries(
            c * self.mu11(),
            c * self.mu12(),
            c * self.mu21(),
            c * self.mu22(),
        )
    }
}

/// Magnitude scale of the operator, used to normalize residuals.
fn operator_scale(op: &TridiagonalOperator) -> f64 {
    let band_max = op
        .diag()
        .iter()
        .chain(op.sub())
        .chain(op.sup())
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    band_max.max(1.0)
}

/// Gershgorin upper bound for the eigenvalues of a tridiagonal operator.
fn gershgorin_upper(op: &TridiagonalOperator) -> f64 {
    let n = op.diag().len();
    (0..n)
        .map(|i| {
            let mut r = op.diag()[i];
            if i > 0 {
                r += op.sub()[i - 1].abs();
            }
            if i < n - 1 {
                r += op.sup()[i].abs();
            }
            r
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn rayleigh_quotient(op: &TridiagonalOperator, v: &Field) -> Result<f64> {
    let img = op.apply(v)?;
    Ok(inner_l2(&img, v)? / inner_l2(v, v)?)
}

fn eigen_residual(op: &TridiagonalOperator, lambda: f64, v: &Field) -> Result<f64> {
    let img = op.apply(v)?;
    Ok(img
        .values()
        .iter()
        .zip(v.values())
        .fold(0.0_f64, |m, (&l, &x)| m.max((l - lambda * x).abs())))
}

/// Remove the component of `v` along `dir` in the trapezoid inner product.
fn orthogonalize(v: &mut Field, dir: &Field) -> Result<()> {
    let c = inner_l2(v, dir)? / inner_l2(dir, dir)?;
    for (x, &d) in v.values_mut().iter_mut().zip(dir.values()) {
        *x -= c * d;
    }
    Ok(())
}

fn normalize_sup(v: &mut Field) -> Result<()> {
    let m = v.max_abs();
    if m == 0.0 || !m.is_finite() {
        return Err(Error::InvalidParameter(
            "eigen-iterate collapsed to zero".into(),
        ));
    }
    for x in v.values_mut() {
        *x /= m;
    }
    Ok(())
}

struct EigenPair {
    value: f64,
    vector: Field,
    residual: f64,
}

/// Shift-and-invert iteration for the largest eigenvalue of `op`, optionally
/// restricted to the complement of `deflate`.
fn largest_eigenpair(
    op: &TridiagonalOperator,
    start: &Field,
    deflate: Option<&Field>,
) -> Result<EigenPair> {
    let scale = operator_scale(op);
    let target = RESIDUAL_TARGET * scale;
    let upper = gershgorin_upper(op);
    let margin = 1e-6 * scale;

    let mut v = start.clone();
    if let Some(d) = deflate {
        orthogonalize(&mut v, d)?;
    }
    normalize_sup(&mut v)?;

    let mut best_res = f64::INFINITY;
    let mut best: Option<(f64, Field)> = None;
    let mut iterations = 0usize;

    for _round in 0..MAX_ROUNDS {
        // fixed shift above the spectrum: safe, linearly convergent
        let sigma = upper + margin;
        for _ in 0..FIXED_SHIFT_ITERS {
            iterations += 1;
            v = solve_shifted(op, sigma, &v)?;
            if let Some(d) = deflate {
                orthogonalize(&mut v, d)?;
            }
            normalize_sup(&mut v)?;
            let lambda = rayleigh_quotient(op, &v)?;
            let res = eigen_residual(op, lambda, &v)?;
            if res < best_res {
                best_res = res;
                best = Some((lambda, v.clone()));
            }
            if res <= target {
                break;
            }
        }

        // Rayleigh-quotient refinement: cubically convergent near the pair
        let mut lambda = rayleigh_quotient(op, &v)?;
        for _ in 0..RQI_ITERS {
            iterations += 1;
            let next = match solve_shifted(op, lambda, &v) {
                Ok(f) => f,
                // a shift landing exactly on an eigenvalue: nudge it
                Err(Error::SingularSystem { .. }) => {
                    lambda += 1e-10 * scale;
                    continue;
                }
                Err(e) => return Err(e),
            };
            v = next;
            if let Some(d) = deflate {
                orthogonalize(&mut v, d)?;
            }
            normalize_sup(&mut v)?;
            lambda = rayleigh_quotient(op, &v)?;
            let res = eigen_residual(op, lambda, &v)?;
            if res < best_res {
                best_res = res;
                best = Some((lambda, v.clone()));
            }
            if res <= target {
                break;
            }
        }

        if best_res <= 10.0 * target {
            break;
        }
    }

    let (value, vector) = best.ok_or(Error::EigenNoConvergence {
        iterations,
        residual: best_res,
    })?;
    // allow some slack over the in-loop target before declaring failure
    if best_res > 1e-9 * scale * vector.max_abs() {
        return Err(Error::EigenNoConvergence {
            iterations,
            residual: best_res,
        });
    }
    Ok(EigenPair {
        value,
        vector,
        residual: best_res,
    })
}

/// Principal eigenpair `(H, A1)` and the second eigenvalue of
/// `m*lap + a` with Neumann boundary conditions.
///
/// `A1` is strictly positive and L1-normalized (`\int A1 = 1`).
pub fn principal_eigenpair(params: &SpeciesParams, grid: Grid) -> Result<SpectralSummary> {
    let op = assemble_reaction_operator(params, grid)?;

    let one = Field::constant(grid, 1.0)?;
    let principal = largest_eigenpair(&op, &one, None)?;

    // orient positively, then insist on strict positivity
    let mut a1 = principal.vector;
    if a1.values().iter().sum::<f64>() < 0.0 {
        a1 = a1.scale(-1.0);
    }
    if a1.min() <= 0.0 {
        return Err(Error::EigenNoConvergence {
            iterations: FIXED_SHIFT_ITERS * MAX_ROUNDS,
            residual: principal.residual,
        });
    }
    let mass = integrate(&a1);
    let a1 = a1.scale(1.0 / mass);

    // second eigenvalue from the deflated problem; a sign-changing start
    // avoids wasting iterations re-discovering the principal direction
    let linear = Field::from_fn(grid, |x| x - 0.5 * (grid.x_lo() + grid.x_hi()))?;
    let second = largest_eigenpair(&op, &linear, Some(&a1))?;

    if second.value >= principal.value {
        return Err(Error::EigenNoConvergence {
            iterations: FIXED_SHIFT_ITERS,
            residual: second.residual,
        });
    }

    Ok(SpectralSummary {
        h: principal.value,
        a1,
        lambda2: second.value,
        residual: principal.residual,
    })
}

/// Second eigenpair `(lambda2, A2)`; the eigenfunction changes sign.
pub fn second_eigenpair(params: &SpeciesParams, grid: Grid) -> Result<(f64, Field)> {
    let summary = principal_eigenpair(params, grid)?;
    let op = assemble_reaction_operator(params, grid)?;
    let linear = Field::from_fn(grid, |x| x - 0.5 * (grid.x_lo() + grid.x_hi()))?;
    let second = largest_eigenpair(&op, &linear, Some(&summary.a1))?;
    Ok((second.value, second.vector))
}

/// Discrete Rayleigh quotient `-( m \int |grad u|^2 - \int a u^2 ) / \int u^2`
/// with forward differences on cell midpoints, compatible with the stencil:
/// its maximum over all fields is exactly the discrete principal eigenvalue.
pub fn variational_rayleigh(params: &SpeciesParams, u: &Field) -> Result<f64> {
    params.grid().check_same(u.grid())?;
    let g = u.grid();
    let h = g.h();
    let v = u.values();
    let grad_sq: f64 = (0..g.n() - 1)
        .map(|i| {
            let d = (v[i + 1] - v[i]) / h;
            h * d * d
        })
        .sum();
    let au2 = inner_l2(&u.zip_with(u, |a, b| a * b)?, params.a())?;
    let u2 = inner_l2(u, u)?;
    Ok((-params.m() * grad_sq + au2) / u2)
}

/// Outcome of the simulation-based eigenvalue estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HEstimate {
    /// The population settled on its steady profile; the estimate is
    /// `\int I g(T)`.
    Converged(f64),
    /// The mass decayed below the extinction threshold, i.e. H <= 0.
    Extinct,
}

/// Estimate the principal eigenvalue by running the single-type dynamics to
/// stationarity and evaluating `\int I g(T)`.
///
/// At the steady state that integral equals the eigenvalue exactly, so this
/// is an end-to-end cross-check of the direct eigensolver.
pub fn estimate_h_by_simulation(
    params: &SpeciesParams,
    grid: Grid,
    horizon: f64,
) -> Result<HEstimate> {
    let weight = params.kernel().weight().ok_or_else(|| {
        Error::InvalidParameter("the simulation estimate needs a separable kernel".into())
    })?;
    let g0 = Field::constant(grid, 1.0 / grid.measure())?;
    let ctl = StepControl::new(0.05, horizon, 1e-10, horizon)?;
    let state = SimState::monomorphic(0.0, g0);
    let model = Model::Monomorphic(params.clone());
    let (final_state, _traj) = run_to_stationarity(state, &model, &ctl)?;
    let mass = integrate(final_state.g1());
    if mass < EXTINCTION_MASS {
        return Ok(HEstimate::Extinct);
    }
    let pressure = inner_l2(weight, final_state.g1())?;
    Ok(HEstimate::Converged(pressure))
}

/// Interaction coefficients of a two-species configuration against the
/// principal eigenfunctions `A1^1`, `A1^2`.
pub fn interaction_matrix(
    params: &DimorphicParams,
    s1: &SpectralSummary,
    s2: &SpectralSummary,
) -> Result<InteractionMatrix> {
    params.grid().check_same(s1.a1.grid())?;
    params.grid().check_same(s2.a1.grid())?;
    let mu11 = inner_l2(params.self_weight(1), &s1.a1)?;
    let mu12 = inner_l2(params.cross12(), &s2.a1)?;
    let mu21 = inner_l2(params.cross21(), &s1.a1)?;
    let mu22 = inner_l2(params.self_weight(2), &s2.a1)?;
    InteractionMatrix::from_entries(mu11, mu12, mu21, mu22)
}
