//! Steady states: closed forms for separable kernels, the resolvent
//! fixed-point solver for general kernels `I(x, y)`, and the 1D sup-norm
//! a-priori bound.
//!
//! For a separable kernel the positive steady state is a multiple of the
//! principal eigenfunction, `g = (H / mu) A1` with `mu = \int I A1`. For a
//! general kernel no closed form exists; the solver iterates the map
//!
//! ```text
//! Upsilon(h) = (Id - delta (m lap + a))^{-1} [ h (1 - delta \int I(., y) h(y) dy) ]
//! ```
//!
//! whose fixed points are exactly the steady states. Existence of a fixed
//! point is guaranteed for small delta; convergence of the plain iteration
//! is empirical, so the solver reports divergence or positivity loss
//! honestly instead of guessing.

use crate::error::{Error, Result};
use crate::grid::{inner_l2, Field, Grid};
use crate::operators::{assemble_reaction_operator, solve_shifted};
use crate::params::{Pressure, SpeciesParams};
use crate::spectral::{principal_eigenpair, InteractionMatrix, SpectralSummary};

/// Relative increment below which the fixed-point iteration stops.
const FIXED_POINT_TOL: f64 = 1e-10;
const MAX_FIXED_POINT_ITERS: usize = 50_000;
/// Iterates beyond this multiple of the a-priori bound count as divergence.
const DIVERGENCE_FACTOR: f64 = 100.0;

/// The nonnegative steady states of the two-type system.
///
/// The trivial state (both densities zero) always exists and is represented
/// implicitly; the other three are present exactly when their existence
/// conditions hold.
#[derive(Debug, Clone)]
pub struct SteadyStateSet {
    grid: Grid,
    pub pure1: Option<Field>,
    pub pure2: Option<Field>,
    pub coexistence: Option<(Field, Field)>,
    /// Coexistence masses `(r1, r2)`, present with `coexistence`.
    pub r: Option<(f64, f64)>,
}

impl SteadyStateSet {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// The always-present trivial state.
    pub fn trivial(&self) -> (Field, Field) {
        (Field::zeros(self.grid), Field::zeros(self.grid))
    }
}

/// Closed-form steady state for a separable kernel: `(H / mu) A1`, or absent
/// when `H <= 0`.
pub fn steady_monomorphic_separable(
    params: &SpeciesParams,
    spec: &SpectralSummary,
) -> Result<Option<Field>> {
    let weight = params.kernel().weight().ok_or_else(|| {
        Error::InvalidParameter("closed-form steady state needs a separable kernel".into())
    })?;
    if spec.h <= 0.0 {
        return Ok(None);
    }
    let mu = inner_l2(weight, &spec.a1)?;
    if mu <= 0.0 {
        return Err(Error::NonPositiveMu { mu });
    }
    Ok(Some(spec.a1.scale(spec.h / mu)))
}

/// Sup-norm a-priori bound on steady states in one dimension:
/// `R = a_inf * max_x0 ( \int I(x0, y) (1 - a_inf (y - x0)^2 / 2m)_+ dy )^{-1}`.
///
/// Requires the kernel to be positive near the diagonal; every steady state
/// the other solvers return must satisfy `max g <= R`.
pub fn apriori_bound_1d(params: &SpeciesParams, grid: Grid) -> Result<f64> {
    grid.check_same(params.grid())?;
    let a_inf = params.a_inf();
    let m = params.m();
    let n = grid.n();
    let mut min_integral = f64::INFINITY;
    let mut argmin = 0;
    for i in 0..n {
        let x0 = grid.node(i);
        let row = params.kernel().row(i);
        let row = row.as_slice();
        let mut acc = 0.0;
        for (j, y) in grid.nodes().enumerate() {
            let bump = (1.0 - a_inf * (y - x0) * (y - x0) / (2.0 * m)).max(0.0);
            acc += grid.weight(j) * row[j] * bump;
        }
        if acc < min_integral {
            min_integral = acc;
            argmin = i;
        }
    }
    if min_integral <= 0.0 {
        return Err(Error::KernelVanishesNearDiagonal { node: argmin });
    }
    Ok(a_inf / min_integral)
}

/// Contraction parameter for the fixed-point map when the caller does not
/// supply one: small enough that `1 - delta a > 0` and that the map
/// preserves positivity within the a-priori ball.
fn auto_delta(params: &SpeciesParams, grid: Grid, h: f64, bound: f64) -> f64 {
    let i_plus = params.kernel().upper_bound();
    let denom = params.a_inf() + i_plus * bound * grid.measure().sqrt() + h.abs();
    0.5 / denom.max(f64::MIN_POSITIVE)
}

/// Positive steady state for a general kernel by fixed-point iteration,
/// started from the principal eigenfunction.
///
/// `delta` overrides the automatic contraction parameter. Fails honestly on
/// divergence or loss of positivity.
pub fn steady_fixed_point_general(
    params: &SpeciesParams,
    grid: Grid,
    delta: Option<f64>,
) -> Result<Field> {
    let spec = principal_eigenpair(params, grid)?;
    steady_fixed_point_from(params, grid, delta, &spec, spec.a1.clone())
}

/// Same iteration with an explicit starting iterate (used to probe
/// uniqueness: distinct positive starts must agree on the limit for
/// separable kernels).
fn steady_fixed_point_from(
    params: &SpeciesParams,
    grid: Grid,
    delta: Option<f64>,
    spec: &SpectralSummary,
    start: Field,
) -> Result<Field> {
    if spec.h <= 0.0 {
        return Err(Error::HypothesisViolated(format!(
            "a positive steady state requires a positive principal eigenvalue, got H = {}",
            spec.h
        )));
    }
    let bound = apriori_bound_1d(params, grid)?;
    let delta = match delta {
        Some(d) => {
            if !(d > 0.0) || 1.0 - d * params.a_inf() <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "delta = {d} violates 1 - delta * max|a| > 0"
                )));
            }
            d
        }
        None => auto_delta(params, grid, spec.h, bound),
    };

    let op = assemble_reaction_operator(params, grid)?;
    let shift = 1.0 / delta;
    let mut g = start;
    let mut damped = false;

    for iter in 0..MAX_FIXED_POINT_ITERS {
        let pressure = params.kernel().pressure(&g)?;
        let psi: Vec<f64> = g
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| v * (1.0 - delta * pressure.at(i)) * shift)
            .collect();
        let mut next = solve_shifted(&op, shift, &Field::new(grid, psi)?)?;

        if damped {
            next = next.zip_with(&g, |a, b| 0.5 * (a + b))?;
        }
        if next.min() < 0.0 {
            if damped {
                return Err(Error::FixedPointFailed {
                    iterations: iter,
                    delta,
                    reason: "iterate lost positivity even with damping".into(),
                });
            }
            damped = true;
            continue;
        }
        if next.max_abs() > DIVERGENCE_FACTOR * bound {
            return Err(Error::FixedPointFailed {
                iterations: iter,
                delta,
                reason: format!(
                    "iterate grew to {:.3e}, far beyond the a-priori bound {bound:.3e}",
                    next.max_abs()
                ),
            });
        }

        let diff = next.max_abs_diff(&g)?;
        let done = diff < FIXED_POINT_TOL * next.max_abs().max(f64::MIN_POSITIVE);
        g = next;
        if done {
            if g.min() <= 0.0 {
                return Err(Error::FixedPointFailed {
                    iterations: iter,
                    delta,
                    reason: "converged to a state that is not strictly positive".into(),
                });
            }
            return Ok(g);
        }
    }
    Err(Error::FixedPointFailed {
        iterations: MAX_FIXED_POINT_ITERS,
        delta,
        reason: "iteration cap reached without convergence".into(),
    })
}

/// Max-norm residual of the steady equation
/// `m lap g + (a - \int I(., y) g(y) dy) g = 0` for a candidate state.
pub fn steady_residual(params: &SpeciesParams, g: &Field) -> Result<f64> {
    let op = assemble_reaction_operator(params, *g.grid())?;
    let linear = op.apply(g)?;
    let pressure = params.kernel().pressure(g)?;
    let worst = linear
        .values()
        .iter()
        .zip(g.values())
        .enumerate()
        .fold(0.0_f64, |m, (i, (&l, &v))| {
            m.max((l - pressure.at(i) * v).abs())
        });
    Ok(worst)
}

/// Assemble the full steady-state set of the two-type system from its
/// spectral data.
pub fn coexistence_state(
    mu: &InteractionMatrix,
    h1: f64,
    h2: f64,
    s1: &SpectralSummary,
    s2: &SpectralSummary,
) -> Result<SteadyStateSet> {
    if mu.is_degenerate() {
        return Err(Error::DegenerateInteraction { det: mu.det() });
    }
    s1.a1.grid().check_same(s2.a1.grid())?;
    let grid = *s1.a1.grid();

    let pure1 = (h1 > 0.0).then(|| s1.a1.scale(h1 / mu.mu11()));
    let pure2 = (h2 > 0.0).then(|| s2.a1.scale(h2 / mu.mu22()));

    let mut coexistence = None;
    let mut r = None;
    if h1 > 0.0 && h2 > 0.0 {
        let det = mu.det();
        let r1 = (h1 * mu.mu22() - h2 * mu.mu12()) / det;
        let r2 = (h2 * mu.mu11() - h1 * mu.mu21()) / det;
        if r1 > 0.0 && r2 > 0.0 {
            coexistence = Some((s1.a1.scale(r1), s2.a1.scale(r2)));
            r = Some((r1, r2));
        }
    }

    Ok(SteadyStateSet {
        grid,
        pure1,
        pure2,
        coexistence,
        r,
    })
}
