//! Species parameter bundles: diffusion rate, growth field, competition
//! kernels, and the reference experiment's growth/kernel shapes.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Nonlocal competition kernel.
///
/// `Separable` holds a weight `I(y)`: the competitive pressure integral
/// `\int I(y) g(y) dy` is then a scalar, which is what keeps implicit time
/// stepping tridiagonal. `General` stores a full `I(x, y)` matrix sampled at
/// node pairs (row = x, column = y); the pressure is then a field of x.
#[derive(Debug, Clone)]
pub enum CompetitionKernel {
    Separable(Field),
    General { grid: Grid, rows: Vec<Vec<f64>> },
}

impl CompetitionKernel {
    pub fn separable(weight: Field) -> Result<Self> {
        if weight.min() < 0.0 {
            return Err(Error::InvalidParameter(
                "competition kernel must be nonnegative".into(),
            ));
        }
        Ok(CompetitionKernel::Separable(weight))
    }

    /// Sample `I(x, y)` at all node pairs of `grid`.
    pub fn general(grid: Grid, kernel: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut rows = Vec::with_capacity(grid.n());
        for x in grid.nodes() {
            let row: Vec<f64> = grid.nodes().map(|y| kernel(x, y)).collect();
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidParameter(
                    "competition kernel must be finite and nonnegative".into(),
                ));
            }
            rows.push(row);
        }
        Ok(CompetitionKernel::General { grid, rows })
    }

    pub fn grid(&self) -> &Grid {
        match self {
            CompetitionKernel::Separable(w) => w.grid(),
            CompetitionKernel::General { grid, .. } => grid,
        }
    }

    pub fn is_separable(&self) -> bool {
        matches!(self, CompetitionKernel::Separable(_))
    }

    /// Separable weight, if this kernel has one.
    pub fn weight(&self) -> Option<&Field> {
        match self {
            CompetitionKernel::Separable(w) => Some(w),
            CompetitionKernel::General { .. } => None,
        }
    }

    /// Row `I(x_i, .)` as a slice of node samples.
    pub fn row(&self, i: usize) -> RowView<'_> {
        match self {
            CompetitionKernel::Separable(w) => RowView::Shared(w.values()),
            CompetitionKernel::General { rows, .. } => RowView::Shared(&rows[i]),
        }
    }

    /// Upper bound `I^+ = max I`.
    pub fn upper_bound(&self) -> f64 {
        match self {
            CompetitionKernel::Separable(w) => w.max(),
            CompetitionKernel::General { rows, .. } => rows
                .iter()
                .flat_map(|r| r.iter().copied())
                .fold(0.0_f64, f64::max),
        }
    }

    /// Lower bound along the diagonal, `min_x I(x, x)`.
    pub fn diagonal_lower_bound(&self) -> f64 {
        match self {
            CompetitionKernel::Separable(w) => w.min(),
            CompetitionKernel::General { rows, .. } => rows
                .iter()
                .enumerate()
                .map(|(i, r)| r[i])
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Competitive pressure `\int I(., y) g(y) dy`: a scalar for separable
    /// kernels, a per-node field otherwise.
    pub fn pressure(&self, g: &Field) -> Result<Pressure> {
        self.grid().check_same(g.grid())?;
        match self {
            CompetitionKernel::Separable(w) => {
                Ok(Pressure::Scalar(crate::grid::inner_l2(w, g)?))
            }
            CompetitionKernel::General { grid, rows } => {
                let n = grid.n();
                let h = grid.h();
                let v = g.values();
                let mut out = Vec::with_capacity(n);
                for row in rows {
                    let interior: f64 = (1..n - 1).map(|j| row[j] * v[j]).sum();
                    out.push(h * (0.5 * row[0] * v[0] + interior + 0.5 * row[n - 1] * v[n - 1]));
                }
                Ok(Pressure::PerNode(out))
            }
        }
    }
}

/// Result of integrating a kernel against a density.
#[derive(Debug, Clone)]
pub enum Pressure {
    Scalar(f64),
    PerNode(Vec<f64>),
}

impl Pressure {
    pub fn at(&self, i: usize) -> f64 {
        match self {
            Pressure::Scalar(s) => *s,
            Pressure::PerNode(p) => p[i],
        }
    }
}

/// Borrowed kernel row.
pub enum RowView<'a> {
    Shared(&'a [f64]),
}

impl<'a> RowView<'a> {
    pub fn as_slice(&self) -> &'a [f64] {
        match self {
            RowView::Shared(s) => s,
        }
    }
}

/// One species: diffusion rate `m`, growth field `a`, self-competition kernel.
#[derive(Debug, Clone)]
pub struct SpeciesParams {
    m: f64,
    a: Field,
    kernel: CompetitionKernel,
}

impl SpeciesParams {
    pub fn new(m: f64, a: Field, kernel: CompetitionKernel) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "diffusion rate must be positive and finite, got {m}"
            )));
        }
        a.grid().check_same(kernel.grid())?;
        Ok(SpeciesParams { m, a, kernel })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn a(&self) -> &Field {
        &self.a
    }

    pub fn kernel(&self) -> &CompetitionKernel {
        &self.kernel
    }

    pub fn grid(&self) -> &Grid {
        self.a.grid()
    }

    /// `a_inf = max |a|`, the growth bound used by step-size and fixed-point
    /// parameter selection.
    pub fn a_inf(&self) -> f64 {
        self.a.max_abs()
    }
}

/// Two competing species plus the cross-competition kernels I_12 and I_21.
///
/// The two-type system only makes sense with separable kernels (each
/// competitive pressure must reduce to a scalar), so construction rejects
/// general self-kernels.
#[derive(Debug, Clone)]
pub struct DimorphicParams {
    species1: SpeciesParams,
    species2: SpeciesParams,
    cross12: Field,
    cross21: Field,
}

impl DimorphicParams {
    pub fn new(
        species1: SpeciesParams,
        species2: SpeciesParams,
        cross12: Field,
        cross21: Field,
    ) -> Result<Self> {
        species1.grid().check_same(species2.grid())?;
        species1.grid().check_same(cross12.grid())?;
        species1.grid().check_same(cross21.grid())?;
        for (name, sp) in [("species 1", &species1), ("species 2", &species2)] {
            if !sp.kernel.is_separable() {
                return Err(Error::InvalidParameter(format!(
                    "{name}: two-type dynamics requires a separable self-kernel"
                )));
            }
            if sp.kernel.diagonal_lower_bound() <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name}: self-kernel must be bounded below by a positive constant"
                )));
            }
        }
        if cross12.min() < 0.0 || cross21.min() < 0.0 {
            return Err(Error::InvalidParameter(
                "cross-competition kernels must be nonnegative".into(),
            ));
        }
        Ok(DimorphicParams {
            species1,
            species2,
            cross12,
            cross21,
        })
    }

    pub fn species1(&self) -> &SpeciesParams {
        &self.species1
    }

    pub fn species2(&self) -> &SpeciesParams {
        &self.species2
    }

    /// Pressure kernel of species 2 on species 1.
    pub fn cross12(&self) -> &Field {
        &self.cross12
    }

    /// Pressure kernel of species 1 on species 2.
    pub fn cross21(&self) -> &Field {
        &self.cross21
    }

    pub fn grid(&self) -> &Grid {
        self.species1.grid()
    }

    /// Self-kernel weight of species `i` (1 or 2). Guaranteed separable.
    pub fn self_weight(&self, i: usize) -> &Field {
        let sp = if i == 1 { &self.species1 } else { &self.species2 };
        sp.kernel().weight().expect("validated separable at construction")
    }

    /// Largest kernel value across all four kernels.
    pub fn kernel_upper_bound(&self) -> f64 {
        self.species1
            .kernel
            .upper_bound()
            .max(self.species2.kernel.upper_bound())
            .max(self.cross12.max())
            .max(self.cross21.max())
    }

    /// `max(a_inf_1, a_inf_2)`.
    pub fn a_inf(&self) -> f64 {
        self.species1.a_inf().max(self.species2.a_inf())
    }

    /// Smallest diagonal lower bound of the two self-kernels.
    pub fn self_kernel_lower_bound(&self) -> f64 {
        self.species1
            .kernel
            .diagonal_lower_bound()
            .min(self.species2.kernel.diagonal_lower_bound())
    }
}

/// Curvature of the reference growth profile.
const GROWTH_CURVATURE: f64 = 20.0;
/// Floor of the reference growth profile.
const GROWTH_FLOOR: f64 = -1.0;
/// Half-width of the high-competition window of the reference kernel.
const KERNEL_HALF_WIDTH: f64 = 0.25;
/// Kernel value inside / outside the window.
const KERNEL_INSIDE: f64 = 1.0;
const KERNEL_OUTSIDE: f64 = 0.1;

/// Growth profile of the reference experiment:
/// `a(x) = max(a_bar * (1 - 20 (x - u)^2), -1)`.
///
/// Peaks at `a_bar` at `x = u` and is clamped at -1 far from the peak.
pub fn build_growth_figure1(u_center: f64, a_bar: f64, grid: Grid) -> Result<Field> {
    Field::from_fn(grid, |x| {
        let d = x - u_center;
        (a_bar * (1.0 - GROWTH_CURVATURE * d * d)).max(GROWTH_FLOOR)
    })
}

/// Self-competition kernel of the reference experiment: 1 inside the window
/// `|x - u| < 0.25`, 0.1 outside.
///
/// The jump is sampled pointwise, so kernel integrals carry O(h) error near
/// it; pick `n` such that the window edges land on nodes when that matters.
pub fn build_kernel_figure1(u_center: f64, grid: Grid) -> Result<Field> {
    Field::from_fn(grid, |x| {
        if (x - u_center).abs() < KERNEL_HALF_WIDTH {
            KERNEL_INSIDE
        } else {
            KERNEL_OUTSIDE
        }
    })
}

/// Cross kernel of the reference experiment: pointwise minimum of the two
/// self kernels.
pub fn cross_kernel_min(k1: &Field, k2: &Field) -> Result<Field> {
    k1.zip_with(k2, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        // 0.05 and 0.55 (window edges for u = 0.3) are nodes when n = 21k+1.
        Grid::unit(201).unwrap()
    }

    #[test]
    fn growth_peak_value() {
        let a = build_growth_figure1(0.3, 1.0, grid()).unwrap();
        // x = 0.3 is node 60 on n = 201
        assert_eq!(a.values()[60], 1.0);
    }

    #[test]
    fn growth_at_origin() {
        let a = build_growth_figure1(0.3, 1.0, grid()).unwrap();
        assert!((a.values()[0] - (-0.8)).abs() < 1e-12);
    }

    #[test]
    fn growth_clamps_far_from_peak() {
        // 1 - 20 * 0.49 = -8.8 < -1, so the clamp is active at x = 1
        let a = build_growth_figure1(0.3, 1.0, grid()).unwrap();
        assert_eq!(a.values()[200], -1.0);
    }

    #[test]
    fn growth_bounded_between_floor_and_peak() {
        for &abar in &[0.2, 1.0, 2.0] {
            let a = build_growth_figure1(0.3, abar, grid()).unwrap();
            assert!(a.min() >= -1.0);
            assert!(a.max() <= abar + 1e-15);
        }
    }

    #[test]
    fn kernel_window_values() {
        let k = build_kernel_figure1(0.3, grid()).unwrap();
        assert_eq!(k.values()[60], 1.0); // x = 0.3
        assert_eq!(k.values()[120], 0.1); // x = 0.6, outside
    }

    #[test]
    fn cross_min_overlap() {
        let g = grid();
        let k1 = build_kernel_figure1(0.3, g).unwrap();
        let k2 = build_kernel_figure1(0.5, g).unwrap();
        let cross = cross_kernel_min(&k1, &k2).unwrap();
        // x = 0.4 lies in both windows
        assert_eq!(cross.values()[80], 1.0);
        // x = 0.1 lies only in the first window
        assert_eq!(cross.values()[20], 0.1);
    }

    #[test]
    fn dimorphic_rejects_general_self_kernel() {
        let g = grid();
        let a = Field::constant(g, 0.5).unwrap();
        let gen = CompetitionKernel::general(g, |_, _| 1.0).unwrap();
        let sep = CompetitionKernel::separable(Field::constant(g, 1.0).unwrap()).unwrap();
        let s1 = SpeciesParams::new(0.01, a.clone(), gen).unwrap();
        let s2 = SpeciesParams::new(0.01, a, sep).unwrap();
        let cross = Field::constant(g, 1.0).unwrap();
        assert!(DimorphicParams::new(s1, s2, cross.clone(), cross).is_err());
    }
}
