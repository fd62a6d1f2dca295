//! Long-time regime classification for the two-type system, and the
//! quantitative basin certificate for the resident-wins case.
//!
//! The regime is a function of the signs of `(H1, H2)` and of the two
//! discriminants
//!
//! ```text
//! d21 = H2 mu11 - H1 mu21      d12 = H1 mu22 - H2 mu12
//! ```
//!
//! Exact signs are meaningless in floating point, so every quantity within
//! a tolerance band around zero is treated as zero; the band-width defaults
//! to a small multiple of the discriminant scale. The raw discriminants are
//! carried in the report so callers can apply their own policy.

use crate::error::{Error, Result};
use crate::grid::{norm_l2, Field};
use crate::params::DimorphicParams;
use crate::spectral::{InteractionMatrix, SpectralSummary};
use crate::steady::SteadyStateSet;

/// Default tolerance band: this multiple of the discriminant scale.
const DEFAULT_BAND_FACTOR: f64 = 1e-6;

/// Long-time outcome of the two-type dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Both types die out.
    Extinction,
    /// Type 1 fixates; type 2 disappears for any start with type 1 present.
    Fixation1,
    /// Type 2 fixates.
    Fixation2,
    /// Both types persist at the coexistence state.
    Coexistence,
    /// Both pure states are stable; the outcome depends on the start.
    Bistable,
    /// Pure-1 stable, pure-2 unstable yet attainable (boundary case).
    MarginalPure1Stable,
    /// Pure-2 stable, pure-1 unstable yet attainable (boundary case).
    MarginalPure2Stable,
    /// The interaction matrix is too close to singular to classify.
    DegenerateMu,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Extinction => "extinction",
            Regime::Fixation1 => "fixation1",
            Regime::Fixation2 => "fixation2",
            Regime::Coexistence => "coexistence",
            Regime::Bistable => "bistable",
            Regime::MarginalPure1Stable => "marginal_pure1_stable",
            Regime::MarginalPure2Stable => "marginal_pure2_stable",
            Regime::DegenerateMu => "degenerate_mu",
        }
    }
}

/// Classification with the signed discriminants that justify it.
#[derive(Debug, Clone, Copy)]
pub struct RegimeReport {
    pub regime: Regime,
    pub d21: f64,
    pub d12: f64,
    pub h1: f64,
    pub h2: f64,
    pub tolerance_band: f64,
}

/// Band width used when the caller does not supply one.
pub fn default_eps(h1: f64, h2: f64, mu: &InteractionMatrix) -> f64 {
    DEFAULT_BAND_FACTOR
        * [
            (h1 * mu.mu22()).abs(),
            (h2 * mu.mu11()).abs(),
            (h1 * mu.mu21()).abs(),
            (h2 * mu.mu12()).abs(),
        ]
        .into_iter()
        .fold(0.0_f64, f64::max)
}

fn band_sign(x: f64, eps: f64) -> i8 {
    if x.abs() <= eps {
        0
    } else if x > 0.0 {
        1
    } else {
        -1
    }
}

fn decide(h1: i8, h2: i8, d21: i8, d12: i8) -> Option<Regime> {
    if h1 <= 0 && h2 <= 0 {
        return Some(Regime::Extinction);
    }
    if h1 > 0 && d21 <= 0 && d12 > 0 {
        return Some(Regime::Fixation1);
    }
    if h2 > 0 && d21 > 0 && d12 <= 0 {
        return Some(Regime::Fixation2);
    }
    if h1 > 0 && h2 > 0 {
        match (d21, d12) {
            (1, 1) => return Some(Regime::Coexistence),
            (-1, -1) => return Some(Regime::Bistable),
            (-1, 0) => return Some(Regime::MarginalPure1Stable),
            (0, -1) => return Some(Regime::MarginalPure2Stable),
            _ => {}
        }
    }
    None
}

/// Classify the long-time regime from the eigenvalues and interaction
/// coefficients. `eps` is the sign tolerance band; `None` selects the
/// default relative band.
pub fn classify(h1: f64, h2: f64, mu: &InteractionMatrix, eps: Option<f64>) -> RegimeReport {
    let band = eps.unwrap_or_else(|| default_eps(h1, h2, mu));
    let d21 = h2 * mu.mu11() - h1 * mu.mu21();
    let d12 = h1 * mu.mu22() - h2 * mu.mu12();
    let report = |regime| RegimeReport {
        regime,
        d21,
        d12,
        h1,
        h2,
        tolerance_band: band,
    };

    if mu.is_degenerate() {
        return report(Regime::DegenerateMu);
    }

    let banded = decide(
        band_sign(h1, band),
        band_sign(h2, band),
        band_sign(d21, band),
        band_sign(d12, band),
    );
    if let Some(r) = banded {
        return report(r);
    }
    // inconsistent band-zeros (scales of H and d differ): fall back to raw
    // signs, which cover every nondegenerate nonnegative-mu configuration
    let raw = decide(
        band_sign(h1, 0.0),
        band_sign(h2, 0.0),
        band_sign(d21, 0.0),
        band_sign(d12, 0.0),
    );
    report(raw.unwrap_or(Regime::DegenerateMu))
}

/// Quantitative basin certificate for convergence to the pure-1 state.
#[derive(Debug, Clone, Copy)]
pub struct StabilityCertificate {
    /// Resident perturbation size times the worst kernel norm.
    pub c1: f64,
    /// Invader size times the cross-kernel norm.
    pub c2: f64,
    /// Combined constant `2 ((C1 + C2) max(1, mu21/mu11) + C1)`.
    pub c: f64,
    /// `min(H1 - lambda2^1, (mu21/mu11) H1 - H2)`.
    pub bound: f64,
    /// Certificate satisfied: `C < bound`.
    pub holds: bool,
}

/// Evaluate the basin certificate at an initial condition `(g10, g20)` near
/// the pure-1 state `steady1`.
///
/// Requires `H1 > 0` and `d21 < 0` (the resident-stable configuration);
/// when `holds` is true the dynamics from this start converge to
/// `(steady1, 0)`.
pub fn certify_basin(
    g10: &Field,
    g20: &Field,
    steady1: &Field,
    params: &DimorphicParams,
    s1: &SpectralSummary,
    s2: &SpectralSummary,
    mu: &InteractionMatrix,
) -> Result<StabilityCertificate> {
    if s1.h <= 0.0 {
        return Err(Error::HypothesisViolated(format!(
            "certificate needs H1 > 0, got {}",
            s1.h
        )));
    }
    let d21 = s2.h * mu.mu11() - s1.h * mu.mu21();
    if d21 >= 0.0 {
        return Err(Error::HypothesisViolated(format!(
            "certificate needs H2 mu11 - H1 mu21 < 0, got {d21}"
        )));
    }
    let dev = g10.zip_with(steady1, |a, b| a - b)?;
    let dev_norm = norm_l2(&dev);
    let i11 = norm_l2(params.self_weight(1));
    let i21 = norm_l2(params.cross21());
    let c1 = (dev_norm * i11).max(dev_norm * i21);
    let c2 = norm_l2(g20) * norm_l2(params.cross12());

    let ratio = mu.mu21() / mu.mu11();
    let c = 2.0 * ((c1 + c2) * ratio.max(1.0) + c1);
    let bound = (s1.h - s1.lambda2).min(ratio * s1.h - s2.h);
    Ok(StabilityCertificate {
        c1,
        c2,
        c,
        bound,
        holds: c < bound,
    })
}

/// Which steady state a limit point refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateLabel {
    Trivial,
    Pure1,
    Pure2,
    Coexistence,
}

/// A steady state together with its masses `(\int g1, \int g2)`.
#[derive(Debug, Clone, Copy)]
pub struct LimitPoint {
    pub label: StateLabel,
    pub masses: (f64, f64),
}

/// Predicted long-time limit: a single state, or the admissible set when
/// the regime depends on the initial condition.
#[derive(Debug, Clone)]
pub enum LimitPrediction {
    Single(LimitPoint),
    AnyOf(Vec<LimitPoint>),
}

impl LimitPrediction {
    pub fn points(&self) -> &[LimitPoint] {
        match self {
            LimitPrediction::Single(p) => std::slice::from_ref(p),
            LimitPrediction::AnyOf(ps) => ps,
        }
    }
}

/// Map a classification to its predicted limit, with masses taken from the
/// computed steady states.
pub fn predicted_limit(report: &RegimeReport, states: &SteadyStateSet) -> Result<LimitPrediction> {
    let need = |present: bool, what: &str| {
        if present {
            Ok(())
        } else {
            Err(Error::MissingSteadyState(format!(
                "{what} required by regime {}",
                report.regime.as_str()
            )))
        }
    };
    let pure1 = || -> Result<LimitPoint> {
        need(states.pure1.is_some(), "pure-1 state")?;
        Ok(LimitPoint {
            label: StateLabel::Pure1,
            masses: (crate::grid::integrate(states.pure1.as_ref().unwrap()), 0.0),
        })
    };
    let pure2 = || -> Result<LimitPoint> {
        need(states.pure2.is_some(), "pure-2 state")?;
        Ok(LimitPoint {
            label: StateLabel::Pure2,
            masses: (0.0, crate::grid::integrate(states.pure2.as_ref().unwrap())),
        })
    };
    let coexist = || -> Result<LimitPoint> {
        need(states.r.is_some(), "coexistence state")?;
        Ok(LimitPoint {
            label: StateLabel::Coexistence,
            masses: states.r.unwrap(),
        })
    };

    match report.regime {
        Regime::Extinction => Ok(LimitPrediction::Single(LimitPoint {
            label: StateLabel::Trivial,
            masses: (0.0, 0.0),
        })),
        Regime::Fixation1 => Ok(LimitPrediction::Single(pure1()?)),
        Regime::Fixation2 => Ok(LimitPrediction::Single(pure2()?)),
        Regime::Coexistence => Ok(LimitPrediction::Single(coexist()?)),
        Regime::Bistable => Ok(LimitPrediction::AnyOf(vec![pure1()?, pure2()?, coexist()?])),
        Regime::MarginalPure1Stable | Regime::MarginalPure2Stable => {
            Ok(LimitPrediction::AnyOf(vec![pure1()?, pure2()?]))
        }
        Regime::DegenerateMu => Err(Error::DegenerateInteraction { det: 0.0 }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::params::CompetitionKernel;
    use crate::params::SpeciesParams;
    use crate::spectral::principal_eigenpair;
    use crate::steady::coexistence_state;

    fn mu(m11: f64, m12: f64, m21: f64, m22: f64) -> InteractionMatrix {
        InteractionMatrix::from_entries(m11, m12, m21, m22).unwrap()
    }

    #[test]
    fn extinction_when_both_nonpositive() {
        let r = classify(-1.0, -0.5, &mu(1.0, 0.2, 0.3, 1.0), None);
        assert_eq!(r.regime, Regime::Extinction);
    }

    #[test]
    fn decoupled_coexistence() {
        let r = classify(1.0, 1.0, &mu(1.0, 0.0, 0.0, 1.0), None);
        assert_eq!(r.regime, Regime::Coexistence);
        assert!(r.d21 > 0.0 && r.d12 > 0.0);
    }

    #[test]
    fn strong_cross_competition_is_bistable() {
        let r = classify(1.0, 1.0, &mu(1.0, 2.0, 2.0, 1.0), None);
        assert_eq!(r.regime, Regime::Bistable);
        assert!((r.d21 - (-1.0)).abs() < 1e-12);
        assert!((r.d12 - (-1.0)).abs() < 1e-12);
    }

    #[test]
    fn fixation_cases() {
        // H2 mu11 - H1 mu21 = 0.4 - 0.5 < 0, d12 = 0.8 > 0
        let r = classify(1.0, 0.4, &mu(1.0, 0.5, 0.5, 1.0), None);
        assert_eq!(r.regime, Regime::Fixation1);
        let r = classify(0.4, 1.0, &mu(1.0, 0.5, 0.5, 1.0), None);
        assert_eq!(r.regime, Regime::Fixation2);
    }

    #[test]
    fn marginal_cases_selected_inside_band() {
        // d12 = 0 exactly: H1 mu22 = H2 mu12
        let r = classify(1.0, 2.0, &mu(1.0, 0.5, 3.0, 1.0), None);
        assert!((r.d12).abs() <= r.tolerance_band);
        assert_eq!(r.regime, Regime::MarginalPure1Stable);

        let r = classify(2.0, 1.0, &mu(1.0, 3.0, 0.5, 1.0), None);
        assert_eq!(r.regime, Regime::MarginalPure2Stable);
    }

    #[test]
    fn degenerate_matrix_reported() {
        let r = classify(1.0, 1.0, &mu(1.0, 1.0, 1.0, 1.0), None);
        assert_eq!(r.regime, Regime::DegenerateMu);
    }

    #[test]
    fn species_swap_equivariance() {
        let cases = [
            (1.0, 0.4, [1.0, 0.5, 0.5, 1.0]),
            (1.0, 1.0, [1.0, 2.0, 2.0, 1.0]),
            (1.0, 1.0, [1.0, 0.2, 0.3, 1.0]),
            (-1.0, -2.0, [1.0, 0.2, 0.3, 1.0]),
            (0.7, 1.3, [2.0, 0.4, 0.9, 1.1]),
        ];
        for (h1, h2, m) in cases {
            let fwd = classify(h1, h2, &mu(m[0], m[1], m[2], m[3]), None).regime;
            let swp = classify(h2, h1, &mu(m[3], m[2], m[1], m[0]), None).regime;
            let expected = match fwd {
                Regime::Fixation1 => Regime::Fixation2,
                Regime::Fixation2 => Regime::Fixation1,
                Regime::MarginalPure1Stable => Regime::MarginalPure2Stable,
                Regime::MarginalPure2Stable => Regime::MarginalPure1Stable,
                other => other,
            };
            assert_eq!(swp, expected, "case ({h1}, {h2}, {m:?})");
        }
    }

    #[test]
    fn kernel_scaling_leaves_regime_unchanged() {
        let m = mu(1.0, 0.4, 0.7, 1.2);
        for (h1, h2) in [(1.0, 0.4), (1.0, 1.0), (-0.5, 1.0), (0.3, 0.9)] {
            let base = classify(h1, h2, &m, None).regime;
            for c in [0.1, 3.0, 42.0] {
                let scaled = classify(h1, h2, &m.scaled(c).unwrap(), None).regime;
                assert_eq!(base, scaled, "scale {c}");
            }
        }
    }

    #[test]
    fn exhaustive_over_random_nondegenerate_draws() {
        // cheap deterministic generator
        let mut state = 0x243f6a8885a308d3_u64;
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut counts = std::collections::HashMap::new();
        let mut tested = 0usize;
        while tested < 100_000 {
            let h1 = 4.0 * next() - 2.0;
            let h2 = 4.0 * next() - 2.0;
            let m11 = 0.1 + 2.9 * next();
            let m22 = 0.1 + 2.9 * next();
            let m12 = 3.0 * next();
            let m21 = 3.0 * next();
            let Ok(m) = InteractionMatrix::from_entries(m11, m12, m21, m22) else {
                continue;
            };
            if m.is_degenerate() {
                continue;
            }
            let band = default_eps(h1, h2, &m);
            let d21 = h2 * m11 - h1 * m21;
            let d12 = h1 * m22 - h2 * m12;
            // keep every quantity clear of the band
            if [h1, h2, d21, d12].iter().any(|v| v.abs() <= 2.0 * band) {
                continue;
            }
            tested += 1;
            let r = classify(h1, h2, &m, None).regime;
            assert_ne!(r, Regime::DegenerateMu, "({h1}, {h2}, {m:?})");
            *counts.entry(r.as_str()).or_insert(0usize) += 1;
        }
        // every open regime is reachable
        for key in ["extinction", "fixation1", "fixation2", "coexistence", "bistable"] {
            assert!(counts[key] > 0, "{key} never drawn: {counts:?}");
        }
    }

    #[test]
    fn certificate_zero_perturbation() {
        let g = Grid::unit(101).unwrap();
        let (dp, s1, s2, m) = bistable_fixture(g);
        let steady1 = s1.a1.scale(s1.h / m.mu11());
        let zero = Field::zeros(g);
        let cert = certify_basin(&steady1, &zero, &steady1, &dp, &s1, &s2, &m).unwrap();
        assert_eq!(cert.c1, 0.0);
        assert_eq!(cert.c2, 0.0);
        assert_eq!(cert.c, 0.0);
        assert_eq!(cert.holds, cert.bound > 0.0);
    }

    #[test]
    fn certificate_scales_linearly_in_invader() {
        let g = Grid::unit(101).unwrap();
        let (dp, s1, s2, m) = bistable_fixture(g);
        let steady1 = s1.a1.scale(s1.h / m.mu11());
        let bump = Field::from_fn(g, |x| (-((x - 0.5) / 0.05).powi(2)).exp()).unwrap();
        let mut last_c = 0.0;
        for k in 1..=4 {
            let t = 0.25 * k as f64;
            let cert =
                certify_basin(&steady1, &bump.scale(t), &steady1, &dp, &s1, &s2, &m).unwrap();
            let unit = certify_basin(&steady1, &bump, &steady1, &dp, &s1, &s2, &m).unwrap();
            assert!((cert.c2 - t * unit.c2).abs() < 1e-12 * unit.c2.max(1.0));
            assert!(cert.c >= last_c);
            last_c = cert.c;
        }
    }

    #[test]
    fn certificate_rejects_wrong_regime() {
        let g = Grid::unit(101).unwrap();
        let a = Field::constant(g, 1.0).unwrap();
        let k = CompetitionKernel::separable(Field::constant(g, 1.0).unwrap()).unwrap();
        let sp = SpeciesParams::new(0.01, a, k).unwrap();
        let cross = Field::constant(g, 0.1).unwrap();
        let dp = DimorphicParams::new(sp.clone(), sp.clone(), cross.clone(), cross).unwrap();
        let s = principal_eigenpair(&sp, g).unwrap();
        // weak cross competition: d21 > 0, hypothesis fails
        let m = mu(1.0, 0.1, 0.1, 1.0);
        let zero = Field::zeros(g);
        let steady1 = s.a1.clone();
        assert!(matches!(
            certify_basin(&steady1, &zero, &steady1, &dp, &s, &s, &m),
            Err(Error::HypothesisViolated(_))
        ));
    }

    fn bistable_fixture(
        g: Grid,
    ) -> (
        DimorphicParams,
        SpectralSummary,
        SpectralSummary,
        InteractionMatrix,
    ) {
        let a1 = crate::params::build_growth_figure1(0.3, 1.0, g).unwrap();
        let a2 = crate::params::build_growth_figure1(0.5, 1.0, g).unwrap();
        let k = CompetitionKernel::separable(Field::constant(g, 1.0).unwrap()).unwrap();
        let sp1 = SpeciesParams::new(0.01, a1, k.clone()).unwrap();
        let sp2 = SpeciesParams::new(0.01, a2, k).unwrap();
        let cross = Field::constant(g, 2.0).unwrap();
        let dp = DimorphicParams::new(sp1.clone(), sp2.clone(), cross.clone(), cross).unwrap();
        let s1 = principal_eigenpair(&sp1, g).unwrap();
        let s2 = principal_eigenpair(&sp2, g).unwrap();
        let m = crate::spectral::interaction_matrix(&dp, &s1, &s2).unwrap();
        (dp, s1, s2, m)
    }

    #[test]
    fn predicted_limits_per_regime() {
        let g = Grid::unit(101).unwrap();
        let a = Field::constant(g, 1.0).unwrap();
        let k = CompetitionKernel::separable(Field::constant(g, 1.0).unwrap()).unwrap();
        let sp = SpeciesParams::new(0.01, a, k).unwrap();
        let s = principal_eigenpair(&sp, g).unwrap();

        // fixation-1 setup: H = (1, 0.4), mu symmetric 0.5 cross
        let m = mu(1.0, 0.5, 0.5, 1.0);
        let states = coexistence_state(&m, 1.0, 0.4, &s, &s).unwrap();
        let rep = classify(1.0, 0.4, &m, None);
        match predicted_limit(&rep, &states).unwrap() {
            LimitPrediction::Single(p) => {
                assert_eq!(p.label, StateLabel::Pure1);
                assert!((p.masses.0 - 1.0).abs() < 1e-9);
                assert_eq!(p.masses.1, 0.0);
            }
            _ => panic!("fixation is a single limit"),
        }

        // extinction
        let rep = classify(-1.0, -1.0, &m, None);
        let states0 = coexistence_state(&m, -1.0, -1.0, &s, &s).unwrap();
        match predicted_limit(&rep, &states0).unwrap() {
            LimitPrediction::Single(p) => assert_eq!(p.masses, (0.0, 0.0)),
            _ => panic!(),
        }

        // coexistence with r = (1/3, 1/3)
        let m2 = mu(1.0, 2.0, 2.0, 1.0);
        let states2 = coexistence_state(&m2, 1.0, 1.0, &s, &s).unwrap();
        let rep2 = classify(1.0, 1.0, &m2, None);
        assert_eq!(rep2.regime, Regime::Bistable);
        match predicted_limit(&rep2, &states2).unwrap() {
            LimitPrediction::AnyOf(ps) => {
                assert_eq!(ps.len(), 3);
                let cx = ps
                    .iter()
                    .find(|p| p.label == StateLabel::Coexistence)
                    .unwrap();
                assert!((cx.masses.0 - 1.0 / 3.0).abs() < 1e-12);
                assert!((cx.masses.1 - 1.0 / 3.0).abs() < 1e-12);
            }
            _ => panic!("bistable has an admissible set"),
        }
    }

    #[test]
    fn missing_state_is_an_error() {
        let g = Grid::unit(101).unwrap();
        let a = Field::constant(g, 1.0).unwrap();
        let k = CompetitionKernel::separable(Field::constant(g, 1.0).unwrap()).unwrap();
        let sp = SpeciesParams::new(0.01, a, k).unwrap();
        let s = principal_eigenpair(&sp, g).unwrap();
        let m = mu(1.0, 0.5, 0.5, 1.0);
        // H2 < 0: pure-2 state absent
        let states = coexistence_state(&m, 1.0, -0.5, &s, &s).unwrap();
        let fake = RegimeReport {
            regime: Regime::Fixation2,
            d21: 1.0,
            d12: -1.0,
            h1: 1.0,
            h2: -0.5,
            tolerance_band: 0.0,
        };
        assert!(matches!(
            predicted_limit(&fake, &states),
            Err(Error::MissingSteadyState(_))
        ));
    }
}
