//! Kinetic and potential renormalization of f-modified actions.
//!
//! With `y = Δx/√a` running over `Ω = (-L/√a, L/√a)` and the weight
//! `w(y) = exp(-f(y²/2))`,
//!
//! ```text
//! s[f] = ∫_Ω y² w / ∫_Ω w        g[f] = ∫_Ω f'(y²/2) w / ∫_Ω w
//! ```
//!
//! The f-modified lattice theory then behaves like the naive one with
//! `Δx²/2a → Δx²/(2 s[f] a)` and `V → g[f] V`, i.e. a renormalized mass
//! `m_R = m / s[f]`, and `⟨Δx_k²⟩ = s[f] a` on each link.

use std::fmt;

use crate::error::{Error, Result};
use crate::lattice::{ActionKind, ActionSpec, FKind, Potential};
use crate::quadrature::{integrate, Quadrature, Tolerance};

/// Target relative accuracy of `s` and `g`.
pub const RELATIVE_TOLERANCE: f64 = 1e-8;
/// Half-width of the slope bands used by [`classify_divergence`].
pub const SLOPE_BAND: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenormValue {
    pub value: f64,
    /// Propagated from the Gauss–Kronrod refinement differences of both integrals.
    pub quadrature_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenormResult {
    pub fkind: FKind,
    pub s_value: f64,
    pub s_error: f64,
    pub g_value: f64,
    pub g_error: f64,
    pub cutoff_l: f64,
    pub spacing_a: f64,
}

impl RenormResult {
    /// Renormalized mass for bare mass one.
    pub fn renormalized_mass(&self) -> f64 {
        1.0 / self.s_value
    }
}

fn check_domain(fkind: FKind, cutoff: f64, spacing: f64) -> Result<f64> {
    fkind.validate()?;
    if !(cutoff.is_finite() && cutoff > 0.0) {
        return Err(Error::InvalidConfig(format!("cutoff L must be positive, got {cutoff}")));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "spacing a must be positive, got {spacing}"
        )));
    }
    Ok(cutoff / spacing.sqrt())
}

/// `0, 1, 2, 4, ...` up to `y_max`, so that narrow features near the origin are
/// seen by the first panels whatever the domain size.
fn panels(y_max: f64) -> Vec<f64> {
    let mut b = vec![0.0];
    let mut edge = 1.0;
    while edge < y_max {
        b.push(edge);
        edge *= 2.0;
    }
    b.push(y_max);
    b
}

fn tolerance() -> Tolerance {
    Tolerance {
        abs: 0.0,
        rel: 0.01 * RELATIVE_TOLERANCE,
        ..Tolerance::default()
    }
}

/// `∫_0^Y m(y) w(y) dy` with the weight shifted by the minimum of f.
fn weighted<M: Fn(f64) -> f64>(fkind: FKind, y_max: f64, moment: M) -> Result<Quadrature> {
    let shift = fkind.min_on(0.5 * y_max * y_max);
    integrate(
        |y| {
            let x = 0.5 * y * y;
            moment(y) * (-(fkind.eval(x) - shift)).exp()
        },
        &panels(y_max),
        tolerance(),
    )
}

fn ratio(num: Quadrature, den: Quadrature) -> Result<RenormValue> {
    if den.value <= 0.0 {
        return Err(Error::Quadrature("normalization integral vanished".into()));
    }
    let value = num.value / den.value;
    let rel = num.error / num.value.abs().max(f64::MIN_POSITIVE) + den.error / den.value;
    let quadrature_error = if num.value == 0.0 {
        num.error / den.value
    } else {
        value.abs() * rel
    };
    if !value.is_finite() {
        return Err(Error::Quadrature("ratio is not finite".into()));
    }
    Ok(RenormValue {
        value,
        quadrature_error,
    })
}

/// Kinetic functional `s[f]` on `|y| < L/√a`.
pub fn compute_s(fkind: FKind, cutoff: f64, spacing: f64) -> Result<RenormValue> {
    let y_max = check_domain(fkind, cutoff, spacing)?;
    let num = weighted(fkind, y_max, |y| y * y)?;
    let den = weighted(fkind, y_max, |_| 1.0)?;
    ratio(num, den)
}

/// Potential functional `g[f]` on `|y| < L/√a`.
pub fn compute_g(fkind: FKind, cutoff: f64, spacing: f64) -> Result<RenormValue> {
    let y_max = check_domain(fkind, cutoff, spacing)?;
    let num = weighted(fkind, y_max, |y| fkind.eval_derivative(0.5 * y * y))?;
    let den = weighted(fkind, y_max, |_| 1.0)?;
    ratio(num, den)
}

pub fn renormalize(fkind: FKind, cutoff: f64, spacing: f64) -> Result<RenormResult> {
    let s = compute_s(fkind, cutoff, spacing)?;
    let g = compute_g(fkind, cutoff, spacing)?;
    Ok(RenormResult {
        fkind,
        s_value: s.value,
        s_error: s.quadrature_error,
        g_value: g.value,
        g_error: g.quadrature_error,
        cutoff_l: cutoff,
        spacing_a: spacing,
    })
}

/// `s` on `|y| < y_max` for the Gaussian weight `exp(-c y²/2)`, in closed form.
pub fn truncated_gaussian_s(c: f64, y_max: f64) -> f64 {
    let z = y_max * (0.5 * c).sqrt();
    let norm = (2.0 * std::f64::consts::PI / c).sqrt() * libm::erf(z);
    1.0 / c - 2.0 * y_max * (-0.5 * c * y_max * y_max).exp() / (c * norm)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DivergenceClass {
    /// `s` settles to a finite value as `a → 0`.
    Convergent,
    /// `s ∝ L²/a`: bounded f, jumps independent of the time step.
    BoundedDivergent,
    /// No finite limit exists as `a → 0` (`f_γ` with γ < 0, or super-linear growth).
    NonExistent,
    Indeterminate,
}

impl fmt::Display for DivergenceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DivergenceClass::Convergent => "convergent",
            DivergenceClass::BoundedDivergent => "diverges like L^2/a",
            DivergenceClass::NonExistent => "non-existent as a->0",
            DivergenceClass::Indeterminate => "indeterminate",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DivergenceReport {
    pub fkind: FKind,
    pub cutoff_l: f64,
    pub spacings: Vec<f64>,
    /// One entry per spacing; `None` where the quadrature broke down.
    pub s_values: Vec<Option<f64>>,
    /// Least-squares slope of `log s` against `log(1/a)`.
    pub slope: f64,
    pub class: DivergenceClass,
}

/// Classifies the small-`a` behaviour of `s[f]` from a decreasing spacing sequence.
pub fn classify_divergence(fkind: FKind, cutoff: f64, spacings: &[f64]) -> Result<DivergenceReport> {
    fkind.validate()?;
    if spacings.len() < 2 || spacings.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidConfig(
            "need at least two strictly decreasing spacings".into(),
        ));
    }
    let s_values: Vec<Option<f64>> = spacings
        .iter()
        .map(|&a| compute_s(fkind, cutoff, a).ok().map(|r| r.value))
        .collect();
    let pts: Vec<(f64, f64)> = spacings
        .iter()
        .zip(&s_values)
        .filter_map(|(&a, s)| s.map(|s| ((1.0 / a).ln(), s.ln())))
        .collect();
    let broke_down = pts.len() < spacings.len();
    let slope = if pts.len() >= 2 {
        crate::analysis::least_squares(&pts).slope
    } else {
        f64::NAN
    };
    let class = if broke_down || slope > 1.0 + SLOPE_BAND {
        DivergenceClass::NonExistent
    } else if slope.abs() <= SLOPE_BAND {
        DivergenceClass::Convergent
    } else if (slope - 1.0).abs() <= SLOPE_BAND {
        match fkind {
            FKind::Gamma(g) if g < 0.0 => DivergenceClass::NonExistent,
            _ => DivergenceClass::BoundedDivergent,
        }
    } else {
        DivergenceClass::Indeterminate
    };
    Ok(DivergenceReport {
        fkind,
        cutoff_l: cutoff,
        spacings: spacings.to_vec(),
        s_values,
        slope,
        class,
    })
}

/// Coefficients of the equivalent naive action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveAction {
    /// `1/s[f]`
    pub kinetic: f64,
    /// `g[f]`
    pub potential: f64,
    pub renorm: RenormResult,
}

impl EffectiveAction {
    pub fn spec(&self, potential: Potential) -> ActionSpec {
        ActionSpec {
            kind: ActionKind::Effective {
                kinetic: self.kinetic,
                potential: self.potential,
            },
            potential,
        }
    }
}

/// The naive-form action equivalent to `f` at this cutoff and spacing.
///
/// Refused for bounded f, where `s` grows like `L²/a` and no finite effective theory exists.
pub fn effective_action_spec(fkind: FKind, cutoff: f64, spacing: f64) -> Result<EffectiveAction> {
    if fkind.is_bounded() {
        return Err(Error::Divergent(format!(
            "{fkind} is bounded, so s[f] grows like L^2/a and the effective kinetic term vanishes as a -> 0"
        )));
    }
    let renorm = renormalize(fkind, cutoff, spacing)?;
    Ok(EffectiveAction {
        kinetic: 1.0 / renorm.s_value,
        potential: renorm.g_value,
        renorm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_gives_unit_functionals() {
        for f in [FKind::Identity, FKind::Gamma(1.0)] {
            let s = compute_s(f, 1.0, 1e-4).unwrap();
            let g = compute_g(f, 1.0, 1e-4).unwrap();
            assert_relative_eq!(s.value, 1.0, epsilon = 1e-8);
            assert_relative_eq!(g.value, 1.0, epsilon = 1e-8);
        }
        let eff = effective_action_spec(FKind::Identity, 1.0, 1e-4).unwrap();
        assert_relative_eq!(eff.kinetic, 1.0, epsilon = 1e-8);
        assert_relative_eq!(eff.potential, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn tanh_approaches_flat_second_moment() {
        // s a / L² → 1/3 as a → 0
        let mut prev = f64::INFINITY;
        for a in [1e-2, 1e-4, 1e-6] {
            let s = compute_s(FKind::Tanh, 1.0, a).unwrap().value;
            let gap = (s * a - 1.0 / 3.0).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 2e-3, "{prev}");
    }

    #[test]
    fn s_grows_as_gamma_decreases() {
        let s: Vec<f64> = [1.0, 0.5, 0.3]
            .iter()
            .map(|&g| compute_s(FKind::Gamma(g), 1.0, 1e-4).unwrap().value)
            .collect();
        assert!(s[0] < s[1] && s[1] < s[2], "{s:?}");
    }

    #[test]
    fn sin_g_bounded_at_small_domain() {
        // L²/2a = 1.5 keeps the argument inside [0, π/2]
        let g = compute_g(FKind::Sin, 1.0, 1.0 / 3.0).unwrap().value;
        assert!(g > 0.0 && g <= 1.0, "{g}");
    }

    #[test]
    fn identity_limit_matches_truncated_gaussian() {
        // tiny L²/a: only the linearization of f matters
        let (l, a) = (1e-2, 1.0);
        for (f, c) in [
            (FKind::Identity, 1.0),
            (FKind::Tanh, 1.0),
            (FKind::Sin, 1.0),
            (FKind::Gamma(2.0), 2.0),
            (FKind::Gamma(0.5), 0.5),
            (FKind::Gamma(-1.0), 1.0),
        ] {
            let s = compute_s(f, l, a).unwrap().value;
            let expected = truncated_gaussian_s(c, l / a.sqrt());
            assert_relative_eq!(s, expected, max_relative = 1e-6);
        }
    }

    #[test]
    fn truncated_gaussian_limits() {
        assert_relative_eq!(truncated_gaussian_s(1.0, 40.0), 1.0, epsilon = 1e-14);
        assert_relative_eq!(truncated_gaussian_s(2.0, 40.0), 0.5, epsilon = 1e-14);
        assert_relative_eq!(truncated_gaussian_s(1.0, 1e-3), 1e-6 / 3.0, max_relative = 1e-5);
    }

    #[test]
    fn refinement_stays_within_reported_error() {
        for f in [FKind::Gamma(2.0), FKind::Gamma(0.5), FKind::Tanh, FKind::Sin] {
            let coarse = compute_s(f, 1.0, 1e-3).unwrap();
            let y = 1.0 / 1e-3f64.sqrt();
            let tight = Tolerance {
                rel: 1e-13,
                ..Tolerance::default()
            };
            let shift = f.min_on(0.5 * y * y);
            let w = |yy: f64| (-(f.eval(0.5 * yy * yy) - shift)).exp();
            let num = integrate(|yy| yy * yy * w(yy), &panels(y), tight).unwrap();
            let den = integrate(w, &panels(y), tight).unwrap();
            let fine = num.value / den.value;
            assert!(
                (coarse.value - fine).abs() <= coarse.quadrature_error.max(1e-15 * fine),
                "{f}: {} vs {fine} (err {})",
                coarse.value,
                coarse.quadrature_error
            );
        }
    }

    #[test]
    fn divergence_classes() {
        let seq = [1e-2, 1e-3, 1e-4];
        let g2 = classify_divergence(FKind::Gamma(2.0), 1.0, &seq).unwrap();
        assert_eq!(g2.class, DivergenceClass::Convergent);
        assert!(g2.slope.abs() < SLOPE_BAND);
        let tanh = classify_divergence(FKind::Tanh, 1.0, &seq).unwrap();
        assert_eq!(tanh.class, DivergenceClass::BoundedDivergent);
        assert!((tanh.slope - 1.0).abs() < SLOPE_BAND, "{}", tanh.slope);
        let neg = classify_divergence(FKind::Gamma(-1.0), 1.0, &seq).unwrap();
        assert_eq!(neg.class, DivergenceClass::NonExistent);
        assert!(classify_divergence(FKind::Tanh, 1.0, &[1e-3, 1e-2]).is_err());
    }

    #[test]
    fn effective_action_refused_for_bounded_f() {
        for f in [FKind::Tanh, FKind::Sin, FKind::Gamma(-1.0)] {
            assert!(matches!(effective_action_spec(f, 1.0, 1e-3), Err(Error::Divergent(_))));
        }
    }

    #[test]
    fn bad_arguments() {
        assert_eq!(compute_s(FKind::Gamma(0.0), 1.0, 0.1), Err(Error::CriticalGamma));
        assert!(compute_s(FKind::Tanh, 0.0, 0.1).is_err());
        assert!(compute_g(FKind::Tanh, 1.0, -0.1).is_err());
    }
}
