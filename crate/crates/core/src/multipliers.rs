//! Embedding checks between Hardy-Orlicz and Bergman-Orlicz spaces, the profile ω,
//! the pointwise-multiplier trichotomy, H^∞_ω norms and the special density measures.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::carleson::Mode;
use crate::growth::{classify, derived_functions, quotient_monotonicity, ClassifyOptions, GrowthClassification, GrowthFunction};
use crate::measure::{carleson_box_constant, BoxConstant, BoxFamily, DensityExpr, DivergenceRule, Measure, MeasureError};
use crate::numerics::QuadratureSpec;
use crate::scan::{argmax, edge_trend, EdgeTrend, LogGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MultiplierError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Variant {
    HardyToBergman { alpha: f64 },
    BergmanToBergman { alpha: f64, beta: f64 },
}

impl Variant {
    pub fn validate(&self) -> Result<(), MultiplierError> {
        let ok = |a: f64| a > -1.0 && a.is_finite();
        match self {
            Variant::HardyToBergman { alpha } if ok(*alpha) => Ok(()),
            Variant::BergmanToBergman { alpha, beta } if ok(*alpha) && ok(*beta) => Ok(()),
            _ => Err(MultiplierError::Invalid(format!("weights must exceed -1 in {self:?}"))),
        }
    }

    /// (a, b) with condition Φ₁⁻¹(t^a) ≤ Φ₂⁻¹(C t^b) and ω(t) = Φ₂⁻¹(t^{-b})/Φ₁⁻¹(t^{-a}).
    pub fn exponents(&self) -> (f64, f64) {
        match self {
            Variant::HardyToBergman { alpha } => (1.0, 2.0 + alpha),
            Variant::BergmanToBergman { alpha, beta } => (2.0 + alpha, 2.0 + beta),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedVerdict {
    Holds { constant: f64 },
    /// Growth toward the grid edge at `witness`.
    Fails { witness: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedCheck {
    pub verdict: EmbedVerdict,
    /// Grid sup of Φ₂(Φ₁⁻¹(t^a))/t^b and where it sits.
    pub sup: f64,
    pub argmax: f64,
    pub trend: EdgeTrend,
    pub grid: LogGrid,
}

/// Edge slope (log10 per decade) regarded as growth in the embedding and ω scans.
pub const FLAT_SLOPE_TOL: f64 = 0.01;

/// Grid estimate of the C in Φ₁⁻¹(t^a) ≤ Φ₂⁻¹(C t^b).
pub fn embed_check(phi1: &GrowthFunction, phi2: &GrowthFunction, variant: &Variant, grid: &LogGrid) -> Result<EmbedCheck, MultiplierError> {
    variant.validate()?;
    if !grid.is_valid() {
        return Err(MultiplierError::Invalid(format!("bad grid {grid:?}")));
    }
    let (a, b) = variant.exponents();
    let ts = grid.values();
    let r: Vec<f64> = ts.iter().map(|&t| phi2.at(phi1.inv(t.powf(a))) / t.powf(b)).collect();
    let k = argmax(&r).unwrap_or(0);
    let trend = edge_trend(&ts, &r, 1.0);
    let verdict = if r[k].is_finite() && trend.max() <= FLAT_SLOPE_TOL {
        EmbedVerdict::Holds { constant: r[k] }
    } else {
        EmbedVerdict::Fails { witness: if trend.left >= trend.right { grid.t_min } else { grid.t_max } }
    };
    Ok(EmbedCheck { verdict, sup: r[k], argmax: ts[k], trend, grid: grid.clone() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OmegaOptions {
    /// Largest max/min of ω over the grid still read as "equivalent to 1".
    pub bracket: f64,
    pub slope_tol: f64,
    /// Decades probed below t_min.
    pub extension_decades: u32,
    /// Required shrink factor per probed decade.
    pub shrink_per_decade: f64,
    /// ω(t_min)/ω(t_max) must fall below this for vanishing.
    pub vanish_ratio: f64,
    pub monotone_tol: f64,
}

impl Default for OmegaOptions {
    fn default() -> Self {
        OmegaOptions { bracket: 4.0, slope_tol: FLAT_SLOPE_TOL, extension_decades: 2, shrink_per_decade: 1.02, vanish_ratio: 0.25, monotone_tol: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OmegaClass {
    EquivalentToOne { bracket: f64 },
    NondecreasingVanishing,
    Nonincreasing,
    /// Neighboring sample pairs (t, t') where ω rises and where it falls.
    Inconclusive { rising: Vec<(f64, f64)>, falling: Vec<(f64, f64)> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaProfile {
    pub variant: Variant,
    pub phi1: GrowthFunction,
    pub phi2: GrowthFunction,
    pub samples: Vec<(f64, f64)>,
    /// Samples below the grid used by the vanishing probe.
    pub extension: Vec<(f64, f64)>,
    /// max/min of ω over the grid.
    pub spread: f64,
    pub trend: EdgeTrend,
    pub classification: OmegaClass,
    pub options: OmegaOptions,
}

impl OmegaProfile {
    pub fn omega(&self, t: f64) -> f64 {
        omega_at(&self.phi1, &self.phi2, &self.variant, t)
    }
}

fn omega_at(phi1: &GrowthFunction, phi2: &GrowthFunction, variant: &Variant, t: f64) -> f64 {
    let (a, b) = variant.exponents();
    phi2.inv(t.powf(-b)) / phi1.inv(t.powf(-a))
}

pub fn omega_profile(
    phi1: &GrowthFunction,
    phi2: &GrowthFunction,
    variant: &Variant,
    grid: &LogGrid,
    opts: &OmegaOptions,
) -> Result<OmegaProfile, MultiplierError> {
    variant.validate()?;
    if !grid.is_valid() {
        return Err(MultiplierError::Invalid(format!("bad grid {grid:?}")));
    }
    let ts = grid.values();
    let w = |t: f64| omega_at(phi1, phi2, variant, t);
    let samples: Vec<(f64, f64)> = ts.iter().map(|&t| (t, w(t))).collect();
    if let Some(s) = samples.iter().find(|s| !(s.1 > 0.0 && s.1.is_finite())) {
        return Err(MultiplierError::Invalid(format!("omega({:e}) = {} is not positive", s.0, s.1)));
    }
    let vs: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let hi = vs.iter().copied().fold(0.0, f64::max);
    let lo = vs.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = hi / lo;
    let trend = edge_trend(&ts, &vs, 1.0);
    let extension: Vec<(f64, f64)> =
        (1..=opts.extension_decades).map(|k| grid.t_min / 10f64.powi(k as i32)).map(|t| (t, w(t))).collect();
    let mono = quotient_monotonicity(w, grid, opts.monotone_tol);
    let flat = trend.left.abs() <= opts.slope_tol && trend.right.abs() <= opts.slope_tol;
    let shrinking = {
        let mut prev = vs[0];
        extension.iter().all(|&(_, v)| {
            let ok = v > 0.0 && prev / v >= opts.shrink_per_decade;
            prev = v;
            ok
        })
    };
    let classification = if spread <= opts.bracket && flat {
        OmegaClass::EquivalentToOne { bracket: spread }
    } else if mono.nondecreasing && shrinking && vs[0] / vs[vs.len() - 1] < opts.vanish_ratio {
        OmegaClass::NondecreasingVanishing
    } else if mono.nonincreasing {
        OmegaClass::Nonincreasing
    } else {
        let mut rising = Vec::new();
        let mut falling = Vec::new();
        for p in samples.windows(2) {
            let scale = p[0].1.max(p[1].1);
            if (p[1].1 - p[0].1) / scale > opts.monotone_tol && rising.len() < 8 {
                rising.push((p[0].0, p[1].0));
            }
            if (p[0].1 - p[1].1) / scale > opts.monotone_tol && falling.len() < 8 {
                falling.push((p[0].0, p[1].0));
            }
        }
        OmegaClass::Inconclusive { rising, falling }
    };
    Ok(OmegaProfile {
        variant: *variant,
        phi1: phi1.clone(),
        phi2: phi2.clone(),
        samples,
        extension,
        spread,
        trend,
        classification,
        options: opts.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MultiplierSpace {
    HInfinity,
    ZeroSpace,
    HInfinityOmega,
    /// A hypothesis needed for the matching case failed, or ω could not be classified.
    OutOfTheorem { failed: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierVerdict {
    pub space: MultiplierSpace,
    pub table: Vec<HypothesisCheck>,
}

/// Maps the ω class and the growth-function checks to the multiplier space.
pub fn multiplier_space(
    profile: &OmegaProfile,
    phi1: &GrowthClassification,
    phi2: &GrowthClassification,
    composed: &GrowthClassification,
) -> MultiplierVerdict {
    let ratio = quotient_monotonicity(|t| profile.phi2.at(t) / profile.phi1.at(t), &phi1.grid, 1e-9).nondecreasing;
    let table = vec![
        HypothesisCheck { name: "phi1 in U".into(), passed: phi1.in_u },
        HypothesisCheck { name: "phi2 in U~".into(), passed: phi2.in_u && phi2.tilde_u.passes() },
        HypothesisCheck { name: "phi2/phi1 nondecreasing".into(), passed: ratio },
        HypothesisCheck { name: "phi1 nabla_2".into(), passed: phi1.nabla2.passes() },
        HypothesisCheck { name: "phi2 o phi1^-1 nabla_2".into(), passed: composed.nabla2.passes() },
    ];
    let need = |names: &[&str]| -> Vec<String> {
        table.iter().filter(|h| names.contains(&h.name.as_str()) && !h.passed).map(|h| h.name.clone()).collect()
    };
    let common = ["phi1 in U", "phi2 in U~", "phi2/phi1 nondecreasing"];
    let (failed, space) = match &profile.classification {
        OmegaClass::EquivalentToOne { .. } => (need(&[&common[..], &["phi1 nabla_2"]].concat()), MultiplierSpace::HInfinity),
        OmegaClass::NondecreasingVanishing => (need(&common), MultiplierSpace::ZeroSpace),
        OmegaClass::Nonincreasing => {
            (need(&[&common[..], &["phi1 nabla_2", "phi2 o phi1^-1 nabla_2"]].concat()), MultiplierSpace::HInfinityOmega)
        }
        OmegaClass::Inconclusive { .. } => (vec!["omega classification".to_string()], MultiplierSpace::ZeroSpace),
    };
    let space = if failed.is_empty() { space } else { MultiplierSpace::OutOfTheorem { failed } };
    MultiplierVerdict { space, table }
}

/// Classifies Φ₁, Φ₂ and Φ₂∘Φ₁⁻¹, builds ω and returns the multiplier verdict with the profile.
pub fn classify_multipliers(
    phi1: &GrowthFunction,
    phi2: &GrowthFunction,
    variant: &Variant,
    copts: &ClassifyOptions,
    oopts: &OmegaOptions,
) -> Result<(OmegaProfile, MultiplierVerdict), MultiplierError> {
    let profile = omega_profile(phi1, phi2, variant, &copts.grid, oopts)?;
    let (composed, _) = derived_functions(phi1, phi2);
    let c1 = classify(phi1, copts);
    let c2 = classify(phi2, copts);
    let c3 = classify(&composed, copts);
    let v = multiplier_space(&profile, &c1, &c2, &c3);
    Ok((profile, v))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HinfOmega {
    /// Probe sup of |f(z)|/ω(Im z); a lower bound for the norm.
    pub value: f64,
    pub argmax: Option<(f64, f64)>,
}

pub fn hinf_omega_norm<F: Fn(f64, f64) -> f64, W: Fn(f64) -> f64>(f: F, omega: W, probes: &[(f64, f64)]) -> HinfOmega {
    let mut best = HinfOmega { value: 0.0, argmax: None };
    for &(x, y) in probes {
        let r = f(x, y).abs() / omega(y);
        if r > best.value || best.argmax.is_none() {
            best = HinfOmega { value: r, argmax: Some((x, y)) };
        }
    }
    best
}

/// Density measure dV/(y² Φ₂∘Φ₁⁻¹(1/y^s)) with s from the mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecialMeasure {
    pub measure: Measure,
    pub composed: GrowthFunction,
    pub s: f64,
}

pub fn special_measure(phi1: &GrowthFunction, phi2: &GrowthFunction, mode: &Mode) -> Result<SpecialMeasure, MeasureError> {
    let (composed, _) = derived_functions(phi1, phi2);
    let s = mode.s();
    let density = DensityExpr::Div(
        Box::new(DensityExpr::YPow(-2.0)),
        Box::new(DensityExpr::Growth { f: composed.clone(), exponent: -s }),
    );
    Ok(SpecialMeasure { measure: Measure::density(density)?, composed, s })
}

/// 4·Σ_{j≥0} 2^{-j(a s - 1)} for lower index a; infinite when a s ≤ 1.
pub fn annulus_bound(lower_index: f64, s: f64) -> f64 {
    let e = lower_index * s - 1.0;
    if e > 0.0 {
        4.0 / (1.0 - 2f64.powf(-e))
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecialMeasureCheck {
    pub measure: SpecialMeasure,
    /// ∇₂ verdict of Φ₂∘Φ₁⁻¹, the predicted box verdict.
    pub expected_carleson: bool,
    pub lower_index: f64,
    pub box_constant: BoxConstant,
    pub annulus_bound: f64,
    /// max/min over scales of μ(Q_I)·Φ₂∘Φ₁⁻¹(1/|I|^s).
    pub per_scale_spread: f64,
    pub agrees: bool,
}

/// Box test of the special measure against Φ₂∘Φ₁⁻¹ next to the ∇₂ prediction and the annulus bound.
pub fn special_measure_check(
    phi1: &GrowthFunction,
    phi2: &GrowthFunction,
    mode: &Mode,
    family: &BoxFamily,
    spec: &QuadratureSpec,
    rule: &DivergenceRule,
    copts: &ClassifyOptions,
) -> Result<SpecialMeasureCheck, MeasureError> {
    let m = special_measure(phi1, phi2, mode)?;
    let c = classify(&m.composed, copts);
    let b = carleson_box_constant(&m.measure, &m.composed, m.s, family, spec, rule)?;
    let vals: Vec<f64> = b.per_scale.iter().map(|p| p.1).collect();
    let hi = vals.iter().copied().fold(0.0, f64::max);
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let expected = c.nabla2.passes();
    Ok(SpecialMeasureCheck {
        expected_carleson: expected,
        lower_index: c.lower_index,
        annulus_bound: annulus_bound(c.lower_index, m.s),
        per_scale_spread: hi / lo,
        agrees: expected == b.verdict.is_finite(),
        box_constant: b,
        measure: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::TestFunction;
    use approx::assert_relative_eq;

    fn pw(p: f64) -> GrowthFunction {
        GrowthFunction::power(p).unwrap()
    }

    fn grid() -> LogGrid {
        LogGrid::default()
    }

    #[test]
    fn embed_check_examples() {
        let h = Variant::HardyToBergman { alpha: 1.0 };
        match embed_check(&pw(1.0), &pw(3.0), &h, &grid()).unwrap().verdict {
            EmbedVerdict::Holds { constant } => assert_relative_eq!(constant, 1.0, max_relative = 1e-9),
            v => panic!("{v:?}"),
        }
        // t²/t³ = 1/t grows toward t → 0
        assert_eq!(embed_check(&pw(1.0), &pw(2.0), &h, &grid()).unwrap().verdict, EmbedVerdict::Fails { witness: 1e-6 });
        // (2 + 0)/2 = (2 + 1)/3
        let b = Variant::BergmanToBergman { alpha: 0.0, beta: 1.0 };
        assert!(matches!(embed_check(&pw(2.0), &pw(3.0), &b, &grid()).unwrap().verdict, EmbedVerdict::Holds { .. }));
    }

    #[test]
    fn omega_examples() {
        let h = Variant::HardyToBergman { alpha: 1.0 };
        let o = OmegaOptions::default();
        let c = |p: f64, q: f64| omega_profile(&pw(p), &pw(q), &h, &grid(), &o).unwrap().classification;
        assert!(matches!(c(1.0, 3.0), OmegaClass::EquivalentToOne { .. }));
        assert_eq!(c(1.0, 4.0), OmegaClass::NondecreasingVanishing);
        assert_eq!(c(2.0, 3.0), OmegaClass::Nonincreasing);
    }

    #[test]
    fn trichotomy_examples() {
        let copts = ClassifyOptions::default();
        let o = OmegaOptions::default();
        let h = Variant::HardyToBergman { alpha: 1.0 };
        let space = |p: f64, q: f64| classify_multipliers(&pw(p), &pw(q), &h, &copts, &o).unwrap().1.space;
        assert_eq!(space(1.5, 4.5), MultiplierSpace::HInfinity);
        assert_eq!(space(1.25, 5.0), MultiplierSpace::ZeroSpace);
        assert_eq!(space(2.0, 5.0), MultiplierSpace::HInfinityOmega);
        // Φ₁ = t fails ∇₂
        assert!(matches!(space(1.0, 3.0), MultiplierSpace::OutOfTheorem { .. }));
    }

    #[test]
    fn hinf_omega_examples() {
        let probes: Vec<(f64, f64)> = (0..50).map(|k| (k as f64 * 0.3 - 7.0, 10f64.powf(k as f64 / 10.0 - 2.5))).collect();
        assert_eq!(hinf_omega_norm(|_, _| 1.0, |_| 1.0, &probes).value, 1.0);
        let w = |y: f64| y.powf(-0.5);
        assert_relative_eq!(hinf_omega_norm(|_, y| w(y), w, &probes).value, 1.0, max_relative = 1e-15);
        let a = hinf_omega_norm(|x, y| (x * x + y).sin(), w, &probes).value;
        let b = hinf_omega_norm(|x, y| -3.0 * (x * x + y).sin(), w, &probes).value;
        assert_eq!(b, 3.0 * a);
    }

    #[test]
    fn bergman_kernel_is_bounded_by_omega() {
        let v = Variant::BergmanToBergman { alpha: 0.0, beta: 1.0 };
        let p = omega_profile(&pw(2.0), &pw(4.0), &v, &grid(), &OmegaOptions::default()).unwrap();
        let f = TestFunction::bergman_kernel((0.0, 1.0), pw(2.0), 0.0).unwrap();
        let probes: Vec<(f64, f64)> = (0..400).map(|k| ((k % 20) as f64 - 10.0, 10f64.powf((k / 20) as f64 / 5.0 - 2.0))).collect();
        let n = hinf_omega_norm(|x, y| f.abs(x, y), |y| p.omega(y), &probes);
        assert!(n.value.is_finite() && n.value > 0.0);
    }

    #[test]
    fn special_measure_density() {
        // Φ₂∘Φ₁⁻¹(1/y²) = y⁻⁴, so the density is y²
        let m = special_measure(&pw(2.0), &pw(4.0), &Mode::Bergman { alpha: 0.0 }).unwrap();
        if let Measure::Density { density } = &m.measure {
            assert_relative_eq!(density.eval_y(0.3), 0.09, max_relative = 1e-12);
        } else {
            panic!();
        }
        assert_eq!(annulus_bound(2.0, 1.0), 8.0);
    }
}
