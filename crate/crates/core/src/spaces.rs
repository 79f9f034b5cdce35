//! Orlicz modulars and Luxembourg norms on lines, half-planes and step functions,
//! together with the explicit Hardy and Bergman test functions.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::growth::GrowthFunction;
use crate::maximal::{nontangential_maximal, poisson_of_step, ConeSampling, SampledFunction1D};
use crate::measure::{CarlesonBox, DivergenceRule, Measure, MeasureError};
use crate::numerics::{integrate_line, line_rule, Estimate, LineHint, PlaneHint, QuadratureSpec};
use crate::scan::LogGrid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpacesError {
    #[error("invalid test function: {0}")]
    Invalid(String),
    #[error("Luxembourg bracket failed: modular is {modular:e} at lambda = {lambda:e}")]
    Bracket { lambda: f64, modular: f64 },
    #[error("modular diverges")]
    Divergent,
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Explicit functions on the upper half-plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    /// Φ⁻¹(1/y₀)·y₀²/(w − z̄₀)²
    HardyKernel { z0: (f64, f64), phi: GrowthFunction },
    /// Φ⁻¹(1/y₀^{2+α})·y₀^{4+2α}/(w − z̄₀)^{4+2α}
    BergmanKernel { z0: (f64, f64), phi: GrowthFunction, alpha: f64 },
    /// Poisson extension of a step function.
    PoissonOfStep { g: SampledFunction1D },
    /// λ·χ_{Q_I}
    IndicatorScaled { lambda: f64, region: CarlesonBox },
    /// c/(w − p)^n with p in the lower half-plane.
    Pole { coef: f64, pole: (f64, f64), order: i32 },
    Constant { value: f64 },
    Scaled { coef: f64, base: Box<TestFunction> },
}

/// A test function with its constants resolved, ready for repeated evaluation.
#[derive(Clone, Debug)]
pub struct Prepared {
    coef: f64,
    shape: Shape,
}

#[derive(Clone, Debug)]
enum Shape {
    Power { x0: f64, y0: f64, n: f64 },
    Poisson(SampledFunction1D),
    Box(CarlesonBox),
    One,
}

impl Prepared {
    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        let v = match &self.shape {
            Shape::Power { x0, y0, n } => {
                let d = Complex64::new(x - x0, y + y0);
                if n.fract() == 0.0 && n.abs() <= 64.0 {
                    d.powi(-(*n as i32))
                } else {
                    d.powf(-n)
                }
            }
            Shape::Poisson(g) => Complex64::new(poisson_of_step(g, (x, y)), 0.0),
            Shape::Box(b) => Complex64::new(if b.contains(x, y) { 1.0 } else { 0.0 }, 0.0),
            Shape::One => Complex64::new(1.0, 0.0),
        };
        v * self.coef
    }

    pub fn abs(&self, x: f64, y: f64) -> f64 {
        match &self.shape {
            Shape::Power { x0, y0, n } => {
                let r2 = (x - x0) * (x - x0) + (y + y0) * (y + y0);
                self.coef.abs() * r2.powf(-0.5 * n)
            }
            _ => self.eval(x, y).norm(),
        }
    }
}

fn check_point(z: (f64, f64), what: &str) -> Result<(), SpacesError> {
    if !(z.1 > 0.0 && z.0.is_finite() && z.1.is_finite()) {
        return Err(SpacesError::Invalid(format!("{what} needs a point in the upper half-plane, got {z:?}")));
    }
    Ok(())
}

impl TestFunction {
    pub fn hardy_kernel(z0: (f64, f64), phi: GrowthFunction) -> Result<Self, SpacesError> {
        let f = TestFunction::HardyKernel { z0, phi };
        f.validate()?;
        Ok(f)
    }

    pub fn bergman_kernel(z0: (f64, f64), phi: GrowthFunction, alpha: f64) -> Result<Self, SpacesError> {
        let f = TestFunction::BergmanKernel { z0, phi, alpha };
        f.validate()?;
        Ok(f)
    }

    /// c/(w + i)^n style rational function with the pole at `pole` (imaginary part negative).
    pub fn pole(coef: f64, pole: (f64, f64), order: i32) -> Result<Self, SpacesError> {
        let f = TestFunction::Pole { coef, pole, order };
        f.validate()?;
        Ok(f)
    }

    pub fn scaled(&self, coef: f64) -> Self {
        TestFunction::Scaled { coef, base: Box::new(self.clone()) }
    }

    pub fn validate(&self) -> Result<(), SpacesError> {
        match self {
            TestFunction::HardyKernel { z0, .. } => check_point(*z0, "hardy_kernel"),
            TestFunction::BergmanKernel { z0, alpha, .. } => {
                check_point(*z0, "bergman_kernel")?;
                if !(*alpha > -1.0) {
                    return Err(SpacesError::Invalid(format!("bergman_kernel needs alpha > -1, got {alpha}")));
                }
                Ok(())
            }
            TestFunction::PoissonOfStep { .. } => Ok(()),
            TestFunction::IndicatorScaled { lambda, .. } => {
                if lambda.is_finite() {
                    Ok(())
                } else {
                    Err(SpacesError::Invalid("indicator height must be finite".into()))
                }
            }
            TestFunction::Pole { pole, order, coef } => {
                if !(pole.1 < 0.0) || *order < 1 || !coef.is_finite() {
                    return Err(SpacesError::Invalid(format!("pole needs Im p < 0 and order >= 1, got {pole:?}, {order}")));
                }
                Ok(())
            }
            TestFunction::Constant { value } => {
                if value.is_finite() {
                    Ok(())
                } else {
                    Err(SpacesError::Invalid("constant must be finite".into()))
                }
            }
            TestFunction::Scaled { coef, base } => {
                if !coef.is_finite() {
                    return Err(SpacesError::Invalid("scale factor must be finite".into()));
                }
                base.validate()
            }
        }
    }

    pub fn prepare(&self) -> Prepared {
        match self {
            TestFunction::HardyKernel { z0, phi } => {
                let (x0, y0) = *z0;
                Prepared { coef: phi.inv(1.0 / y0) * y0 * y0, shape: Shape::Power { x0, y0, n: 2.0 } }
            }
            TestFunction::BergmanKernel { z0, phi, alpha } => {
                let (x0, y0) = *z0;
                let n = 4.0 + 2.0 * alpha;
                Prepared { coef: phi.inv(y0.powf(-(2.0 + alpha))) * y0.powf(n), shape: Shape::Power { x0, y0, n } }
            }
            TestFunction::PoissonOfStep { g } => Prepared { coef: 1.0, shape: Shape::Poisson(g.clone()) },
            TestFunction::IndicatorScaled { lambda, region } => Prepared { coef: *lambda, shape: Shape::Box(*region) },
            TestFunction::Pole { coef, pole, order } => {
                Prepared { coef: *coef, shape: Shape::Power { x0: pole.0, y0: -pole.1, n: *order as f64 } }
            }
            TestFunction::Constant { value } => Prepared { coef: *value, shape: Shape::One },
            TestFunction::Scaled { coef, base } => {
                let mut p = base.prepare();
                p.coef *= coef;
                p
            }
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        self.prepare().eval(x, y)
    }

    pub fn abs(&self, x: f64, y: f64) -> f64 {
        self.prepare().abs(x, y)
    }

    /// Quadrature placement for half-plane integrals of functions of |f|.
    pub fn plane_hint(&self) -> PlaneHint {
        match self {
            TestFunction::HardyKernel { z0, .. } | TestFunction::BergmanKernel { z0, .. } => PlaneHint::kernel(z0.0, z0.1),
            TestFunction::Pole { pole, .. } => PlaneHint::kernel(pole.0, -pole.1),
            TestFunction::PoissonOfStep { g } => {
                let (a, b) = g.window();
                let mut h = PlaneHint::kernel(0.5 * (a + b), 0.5 * (b - a));
                h.x_breaks = vec![a, b];
                h
            }
            TestFunction::IndicatorScaled { region, .. } => PlaneHint {
                center_x: region.center_x,
                scale0: region.length,
                slope: 0.0,
                x_breaks: vec![region.left(), region.right()],
                y_breaks: vec![region.length],
                x_range: None,
            },
            TestFunction::Constant { .. } => PlaneHint::default(),
            TestFunction::Scaled { base, .. } => base.plane_hint(),
        }
    }

    pub fn line_hint(&self, y: f64) -> LineHint {
        self.plane_hint().inner_hint(y)
    }
}

pub const LUX_MIN: f64 = 1e-12;
pub const LUX_MAX: f64 = 1e12;
const LUX_ITERATIONS: usize = 200;

/// inf{λ > 0 : M(λ) ≤ 1} for a modular M that is nonincreasing in λ, by bisection in log λ.
pub fn luxembourg<M: Fn(f64) -> f64>(modular: M, tol: f64) -> Result<f64, SpacesError> {
    let m_lo = modular(LUX_MIN);
    if m_lo == 0.0 {
        return Ok(0.0);
    }
    if m_lo.is_nan() || m_lo <= 1.0 {
        return Err(SpacesError::Bracket { lambda: LUX_MIN, modular: m_lo });
    }
    let m_hi = modular(LUX_MAX);
    if !(m_hi <= 1.0) {
        return Err(SpacesError::Bracket { lambda: LUX_MAX, modular: m_hi });
    }
    let (mut lo, mut hi) = (LUX_MIN, LUX_MAX);
    for _ in 0..LUX_ITERATIONS {
        let mid = (lo * hi).sqrt();
        let m = modular(mid);
        if (m - 1.0).abs() <= tol {
            return Ok(mid);
        }
        if m > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 4.0 * f64::EPSILON {
            break;
        }
    }
    Ok(hi)
}

pub const DEFAULT_LUX_TOL: f64 = 1e-12;

/// ∫ Φ(|g|) dx for a step function.
pub fn step_modular(g: &SampledFunction1D, phi: &GrowthFunction) -> f64 {
    g.modular(phi)
}

pub fn step_luxembourg(g: &SampledFunction1D, phi: &GrowthFunction, tol: f64) -> Result<f64, SpacesError> {
    luxembourg(|l| g.values.iter().map(|v| phi.at(v.abs() / l)).sum::<f64>() * g.h, tol)
}

/// ∫_ℝ Φ(|f(x + iy)|) dx.
pub fn line_modular(f: &TestFunction, phi: &GrowthFunction, y: f64, spec: &QuadratureSpec) -> Estimate {
    let p = f.prepare();
    integrate_line(|x| phi.at(p.abs(x, y)), &f.line_hint(y), spec)
}

/// Samples of |f| with weights; sums of w·Φ(v/λ) approximate a modular of f/λ.
struct Frozen {
    w: Vec<f64>,
    v: Vec<f64>,
}

impl Frozen {
    fn modular(&self, phi: &GrowthFunction, lambda: f64) -> f64 {
        self.w.iter().zip(&self.v).map(|(w, v)| if *v == 0.0 { 0.0 } else { w * phi.at(v / lambda) }).sum()
    }
}

/// Luxembourg norm of f on the horizontal line at height y.
pub fn line_luxembourg(f: &TestFunction, phi: &GrowthFunction, y: f64, spec: &QuadratureSpec, tol: f64) -> Result<f64, SpacesError> {
    let p = f.prepare();
    let (_, rule) = line_rule(|x| phi.at(p.abs(x, y)), &f.line_hint(y), spec);
    let fr = Frozen { v: rule.x.iter().map(|&x| p.abs(x, y)).collect(), w: rule.w };
    luxembourg(|l| fr.modular(phi, l), tol)
}

/// Geometric y-grid for the sup over heights: [1e-4, 1e4], 8 points per decade.
pub fn hardy_grid() -> LogGrid {
    LogGrid::new(1e-4, 1e4, 65)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardyLevel {
    pub y: f64,
    pub modular: f64,
    pub luxembourg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardyNorm {
    /// sup_y ∫ Φ(|f(x + iy)|) dx over the grid.
    pub modular: f64,
    pub modular_y: f64,
    /// sup_y of the line Luxembourg norms over the grid.
    pub luxembourg: f64,
    pub luxembourg_y: f64,
    pub levels: Vec<HardyLevel>,
    pub grid: LogGrid,
}

pub fn hardy_norm(f: &TestFunction, phi: &GrowthFunction, grid: &LogGrid, spec: &QuadratureSpec, tol: f64) -> Result<HardyNorm, SpacesError> {
    let levels: Result<Vec<HardyLevel>, SpacesError> = grid
        .values()
        .par_iter()
        .map(|&y| {
            Ok(HardyLevel { y, modular: line_modular(f, phi, y, spec).value, luxembourg: line_luxembourg(f, phi, y, spec, tol)? })
        })
        .collect();
    let levels = levels?;
    let pick = |key: fn(&HardyLevel) -> f64| {
        levels.iter().fold((0.0f64, grid.t_min), |best, l| if key(l) > best.0 { (key(l), l.y) } else { best })
    };
    let (modular, modular_y) = pick(|l| l.modular);
    let (luxembourg, luxembourg_y) = pick(|l| l.luxembourg);
    Ok(HardyNorm { modular, modular_y, luxembourg, luxembourg_y, levels, grid: grid.clone() })
}

/// ∫ Φ(|f|) dμ with the measure's divergence rule.
pub fn measure_modular(
    f: &TestFunction,
    phi: &GrowthFunction,
    mu: &Measure,
    spec: &QuadratureSpec,
    rule: &DivergenceRule,
) -> Result<crate::measure::MassEstimate, SpacesError> {
    let p = f.prepare();
    Ok(mu.integrate(|x, y| phi.at(p.abs(x, y)), &f.plane_hint(), spec, rule)?)
}

/// inf{λ : ∫ Φ(|f|/λ) dμ ≤ 1} on a rule frozen from the integrand Φ(|f|).
pub fn measure_luxembourg(f: &TestFunction, phi: &GrowthFunction, mu: &Measure, spec: &QuadratureSpec, tol: f64) -> Result<f64, SpacesError> {
    let p = f.prepare();
    let rule = mu.rule(|x, y| phi.at(p.abs(x, y)), &f.plane_hint(), spec)?;
    let fr = Frozen { v: (0..rule.len()).map(|i| p.abs(rule.x[i], rule.y[i])).collect(), w: rule.w };
    luxembourg(|l| fr.modular(phi, l), tol)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BergmanNorm {
    /// ∫ Φ(|f|) dV_α
    pub modular: f64,
    pub divergent: bool,
    pub luxembourg: f64,
}

pub fn bergman_norm(f: &TestFunction, phi: &GrowthFunction, alpha: f64, spec: &QuadratureSpec, tol: f64) -> Result<BergmanNorm, SpacesError> {
    let mu = Measure::weighted_volume(alpha)?;
    let m = measure_modular(f, phi, &mu, spec, &DivergenceRule::default())?;
    if m.divergent {
        return Ok(BergmanNorm { modular: f64::INFINITY, divergent: true, luxembourg: f64::INFINITY });
    }
    let luxembourg = measure_luxembourg(f, phi, &mu, spec, tol)?;
    Ok(BergmanNorm { modular: m.value, divergent: false, luxembourg })
}

/// Luxembourg norm on ℝ of the sampled nontangential maximal function f*.
pub fn nontangential_luxembourg(f: &TestFunction, phi: &GrowthFunction, cone: &ConeSampling, spec: &QuadratureSpec, tol: f64) -> Result<f64, SpacesError> {
    let p = f.prepare();
    let star = |x: f64| nontangential_maximal(|t, y| p.abs(t, y), x, cone);
    let mut loose = spec.clone();
    loose.rel_tol = loose.rel_tol.max(1e-6);
    loose.max_panels = loose.max_panels.min(400);
    let (_, rule) = line_rule(|x| phi.at(star(x)), &f.line_hint(cone.y_min), &loose);
    let v: Vec<f64> = rule.x.par_iter().map(|&x| star(x)).collect();
    let fr = Frozen { v, w: rule.w };
    luxembourg(|l| fr.modular(phi, l), tol)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseReport {
    /// |f(z)| / (Φ⁻¹(1/y^{2+α})·‖f‖) at each probe.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub argmax: Option<(f64, f64)>,
}

/// Empirical constant in |f(z)| ≤ C Φ⁻¹(1/y^{2+α}) ‖f‖.
pub fn pointwise_bound_check(f: &TestFunction, phi: &GrowthFunction, alpha: f64, probes: &[(f64, f64)], norm: f64) -> PointwiseReport {
    let p = f.prepare();
    let ratios: Vec<f64> = probes
        .iter()
        .map(|&(x, y)| {
            let v = p.abs(x, y);
            if v == 0.0 {
                0.0
            } else {
                v / (phi.inv(y.powf(-(2.0 + alpha))) * norm)
            }
        })
        .collect();
    let mut best = (0.0, None);
    for (r, z) in ratios.iter().zip(probes) {
        if *r > best.0 {
            best = (*r, Some(*z));
        }
    }
    PointwiseReport { ratios, max_ratio: best.0, argmax: best.1 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::beta;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn power(p: f64) -> GrowthFunction {
        GrowthFunction::power(p).unwrap()
    }

    #[test]
    fn hardy_kernel_peak_magnitude() {
        for (z, p) in [((0.0, 1.0), 2.0), ((1.5, 0.25), 3.0)] {
            let f = TestFunction::hardy_kernel(z, power(p)).unwrap();
            assert_relative_eq!(f.abs(z.0, z.1), power(p).inv(1.0 / z.1) / 4.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn luxembourg_examples() {
        let chi = SampledFunction1D::indicator(0.0, 1.0, 1.0, -1.0, 2.0, 0.25).unwrap();
        assert_relative_eq!(step_luxembourg(&chi, &power(2.0), DEFAULT_LUX_TOL).unwrap(), 1.0, max_relative = 1e-10);
        let two = SampledFunction1D::indicator(0.0, 4.0, 2.0, -1.0, 5.0, 0.5).unwrap();
        assert_relative_eq!(step_luxembourg(&two, &power(1.0), DEFAULT_LUX_TOL).unwrap(), 8.0, max_relative = 1e-10);
        assert_eq!(step_luxembourg(&chi.scaled(0.0), &power(2.0), DEFAULT_LUX_TOL).unwrap(), 0.0);
        assert_eq!(step_modular(&chi, &power(2.0)), 1.0);
    }

    #[test]
    fn modular_of_scaled_box_indicator() {
        let b = CarlesonBox::new(0.5, 1.0).unwrap();
        let f = TestFunction::IndicatorScaled { lambda: 2.0, region: b };
        let m = measure_modular(&f, &power(1.0), &Measure::weighted_volume(0.0).unwrap(), &QuadratureSpec::default(), &DivergenceRule::default()).unwrap();
        assert_relative_eq!(m.value, 2.0, max_relative = 1e-8);
    }

    #[test]
    fn line_modular_of_simple_pole() {
        // |1/(w + i)|² on the line at height y integrates to π/(1 + y)
        let f = TestFunction::pole(1.0, (0.0, -1.0), 1).unwrap();
        let spec = QuadratureSpec::default();
        for y in [1e-4, 0.5, 3.0] {
            assert_relative_eq!(line_modular(&f, &power(2.0), y, &spec).value, PI / (1.0 + y), max_relative = 1e-9);
        }
        let h = hardy_norm(&f, &power(2.0), &hardy_grid(), &spec, DEFAULT_LUX_TOL).unwrap();
        assert_relative_eq!(h.modular, PI / (1.0 + 1e-4), max_relative = 1e-9);
        assert_eq!(h.modular_y, 1e-4);
    }

    #[test]
    fn hardy_kernel_norm_bounds() {
        let spec = QuadratureSpec::default();
        for z in [(0.0, 0.5), (0.0, 1.0), (1.0, 2.0)] {
            let f = TestFunction::hardy_kernel(z, power(2.0)).unwrap();
            let h = hardy_norm(&f, &power(2.0), &hardy_grid(), &spec, DEFAULT_LUX_TOL).unwrap();
            // line integral y0³ B(1/2, 3/2)/(y + y0)³ is largest at the bottom of the grid
            let want = PI / 2.0 * (z.1 / (z.1 + 1e-4)).powi(3);
            assert_relative_eq!(h.modular, want, max_relative = 1e-8);
            assert!(h.modular <= PI && h.luxembourg <= PI);
            assert_relative_eq!(h.luxembourg, want.sqrt(), max_relative = 1e-8);
        }
    }

    #[test]
    fn bergman_kernel_modular_bound() {
        let spec = QuadratureSpec::default();
        for alpha in [0.0, 1.0] {
            let bound = beta(0.5, (3.0 + 2.0 * alpha) / 2.0).unwrap() * beta(1.0 + alpha, 2.0 + alpha).unwrap();
            // the bound is attained for Φ(t) = t
            let f = TestFunction::bergman_kernel((0.0, 1.0), power(1.0), alpha).unwrap();
            let n = bergman_norm(&f, &power(1.0), alpha, &spec, DEFAULT_LUX_TOL).unwrap();
            assert_relative_eq!(n.modular, bound, max_relative = 1e-6);
            let f2 = TestFunction::bergman_kernel((0.3, 2.0), power(2.0), alpha).unwrap();
            let n2 = bergman_norm(&f2, &power(2.0), alpha, &spec, DEFAULT_LUX_TOL).unwrap();
            assert!(n2.modular <= bound + 1e-3, "alpha={alpha}: {} vs {bound}", n2.modular);
        }
        assert_relative_eq!(beta(0.5, 1.5).unwrap() * beta(1.0, 2.0).unwrap(), PI / 4.0, max_relative = 1e-14);
    }

    #[test]
    fn zero_function_has_zero_norms() {
        let z = TestFunction::Constant { value: 0.0 };
        let spec = QuadratureSpec::default();
        let h = hardy_norm(&z, &power(2.0), &LogGrid::new(0.1, 10.0, 5), &spec, DEFAULT_LUX_TOL).unwrap();
        assert_eq!((h.modular, h.luxembourg), (0.0, 0.0));
        let b = bergman_norm(&z, &power(2.0), 0.0, &spec, DEFAULT_LUX_TOL).unwrap();
        assert_eq!((b.modular, b.luxembourg), (0.0, 0.0));
        let r = pointwise_bound_check(&z, &power(2.0), 0.0, &[(0.0, 1.0)], 0.0);
        assert_eq!(r.max_ratio, 0.0);
    }

    #[test]
    fn pointwise_ratio_for_constant_grows_with_height() {
        let c = TestFunction::Constant { value: 1.0 };
        let r = pointwise_bound_check(&c, &power(2.0), 0.0, &[(0.0, 0.1), (0.0, 1.0), (0.0, 10.0)], 1.0);
        assert_eq!(r.argmax, Some((0.0, 10.0)));
        assert!(r.ratios.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn luxembourg_bracket_failure() {
        assert!(matches!(luxembourg(|_| 2.0, 1e-12), Err(SpacesError::Bracket { .. })));
    }
}
