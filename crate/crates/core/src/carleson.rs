//! Box, kernel and embedding testing conditions for Carleson measures, their weak-type
//! analogues and the level-set comparisons behind them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::growth::{classify, derived_functions, quotient_monotonicity, ClassifyOptions, GrowthError, GrowthFunction};
use crate::maximal::{level_sets, nontangential_maximal, ConeSampling, DyadicGrid, MaximalError, SampledFunction2D};
use crate::measure::{
    carleson_box_constant, scale_trend, Atom, BoxConstant, BoxFamily, CarlesonBox, DivergenceRule, MassEstimate, Measure,
    MeasureError, Verdict, OCTAVE_SLOPE_TOL,
};
use crate::multipliers::special_measure;
use crate::numerics::{PlaneHint, QuadratureSpec};
use crate::scan::{edge_trend, EdgeTrend, LogGrid};
use crate::spaces::{
    bergman_norm, hardy_grid, hardy_norm, luxembourg, nontangential_luxembourg, SpacesError, TestFunction, DEFAULT_LUX_TOL,
    LUX_MIN,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CarlesonError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Spaces(#[from] SpacesError),
    #[error(transparent)]
    Maximal(#[from] MaximalError),
    #[error(transparent)]
    Growth(#[from] GrowthError),
}

/// Testing exponent s together with the source space of the embedding condition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mode {
    /// s = 1, source space H^{Φ₁}
    Hardy,
    /// s = 2 + α, source space A_α^{Φ₁}
    Bergman { alpha: f64 },
    /// Box and kernel conditions only.
    Raw { s: f64 },
}

impl Mode {
    pub fn s(&self) -> f64 {
        match self {
            Mode::Hardy => 1.0,
            Mode::Bergman { alpha } => 2.0 + alpha,
            Mode::Raw { s } => *s,
        }
    }

    pub fn validate(&self) -> Result<(), CarlesonError> {
        match self {
            Mode::Bergman { alpha } if !(*alpha > -1.0 && alpha.is_finite()) => {
                Err(CarlesonError::Invalid(format!("bergman mode needs alpha > -1, got {alpha}")))
            }
            Mode::Raw { s } if !(*s > 0.0 && s.is_finite()) => Err(CarlesonError::Invalid(format!("s must be positive, got {s}"))),
            _ => Ok(()),
        }
    }
}

/// w ↦ Φ₂(Φ₁⁻¹(1/y^s)·y^{2s}/|z − w̄|^{2s}) for a fixed z = x + iy.
#[derive(Clone, Debug)]
pub struct TestingKernel<'a> {
    phi2: &'a GrowthFunction,
    x: f64,
    y: f64,
    s: f64,
    amp: f64,
}

impl<'a> TestingKernel<'a> {
    pub fn new(phi1: &GrowthFunction, phi2: &'a GrowthFunction, s: f64, z: (f64, f64)) -> Self {
        let (x, y) = z;
        let amp = phi1.inv(y.powf(-s)) * y.powf(2.0 * s);
        TestingKernel { phi2, x, y, s, amp }
    }

    pub fn eval(&self, u: f64, v: f64) -> f64 {
        let d = (self.x - u).powi(2) + (self.y + v).powi(2);
        self.phi2.at(self.amp / d.powf(self.s))
    }
}

/// Truncation range widened around a feature at height y.
fn local_spec(spec: &QuadratureSpec, y: f64) -> QuadratureSpec {
    let mut s = spec.clone();
    s.truncation.y_min *= y.min(1.0);
    s.truncation.y_max *= y.max(1.0);
    s
}

/// ∫ of the testing kernel at z against μ (exact sum for atoms).
pub fn kernel_value(
    mu: &Measure,
    phi1: &GrowthFunction,
    phi2: &GrowthFunction,
    s: f64,
    z: (f64, f64),
    spec: &QuadratureSpec,
    rule: &DivergenceRule,
) -> Result<MassEstimate, CarlesonError> {
    let k = TestingKernel::new(phi1, phi2, s, z);
    Ok(mu.integrate(|u, v| k.eval(u, v), &PlaneHint::kernel(z.0, z.1), &local_spec(spec, z.1), rule)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSup {
    pub constant: f64,
    pub witness: Option<(f64, f64)>,
    pub values: Vec<f64>,
    /// First sample point whose integral diverges.
    pub divergent: Option<(f64, f64)>,
}

/// Sup of the kernel integral over explicit sample points.
pub fn kernel_testing_constant(
    mu: &Measure,
    phi1: &GrowthFunction,
    phi2: &GrowthFunction,
    s: f64,
    points: &[(f64, f64)],
    spec: &QuadratureSpec,
    rule: &DivergenceRule,
) -> Result<KernelSup, CarlesonError> {
    if !(s > 0.0) {
        return Err(CarlesonError::Invalid(format!("s must be positive, got {s}")));
    }
    if let Some(p) = points.iter().find(|p| !(p.1 > 0.0 && p.0.is_finite())) {
        return Err(CarlesonError::Invalid(format!("sample point {p:?} is not in the upper half-plane")));
    }
    let est: Result<Vec<MassEstimate>, CarlesonError> =
        points.par_iter().map(|&z| kernel_value(mu, phi1, phi2, s, z, spec, rule)).collect();
    let est = est?;
    let divergent = points.iter().zip(&est).find(|(_, e)| e.divergent).map(|(z, _)| *z);
    let values: Vec<f64> = est.iter().map(|e| if e.divergent { f64::INFINITY } else { e.value }).collect();
    let mut best = (0.0, None);
    for (z, &v) in points.iter().zip(&values) {
        if v > best.0 || best.1.is_none() {
            best = (v, Some(*z));
        }
    }
    Ok(KernelSup { constant: best.0, witness: best.1, values, divergent })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConstant {
    pub constant: f64,
    pub witness: Option<(f64, f64)>,
    pub verdict: Verdict,
    /// (box length, sup over that length's sample points)
    pub per_scale: Vec<(f64, f64)>,
    pub trend: EdgeTrend,
    pub points_evaluated: usize,
}

/// Kernel condition sampled at box centers, box top-centers and atoms lifted to twice their height.
pub fn kernel_constant(
    mu: &Measure,
    phi1: &GrowthFunction,
    phi2: &GrowthFunction,
    s: f64,
    family: &BoxFamily,
    spec: &QuadratureSpec,
    rule: &DivergenceRule,
) -> Result<KernelConstant, CarlesonError> {
    family.validate()?;
    let lengths = family.lengths();
    // scale index, or None for points outside the dyadic scales
    let mut tagged: Vec<(Option<usize>, (f64, f64))> = Vec::new();
    for (i, &l) in lengths.iter().enumerate() {
        for b in family.candidates(mu, l) {
            tagged.push((Some(i), (b.center_x, 0.5 * l)));
            tagged.push((Some(i), (b.center_x, l)));
        }
    }
    for b in &family.extra {
        tagged.push((None, (b.center_x, 0.5 * b.length)));
        tagged.push((None, (b.center_x, b.length)));
    }
    if let Some(atoms) = mu.atoms() {
        tagged.extend(atoms.iter().filter(|a| a.mass > 0.0).map(|a| (None, (a.x, 2.0 * a.y))));
    }
    let points: Vec<(f64, f64)> = tagged.iter().map(|t| t.1).collect();
    let sup = kernel_testing_constant(mu, phi1, phi2, s, &points, spec, rule)?;
    let mut per_scale: Vec<(f64, f64)> = lengths.iter().map(|&l| (l, 0.0)).collect();
    for ((tag, _), &v) in tagged.iter().zip(&sup.values) {
        if let Some(i) = tag {
            per_scale[*i].1 = per_scale[*i].1.max(v);
        }
    }
    let sups: Vec<f64> = per_scale.iter().map(|p| p.1).collect();
    let trend = scale_trend(&sups, 3);
    let verdict = if sup.divergent.is_some() {
        Verdict::Divergent
    } else if trend.max() > OCTAVE_SLOPE_TOL {
        Verdict::Unbounded
    } else {
        Verdict::Finite
    };
    let witness = sup.divergent.or(sup.witness);
    let constant = if sup.divergent.is_some() { f64::INFINITY } else { sup.constant };
    Ok(KernelConstant { constant, witness, verdict, per_scale, trend, points_evaluated: points.len() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusTerm {
    pub j: u32,
    /// μ(E_j)
    pub mass: f64,
    /// Kernel sum over the atoms in E_j.
    pub kernel_sum: f64,
    /// μ(E_j) times the kernel's sup over E_j.
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusDecomposition {
    pub z: (f64, f64),
    /// Q_I centered below z with |I| = 2y.
    pub base: CarlesonBox,
    pub terms: Vec<AnnulusTerm>,
    pub total: f64,
    /// Kernel sum over all atoms at once.
    pub direct: f64,
}

/// Splits the kernel sum at z over E_0 = Q_I and E_j = Q_{2^j I} \ Q_{2^{j-1} I}.
pub fn annulus_decomposition(
    atoms: &[Atom],
    phi1: &GrowthFunction,
    phi2: &GrowthFunction,
    s: f64,
    z: (f64, f64),
) -> Result<AnnulusDecomposition, CarlesonError> {
    let (x, y) = z;
    let base = CarlesonBox::new(x, 2.0 * y)?;
    let k = TestingKernel::new(phi1, phi2, s, z);
    let top = phi1.inv(y.powf(-s));
    let mut terms: Vec<AnnulusTerm> = Vec::new();
    let mut left: Vec<&Atom> = atoms.iter().collect();
    let mut j = 0u32;
    while !left.is_empty() {
        if j > 1100 {
            return Err(CarlesonError::Invalid("atoms outside every dilated box".into()));
        }
        let q = CarlesonBox::new(x, base.length * 2f64.powi(j as i32))?;
        let (inside, rest): (Vec<&Atom>, Vec<&Atom>) = left.into_iter().partition(|a| q.contains(a.x, a.y));
        left = rest;
        let mass: f64 = inside.iter().map(|a| a.mass).sum();
        let kernel_sum: f64 = inside.iter().map(|a| a.mass * k.eval(a.x, a.y)).sum();
        // |z - w̄| >= y on Q_I and >= 2^{j-1} y off Q_{2^{j-1} I}
        let dist = if j == 0 { 1.0 } else { 2f64.powi(j as i32 - 1) };
        let bound = mass * phi2.at(top / dist.powf(2.0 * s));
        terms.push(AnnulusTerm { j, mass, kernel_sum, bound });
        j += 1;
    }
    let total = terms.iter().map(|t| t.kernel_sum).sum();
    let direct = atoms.iter().map(|a| a.mass * k.eval(a.x, a.y)).sum();
    Ok(AnnulusDecomposition { z, base, terms, total, direct })
}

/// Test-function family, K-grid and normalizer settings for the embedding and weak-type searches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingConfig {
    pub k_grid: LogGrid,
    pub lambda_grid: LogGrid,
    /// Heights y₀ of the kernel test functions.
    pub heights: Vec<f64>,
    /// Real parts of the kernel test functions.
    pub centers: Vec<f64>,
    /// Heights for the sup in the Hardy norm.
    pub hardy_grid: LogGrid,
    /// Cone for f*; its heights contain the Hardy grid and its apertures contain 0.
    pub cone: ConeSampling,
    pub lux_tol: f64,
    /// Decades at each end used for the K-versus-height trend.
    pub trend_window: f64,
    /// Edge slope (log10 per decade) of K against y₀ read as growth.
    pub trend_tol: f64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            k_grid: LogGrid::new(1e-4, 1e4, 201),
            lambda_grid: LogGrid::new(1e-8, 1e8, 321),
            heights: (-3..=3).map(|k| 4f64.powi(k)).collect(),
            centers: vec![0.0],
            hardy_grid: hardy_grid(),
            cone: ConeSampling { y_min: 1e-4, y_max: 1e4, per_decade: 8, aperture_points: 17 },
            lux_tol: DEFAULT_LUX_TOL,
            trend_window: 1.25,
            trend_tol: 0.02,
        }
    }
}

/// Everything `verify_equivalence` needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquivalenceConfig {
    pub family: BoxFamily,
    pub spec: QuadratureSpec,
    pub divergence: DivergenceRule,
    pub embedding: EmbeddingConfig,
    pub classify: ClassifyOptions,
    /// Also run the weak-type search.
    pub weak: bool,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        EquivalenceConfig {
            family: BoxFamily::default(),
            spec: QuadratureSpec::default(),
            divergence: DivergenceRule::default(),
            embedding: EmbeddingConfig::default(),
            classify: ClassifyOptions::default(),
            weak: true,
        }
    }
}

/// Adds powers of 4 until the heights bracket every atom height by a factor 16 on both sides.
fn extend_heights(heights: &mut Vec<f64>, atoms: &[Atom]) {
    let lo = atoms.iter().map(|a| a.y).fold(f64::INFINITY, f64::min) / 16.0;
    let hi = atoms.iter().map(|a| a.y).fold(0.0, f64::max) * 16.0;
    let mut h = heights.iter().copied().fold(f64::INFINITY, f64::min);
    while h > lo && h.is_finite() {
        h /= 4.0;
        heights.push(h);
    }
    let mut h = heights.iter().copied().fold(0.0, f64::max);
    while h < hi && h > 0.0 {
        h *= 4.0;
        heights.push(h);
    }
    heights.sort_by(f64::total_cmp);
}

/// Kernel test functions of the source space at every (center, height) pair.
pub fn embedding_family(mode: &Mode, phi1: &GrowthFunction, cfg: &EmbeddingConfig) -> Result<Vec<TestFunction>, CarlesonError> {
    mode.validate()?;
    let mut out = Vec::new();
    for &c in &cfg.centers {
        for &h in &cfg.heights {
            out.push(match mode {
                Mode::Hardy => TestFunction::hardy_kernel((c, h), phi1.clone())?,
                Mode::Bergman { alpha } => TestFunction::bergman_kernel((c, h), phi1.clone(), *alpha)?,
                Mode::Raw { .. } => return Err(CarlesonError::Invalid("raw mode has no source space".into())),
            });
        }
    }
    Ok(out)
}

fn anchor(f: &TestFunction) -> (f64, f64) {
    match f {
        TestFunction::HardyKernel { z0, .. } | TestFunction::BergmanKernel { z0, .. } => *z0,
        TestFunction::Scaled { base, .. } => anchor(base),
        _ => (0.0, 1.0),
    }
}

/// Luxembourg norm in the source space of the mode.
pub fn source_norm(
    f: &TestFunction,
    phi1: &GrowthFunction,
    mode: &Mode,
    cfg: &EmbeddingConfig,
    spec: &QuadratureSpec,
) -> Result<f64, CarlesonError> {
    match mode {
        Mode::Hardy => Ok(hardy_norm(f, phi1, &cfg.hardy_grid, spec, cfg.lux_tol)?.luxembourg),
        Mode::Bergman { alpha } => Ok(bergman_norm(f, phi1, *alpha, spec, cfg.lux_tol)?.luxembourg),
        Mode::Raw { .. } => Err(CarlesonError::Invalid("raw mode has no source space".into())),
    }
}

/// Smallest x with m(x) ≤ 1 for nonincreasing m; 0 when m vanishes.
fn smallest_passing<M: Fn(f64) -> f64>(m: M, tol: f64) -> f64 {
    match luxembourg(m, tol) {
        Ok(v) => v,
        Err(SpacesError::Bracket { lambda, modular }) if lambda == LUX_MIN && modular <= 1.0 => LUX_MIN,
        Err(_) => f64::INFINITY,
    }
}

/// First grid value passing a monotone test.
fn grid_threshold<P: Fn(f64) -> bool>(grid: &[f64], pass: P) -> Option<f64> {
    let i = grid.partition_point(|&k| !pass(k));
    grid.get(i).copied()
}

/// Weighted nodes of μ frozen for one test function, with |f| at each node.
struct Frozen {
    w: Vec<f64>,
    v: Vec<f64>,
}

impl Frozen {
    fn modular(&self, phi: &GrowthFunction, scale: f64) -> f64 {
        self.w.iter().zip(&self.v).map(|(w, v)| if *v == 0.0 { 0.0 } else { w * phi.at(v / scale) }).sum()
    }

    /// Nodes sorted by decreasing |f| with cumulative weights.
    fn tail(&self) -> (Vec<f64>, Vec<f64>) {
        let mut idx: Vec<usize> = (0..self.v.len()).collect();
        idx.sort_by(|&a, &b| self.v[b].total_cmp(&self.v[a]));
        let v: Vec<f64> = idx.iter().map(|&i| self.v[i]).collect();
        let mut acc = 0.0;
        let cum = idx
            .iter()
            .map(|&i| {
                acc += self.w[i];
                acc
            })
            .collect();
        (v, cum)
    }
}

/// sup over the λ-grid of Φ(λ)·μ(|f| > cλ) from a sorted tail.
fn weak_sup(tail: &(Vec<f64>, Vec<f64>), phi: &GrowthFunction, lambdas: &[f64], c: f64) -> f64 {
    let (v, cum) = tail;
    lambdas
        .iter()
        .map(|&l| {
            let n = v.partition_point(|&x| x > c * l);
            if n == 0 {
                0.0
            } else {
                phi.at(l) * cum[n - 1]
            }
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMember {
    pub function: TestFunction,
    pub center: f64,
    pub height: f64,
    /// Source-space Luxembourg norm.
    pub norm: f64,
    pub divergent: bool,
    /// ‖f‖_{L^{Φ₂}(μ)}/‖f‖, the exact threshold on the frozen rule.
    pub k_exact: f64,
    /// Smallest grid K with ∫ Φ₂(|f|/(K‖f‖)) dμ ≤ 1.
    pub k_grid: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConstant {
    /// Max of the grid values; infinite when some member has none.
    pub family_max: f64,
    pub family_max_exact: f64,
    pub members: Vec<EmbeddingMember>,
    pub verdict: Verdict,
    pub trend: EdgeTrend,
    pub k_grid: LogGrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakMember {
    pub center: f64,
    pub height: f64,
    /// ‖f*‖ for Hardy, the Bergman norm otherwise.
    pub normalizer: f64,
    pub divergent: bool,
    pub c_exact: f64,
    pub c_grid: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakConstant {
    pub family_max: f64,
    pub family_max_exact: f64,
    pub members: Vec<WeakMember>,
    pub verdict: Verdict,
    pub trend: EdgeTrend,
    pub lambda_grid: LogGrid,
}

fn family_trend(centers_heights: &[(f64, f64)], vals: &[f64], cfg: &EmbeddingConfig) -> EdgeTrend {
    let mut hs: Vec<f64> = centers_heights.iter().map(|p| p.1).collect();
    hs.sort_by(f64::total_cmp);
    hs.dedup();
    let per: Vec<f64> = hs
        .iter()
        .map(|&h| centers_heights.iter().zip(vals).filter(|(p, _)| p.1 == h).map(|(_, v)| *v).fold(0.0, f64::max))
        .collect();
    edge_trend(&hs, &per, cfg.trend_window)
}

fn family_verdict(divergent: bool, missing: bool, trend: &EdgeTrend, tol: f64) -> Verdict {
    if divergent {
        Verdict::Divergent
    } else if missing || trend.max() > tol {
        Verdict::Unbounded
    } else {
        Verdict::Finite
    }
}

/// Embedding constants and, when asked, weak-type constants on one shared frozen rule per member.
fn evaluate_family(
    mu: &Measure,
    phi1: &GrowthFunction,
    phi2: &GrowthFunction,
    mode: &Mode,
    family: &[TestFunction],
    cfg: &EquivalenceConfig,
    weak: bool,
) -> Result<(EmbeddingConstant, Option<WeakConstant>), CarlesonError> {
    mode.validate()?;
    let ec = &cfg.embedding;
    let kg = ec.k_grid.values();
    let lambdas = ec.lambda_grid.values();
    type MemberOut = (EmbeddingMember, Option<WeakMember>);
    let run = |f: &TestFunction| -> Result<MemberOut, CarlesonError> {
        let (center, height) = anchor(f);
        let spec = local_spec(&cfg.spec, height);
        let norm = source_norm(f, phi1, mode, ec, &cfg.spec)?;
        let p = f.prepare();
        let hint = f.plane_hint();
        let scaled = |x: f64, y: f64| if norm > 0.0 { phi2.at(p.abs(x, y) / norm) } else { 0.0 };
        let check = mu.integrate(scaled, &hint, &spec, &cfg.divergence)?;
        let divergent = check.divergent || !norm.is_finite();
        let frozen = if divergent || norm == 0.0 {
            None
        } else {
            let r = mu.rule(scaled, &hint, &spec)?;
            let v = (0..r.len()).map(|i| p.abs(r.x[i], r.y[i])).collect();
            Some(Frozen { w: r.w, v })
        };
        let (k_exact, k_grid) = match &frozen {
            None if divergent => (f64::INFINITY, None),
            None => (0.0, kg.first().copied()),
            Some(fr) => {
                let m = |k: f64| fr.modular(phi2, k * norm);
                (smallest_passing(m, ec.lux_tol), grid_threshold(&kg, |k| m(k) <= 1.0))
            }
        };
        let member = EmbeddingMember { function: f.clone(), center, height, norm, divergent, k_exact, k_grid };
        if !weak {
            return Ok((member, None));
        }
        let normalizer = match mode {
            Mode::Hardy => nontangential_luxembourg(f, phi1, &ec.cone, &cfg.spec, ec.lux_tol)?,
            _ => norm,
        };
        let (c_exact, c_grid) = match &frozen {
            None if divergent => (f64::INFINITY, None),
            None => (0.0, kg.first().copied()),
            Some(fr) => {
                let tail = fr.tail();
                let m = |c: f64| weak_sup(&tail, phi2, &lambdas, c * normalizer);
                (smallest_passing(m, ec.lux_tol), grid_threshold(&kg, |c| m(c) <= 1.0))
            }
        };
        Ok((member, Some(WeakMember { center, height, normalizer, divergent, c_exact, c_grid })))
    };
    let outs: Result<Vec<MemberOut>, CarlesonError> = family.par_iter().map(run).collect();
    let (members, weak_members): (Vec<EmbeddingMember>, Vec<Option<WeakMember>>) = outs?.into_iter().unzip();
    let anchors: Vec<(f64, f64)> = members.iter().map(|m| (m.center, m.height)).collect();
    let exact: Vec<f64> = members.iter().map(|m| m.k_exact).collect();
    let trend = family_trend(&anchors, &exact, ec);
    let any_div = members.iter().any(|m| m.divergent);
    let missing = members.iter().any(|m| m.k_grid.is_none() || !m.k_exact.is_finite());
    let embedding = EmbeddingConstant {
        family_max: members.iter().map(|m| m.k_grid.unwrap_or(f64::INFINITY)).fold(0.0, f64::max),
        family_max_exact: exact.iter().copied().fold(0.0, f64::max),
        verdict: family_verdict(any_div, missing, &trend, ec.trend_tol),
        members,
        trend,
        k_grid: ec.k_grid.clone(),
    };
    let weak = if weak {
        let wm: Vec<WeakMember> = weak_members.into_iter().flatten().collect();
        let exact: Vec<f64> = wm.iter().map(|m| m.c_exact).collect();
        let trend = family_trend(&anchors, &exact, ec);
        let missing = wm.iter().any(|m| m.c_grid.is_none() || !m.c_exact.is_finite());
        Some(WeakConstant {
            family_max: wm.iter().map(|m| m.c_grid.unwrap_or(f64::INFINITY)).fold(0.0, f64::max),
            family_max_exact: exact.iter().copied().fold(0.0, f64::max),
            verdict: family_verdict(wm.iter().any(|m| m.divergent), missing, &trend, ec.trend_tol),
            members: wm,
            trend,
            lambda_grid: ec.lambda_grid.clone(),
        })
    } else {
        None
    };
    Ok((embedding, weak))
}

/// Smallest grid K with ∫ Φ₂(|f|/(K‖f‖)) dμ ≤ 1 for each member of the family.
pub fn embedding_constant(
    mu: &Measure,
    phi1: &GrowthFunction,
    phi2: &GrowthFunction,
    mode: &Mode,
    family: &[TestFunction],
    cfg: &EquivalenceConfig,
) -> Result<EmbeddingConstant, CarlesonError> {
    Ok(evaluate_family(mu, phi1, phi2, mode, family, cfg, false)?.0)
}

/// Smallest grid C with sup_λ Φ₂(λ)·μ(|f| > Cλ‖f‖) ≤ 1 over the λ-grid, where the norm is
/// ‖f*‖ in Hardy mode and the Bergman norm otherwise.
pub fn weak_type_constant(
    mu: &Measure,
    phi1: &GrowthFunction,
    phi2: &GrowthFunction,
    mode: &Mode,
    family: &[TestFunction],
    cfg: &EquivalenceConfig,
) -> Result<WeakConstant, CarlesonError> {
    let (_, w) = evaluate_family(mu, phi1, phi2, mode, family, cfg, true)?;
    w.ok_or_else(|| CarlesonError::Invalid("weak search produced no members".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypotheses {
    pub phi1_convex: bool,
    pub phi2_convex: bool,
    pub phi1_nabla2: bool,
    pub phi2_in_u: bool,
    /// Φ₂/Φ₁ nondecreasing on the grid.
    pub ratio_nondecreasing: bool,
    /// Box and kernel verdicts must agree.
    pub kernel_applies: bool,
    /// Box and embedding verdicts must agree.
    pub embedding_applies: bool,
}

pub fn check_hypotheses(phi1: &GrowthFunction, phi2: &GrowthFunction, mode: &Mode, opts: &ClassifyOptions) -> Hypotheses {
    let c1 = classify(phi1, opts);
    let c2 = classify(phi2, opts);
    let ratio = quotient_monotonicity(|t| phi2.at(t) / phi1.at(t), &opts.grid, 1e-9).nondecreasing;
    let base = c1.convex && c2.convex && c2.in_u;
    let raw = matches!(mode, Mode::Raw { .. });
    let kernel_applies = base && (raw || ratio);
    Hypotheses {
        phi1_convex: c1.convex,
        phi2_convex: c2.convex,
        phi1_nabla2: c1.nabla2.passes(),
        phi2_in_u: c2.in_u,
        ratio_nondecreasing: ratio,
        kernel_applies,
        embedding_applies: kernel_applies && !raw && c1.nabla2.passes(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub box_test: Verdict,
    pub kernel: Verdict,
    pub embedding: Option<Verdict>,
    pub weak: Option<Verdict>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Carleson,
    NotCarleson,
    /// Verdicts that must agree do not.
    Incoherent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub phi1: GrowthFunction,
    pub phi2: GrowthFunction,
    /// Φ₂∘Φ₁⁻¹, the box-test function.
    pub target: GrowthFunction,
    pub mode: Mode,
    pub s: f64,
    pub measure: Measure,
    pub box_constant: BoxConstant,
    pub kernel_constant: KernelConstant,
    pub embedding_constant: Option<EmbeddingConstant>,
    pub weak_constant: Option<WeakConstant>,
    pub verdicts: Verdicts,
    pub hypotheses: Hypotheses,
    pub coherent: bool,
    pub classification: Classification,
    /// kernel constant / box constant when both are finite.
    pub kernel_box_ratio: Option<f64>,
    pub warnings: Vec<String>,
    pub config: EquivalenceConfig,
}

/// Runs the box, kernel and embedding conditions (plus weak type) and compares their verdicts.
pub fn verify_equivalence(
    mu: &Measure,
    phi1: &GrowthFunction,
    phi2: &GrowthFunction,
    mode: &Mode,
    cfg: &EquivalenceConfig,
) -> Result<EquivalenceReport, CarlesonError> {
    mode.validate()?;
    mu.validate()?;
    let s = mode.s();
    let (target, _) = derived_functions(phi1, phi2);
    let box_constant = carleson_box_constant(mu, &target, s, &cfg.family, &cfg.spec, &cfg.divergence)?;
    let kernel = kernel_constant(mu, phi1, phi2, s, &cfg.family, &cfg.spec, &cfg.divergence)?;
    let hypotheses = check_hypotheses(phi1, phi2, mode, &cfg.classify);
    let mut warnings = Vec::new();
    let (embedding, weak) = if matches!(mode, Mode::Raw { .. }) {
        (None, None)
    } else {
        let mut ec = cfg.clone();
        if !mu.translation_invariant() {
            if let Some(b) = box_constant.witness.filter(|_| box_constant.constant.is_finite()) {
                if !ec.embedding.centers.contains(&b.center_x) {
                    ec.embedding.centers.push(b.center_x);
                }
            }
        }
        if let Some(atoms) = mu.atoms().filter(|a| !a.is_empty()) {
            extend_heights(&mut ec.embedding.heights, &atoms);
        }
        let family = embedding_family(mode, phi1, &ec.embedding)?;
        let (e, w) = evaluate_family(mu, phi1, phi2, mode, &family, &ec, cfg.weak)?;
        (Some(e), w)
    };
    if !matches!(mode, Mode::Raw { .. }) && !hypotheses.phi1_nabla2 {
        warnings.push(format!("{phi1} fails the nabla_2 check; the embedding verdict is reported but not required to agree"));
    }
    if !hypotheses.kernel_applies {
        warnings.push("growth-function checks fail; the kernel verdict is reported but not required to agree".into());
    }
    let verdicts = Verdicts {
        box_test: box_constant.verdict,
        kernel: kernel.verdict,
        embedding: embedding.as_ref().map(|e| e.verdict),
        weak: weak.as_ref().map(|w| w.verdict),
    };
    let fin_box = verdicts.box_test.is_finite();
    let kernel_ok = !hypotheses.kernel_applies || verdicts.kernel.is_finite() == fin_box;
    let embed_ok = !hypotheses.embedding_applies || verdicts.embedding.is_none_or(|v| v.is_finite() == fin_box);
    let coherent = kernel_ok && embed_ok;
    let mut all = vec![verdicts.box_test, verdicts.kernel];
    all.extend(verdicts.embedding);
    if all.iter().any(|v| v.is_finite() != fin_box) && coherent {
        warnings.push("verdicts differ where the hypotheses do not force agreement".into());
    }
    let classification = if !coherent {
        Classification::Incoherent
    } else if !fin_box || all.contains(&Verdict::Divergent) {
        Classification::NotCarleson
    } else {
        Classification::Carleson
    };
    let kernel_box_ratio = (fin_box && kernel.verdict.is_finite() && box_constant.constant > 0.0)
        .then(|| kernel.constant / box_constant.constant);
    Ok(EquivalenceReport {
        phi1: phi1.clone(),
        phi2: phi2.clone(),
        target,
        mode: *mode,
        s,
        measure: mu.clone(),
        box_constant,
        kernel_constant: kernel,
        embedding_constant: embedding,
        weak_constant: weak,
        verdicts,
        hypotheses,
        coherent,
        classification,
        kernel_box_ratio,
        warnings,
        config: cfg.clone(),
    })
}

/// Φ̃(t) = 1/Φ(1/t), with Φ̃(0) = 0.
pub fn phi_tilde(phi: &GrowthFunction, t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        1.0 / phi.at(1.0 / t)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSetRow {
    pub lambda: f64,
    /// μ of the super-level set.
    pub measure_side: f64,
    /// Lebesgue (or V_α) size of the comparison level set.
    pub level_set_size: f64,
    /// Φ̃(level_set_size)
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSetReport {
    pub rows: Vec<LevelSetRow>,
    pub max_ratio: f64,
    /// Box test of μ against Φ; the comparison is only expected to hold when finite.
    pub box_verdict: Verdict,
    pub box_constant: f64,
    pub divergent: bool,
}

impl LevelSetReport {
    fn from_rows(rows: Vec<LevelSetRow>, b: &BoxConstant, divergent: bool) -> Self {
        let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
        LevelSetReport { rows, max_ratio, box_verdict: b.verdict, box_constant: b.constant, divergent }
    }
}

fn row(lambda: f64, measure_side: f64, size: f64, phi: &GrowthFunction) -> LevelSetRow {
    let rhs = phi_tilde(phi, size);
    let ratio = if measure_side == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        measure_side / rhs
    };
    LevelSetRow { lambda, measure_side, level_set_size: size, rhs, ratio }
}

/// Pixel window for the μ-side of the Hardy comparison and the x-samples of f*.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PixelWindow {
    pub x0: f64,
    pub x1: f64,
    pub height: f64,
    pub pixels: usize,
    pub cone: ConeSampling,
}

impl Default for PixelWindow {
    fn default() -> Self {
        PixelWindow {
            x0: -8.0,
            x1: 8.0,
            height: 8.0,
            pixels: 1024,
            cone: ConeSampling { y_min: 1e-3, y_max: 1e3, per_decade: 16, aperture_points: 17 },
        }
    }
}

/// μ({|f| > λ}) against Φ̃(|{f* > λ}|) for each λ.
pub fn levelset_hardy(
    mu: &Measure,
    phi: &GrowthFunction,
    f: &TestFunction,
    lambdas: &[f64],
    win: &PixelWindow,
    spec: &QuadratureSpec,
    rule: &DivergenceRule,
) -> Result<LevelSetReport, CarlesonError> {
    f.validate()?;
    let n = win.pixels;
    if n == 0 || !(win.x1 > win.x0 && win.height > 0.0) {
        return Err(CarlesonError::Invalid("pixel window must be nonempty".into()));
    }
    let b = carleson_box_constant(mu, phi, 1.0, &BoxFamily::default(), spec, rule)?;
    let p = f.prepare();
    let dx = (win.x1 - win.x0) / n as f64;
    let xs: Vec<f64> = (0..n).map(|i| win.x0 + (i as f64 + 0.5) * dx).collect();
    let star: Vec<f64> = xs.par_iter().map(|&x| nontangential_maximal(|t, y| p.abs(t, y), x, &win.cone)).collect();
    let mut divergent = false;
    // (|f| at the node, mass carried by the node)
    let nodes: Vec<(f64, f64)> = match mu.atoms() {
        Some(atoms) => atoms.iter().map(|a| (p.abs(a.x, a.y), a.mass)).collect(),
        None => {
            let dy = win.height / n as f64;
            let mut out = Vec::with_capacity(n * n);
            if mu.translation_invariant() {
                let mut below = 0.0;
                for k in 0..n {
                    let m = mu.strip_mass(0.0, dx, (k + 1) as f64 * dy, spec, rule)?;
                    divergent |= m.divergent;
                    let row_mass = m.value - below;
                    below = m.value;
                    let y = (k as f64 + 0.5) * dy;
                    out.extend(xs.iter().map(|&x| (p.abs(x, y), row_mass)));
                }
            } else {
                for (i, &x) in xs.iter().enumerate() {
                    let a = win.x0 + i as f64 * dx;
                    let mut below = 0.0;
                    for k in 0..n {
                        let m = mu.strip_mass(a, a + dx, (k + 1) as f64 * dy, spec, rule)?;
                        divergent |= m.divergent;
                        out.push((p.abs(x, (k as f64 + 0.5) * dy), m.value - below));
                        below = m.value;
                    }
                }
            }
            out
        }
    };
    let rows = lambdas
        .iter()
        .map(|&l| {
            let lhs: f64 = nodes.iter().filter(|(v, _)| *v > l).map(|(_, m)| m).sum();
            let size = dx * star.iter().filter(|&&v| v > l).count() as f64;
            row(l, lhs, size, phi)
        })
        .collect();
    Ok(LevelSetReport::from_rows(rows, &b, divergent))
}

/// μ({𝓜^d_α f > λ}) against Φ̃(|{𝓜^d_α f > λ}|_α) on one dyadic grid.
#[allow(clippy::too_many_arguments)]
pub fn levelset_bergman(
    mu: &Measure,
    phi: &GrowthFunction,
    f: &SampledFunction2D,
    alpha: f64,
    lambdas: &[f64],
    grid: &DyadicGrid,
    spec: &QuadratureSpec,
    rule: &DivergenceRule,
) -> Result<LevelSetReport, CarlesonError> {
    if !(alpha > -1.0) {
        return Err(CarlesonError::Invalid(format!("alpha must exceed -1, got {alpha}")));
    }
    let b = carleson_box_constant(mu, phi, 2.0 + alpha, &BoxFamily::default(), spec, rule)?;
    let mut divergent = false;
    let mut rows = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let mut lhs = 0.0;
        let mut size = 0.0;
        for (a, c) in level_sets(f, alpha, l, grid) {
            let m = mu.box_mass(&CarlesonBox::from_left(a, c - a)?, spec, rule)?;
            divergent |= m.divergent;
            lhs += m.value;
            size += (c - a).powf(2.0 + alpha) / (1.0 + alpha);
        }
        rows.push(row(l, lhs, size, phi));
    }
    Ok(LevelSetReport::from_rows(rows, &b, divergent))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseGroup {
    PowerPair,
    AtomicCloud,
    SpecialMeasure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteCase {
    pub name: String,
    pub group: CaseGroup,
    pub measure: Measure,
    pub phi1: GrowthFunction,
    pub phi2: GrowthFunction,
    pub mode: Mode,
}

/// Seeded atoms with x in [-3, 3], log-uniform heights in [0.01, 3] and masses in [0.05, 2].
pub fn atomic_cloud(seed: u64) -> Measure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(5..=25);
    let atoms = (0..n)
        .map(|_| Atom {
            x: rng.gen_range(-3.0..3.0),
            y: 10f64.powf(rng.gen_range(-2.0..0.5)),
            mass: rng.gen_range(0.05..2.0),
        })
        .collect();
    Measure::Atomic { atoms }
}

fn mode_for_s(s: u32) -> Mode {
    if s == 1 {
        Mode::Hardy
    } else {
        Mode::Bergman { alpha: s as f64 - 2.0 }
    }
}

/// Power pairs crossing the scaling threshold, seeded atomic clouds and the two special measures.
pub fn curated_suite(seed: u64) -> Result<Vec<SuiteCase>, CarlesonError> {
    let pw = |p: f64| GrowthFunction::power(p);
    let mut cases = Vec::new();
    for p in [1u32, 2] {
        for q in [2u32, 3, 4] {
            for s in [1u32, 2, 3] {
                for alpha in [0u32, 1] {
                    cases.push(SuiteCase {
                        name: format!("power p={p} q={q} s={s} dV_{alpha}"),
                        group: CaseGroup::PowerPair,
                        measure: Measure::weighted_volume(alpha as f64)?,
                        phi1: pw(p as f64)?,
                        phi2: pw(q as f64)?,
                        mode: mode_for_s(s),
                    });
                }
            }
        }
    }
    for k in 0..10u64 {
        let q = [2.0, 3.0, 4.0][k as usize % 3];
        let s = [1, 2, 3][(k as usize / 3) % 3];
        cases.push(SuiteCase {
            name: format!("atoms seed={} q={q} s={s}", seed + k),
            group: CaseGroup::AtomicCloud,
            measure: atomic_cloud(seed + k),
            phi1: pw(2.0)?,
            phi2: pw(q)?,
            mode: mode_for_s(s),
        });
    }
    let phi1 = pw(2.0)?;
    for (label, phi2) in [("log", GrowthFunction::power_log(2.0, 1.0, 2f64.exp())?), ("quartic", pw(4.0)?)] {
        let m = special_measure(&phi1, &phi2, &Mode::Hardy)?;
        cases.push(SuiteCase {
            name: format!("special measure {label}"),
            group: CaseGroup::SpecialMeasure,
            measure: m.measure,
            phi1: phi1.clone(),
            phi2,
            mode: Mode::Hardy,
        });
    }
    Ok(cases)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub group: CaseGroup,
    pub report: Result<EquivalenceReport, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub outcomes: Vec<SuiteOutcome>,
    /// Cases where some pair of verdicts is required to agree.
    pub required: usize,
    pub coherent: usize,
    pub incoherent: Vec<String>,
    pub errors: Vec<String>,
    /// max(r, 1/r) of kernel/box ratios over finite power-pair cases.
    pub ratio_bracket: Option<f64>,
    pub ratio_bound: f64,
}

impl SuiteReport {
    pub fn passes(&self) -> bool {
        self.incoherent.is_empty() && self.errors.is_empty() && self.ratio_bracket.is_none_or(|r| r <= self.ratio_bound)
    }
}

pub const RATIO_BOUND: f64 = 1e3;

pub fn run_suite(cases: &[SuiteCase], cfg: &EquivalenceConfig) -> SuiteReport {
    let outcomes: Vec<SuiteOutcome> = cases
        .iter()
        .map(|c| SuiteOutcome {
            name: c.name.clone(),
            group: c.group,
            report: verify_equivalence(&c.measure, &c.phi1, &c.phi2, &c.mode, cfg).map_err(|e| e.to_string()),
        })
        .collect();
    let mut required = 0;
    let mut coherent = 0;
    let mut incoherent = Vec::new();
    let mut errors = Vec::new();
    let mut bracket: Option<f64> = None;
    for o in &outcomes {
        match &o.report {
            Err(e) => errors.push(format!("{}: {e}", o.name)),
            Ok(r) => {
                if r.hypotheses.kernel_applies {
                    required += 1;
                    if r.coherent {
                        coherent += 1;
                    }
                }
                if !r.coherent {
                    incoherent.push(o.name.clone());
                }
                if o.group == CaseGroup::PowerPair {
                    if let Some(k) = r.kernel_box_ratio {
                        let b = k.max(1.0 / k);
                        bracket = Some(bracket.map_or(b, |x| x.max(b)));
                    }
                }
            }
        }
    }
    SuiteReport { outcomes, required, coherent, incoherent, errors, ratio_bracket: bracket, ratio_bound: RATIO_BOUND }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{beta, halfplane_kernel_oracle, line_kernel_oracle};
    use approx::assert_relative_eq;

    fn pw(p: f64) -> GrowthFunction {
        GrowthFunction::power(p).unwrap()
    }

    fn atom(x: f64, y: f64, mass: f64) -> Atom {
        Atom { x, y, mass }
    }

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn single_atom_kernel_value() {
        let mu = Measure::atomic(vec![atom(0.0, 1.0, 1.0)]).unwrap();
        let v = kernel_value(&mu, &pw(1.0), &pw(1.0), 1.0, (0.0, 1.0), &spec(), &DivergenceRule::default()).unwrap();
        assert_eq!(v.value, 0.25);
    }

    #[test]
    fn zero_measure_kernel_is_zero() {
        let k = kernel_constant(&Measure::zero(), &pw(1.0), &pw(2.0), 1.0, &BoxFamily::default(), &spec(), &DivergenceRule::default())
            .unwrap();
        assert_eq!(k.constant, 0.0);
        assert_eq!(k.verdict, Verdict::Finite);
    }

    #[test]
    fn lebesgue_kernel_matches_oracle_chain() {
        // ∫∫ y⁴/((x-u)² + (y+v)²)² du dv = y⁴ ∫ J_4(y + v) dv with J_4(t) = B(1/2, 3/2) t^{-3}
        let mu = Measure::weighted_volume(0.0).unwrap();
        let got = kernel_value(&mu, &pw(1.0), &pw(1.0), 2.0, (0.0, 1.0), &spec(), &DivergenceRule::default()).unwrap();
        // ∫ du/(u² + t²)² = J_4(t), then ∫₀^∞ (1+v)^{-3} dv = B(1, 2)
        let oracle = line_kernel_oracle(4.0, 1.0).unwrap() * halfplane_kernel_oracle(0.0, 3.0, 1.0).unwrap();
        assert_relative_eq!(got.value, oracle, max_relative = 1e-4);
        assert_relative_eq!(oracle, beta(0.5, 1.5).unwrap() / 2.0, max_relative = 1e-12);
        assert!(!got.divergent);
    }

    #[test]
    fn annulus_sums_reproduce_kernel_sum() {
        let atoms: Vec<Atom> = (0..40).map(|i| atom((i as f64 * 0.77).sin() * 30.0, 0.01 + (i % 7) as f64, 1.0 + i as f64 * 0.1)).collect();
        let d = annulus_decomposition(&atoms, &pw(2.0), &pw(3.0), 1.0, (0.3, 0.5)).unwrap();
        assert!((d.total - d.direct).abs() <= 1e-12 * d.direct);
        assert_relative_eq!(d.terms.iter().map(|t| t.mass).sum::<f64>(), atoms.iter().map(|a| a.mass).sum::<f64>(), max_relative = 1e-12);
        for t in &d.terms {
            assert!(t.kernel_sum <= t.bound * (1.0 + 1e-12), "{t:?}");
        }
    }

    #[test]
    fn single_atom_embedding_and_weak() {
        let mu = Measure::atomic(vec![atom(0.0, 1.0, 1.0)]).unwrap();
        let phi = pw(2.0);
        let cfg = EquivalenceConfig::default();
        let f = TestFunction::hardy_kernel((0.0, 1.0), phi.clone()).unwrap();
        let fam = [f.clone()];
        let e = embedding_constant(&mu, &phi, &phi, &Mode::Hardy, &fam, &cfg).unwrap();
        let m = &e.members[0];
        // Φ₂(|f(i)|/(K N)) = 1 at the exact threshold
        let v = f.abs(0.0, 1.0);
        assert_relative_eq!(m.k_exact, v / m.norm, max_relative = 1e-10);
        let kg = cfg.embedding.k_grid.values();
        let i = kg.iter().position(|&k| k >= m.k_exact).unwrap();
        assert_eq!(m.k_grid, Some(kg[i]));

        let w = weak_type_constant(&mu, &phi, &phi, &Mode::Hardy, &fam, &cfg).unwrap();
        let wm = &w.members[0];
        // sup_λ Φ(λ)·[v > CλN*] ≤ 1 ⇔ C ≥ v/N* up to the λ-grid
        let closed = v / wm.normalizer;
        let step = cfg.embedding.k_grid.values()[1] / cfg.embedding.k_grid.values()[0];
        let g = wm.c_grid.unwrap();
        assert!(g >= closed / step && g <= closed * step, "{g} vs {closed}");
        assert!(wm.normalizer >= m.norm);
        assert!(wm.c_exact <= m.k_exact * (1.0 + 1e-6));
    }

    #[test]
    fn zero_measure_embedding_is_smallest_grid_value() {
        let phi = pw(2.0);
        let cfg = EquivalenceConfig::default();
        let fam = embedding_family(&Mode::Hardy, &phi, &EmbeddingConfig { heights: vec![1.0], ..EmbeddingConfig::default() }).unwrap();
        let e = embedding_constant(&Measure::zero(), &phi, &phi, &Mode::Hardy, &fam, &cfg).unwrap();
        assert_eq!(e.family_max, 1e-4);
        let w = weak_type_constant(&Measure::zero(), &phi, &phi, &Mode::Hardy, &fam, &cfg).unwrap();
        assert_eq!(w.family_max, 1e-4);
    }

    #[test]
    fn bergman_level_set_box_arithmetic() {
        let alpha = 1.0;
        let f = SampledFunction2D::box_indicator(0.0, 1.0, 4.0, -2.0, 1.0 / 16.0, 1.0 / 16.0, 64, 32).unwrap();
        let mu = Measure::atomic(vec![atom(0.5, 0.5, 0.3)]).unwrap();
        let phi = pw(3.0);
        let grid = DyadicGrid::standard(-4, 2);
        let r = levelset_bergman(&mu, &phi, &f, alpha, &[1.0], &grid, &spec(), &DivergenceRule::default()).unwrap();
        let row = &r.rows[0];
        assert_eq!(row.measure_side, 0.3);
        assert_relative_eq!(row.level_set_size, 0.5, max_relative = 1e-12);
        // Φ̃(1/2) = 1/Φ(2) = 1/8
        assert_relative_eq!(row.rhs, 0.125, max_relative = 1e-12);
        assert_relative_eq!(row.ratio, 2.4, max_relative = 1e-12);
    }

    #[test]
    fn hardy_level_set_counts_atoms_in_box() {
        use crate::maximal::SampledFunction1D;
        let l0 = 0.5;
        let g = SampledFunction1D::indicator(0.0, 1.0, 4.0 * l0, -1.0, 2.0, 1.0 / 64.0).unwrap();
        let f = TestFunction::PoissonOfStep { g };
        let mu = Measure::atomic(vec![atom(0.2, 0.3, 1.0), atom(0.7, 0.9, 2.0), atom(0.5, 0.05, 0.5)]).unwrap();
        let phi = pw(2.0);
        let win = PixelWindow { pixels: 256, ..PixelWindow::default() };
        let r = levelset_hardy(&mu, &phi, &f, &[l0], &win, &spec(), &DivergenceRule::default()).unwrap();
        let row = &r.rows[0];
        assert_eq!(row.measure_side, 3.5);
        assert!(row.level_set_size >= 1.0 - 2.0 * 16.0 / 256.0);
        assert!(row.ratio.is_finite());
        let empty = levelset_hardy(&mu, &phi, &f, &[10.0], &win, &spec(), &DivergenceRule::default()).unwrap();
        assert_eq!(empty.rows[0].measure_side, 0.0);
        assert_eq!(empty.rows[0].ratio, 0.0);
    }
}
