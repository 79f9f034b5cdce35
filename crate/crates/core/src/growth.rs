//! Growth functions: evaluation, inversion, conjugation, indices and classification.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::literal::{Cursor, ParseError};
use crate::numerics::{integrate_interval, QuadratureSpec};
use crate::scan::{argmax, edge_trend, LogGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrowthError {
    #[error("invalid growth function: {0}")]
    Invalid(String),
    #[error("argument {t} outside the tabulated span [0, {end}]")]
    OutOfRange { t: f64, end: f64 },
    #[error("negative argument {0}")]
    Negative(f64),
    #[error("cannot bracket a preimage of {0}")]
    Bracketing(f64),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

#[derive(Clone, Debug, PartialEq)]
pub enum GrowthKind {
    Power { p: f64 },
    /// t^q ln^a(c + t)
    PowerLog { q: f64, a: f64, c: f64 },
    /// outer ∘ inner⁻¹
    ComposedInverse { outer: Arc<GrowthFunction>, inner: Arc<GrowthFunction> },
    /// t ↦ 1 / base(1/t)
    ReciprocalReflected { base: Arc<GrowthFunction> },
    /// Piecewise linear through increasing knots starting at (0, 0).
    Tabulated { knots: Vec<(f64, f64)> },
    /// coef · base
    Scaled { coef: f64, base: Arc<GrowthFunction> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthFunction {
    kind: GrowthKind,
}

impl Serialize for GrowthFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for GrowthFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

const INVERSE_TOL: f64 = 1e-14;

impl GrowthFunction {
    pub fn power(p: f64) -> Result<Self, GrowthError> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(GrowthError::Invalid(format!("power exponent must be positive, got {p}")));
        }
        Ok(GrowthFunction { kind: GrowthKind::Power { p } })
    }

    /// t^q ln^a(c+t); requires q ≥ 1, a > 0, c > 1 and Φ(t)/t nondecreasing on a scan grid.
    pub fn power_log(q: f64, a: f64, c: f64) -> Result<Self, GrowthError> {
        if !(q >= 1.0 && a > 0.0 && c > 1.0 && q.is_finite() && a.is_finite() && c.is_finite()) {
            return Err(GrowthError::Invalid(format!("powerlog needs q >= 1, a > 0, c > 1, got ({q}, {a}, {c})")));
        }
        let f = GrowthFunction { kind: GrowthKind::PowerLog { q, a, c } };
        let scan = LogGrid::new(1e-8, 1e8, 801);
        if let Some(t) = f.first_ratio_drop(&scan) {
            return Err(GrowthError::Invalid(format!(
                "powerlog({q},{a},{c}): Φ(t)/t decreases near t = {t:.3e}; increase c"
            )));
        }
        Ok(f)
    }

    pub fn composed_inverse(outer: GrowthFunction, inner: GrowthFunction) -> Self {
        GrowthFunction { kind: GrowthKind::ComposedInverse { outer: Arc::new(outer), inner: Arc::new(inner) } }
    }

    pub fn reciprocal_reflected(base: GrowthFunction) -> Self {
        GrowthFunction { kind: GrowthKind::ReciprocalReflected { base: Arc::new(base) } }
    }

    pub fn scaled(coef: f64, base: GrowthFunction) -> Result<Self, GrowthError> {
        if !(coef > 0.0 && coef.is_finite()) {
            return Err(GrowthError::Invalid(format!("scale factor must be positive, got {coef}")));
        }
        Ok(GrowthFunction { kind: GrowthKind::Scaled { coef, base: Arc::new(base) } })
    }

    pub fn tabulated(mut knots: Vec<(f64, f64)>) -> Result<Self, GrowthError> {
        if knots.first().map(|k| k.0) != Some(0.0) {
            knots.insert(0, (0.0, 0.0));
        }
        if knots[0].1 != 0.0 {
            return Err(GrowthError::Invalid("tabulated value at 0 must be 0".into()));
        }
        if knots.len() < 2 {
            return Err(GrowthError::Invalid("tabulated kind needs at least one positive knot".into()));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) || w[1].1 < w[0].1 || !w[1].1.is_finite() {
                return Err(GrowthError::Invalid("knots must have increasing t and nondecreasing values".into()));
            }
        }
        Ok(GrowthFunction { kind: GrowthKind::Tabulated { knots } })
    }

    pub fn kind(&self) -> &GrowthKind {
        &self.kind
    }

    /// Exponent when the function is a pure power.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.kind {
            GrowthKind::Power { p } => Some(p),
            _ => None,
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64, GrowthError> {
        if t.is_nan() || t < 0.0 {
            return Err(GrowthError::Negative(t));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        Ok(match &self.kind {
            GrowthKind::Power { p } => t.powf(*p),
            GrowthKind::PowerLog { q, a, c } => t.powf(*q) * (c + t).ln().powf(*a),
            GrowthKind::ComposedInverse { outer, inner } => outer.eval(inner.inverse(t, INVERSE_TOL)?)?,
            GrowthKind::ReciprocalReflected { base } => {
                let b = base.eval(1.0 / t)?;
                if b == 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / b
                }
            }
            GrowthKind::Tabulated { knots } => {
                let end = knots.last().unwrap().0;
                if t > end {
                    return Err(GrowthError::OutOfRange { t, end });
                }
                let i = knots.partition_point(|k| k.0 < t).max(1);
                let (t0, v0) = knots[i - 1];
                let (t1, v1) = knots[i];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
            GrowthKind::Scaled { coef, base } => coef * base.eval(t)?,
        })
    }

    /// Φ(t), or NaN when evaluation fails.
    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        self.eval(t).unwrap_or(f64::NAN)
    }

    /// Φ⁻¹(y) to relative tolerance `tol` (closed form where available).
    pub fn inverse(&self, y: f64, tol: f64) -> Result<f64, GrowthError> {
        if y.is_nan() || y < 0.0 {
            return Err(GrowthError::Negative(y));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        match &self.kind {
            GrowthKind::Power { p } => Ok(y.powf(1.0 / p)),
            GrowthKind::ComposedInverse { outer, inner } => inner.eval(outer.inverse(y, tol)?),
            GrowthKind::ReciprocalReflected { base } => {
                let b = base.inverse(1.0 / y, tol)?;
                Ok(if b == 0.0 { f64::INFINITY } else { 1.0 / b })
            }
            GrowthKind::Scaled { coef, base } => base.inverse(y / coef, tol),
            GrowthKind::Tabulated { knots } => {
                let last = knots.last().unwrap();
                if y > last.1 {
                    return Err(GrowthError::Bracketing(y));
                }
                let i = knots.partition_point(|k| k.1 < y).max(1);
                let (t0, v0) = knots[i - 1];
                let (t1, v1) = knots[i];
                Ok(if v1 == v0 { t0 } else { t0 + (t1 - t0) * (y - v0) / (v1 - v0) })
            }
            GrowthKind::PowerLog { .. } => self.bisect_inverse(y, tol),
        }
    }

    /// Φ⁻¹(y), or NaN when inversion fails.
    #[inline]
    pub fn inv(&self, y: f64) -> f64 {
        self.inverse(y, INVERSE_TOL).unwrap_or(f64::NAN)
    }

    fn bisect_inverse(&self, y: f64, tol: f64) -> Result<f64, GrowthError> {
        let f = |t: f64| self.at(t);
        let (mut lo, mut hi) = (0.5, 1.0);
        if f(hi) < y {
            while f(hi) < y {
                lo = hi;
                hi *= 2.0;
                if !hi.is_finite() || hi > 1e300 {
                    return Err(GrowthError::Bracketing(y));
                }
            }
        } else {
            while f(lo) >= y {
                hi = lo;
                lo *= 0.5;
                if lo < 1e-300 {
                    return Err(GrowthError::Bracketing(y));
                }
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if !(mid > lo && mid < hi) {
                break;
            }
            let v = f(mid);
            if (v - y).abs() <= tol * y {
                return Ok(mid);
            }
            if v < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    fn first_ratio_drop(&self, grid: &LogGrid) -> Option<f64> {
        let ts = grid.values();
        let r: Vec<f64> = ts.iter().map(|&t| self.at(t) / t).collect();
        r.windows(2).position(|w| w[1] < w[0] * (1.0 - 1e-12)).map(|i| ts[i + 1])
    }
}

impl fmt::Display for GrowthFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            GrowthKind::Power { p } => write!(f, "power({p})"),
            GrowthKind::PowerLog { q, a, c } => write!(f, "powerlog({q},{a},{c})"),
            GrowthKind::ComposedInverse { outer, inner } => write!(f, "compose_inv({outer},{inner})"),
            GrowthKind::ReciprocalReflected { base } => write!(f, "recip_reflect({base})"),
            GrowthKind::Scaled { coef, base } => write!(f, "scale({coef},{base})"),
            GrowthKind::Tabulated { knots } => {
                write!(f, "table(")?;
                for (i, (t, v)) in knots.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "[{t},{v}]")?;
                }
                write!(f, ")")
            }
        }
    }
}

pub(crate) fn parse_growth(c: &mut Cursor) -> Result<GrowthFunction, GrowthError> {
    let Some(name) = c.ident() else { return Err(c.err::<()>("expected a growth function").unwrap_err().into()) };
    c.expect(b'(')?;
    let g = match name.as_str() {
        "power" => GrowthFunction::power(c.number()?)?,
        "powerlog" => {
            let q = c.number()?;
            c.expect(b',')?;
            let a = c.number()?;
            c.expect(b',')?;
            let k = c.number()?;
            GrowthFunction::power_log(q, a, k)?
        }
        "compose_inv" => {
            let outer = parse_growth(c)?;
            c.expect(b',')?;
            let inner = parse_growth(c)?;
            GrowthFunction::composed_inverse(outer, inner)
        }
        "recip_reflect" => GrowthFunction::reciprocal_reflected(parse_growth(c)?),
        "scale" => {
            let k = c.number()?;
            c.expect(b',')?;
            GrowthFunction::scaled(k, parse_growth(c)?)?
        }
        "table" => {
            let mut knots = Vec::new();
            loop {
                c.expect(b'[')?;
                let t = c.number()?;
                c.expect(b',')?;
                let v = c.number()?;
                c.expect(b']')?;
                knots.push((t, v));
                if !c.eat(b',') {
                    break;
                }
            }
            GrowthFunction::tabulated(knots)?
        }
        other => return Err(c.err::<()>(format!("unknown growth kind '{other}'")).unwrap_err().into()),
    };
    c.expect(b')')?;
    Ok(g)
}

impl FromStr for GrowthFunction {
    type Err = GrowthError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut c = Cursor::new(s);
        let g = parse_growth(&mut c)?;
        if !c.at_end() {
            return Err(c.err::<()>("trailing input").unwrap_err().into());
        }
        Ok(g)
    }
}

/// (Φ₂∘Φ₁⁻¹, Φ₃) with Φ₃(t) = 1/Φ₂∘Φ₁⁻¹(1/t).
pub fn derived_functions(phi1: &GrowthFunction, phi2: &GrowthFunction) -> (GrowthFunction, GrowthFunction) {
    let composed = GrowthFunction::composed_inverse(phi2.clone(), phi1.clone());
    let phi3 = GrowthFunction::reciprocal_reflected(composed.clone());
    (composed, phi3)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Conjugate {
    Finite { value: f64, argmax: f64 },
    Infinite,
}

impl Conjugate {
    pub fn value(&self) -> f64 {
        match self {
            Conjugate::Finite { value, .. } => *value,
            Conjugate::Infinite => f64::INFINITY,
        }
    }
}

/// Ψ(s) = sup_{t ≥ 0} (ts − Φ(t)) over t = 0 and the grid, refined by golden section.
pub fn conjugate(gf: &GrowthFunction, s: f64, grid: &LogGrid) -> Conjugate {
    let mut ts = vec![0.0];
    ts.extend(grid.values());
    conjugate_on(gf, s, &ts)
}

/// Conjugate over explicit increasing sample points (first point should be 0).
pub fn conjugate_on(gf: &GrowthFunction, s: f64, ts: &[f64]) -> Conjugate {
    let g = |t: f64| t * s - gf.at(t);
    let vals: Vec<f64> = ts.iter().map(|&t| g(t)).collect();
    let Some(k) = argmax(&vals) else { return Conjugate::Infinite };
    let n = ts.len();
    if k == n - 1 && n >= 2 {
        let slope = (vals[n - 1] - vals[n - 2]) / (ts[n - 1] - ts[n - 2]);
        if slope > 1e-8 * (1.0 + s) {
            return Conjugate::Infinite;
        }
    }
    let a = ts[k.saturating_sub(1)];
    let b = ts[(k + 1).min(n - 1)];
    let (t_best, v_best) = golden_max(g, a, b, ts[k], vals[k]);
    Conjugate::Finite { value: v_best.max(0.0), argmax: t_best }
}

fn golden_max<F: Fn(f64) -> f64>(g: F, mut a: f64, mut b: f64, t0: f64, v0: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut best_t, mut best_v) = (t0, v0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..200 {
        if (b - a) <= 1e-15 * (a.abs() + b.abs()) {
            break;
        }
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
        for (t, v) in [(c, gc), (d, gd)] {
            if v > best_v {
                best_t = t;
                best_v = v;
            }
        }
    }
    (best_t, best_v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityScan {
    pub convex: bool,
    /// (a, b, relative excess of Φ((a+b)/2) over the chord midpoint)
    pub worst: Option<(f64, f64, f64)>,
}

/// Midpoint convexity over grid pairs at several index separations.
pub fn convexity_scan(gf: &GrowthFunction, grid: &LogGrid) -> ConvexityScan {
    let mut ts = vec![0.0];
    ts.extend(grid.values());
    let mut worst: Option<(f64, f64, f64)> = None;
    for gap in [1usize, 4, 16, 64] {
        for i in 0..ts.len().saturating_sub(gap) {
            let (a, b) = (ts[i], ts[i + gap]);
            let chord = 0.5 * (gf.at(a) + gf.at(b));
            let mid = gf.at(0.5 * (a + b));
            let excess = (mid - chord) / chord.abs().max(f64::MIN_POSITIVE);
            if excess > 1e-9 && worst.is_none_or(|w| excess > w.2) {
                worst = Some((a, b, excess));
            }
        }
    }
    ConvexityScan { convex: worst.is_none(), worst }
}

/// (min, max) over the grid of tΦ'(t)/Φ(t), derivative by central difference with relative step h.
pub fn indices_estimate(gf: &GrowthFunction, grid: &LogGrid, h: f64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for t in grid.values() {
        let v = gf.at(t);
        if !(v > f64::MIN_POSITIVE) || !v.is_finite() {
            continue;
        }
        let r = (gf.at(t * (1.0 + h)) - gf.at(t * (1.0 - h))) / (2.0 * h * v);
        if r.is_finite() {
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    (lo, hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Delta2 {
    /// max over the grid of Φ(2t)/Φ(t)
    pub constant: f64,
    pub argmax: f64,
    pub bounded: bool,
    pub edge_slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Nabla2 {
    Pass { dini_constant: f64, argmax: f64 },
    Fail { reason: String, witness: f64 },
}

impl Nabla2 {
    pub fn passes(&self) -> bool {
        matches!(self, Nabla2::Pass { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Condition {
    Pass { constant: f64 },
    Fail { witness: (f64, f64), value: f64 },
}

impl Condition {
    pub fn passes(&self) -> bool {
        matches!(self, Condition::Pass { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TildeU {
    pub a1: Condition,
    pub a2: Condition,
    pub a3: Condition,
}

impl TildeU {
    pub fn passes(&self) -> bool {
        self.a1.passes() && self.a2.passes() && self.a3.passes()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthClassification {
    pub function: String,
    pub delta2: Delta2,
    pub nabla2: Nabla2,
    /// Smallest C₂ in [1.01, 1e6] with Φ(C₂t) ≥ 2C₂Φ(t) on the grid, if any.
    pub c_criterion: Option<f64>,
    pub lower_index: f64,
    pub upper_index: f64,
    pub lower_type: f64,
    pub upper_type: f64,
    /// max over s, t ≥ 1 of Φ(st) / (t^q Φ(s)) with q the upper type.
    pub upper_type_witness: f64,
    pub ratio_nondecreasing: bool,
    pub ratio_nonincreasing: bool,
    pub in_u: bool,
    pub in_l: bool,
    pub convex: bool,
    pub tilde_u: TildeU,
    pub grid: LogGrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyOptions {
    pub grid: LogGrid,
    /// Relative step for the central differences.
    pub h: f64,
    /// Number of dyadic annuli in the Dini sum.
    pub dini_annuli: u32,
    /// Per-decade increment of the Dini partial sums, relative to the sum, above which it diverges.
    pub dini_increment: f64,
    /// Points per axis in the two-dimensional scans.
    pub scan_points: usize,
    /// Edge slope (log10 per decade) regarded as growth.
    pub slope_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { grid: LogGrid::default(), h: 1e-5, dini_annuli: 60, dini_increment: 1e-3, scan_points: 128, slope_tol: 0.01 }
    }
}

fn delta2(gf: &GrowthFunction, opts: &ClassifyOptions) -> Delta2 {
    let ts = opts.grid.values();
    let r: Vec<f64> = ts.iter().map(|&t| gf.at(2.0 * t) / gf.at(t)).collect();
    let k = argmax(&r).unwrap_or(0);
    let tr = edge_trend(&ts, &r, 1.0);
    let bounded = r[k].is_finite() && tr.max() <= opts.slope_tol;
    Delta2 { constant: r[k], argmax: ts[k], bounded, edge_slope: tr.max() }
}

/// Dini quotient [∫₀^t Φ(s)/s² ds]·t/Φ(t) by the dyadic annulus sum, with the
/// per-decade increments of the last two decades.
pub fn dini_quotient(gf: &GrowthFunction, t: f64, annuli: u32) -> (f64, [f64; 2]) {
    let spec = QuadratureSpec { rel_tol: 1e-11, ..QuadratureSpec::default() };
    let pt = gf.at(t);
    let terms: Vec<f64> = (0..annuli)
        .map(|j| {
            let sj = t * 0.5f64.powi(j as i32);
            // (2^j / Φ(t)) ∫_{1/2}^{1} Φ(s_j σ)/σ² dσ
            let e = integrate_interval(|sig| gf.at(sj * sig) / (sig * sig), 0.5, 1.0, &[], &spec);
            e.value / sj * t / pt
        })
        .collect();
    let total: f64 = terms.iter().sum();
    let per = std::f64::consts::LN_10 / std::f64::consts::LN_2;
    let n = terms.len();
    let block = |from: usize, to: usize| terms[from..to].iter().sum::<f64>() * per / (to - from) as f64;
    let incs = if n >= 6 { [block(n - 6, n - 3), block(n - 3, n)] } else { [0.0, 0.0] };
    (total, incs)
}

fn nabla2(gf: &GrowthFunction, opts: &ClassifyOptions) -> Nabla2 {
    let ts = opts.grid.resampled(opts.grid.points.min(129)).values();
    let mut qs = Vec::with_capacity(ts.len());
    for &t in &ts {
        let (q, incs) = dini_quotient(gf, t, opts.dini_annuli);
        if !q.is_finite() || incs.iter().all(|&d| d > opts.dini_increment * q) {
            return Nabla2::Fail { reason: "Dini integral diverges at 0".into(), witness: t };
        }
        qs.push(q);
    }
    let k = argmax(&qs).unwrap_or(0);
    let tr = edge_trend(&ts, &qs, 1.0);
    if tr.max() > opts.slope_tol {
        let w = if tr.left > tr.right { ts[0] } else { ts[ts.len() - 1] };
        return Nabla2::Fail { reason: format!("Dini quotient grows toward the grid edge (slope {:.3})", tr.max()), witness: w };
    }
    Nabla2::Pass { dini_constant: qs[k], argmax: ts[k] }
}

/// Smallest C₂ on a geometric grid in [1.01, 1e6] with Φ(C₂t) ≥ 2C₂Φ(t) for all grid t.
pub fn c_criterion(gf: &GrowthFunction, grid: &LogGrid) -> Option<f64> {
    let ts = grid.resampled(grid.points.min(257)).values();
    let cands = LogGrid::new(1.01, 1e6, 481).values();
    cands.into_iter().find(|&c| ts.iter().all(|&t| gf.at(c * t) >= 2.0 * c * gf.at(t) * (1.0 - 1e-12)))
}

/// Sup of `ratio` over a 2-D grid, compared with the sup over a grid extended by two decades.
fn scan2<F: Fn(f64, f64) -> f64, D: Fn(f64, f64) -> bool>(ratio: F, domain: D, grid: &LogGrid, n: usize) -> Condition {
    let sup = |g: &LogGrid| {
        let v = g.resampled(n).values();
        let mut best = (f64::NEG_INFINITY, (0.0, 0.0));
        for &s in &v {
            for &t in &v {
                if !domain(s, t) {
                    continue;
                }
                let r = ratio(s, t);
                if r.is_nan() {
                    continue;
                }
                if r > best.0 {
                    best = (r, (s, t));
                }
            }
        }
        best
    };
    let base = sup(grid);
    let ext_grid = grid.extended(2.0);
    let n_ext = ((n as f64) * ext_grid.decades() / grid.decades()).round() as usize;
    let ext = {
        let g = ext_grid.resampled(n_ext.max(n));
        sup(&g)
    };
    if base.0.is_finite() && ext.0 <= base.0 * 1.1 && ext.0.is_finite() {
        Condition::Pass { constant: base.0.max(ext.0) }
    } else {
        Condition::Fail { witness: ext.1, value: ext.0 }
    }
}

pub fn tilde_u(gf: &GrowthFunction, q: f64, opts: &ClassifyOptions) -> TildeU {
    let n = opts.scan_points;
    let g = &opts.grid;
    let a1 = scan2(|s, t| gf.at(s * t) / (gf.at(s) * gf.at(t)), |_, _| true, g, n);
    let a2 = scan2(|a, b| gf.at(a / b) * b.powf(q) / gf.at(a), |a, b| a >= 1.0 && b >= 1.0, g, n);
    let a3 = scan2(|a, b| gf.at(a / b) * gf.at(b) / gf.at(a), |a, b| a <= b && b <= 1.0, g, n);
    TildeU { a1, a2, a3 }
}

/// max over s in the grid and t ≥ 1 of Φ(st)/(t^q Φ(s)).
pub fn upper_type_witness(gf: &GrowthFunction, q: f64, grid: &LogGrid, n: usize) -> f64 {
    let v = grid.resampled(n).values();
    let mut best: f64 = 0.0;
    for &s in &v {
        for &t in std::iter::once(&1.0).chain(v.iter().filter(|&&t| t > 1.0)) {
            let r = gf.at(s * t) / (t.powf(q) * gf.at(s));
            if r.is_finite() {
                best = best.max(r);
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monotonicity {
    pub nondecreasing: bool,
    pub nonincreasing: bool,
    /// Largest relative drop (for nondecreasing) and rise (for nonincreasing) seen between neighbors.
    pub worst_drop: f64,
    pub worst_rise: f64,
}

/// Sampled monotonicity of num(t)/den(t) on the grid, with relative slack `tol`.
pub fn quotient_monotonicity<F: Fn(f64) -> f64>(ratio: F, grid: &LogGrid, tol: f64) -> Monotonicity {
    let r: Vec<f64> = grid.values().into_iter().map(ratio).collect();
    let mut drop: f64 = 0.0;
    let mut rise: f64 = 0.0;
    for w in r.windows(2) {
        let scale = w[0].abs().max(w[1].abs()).max(f64::MIN_POSITIVE);
        drop = drop.max((w[0] - w[1]) / scale);
        rise = rise.max((w[1] - w[0]) / scale);
    }
    Monotonicity { nondecreasing: drop <= tol, nonincreasing: rise <= tol, worst_drop: drop, worst_rise: rise }
}

/// Full classification on the grid in `opts`.
pub fn classify(gf: &GrowthFunction, opts: &ClassifyOptions) -> GrowthClassification {
    let (a, b) = indices_estimate(gf, &opts.grid, opts.h);
    let ratio = quotient_monotonicity(|t| gf.at(t) / t, &opts.grid, 1e-9);
    let q = b.max(1.0);
    let witness = upper_type_witness(gf, q, &opts.grid, 96);
    let convex = convexity_scan(gf, &opts.grid.resampled(opts.grid.points.min(257))).convex;
    GrowthClassification {
        function: gf.to_string(),
        delta2: delta2(gf, opts),
        nabla2: nabla2(gf, opts),
        c_criterion: c_criterion(gf, &opts.grid),
        lower_index: a,
        upper_index: b,
        lower_type: a,
        upper_type: b,
        upper_type_witness: witness,
        ratio_nondecreasing: ratio.nondecreasing,
        ratio_nonincreasing: ratio.nonincreasing,
        in_u: ratio.nondecreasing && b >= 1.0 - 1e-9 && witness.is_finite(),
        in_l: ratio.nonincreasing && a <= 1.0 + 1e-9,
        convex,
        tilde_u: tilde_u(gf, q, opts),
        grid: opts.grid.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    fn pw(p: f64) -> GrowthFunction {
        GrowthFunction::power(p).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(pw(2.0).eval(3.0).unwrap(), 9.0);
        let pl = GrowthFunction::power_log(2.0, 1.0, E).unwrap();
        assert_relative_eq!(pl.eval(1.0).unwrap(), (E + 1.0).ln(), max_relative = 1e-15);
        assert_relative_eq!(pl.eval(1.0).unwrap(), 1.313_261_687_518_222_8, max_relative = 1e-15);
        for g in [pw(0.5), pl.clone(), GrowthFunction::reciprocal_reflected(pw(2.0))] {
            assert_eq!(g.eval(0.0).unwrap(), 0.0);
        }
        assert!(pw(2.0).eval(-1.0).is_err());
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(pw(2.0).inverse(9.0, 1e-12).unwrap(), 3.0);
        assert_eq!(pw(2.0).inverse(0.0, 1e-12).unwrap(), 0.0);
        let pl = GrowthFunction::power_log(2.0, 1.0, E).unwrap();
        let t = pl.inverse((E + 1.0).ln(), 1e-12).unwrap();
        assert!((t - 1.0).abs() < 1e-11);
    }

    #[test]
    fn tabulated_range_errors() {
        let t = GrowthFunction::tabulated(vec![(1.0, 1.0), (2.0, 4.0)]).unwrap();
        assert_eq!(t.eval(1.5).unwrap(), 2.5);
        assert!(matches!(t.eval(3.0), Err(GrowthError::OutOfRange { .. })));
        assert!(t.inverse(5.0, 1e-12).is_err());
        assert!(GrowthFunction::tabulated(vec![(1.0, 2.0), (0.5, 3.0)]).is_err());
    }

    #[test]
    fn powerlog_admissibility() {
        assert!(GrowthFunction::power_log(1.0, 1.0, 1.01).is_ok());
        assert!(GrowthFunction::power_log(0.5, 1.0, 3.0).is_err());
        assert!(GrowthFunction::power_log(2.0, 0.0, 3.0).is_err());
        assert!(GrowthFunction::power_log(2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn literal_round_trip() {
        for s in [
            "power(2)",
            "powerlog(2,1,2.718281828459045)",
            "compose_inv(power(4),power(2))",
            "recip_reflect(compose_inv(powerlog(2,1,7.38905609893065),power(2)))",
            "scale(0.5,power(2))",
            "table([0,0],[1,1],[2,4])",
        ] {
            let g: GrowthFunction = s.parse().unwrap();
            assert_eq!(g.to_string(), s);
        }
        let g: GrowthFunction = "powerlog(2, 1, e^2)".parse().unwrap();
        assert_relative_eq!(g.at(1.0), (E * E + 1.0).ln(), max_relative = 1e-15);
        assert!("power(2) x".parse::<GrowthFunction>().is_err());
        assert!("cube(2)".parse::<GrowthFunction>().is_err());
    }

    #[test]
    fn derived_examples() {
        let (c, p3) = derived_functions(&pw(2.0), &pw(4.0));
        for t in [0.1, 1.0, 7.0] {
            assert_relative_eq!(c.at(t), t * t, max_relative = 1e-13);
            assert_relative_eq!(p3.at(t), t * t, max_relative = 1e-13);
            assert_relative_eq!(c.inv(c.at(t)), t, max_relative = 1e-13);
        }
        let pl = GrowthFunction::power_log(2.0, 1.0, E * E).unwrap();
        let (c, _) = derived_functions(&pw(2.0), &pl);
        assert_relative_eq!(c.at(1.0), (E * E + 1.0).ln(), max_relative = 1e-14);
        assert_relative_eq!(c.at(9.0), 9.0 * (E * E + 3.0).ln(), max_relative = 1e-14);
    }

    #[test]
    fn phi3_upper_type_bound() {
        let (_, p3) = derived_functions(&pw(2.0), &pw(4.0));
        for s in [1.0, 2.0, 10.0, 1e3] {
            for t in [1e-3, 0.5, 1.0, 40.0] {
                assert!(p3.at(s * t) <= s * s * p3.at(t) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn conjugate_examples() {
        let g = LogGrid::default();
        let half_sq = GrowthFunction::scaled(0.5, pw(2.0)).unwrap();
        assert_relative_eq!(conjugate(&half_sq, 2.0, &g).value(), 2.0, max_relative = 1e-9);
        assert_eq!(conjugate(&pw(1.0), 0.5, &g).value(), 0.0);
        assert_eq!(conjugate(&pw(1.0), 1.0, &g).value(), 0.0);
        assert_eq!(conjugate(&pw(1.0), 2.0, &g), Conjugate::Infinite);
    }

    #[test]
    fn index_examples() {
        let g = LogGrid::default();
        let (a, b) = indices_estimate(&pw(3.0), &g, 1e-5);
        assert!((a - 3.0).abs() < 1e-6 && (b - 3.0).abs() < 1e-6);
        let (a, b) = indices_estimate(&pw(1.0), &g, 1e-5);
        assert!((a - 1.0).abs() < 1e-6 && (b - 1.0).abs() < 1e-6);
        let g3 = LogGrid::new(1e-3, 1e3, 256);
        let pl = GrowthFunction::power_log(2.0, 1.0, E).unwrap();
        let (a, b) = indices_estimate(&pl, &g3, 1e-5);
        // oracle: 2 + t/((e+t) ln(e+t)) on the same grid
        let oracle: Vec<f64> = g3.values().iter().map(|t| 2.0 + t / ((E + t) * (E + t).ln())).collect();
        let omin = oracle.iter().cloned().fold(f64::INFINITY, f64::min);
        let omax = oracle.iter().cloned().fold(0.0, f64::max);
        assert!(a > 2.0 && b < 3.0);
        assert!((a - omin).abs() < 1e-6 && (b - omax).abs() < 1e-6);
    }

    #[test]
    fn classify_power_two() {
        let c = classify(&pw(2.0), &ClassifyOptions::default());
        assert_relative_eq!(c.delta2.constant, 4.0, max_relative = 1e-12);
        assert!(c.delta2.bounded);
        match c.nabla2 {
            Nabla2::Pass { dini_constant, .. } => assert_relative_eq!(dini_constant, 1.0, max_relative = 1e-9),
            ref other => panic!("{other:?}"),
        }
        assert!(c.in_u && c.convex && c.tilde_u.passes());
    }

    #[test]
    fn classify_power_one_fails_nabla2() {
        let c = classify(&pw(1.0), &ClassifyOptions::default());
        assert!(!c.nabla2.passes());
        assert!(c.c_criterion.is_none());
    }

    #[test]
    fn classify_power_three_tilde_u() {
        let c = classify(&pw(3.0), &ClassifyOptions::default());
        for cond in [&c.tilde_u.a1, &c.tilde_u.a2, &c.tilde_u.a3] {
            match cond {
                Condition::Pass { constant } => assert_relative_eq!(*constant, 1.0, max_relative = 1e-7),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn exponential_like_fails_delta2() {
        let t = GrowthFunction::tabulated((0..=60).map(|k| (k as f64, (k as f64).exp() - 1.0)).collect()).unwrap();
        let opts = ClassifyOptions { grid: LogGrid::new(1e-2, 29.0, 200), ..ClassifyOptions::default() };
        let d = delta2(&t, &opts);
        assert!(!d.bounded, "{d:?}");
    }
}
