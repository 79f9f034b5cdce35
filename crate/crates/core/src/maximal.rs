//! Step functions on the line and in the upper half-plane, dyadic grids, Hardy–Littlewood,
//! dyadic and weighted maximal operators, level-set decompositions and the Poisson extension.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::growth::GrowthFunction;
use crate::numerics::{integrate_interval, QuadratureSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaximalError {
    #[error("invalid sampled function: {0}")]
    Invalid(String),
    #[error("point ({0}, {1}) is not in the upper half-plane")]
    NotInHalfPlane(f64, f64),
}

/// Step function on [x0, x0 + n·h), zero outside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Raw1D")]
pub struct SampledFunction1D {
    pub x0: f64,
    pub h: f64,
    pub values: Vec<f64>,
    #[serde(skip)]
    prefix: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw1D {
    x0: f64,
    h: f64,
    values: Vec<f64>,
}

impl TryFrom<Raw1D> for SampledFunction1D {
    type Error = MaximalError;
    fn try_from(r: Raw1D) -> Result<Self, Self::Error> {
        SampledFunction1D::new(r.x0, r.h, r.values)
    }
}

impl SampledFunction1D {
    pub fn new(x0: f64, h: f64, values: Vec<f64>) -> Result<Self, MaximalError> {
        if !(h > 0.0 && h.is_finite() && x0.is_finite()) || values.is_empty() {
            return Err(MaximalError::Invalid("window must have positive width and at least one cell".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MaximalError::Invalid("values must be finite".into()));
        }
        let mut prefix = Vec::with_capacity(values.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for v in &values {
            acc += v.abs() * h;
            prefix.push(acc);
        }
        Ok(SampledFunction1D { x0, h, values, prefix })
    }

    /// c·χ_{[a, b)} sampled on cells of width h over [x0, x1); a and b should be cell boundaries.
    pub fn indicator(a: f64, b: f64, c: f64, x0: f64, x1: f64, h: f64) -> Result<Self, MaximalError> {
        let n = ((x1 - x0) / h).round() as usize;
        let values = (0..n)
            .map(|i| {
                let m = x0 + (i as f64 + 0.5) * h;
                if m >= a && m < b {
                    c
                } else {
                    0.0
                }
            })
            .collect();
        Self::new(x0, h, values)
    }

    pub fn window(&self) -> (f64, f64) {
        (self.x0, self.x0 + self.values.len() as f64 * self.h)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        (0..=self.values.len()).map(|i| self.x0 + i as f64 * self.h).collect()
    }

    pub fn value_at(&self, x: f64) -> f64 {
        let i = ((x - self.x0) / self.h).floor();
        if i < 0.0 || i >= self.values.len() as f64 {
            0.0
        } else {
            self.values[i as usize]
        }
    }

    /// ∫_{-∞}^{t} |f|.
    pub fn cumulative(&self, t: f64) -> f64 {
        let u = (t - self.x0) / self.h;
        if u <= 0.0 {
            return 0.0;
        }
        let n = self.values.len();
        if u >= n as f64 {
            return self.prefix[n];
        }
        let i = u.floor() as usize;
        self.prefix[i] + (u - i as f64) * self.h * self.values[i].abs()
    }

    /// ∫_a^b |f| for a ≤ b.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        (self.cumulative(b) - self.cumulative(a)).max(0.0)
    }

    pub fn average(&self, a: f64, b: f64) -> f64 {
        if b > a {
            self.integral(a, b) / (b - a)
        } else {
            0.0
        }
    }

    /// max of |f| over cells meeting [a, b).
    pub fn sup_on(&self, a: f64, b: f64) -> f64 {
        let n = self.values.len() as i64;
        let i0 = (((a - self.x0) / self.h).floor() as i64).clamp(0, n);
        let i1 = (((b - self.x0) / self.h).ceil() as i64).clamp(0, n);
        self.values[i0 as usize..i1 as usize].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn l1(&self) -> f64 {
        *self.prefix.last().unwrap()
    }

    /// ∫ Φ(|f|).
    pub fn modular(&self, phi: &GrowthFunction) -> f64 {
        self.values.iter().map(|v| phi.at(v.abs()) * self.h).sum()
    }

    /// ∫_{|f| > t} |f|.
    pub fn integral_above(&self, t: f64) -> f64 {
        self.values.iter().filter(|v| v.abs() > t).map(|v| v.abs() * self.h).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(self.x0, self.h, self.values.iter().map(|v| v * c).collect()).unwrap()
    }
}

/// Step function on [x0, x0 + nx·hx) × (0, ny·hy], zero outside; values are row-major in y.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Raw2D")]
pub struct SampledFunction2D {
    pub x0: f64,
    pub hx: f64,
    pub hy: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
    #[serde(skip)]
    rows: Vec<SampledFunction1D>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw2D {
    x0: f64,
    hx: f64,
    hy: f64,
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl TryFrom<Raw2D> for SampledFunction2D {
    type Error = MaximalError;
    fn try_from(r: Raw2D) -> Result<Self, Self::Error> {
        SampledFunction2D::new(r.x0, r.hx, r.hy, r.nx, r.ny, r.values)
    }
}

impl SampledFunction2D {
    pub fn new(x0: f64, hx: f64, hy: f64, nx: usize, ny: usize, values: Vec<f64>) -> Result<Self, MaximalError> {
        if !(hy > 0.0 && hy.is_finite()) || ny == 0 || values.len() != nx * ny {
            return Err(MaximalError::Invalid(format!("expected {nx}x{ny} values and positive cell sizes")));
        }
        let rows = (0..ny).map(|iy| SampledFunction1D::new(x0, hx, values[iy * nx..(iy + 1) * nx].to_vec())).collect::<Result<_, _>>()?;
        Ok(SampledFunction2D { x0, hx, hy, nx, ny, values, rows })
    }

    /// c·χ_{Q_I} for I = [a, b), on the given cell grid.
    pub fn box_indicator(a: f64, b: f64, c: f64, x0: f64, hx: f64, hy: f64, nx: usize, ny: usize) -> Result<Self, MaximalError> {
        let len = b - a;
        let mut v = vec![0.0; nx * ny];
        for iy in 0..ny {
            let ym = (iy as f64 + 0.5) * hy;
            for ix in 0..nx {
                let xm = x0 + (ix as f64 + 0.5) * hx;
                if xm >= a && xm < b && ym < len {
                    v[iy * nx + ix] = c;
                }
            }
        }
        Self::new(x0, hx, hy, nx, ny, v)
    }

    pub fn window(&self) -> (f64, f64, f64) {
        (self.x0, self.x0 + self.nx as f64 * self.hx, self.ny as f64 * self.hy)
    }

    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        if !(y > 0.0) {
            return 0.0;
        }
        let iy = ((y / self.hy).ceil() as usize).saturating_sub(1);
        if iy >= self.ny {
            return 0.0;
        }
        self.rows[iy].value_at(x)
    }

    /// ∫_{[a,b) × (0, top)} |f| y^α dx dy, exact for the step function.
    pub fn box_integral(&self, a: f64, b: f64, top: f64, alpha: f64) -> f64 {
        let mut s = 0.0;
        let e = alpha + 1.0;
        for (iy, row) in self.rows.iter().enumerate() {
            let y0 = iy as f64 * self.hy;
            if y0 >= top {
                break;
            }
            let y1 = ((iy + 1) as f64 * self.hy).min(top);
            let r = row.integral(a, b);
            if r > 0.0 {
                s += r * (y1.powf(e) - y0.powf(e)) / e;
            }
        }
        s
    }

    /// max of |f| over cells meeting [a, b) × (0, top).
    pub fn sup_on(&self, a: f64, b: f64, top: f64) -> f64 {
        let rows = ((top / self.hy).ceil() as usize).min(self.ny);
        self.rows[..rows].iter().map(|r| r.sup_on(a, b)).fold(0.0, f64::max)
    }

    /// V_α-average of |f| over Q_I, I = [a, b).
    pub fn box_average(&self, a: f64, b: f64, alpha: f64) -> f64 {
        let l = b - a;
        self.box_integral(a, b, l, alpha) * (1.0 + alpha) / l.powf(alpha + 2.0)
    }

    /// ∫ Φ(|f|) dV_α.
    pub fn modular(&self, phi: &GrowthFunction, alpha: f64) -> f64 {
        let e = alpha + 1.0;
        let mut s = 0.0;
        for iy in 0..self.ny {
            let wy = (((iy + 1) as f64 * self.hy).powf(e) - (iy as f64 * self.hy).powf(e)) / e;
            for ix in 0..self.nx {
                s += phi.at(self.values[iy * self.nx + ix].abs()) * self.hx * wy;
            }
        }
        s
    }
}

/// Dyadic system 𝒟^β = {2^j([0,1) + m + (-1)^j β)} restricted to scales j_min..=j_max.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DyadicGrid {
    pub beta: f64,
    pub j_min: i32,
    pub j_max: i32,
}

impl DyadicGrid {
    pub fn new(beta: f64, j_min: i32, j_max: i32) -> Result<Self, MaximalError> {
        if !(beta == 0.0 || (beta - 1.0 / 3.0).abs() < 1e-15) || j_min > j_max {
            return Err(MaximalError::Invalid(format!("grid needs beta in {{0, 1/3}} and j_min <= j_max, got {beta}, [{j_min}, {j_max}]")));
        }
        Ok(DyadicGrid { beta, j_min, j_max })
    }

    pub fn standard(j_min: i32, j_max: i32) -> Self {
        DyadicGrid { beta: 0.0, j_min, j_max }
    }

    pub fn third(j_min: i32, j_max: i32) -> Self {
        DyadicGrid { beta: 1.0 / 3.0, j_min, j_max }
    }

    fn shift(&self, j: i32) -> f64 {
        if j.rem_euclid(2) == 0 {
            self.beta
        } else {
            -self.beta
        }
    }

    /// Interval at scale j with index m.
    pub fn interval(&self, j: i32, m: i64) -> (f64, f64) {
        let l = 2f64.powi(j);
        let a = l * (m as f64 + self.shift(j));
        (a, a + l)
    }

    /// Index of the scale-j interval containing x.
    pub fn index_of(&self, j: i32, x: f64) -> i64 {
        let l = 2f64.powi(j);
        let m = (x / l - self.shift(j)).floor() as i64;
        // guard the half-open boundary against rounding
        let (a, b) = self.interval(j, m);
        if x < a {
            m - 1
        } else if x >= b {
            m + 1
        } else {
            m
        }
    }

    pub fn containing(&self, j: i32, x: f64) -> (f64, f64) {
        self.interval(j, self.index_of(j, x))
    }

    /// Scale-(j-1) intervals inside the scale-j interval m.
    pub fn children(&self, j: i32, m: i64) -> Vec<(i64, (f64, f64))> {
        let (a, b) = self.interval(j, m);
        let l = 2f64.powi(j - 1);
        let first = self.index_of(j - 1, a + 0.25 * l);
        (first..first + 2)
            .map(|k| (k, self.interval(j - 1, k)))
            .filter(|(_, (c, d))| *c >= a - 1e-12 * l && *d <= b + 1e-12 * l)
            .collect()
    }

    /// Indices of scale-j intervals meeting [x0, x1).
    fn meeting(&self, j: i32, x0: f64, x1: f64) -> std::ops::RangeInclusive<i64> {
        self.index_of(j, x0)..=self.index_of(j, x1 - 1e-12 * (x1 - x0).abs().max(1.0))
    }
}

/// Mf(x): sup over all intervals containing x of the average of |f|, exact for step functions.
pub fn hl_maximal(f: &SampledFunction1D, x: f64) -> f64 {
    let mut pts = f.breakpoints();
    pts.push(x);
    let left: Vec<f64> = pts.iter().copied().filter(|&a| a <= x).collect();
    let right: Vec<f64> = pts.iter().copied().filter(|&b| b >= x).collect();
    let mut best: f64 = 0.0;
    for &a in &left {
        let ca = f.cumulative(a);
        for &b in &right {
            if b > a {
                best = best.max((f.cumulative(b) - ca) / (b - a));
            }
        }
    }
    best
}

/// M^{d,β}f(x): sup over grid intervals containing x.
pub fn dyadic_maximal(f: &SampledFunction1D, grid: &DyadicGrid, x: f64) -> f64 {
    (grid.j_min..=grid.j_max)
        .map(|j| {
            let (a, b) = grid.containing(j, x);
            f.average(a, b)
        })
        .fold(0.0, f64::max)
}

/// Maximal grid intervals whose average of |f| exceeds λ.
pub fn dyadic_level_set(f: &SampledFunction1D, grid: &DyadicGrid, lambda: f64) -> Vec<(f64, f64)> {
    let (x0, x1) = f.window();
    let mut out = Vec::new();
    let mut stack: Vec<(i32, i64)> = grid.meeting(grid.j_max, x0, x1).map(|m| (grid.j_max, m)).collect();
    while let Some((j, m)) = stack.pop() {
        let (a, b) = grid.interval(j, m);
        let mass = f.integral(a, b);
        if mass <= 0.0 || f.sup_on(a, b) <= lambda {
            continue;
        }
        if mass / (b - a) > lambda {
            out.push((a, b));
        } else if j > grid.j_min {
            stack.extend(grid.children(j, m).into_iter().map(|(k, _)| (j - 1, k)));
        }
    }
    out.sort_by(|p, q| p.0.total_cmp(&q.0));
    out
}

/// 𝓜^d_α f(z) over one grid: sup over grid boxes Q_I containing z of V_α-averages.
pub fn weighted_dyadic_maximal(f: &SampledFunction2D, alpha: f64, z: (f64, f64), grid: &DyadicGrid) -> f64 {
    let (x, y) = z;
    (grid.j_min..=grid.j_max)
        .filter(|&j| y < 2f64.powi(j))
        .map(|j| {
            let (a, b) = grid.containing(j, x);
            f.box_average(a, b, alpha)
        })
        .fold(0.0, f64::max)
}

/// 𝓜^d_α over the union of the two one-third-shifted grids.
pub fn weighted_dyadic_maximal_shifted(f: &SampledFunction2D, alpha: f64, z: (f64, f64), j_min: i32, j_max: i32) -> f64 {
    weighted_dyadic_maximal(f, alpha, z, &DyadicGrid::standard(j_min, j_max))
        .max(weighted_dyadic_maximal(f, alpha, z, &DyadicGrid::third(j_min, j_max)))
}

/// Translated box family standing in for all intervals in 𝓜_α.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TranslatedFamily {
    pub length_min: f64,
    pub length_max: f64,
    pub per_octave: u32,
    /// Horizontal step as a fraction of the cell width.
    pub step_cells: f64,
}

impl Default for TranslatedFamily {
    fn default() -> Self {
        TranslatedFamily { length_min: 1.0 / 8.0, length_max: 64.0, per_octave: 4, step_cells: 1.0 }
    }
}

/// 𝓜_α f(z) over the translated family (a lower bound for the sup over all intervals).
pub fn weighted_maximal(f: &SampledFunction2D, alpha: f64, z: (f64, f64), fam: &TranslatedFamily) -> f64 {
    let (x, y) = z;
    let octaves = (fam.length_max / fam.length_min).log2();
    let n = (octaves * fam.per_octave as f64).round() as i32;
    let step = fam.step_cells * f.hx;
    let (w0, w1, _) = f.window();
    let mut best: f64 = 0.0;
    for k in 0..=n {
        let l = fam.length_min * 2f64.powf(k as f64 / fam.per_octave as f64);
        if y >= l {
            continue;
        }
        // left endpoints a on the lattice x0 + i·step with a <= x < a + l
        let i_lo = ((x - l - f.x0) / step).floor() as i64 + 1;
        let i_hi = ((x - f.x0) / step).floor() as i64;
        for i in i_lo..=i_hi {
            let a = f.x0 + i as f64 * step;
            if !(a <= x && x < a + l) || a + l <= w0 || a >= w1 {
                continue;
            }
            best = best.max(f.box_average(a, a + l, alpha));
        }
    }
    best
}

/// Maximal standard-grid intervals I with V_α-average over Q_I above λ.
pub fn level_sets(f: &SampledFunction2D, alpha: f64, lambda: f64, grid: &DyadicGrid) -> Vec<(f64, f64)> {
    let (x0, x1, _) = f.window();
    let mut out = Vec::new();
    let mut stack: Vec<(i32, i64)> = grid.meeting(grid.j_max, x0, x1).map(|m| (grid.j_max, m)).collect();
    while let Some((j, m)) = stack.pop() {
        let (a, b) = grid.interval(j, m);
        let mass = f.box_integral(a, b, b - a, alpha);
        if mass <= 0.0 || f.sup_on(a, b, b - a) <= lambda {
            continue;
        }
        if mass * (1.0 + alpha) / (b - a).powf(alpha + 2.0) > lambda {
            out.push((a, b));
        } else if j > grid.j_min {
            stack.extend(grid.children(j, m).into_iter().map(|(k, _)| (j - 1, k)));
        }
    }
    out.sort_by(|p, q| p.0.total_cmp(&q.0));
    out
}

/// Cone truncation and sampling density for f*.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConeSampling {
    pub y_min: f64,
    pub y_max: f64,
    pub per_decade: u32,
    /// Samples of t/y across the open aperture (-1, 1).
    pub aperture_points: u32,
}

impl Default for ConeSampling {
    fn default() -> Self {
        ConeSampling { y_min: 1e-3, y_max: 1e3, per_decade: 64, aperture_points: 65 }
    }
}

impl ConeSampling {
    pub fn heights(&self) -> Vec<f64> {
        let n = ((self.y_max / self.y_min).log10() * self.per_decade as f64).round() as usize;
        (0..=n).map(|k| self.y_min * (self.y_max / self.y_min).powf(k as f64 / n.max(1) as f64)).collect()
    }

    pub fn offsets(&self) -> Vec<f64> {
        let n = self.aperture_points.max(1) as f64;
        (0..self.aperture_points).map(|k| -1.0 + (2.0 * k as f64 + 1.0) / n).collect()
    }
}

/// f*(x) = sup over the sampled truncated cone {|t - x| < y} of |f(t + iy)|.
pub fn nontangential_maximal<F: Fn(f64, f64) -> f64>(f: F, x: f64, cone: &ConeSampling) -> f64 {
    let us = cone.offsets();
    let mut best: f64 = 0.0;
    for y in cone.heights() {
        for &u in &us {
            let v = f(x + u * y, y).abs();
            if v > best {
                best = v;
            }
        }
    }
    best
}

/// P_y(t) = y / (π (t² + y²)).
pub fn poisson_kernel(t: f64, y: f64) -> f64 {
    y / (std::f64::consts::PI * (t * t + y * y))
}

/// (P_y ⋆ g)(x) by quadrature over the window of g.
pub fn poisson_extension(g: &SampledFunction1D, z: (f64, f64), spec: &QuadratureSpec) -> Result<f64, MaximalError> {
    let (x, y) = z;
    if !(y > 0.0) {
        return Err(MaximalError::NotInHalfPlane(x, y));
    }
    let (a, b) = g.window();
    let mut bps = g.breakpoints();
    bps.push(x);
    Ok(integrate_interval(|t| poisson_kernel(x - t, y) * g.value_at(t), a, b, &bps, spec).value)
}

/// (P_y ⋆ g)(x) summed cell by cell from the arctangent antiderivative.
pub fn poisson_of_step(g: &SampledFunction1D, z: (f64, f64)) -> f64 {
    let (x, y) = z;
    let pi = std::f64::consts::PI;
    g.values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, v)| {
            let a = g.x0 + i as f64 * g.h;
            let b = a + g.h;
            v * (((x - a) / y).atan() - ((x - b) / y).atan()) / pi
        })
        .sum()
}

/// Shape of a seeded random step-function corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSpec {
    pub half_width: f64,
    pub cell: f64,
    /// Rows of cells in y for the two-dimensional corpus.
    pub rows: usize,
    pub max_bumps: usize,
    pub max_height: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec { half_width: 8.0, cell: 0.125, rows: 32, max_bumps: 6, max_height: 4.0 }
    }
}

impl CorpusSpec {
    pub fn cells(&self) -> usize {
        (2.0 * self.half_width / self.cell).round() as usize
    }
}

/// Random step functions: sums of a few signed bumps over random cell ranges.
pub fn corpus_1d(seed: u64, count: usize, spec: &CorpusSpec) -> Vec<SampledFunction1D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.cells();
    (0..count)
        .map(|_| {
            let mut v = vec![0.0; n];
            for _ in 0..rng.gen_range(1..=spec.max_bumps) {
                let a = rng.gen_range(0..n);
                let w = rng.gen_range(1..=(n / 4).max(1));
                let h = rng.gen_range(-spec.max_height..spec.max_height);
                for x in v.iter_mut().skip(a).take(w) {
                    *x += h;
                }
            }
            SampledFunction1D::new(-spec.half_width, spec.cell, v).unwrap()
        })
        .collect()
}

/// Random nonnegative step functions on [-X, X) × (0, rows·cell] built from rectangles.
pub fn corpus_2d(seed: u64, count: usize, spec: &CorpusSpec) -> Vec<SampledFunction2D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = spec.cells();
    let ny = spec.rows;
    (0..count)
        .map(|_| {
            let mut v = vec![0.0; nx * ny];
            for _ in 0..rng.gen_range(1..=spec.max_bumps) {
                let ax = rng.gen_range(0..nx);
                let wx = rng.gen_range(1..=(nx / 4).max(1));
                let ay = rng.gen_range(0..ny);
                let wy = rng.gen_range(1..=(ny / 2).max(1));
                let h = rng.gen_range(0.0..spec.max_height);
                for iy in ay..(ay + wy).min(ny) {
                    for ix in ax..(ax + wx).min(nx) {
                        v[iy * nx + ix] += h;
                    }
                }
            }
            SampledFunction2D::new(-spec.half_width, spec.cell, spec.cell, nx, ny, v).unwrap()
        })
        .collect()
}

/// Uniform probes in [a, b) from a seeded stream.
pub fn probes(seed: u64, n: usize, a: f64, b: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(a..b)).collect()
}

/// Settings for the randomized maximal-operator checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaximalSuiteConfig {
    pub seed: u64,
    pub functions: usize,
    pub probes: usize,
    pub lambdas: usize,
    pub alphas: Vec<f64>,
    pub probes_2d: usize,
    /// Functions (from the start of the corpus) used for the Orlicz ratio.
    pub orlicz_functions: usize,
    pub corpus: CorpusSpec,
    pub corpus_2d: CorpusSpec,
    pub j_min: i32,
    pub j_max: i32,
}

impl Default for MaximalSuiteConfig {
    fn default() -> Self {
        MaximalSuiteConfig {
            seed: 20_240_917,
            functions: 200,
            probes: 100,
            lambdas: 20,
            alphas: vec![0.0, 1.0],
            probes_2d: 20,
            orlicz_functions: 20,
            corpus: CorpusSpec::default(),
            corpus_2d: CorpusSpec { half_width: 4.0, cell: 0.125, rows: 32, max_bumps: 6, max_height: 4.0 },
            j_min: -24,
            j_max: 8,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckTally {
    pub checks: usize,
    pub violations: usize,
    /// Largest observed ratio of left to right side.
    pub max_ratio: f64,
    /// First violation as (function index, point or level).
    pub first_violation: Option<(usize, f64, f64)>,
}

impl CheckTally {
    fn record(&mut self, idx: usize, at: (f64, f64), lhs: f64, rhs: f64) {
        self.checks += 1;
        let r = if rhs > 0.0 { lhs / rhs } else if lhs > 0.0 { f64::INFINITY } else { 0.0 };
        self.max_ratio = self.max_ratio.max(r);
        if lhs > rhs * (1.0 + 1e-12) + 1e-300 {
            self.violations += 1;
            if self.first_violation.is_none() {
                self.first_violation = Some((idx, at.0, at.1));
            }
        }
    }

    fn merge(mut self, o: CheckTally) -> CheckTally {
        self.checks += o.checks;
        self.violations += o.violations;
        self.max_ratio = self.max_ratio.max(o.max_ratio);
        if self.first_violation.is_none() {
            self.first_violation = o.first_violation;
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalSuiteReport {
    /// Mf ≤ 6(M^{d,0} + M^{d,1/3})f; ratio is Mf / (M^{d,0} + M^{d,1/3})f.
    pub one_third: CheckTally,
    /// |{M^{d,β}f > λ}| ≤ (2/λ)∫_{|f|>λ/2}|f| for both grids.
    pub weak_type: CheckTally,
    /// 𝓜^d_α f(z) ≥ 𝓜_α f(z)/68; ratio is 𝓜_α / 𝓜^d_α.
    pub weighted_comparison: CheckTally,
    /// Disjointness and parent maximality of level-set intervals.
    pub level_set_structure: CheckTally,
    /// Largest ∫(Mf)² / ∫f² seen (sampled core plus tail bound).
    pub orlicz_ratio: f64,
}

impl MaximalSuiteReport {
    pub fn violations(&self) -> usize {
        self.one_third.violations + self.weak_type.violations + self.weighted_comparison.violations + self.level_set_structure.violations
    }
}

fn lambda_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| 1e-2 * (1e3f64).powf(k as f64 / (n.max(2) - 1) as f64)).collect()
}

/// ∫(Mf)² over [-E, E] by cell-midpoint sampling plus the tail bound 2‖f‖₁²/(E - X).
pub fn orlicz_ratio_power2(f: &SampledFunction1D, samples_per_cell: usize) -> f64 {
    let (a, b) = f.window();
    let w = b - a;
    let (lo, hi) = (a - 0.5 * w, b + 0.5 * w);
    let n = ((hi - lo) / f.h).round() as usize * samples_per_cell;
    let dx = (hi - lo) / n as f64;
    let core: f64 = (0..n).map(|i| hl_maximal(f, lo + (i as f64 + 0.5) * dx).powi(2) * dx).sum();
    let tail = 2.0 * f.l1().powi(2) / (0.5 * w);
    let rhs: f64 = f.values.iter().map(|v| v * v * f.h).sum();
    if rhs > 0.0 {
        (core + tail) / rhs
    } else {
        0.0
    }
}

pub fn run_maximal_suite(cfg: &MaximalSuiteConfig) -> MaximalSuiteReport {
    use rayon::prelude::*;
    let fs = corpus_1d(cfg.seed, cfg.functions, &cfg.corpus);
    let g0 = DyadicGrid::standard(cfg.j_min, cfg.j_max);
    let g3 = DyadicGrid::third(cfg.j_min, cfg.j_max);
    let lambdas = lambda_grid(cfg.lambdas);
    let per_fn: Vec<(CheckTally, CheckTally, CheckTally)> = fs
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let (a, b) = f.window();
            let margin = 0.25 * (b - a);
            let mut third = CheckTally::default();
            for x in probes(cfg.seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15), cfg.probes, a - margin, b + margin) {
                let m = hl_maximal(f, x);
                let d = dyadic_maximal(f, &g0, x) + dyadic_maximal(f, &g3, x);
                third.record(i, (x, m), m, 6.0 * d);
            }
            let mut weak = CheckTally::default();
            let mut structure = CheckTally::default();
            for &lam in &lambdas {
                for g in [&g0, &g3] {
                    let ivs = dyadic_level_set(f, g, lam);
                    let size: f64 = ivs.iter().map(|(p, q)| q - p).sum();
                    weak.record(i, (lam, g.beta), size, 2.0 / lam * f.integral_above(lam / 2.0));
                    let disjoint = ivs.windows(2).all(|w| w[0].1 <= w[1].0 + 1e-12);
                    let parent_fails = ivs.iter().all(|&(p, q)| {
                        let l = q - p;
                        let j = l.log2().round() as i32;
                        j >= g.j_max || {
                            let (c, d) = g.containing(j + 1, p + 0.5 * l);
                            f.average(c, d) <= lam
                        }
                    });
                    structure.record(i, (lam, g.beta), if disjoint && parent_fails { 0.0 } else { 1.0 }, 0.0);
                }
            }
            (third, weak, structure)
        })
        .collect();
    let mut one_third = CheckTally::default();
    let mut weak_type = CheckTally::default();
    let mut level_set_structure = CheckTally::default();
    for (t, w, s) in per_fn {
        one_third = one_third.merge(t);
        weak_type = weak_type.merge(w);
        level_set_structure = level_set_structure.merge(s);
    }
    let orlicz_ratio = fs.par_iter().take(cfg.orlicz_functions).map(|f| orlicz_ratio_power2(f, 2)).reduce(|| 0.0, f64::max);

    let f2 = corpus_2d(cfg.seed.wrapping_add(1), cfg.functions, &cfg.corpus_2d);
    let fam = TranslatedFamily {
        length_min: cfg.corpus_2d.cell,
        length_max: 8.0 * cfg.corpus_2d.half_width,
        per_octave: 4,
        step_cells: 1.0,
    };
    let jmin2 = cfg.corpus_2d.cell.log2().floor() as i32 - 3;
    let jmax2 = (8.0 * cfg.corpus_2d.half_width).log2().ceil() as i32 + 1;
    let weighted_comparison = f2
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let (x0, x1, top) = f.window();
            let xs = probes(cfg.seed ^ 0x5151 ^ i as u64, cfg.probes_2d, x0, x1);
            let ys = probes(cfg.seed ^ 0xa7a7 ^ i as u64, cfg.probes_2d, (cfg.corpus_2d.cell / 8.0).ln(), top.ln());
            let mut t = CheckTally::default();
            for &alpha in &cfg.alphas {
                for (&x, &ly) in xs.iter().zip(&ys) {
                    let z = (x, ly.exp());
                    let full = weighted_maximal(f, alpha, z, &fam);
                    let dy = weighted_dyadic_maximal_shifted(f, alpha, z, jmin2, jmax2);
                    t.record(i, z, full / 68.0, dy);
                }
            }
            t.max_ratio *= 68.0;
            t
        })
        .reduce(CheckTally::default, CheckTally::merge);
    // tallies store lhs / rhs; report Mf / (M^{d,0} + M^{d,1/3})f
    one_third.max_ratio *= 6.0;
    MaximalSuiteReport { one_third, weak_type, weighted_comparison, level_set_structure, orlicz_ratio }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn chi(a: f64, b: f64) -> SampledFunction1D {
        SampledFunction1D::indicator(a, b, 1.0, -8.0, 8.0, 0.125).unwrap()
    }

    #[test]
    fn hl_examples() {
        let f = chi(0.0, 1.0);
        assert_relative_eq!(hl_maximal(&f, 2.0), 0.5, max_relative = 1e-15);
        assert_relative_eq!(hl_maximal(&f, 0.5), 1.0, max_relative = 1e-15);
        let z = SampledFunction1D::new(-1.0, 0.5, vec![0.0; 4]).unwrap();
        assert_eq!(hl_maximal(&z, 0.3), 0.0);
    }

    #[test]
    fn dyadic_examples() {
        let f = chi(0.0, 1.0);
        let g = DyadicGrid::standard(-6, 6);
        assert_relative_eq!(dyadic_maximal(&f, &g, 1.5), 0.5, max_relative = 1e-15);
        assert_relative_eq!(dyadic_maximal(&f, &g, 0.25), 1.0, max_relative = 1e-15);
        // one-third shift: a β = 1/3 interval straddles 0
        let f = chi(-1.0, 0.0);
        let d0 = dyadic_maximal(&f, &DyadicGrid::standard(-3, 3), 0.1);
        let d3 = dyadic_maximal(&f, &DyadicGrid::third(-3, 3), 0.1);
        assert_eq!(d0, 0.0);
        assert!(d3 > d0);
    }

    #[test]
    fn third_grid_is_nested() {
        let g = DyadicGrid::third(-6, 6);
        for j in -5..=6 {
            for m in -20..20 {
                let (a, b) = g.interval(j, m);
                let ch = g.children(j, m);
                assert_eq!(ch.len(), 2, "j={j} m={m}");
                assert!((ch[0].1 .0 - a).abs() < 1e-12 && (ch[1].1 .1 - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn weighted_examples() {
        let f = SampledFunction2D::box_indicator(0.0, 1.0, 1.0, -4.0, 0.125, 0.125, 64, 32).unwrap();
        let g = DyadicGrid::standard(-3, 5);
        assert_relative_eq!(weighted_dyadic_maximal(&f, 0.0, (0.5, 0.5), &g), 1.0, max_relative = 1e-14);
        assert_relative_eq!(weighted_dyadic_maximal(&f, 0.0, (0.5, 1.5), &g), 0.25, max_relative = 1e-14);
    }

    #[test]
    fn level_set_examples() {
        let f = SampledFunction2D::box_indicator(0.0, 1.0, 4.0, -4.0, 0.125, 0.125, 64, 32).unwrap();
        let g = DyadicGrid::standard(-3, 5);
        assert_eq!(level_sets(&f, 0.0, 1.0, &g), vec![(0.0, 1.0)]);
        assert!(level_sets(&f, 0.0, 5.0, &g).is_empty());
        assert_eq!(level_sets(&f, 0.0, 0.125, &g), vec![(0.0, 4.0)]);
    }

    #[test]
    fn single_standard_grid_misses_mass_left_of_origin() {
        // 𝓜_α f(z) is about 0.7 while every standard dyadic box over x = δ starts at 0
        let f = SampledFunction2D::box_indicator(-1.0, 0.0, 1.0, -4.0, 0.125, 0.125, 64, 32).unwrap();
        let z = (0.01, 0.05);
        let full = weighted_maximal(&f, 0.0, z, &TranslatedFamily::default());
        assert!(full > 0.7);
        assert_eq!(weighted_dyadic_maximal(&f, 0.0, z, &DyadicGrid::standard(-8, 6)), 0.0);
        assert!(weighted_dyadic_maximal_shifted(&f, 0.0, z, -8, 6) > full / 68.0);
    }

    #[test]
    fn nontangential_examples() {
        let cone = ConeSampling::default();
        assert_relative_eq!(nontangential_maximal(|_, y| 1.0 / (1.0 + y), 0.3, &cone), 1.0 / (1.0 + 1e-3), max_relative = 1e-12);
        assert_relative_eq!(nontangential_maximal(|_, y| y, 0.0, &cone), 1e3, max_relative = 1e-12);
        let boxf = |t: f64, y: f64| if (0.0..1.0).contains(&t) && y < 1.0 { 1.0 } else { 0.0 };
        for x in [-0.9, 0.0, 0.5, 1.5, 1.9] {
            assert_eq!(nontangential_maximal(boxf, x, &cone), 1.0, "x={x}");
        }
        for x in [-1.5, 2.5] {
            assert_eq!(nontangential_maximal(boxf, x, &cone), 0.0, "x={x}");
        }
    }

    #[test]
    fn poisson_examples() {
        let spec = QuadratureSpec::default();
        let one = SampledFunction1D::new(-1e4, 1.0, vec![1.0; 20000]).unwrap();
        let v = poisson_extension(&one, (0.0, 1.0), &spec).unwrap();
        assert!((v - 1.0).abs() < 1e-4 && v < 1.0);
        let lam = 0.7;
        let g = SampledFunction1D::indicator(0.0, 1.0, 4.0 * lam, -2.0, 2.0, 0.125).unwrap();
        for z in [(0.5, 0.5), (0.01, 0.99), (0.99, 0.01), (0.5, 0.999)] {
            assert!(poisson_extension(&g, z, &spec).unwrap() > lam);
        }
        let g = SampledFunction1D::indicator(-1.0, 1.0, 1.0, -2.0, 2.0, 0.125).unwrap();
        let exact = |x: f64, y: f64| (((1.0 - x) / y).atan() + ((1.0 + x) / y).atan()) / std::f64::consts::PI;
        let q = poisson_extension(&g, (0.0, 100.0), &spec).unwrap();
        assert_relative_eq!(q, exact(0.0, 100.0), max_relative = 1e-9);
        assert!((q / (2.0 / (std::f64::consts::PI * 100.0)) - 1.0).abs() < 0.05);
        assert_relative_eq!(poisson_of_step(&g, (0.3, 0.2)), exact(0.3, 0.2), max_relative = 1e-12);
    }

    #[test]
    fn corpus_is_reproducible() {
        let s = CorpusSpec::default();
        assert_eq!(corpus_1d(7, 3, &s), corpus_1d(7, 3, &s));
        assert_ne!(corpus_1d(7, 3, &s), corpus_1d(8, 3, &s));
        assert_eq!(corpus_1d(7, 1, &s)[0].values.len(), 128);
    }

    #[test]
    fn small_suite_has_no_violations() {
        let cfg = MaximalSuiteConfig { functions: 6, probes: 20, lambdas: 5, probes_2d: 5, orlicz_functions: 2, ..Default::default() };
        let r = run_maximal_suite(&cfg);
        assert_eq!(r.violations(), 0, "{r:?}");
        assert!(r.one_third.checks == 120 && r.weak_type.checks == 60 && r.weighted_comparison.checks == 60);
        assert!(r.orlicz_ratio > 1.0 && r.orlicz_ratio < 100.0);
    }

    #[test]
    fn shifted_grids_lose_a_cubic_factor_for_alpha_one() {
        // one cell of mass at x in [-2.875, -2.75), y in [2.875, 3); probe just right of 1/3
        let mut v = vec![0.0; 64 * 32];
        v[23 * 64 + 9] = 1.0;
        let f = SampledFunction2D::new(-4.0, 0.125, 0.125, 64, 32, v).unwrap();
        let z = (0.39, 0.05);
        let fam = TranslatedFamily::default();
        let ratio = |alpha: f64| weighted_maximal(&f, alpha, z, &fam) / weighted_dyadic_maximal_shifted(&f, alpha, z, -6, 8);
        assert!(ratio(0.0) < 68.0, "{}", ratio(0.0));
        assert!(ratio(1.0) > 68.0, "{}", ratio(1.0));
    }
}
