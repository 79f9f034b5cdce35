//! Log-uniform sampling grids and edge-trend tests used to tell a bounded sampled
//! supremum from one that keeps growing past the sampled range.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogGrid {
    pub t_min: f64,
    pub t_max: f64,
    /// Total number of points over [t_min, t_max].
    pub points: usize,
}

impl Default for LogGrid {
    fn default() -> Self {
        LogGrid { t_min: 1e-6, t_max: 1e6, points: 512 }
    }
}

impl LogGrid {
    pub fn new(t_min: f64, t_max: f64, points: usize) -> Self {
        LogGrid { t_min, t_max, points }
    }

    pub fn is_valid(&self) -> bool {
        self.t_min > 0.0 && self.t_max > self.t_min && self.t_max.is_finite() && self.points >= 2
    }

    pub fn values(&self) -> Vec<f64> {
        let (a, b) = (self.t_min.ln(), self.t_max.ln());
        let n = self.points.max(2);
        (0..n)
            .map(|i| {
                if i == 0 {
                    self.t_min
                } else if i == n - 1 {
                    self.t_max
                } else {
                    (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                }
            })
            .collect()
    }

    pub fn decades(&self) -> f64 {
        (self.t_max / self.t_min).log10()
    }

    pub fn per_decade(&self) -> f64 {
        (self.points.max(2) - 1) as f64 / self.decades()
    }

    /// Same density, range widened by `decades` on both sides.
    pub fn extended(&self, decades: f64) -> LogGrid {
        let f = 10f64.powf(decades);
        let n = (self.per_decade() * (self.decades() + 2.0 * decades)).round() as usize + 1;
        LogGrid { t_min: self.t_min / f, t_max: self.t_max * f, points: n }
    }

    /// Same range with `n` points.
    pub fn resampled(&self, n: usize) -> LogGrid {
        LogGrid { points: n, ..self.clone() }
    }
}

/// Least-squares slopes of log10(value) against log10(t) near each end of a sample.
/// Both slopes are oriented so that a positive number means growth toward that edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeTrend {
    pub left: f64,
    pub right: f64,
}

impl EdgeTrend {
    pub fn max(&self) -> f64 {
        self.left.max(self.right)
    }
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Edge slopes over the outermost `window` decades. Nonpositive values are ignored.
pub fn edge_trend(ts: &[f64], vs: &[f64], window: f64) -> EdgeTrend {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(vs)
        .filter(|(&t, &v)| t > 0.0 && v > 0.0 && v.is_finite())
        .map(|(&t, &v)| (t.log10(), v.log10()))
        .collect();
    if pts.len() < 2 {
        return EdgeTrend { left: 0.0, right: 0.0 };
    }
    let lo = pts.first().unwrap().0;
    let hi = pts.last().unwrap().0;
    let left: Vec<_> = pts.iter().copied().filter(|p| p.0 <= lo + window).collect();
    let right: Vec<_> = pts.iter().copied().filter(|p| p.0 >= hi - window).collect();
    EdgeTrend { left: -ls_slope(&left), right: ls_slope(&right) }
}

/// Edge slopes per octave for a sequence indexed by consecutive dyadic scales.
/// Uses the last `window` steps at each end; zeros and non-finite values are skipped.
pub fn octave_trend(vs: &[f64], window: usize) -> EdgeTrend {
    let pts: Vec<(f64, f64)> = vs
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0 && v.is_finite())
        .map(|(i, &v)| (i as f64, v.log2()))
        .collect();
    if pts.len() < 2 {
        return EdgeTrend { left: 0.0, right: 0.0 };
    }
    let w = window.max(1) as f64;
    let lo = pts.first().unwrap().0;
    let hi = pts.last().unwrap().0;
    let left: Vec<_> = pts.iter().copied().filter(|p| p.0 <= lo + w).collect();
    let right: Vec<_> = pts.iter().copied().filter(|p| p.0 >= hi - w).collect();
    EdgeTrend { left: -ls_slope(&left), right: ls_slope(&right) }
}

/// Index of the maximum (first one on ties); None for empty or all-NaN input.
pub fn argmax(vs: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in vs.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            None => best = Some(i),
            Some(b) if v > vs[b] => best = Some(i),
            _ => {}
        }
    }
    best
}
