//! Sample statistics used by the Monte Carlo estimators.

use serde::{Deserialize, Serialize};

/// Monte Carlo point estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
                n,
            };
        }
        // Two-pass for accuracy; sums run in index order so results are reproducible.
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / n as f64).sqrt(),
            n,
        }
    }

    /// Exact value (zero standard error).
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            stderr: 0.0,
            n: 1,
        }
    }

    /// `|mean - target| <= k * stderr`, with a floor for zero-variance estimates.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr + 1e-12 * (1.0 + target.abs())
    }
}

/// Estimate of `E[a - b]` from paired samples.
pub fn paired_difference(a: &[f64], b: &[f64]) -> Estimate {
    assert_eq!(a.len(), b.len());
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Estimate::from_samples(&d)
}

/// Estimate of the second moment `E[x^2]`.
pub fn second_moment(samples: &[f64]) -> Estimate {
    let sq: Vec<f64> = samples.iter().map(|x| x * x).collect();
    Estimate::from_samples(&sq)
}

pub fn standard_deviation(samples: &[f64]) -> f64 {
    let e = Estimate::from_samples(samples);
    e.stderr * (e.n as f64).sqrt()
}

/// Linear-interpolated sample quantile, `q` in `[0, 1]`.
pub fn quantile(samples: &[f64], q: f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    if s.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
}

/// Equal-width histogram normalised to a density (integrates to one).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    /// Probability mass per bin; sums to one.
    pub masses: Vec<f64>,
    /// Mass divided by bin width.
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn new(samples: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        };
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for &x in samples {
            let idx = (((x - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        let n = samples.len().max(1) as f64;
        let masses: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        Self {
            edges: (0..=bins).map(|i| lo + i as f64 * width).collect(),
            density: masses.iter().map(|m| m / width).collect(),
            masses,
        }
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// Silverman's rule-of-thumb bandwidth.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let sd = standard_deviation(samples);
    let iqr = quantile(samples, 0.75) - quantile(samples, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);
    if h > 0.0 {
        h
    } else {
        1e-3
    }
}

/// Gaussian kernel density estimate evaluated at `points`.
pub fn gaussian_kde(samples: &[f64], bandwidth: f64, points: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (samples.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    points
        .iter()
        .map(|&p| {
            norm * samples
                .iter()
                .map(|&x| (-0.5 * ((p - x) / bandwidth).powi(2)).exp())
                .sum::<f64>()
        })
        .collect()
}
