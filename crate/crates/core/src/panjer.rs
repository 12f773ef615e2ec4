//! Lattice claim laws, compound Poisson aggregation and stop-loss transforms.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{ClaimLaw, PayoffSpec};

/// Default bound on the number of lattice points of a claim law.
pub const DEFAULT_LATTICE_BOUND: usize = 1 << 20;

/// Claim law on the lattice `{0, h, 2h, ...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedClaims {
    pub h: f64,
    pub masses: Vec<f64>,
    /// Probability mass dropped beyond the last lattice point.
    pub truncated: f64,
}

impl DiscretizedClaims {
    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.masses
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * self.h * p)
            .sum()
    }

    /// Claims that are a point mass at `k` lattice steps.
    pub fn point_mass(h: f64, k: usize) -> Self {
        let mut masses = vec![0.0; k + 1];
        masses[k] = 1.0;
        Self {
            h,
            masses,
            truncated: 0.0,
        }
    }
}

/// Rounds claims to the nearest lattice point: the mass of
/// `[kh - h/2, kh + h/2)` goes to `kh`. The support stops at the first point
/// whose upper tail is below `tol`.
pub fn discretize_claims(
    law: &ClaimLaw,
    h: f64,
    tol: f64,
    bound: usize,
) -> Result<DiscretizedClaims> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(
            "h",
            format!("lattice step must be positive, got {h}"),
        ));
    }
    law.check()?;
    match law {
        ClaimLaw::Discrete { points } => {
            let top = points
                .iter()
                .filter(|p| p.1 > 0.0)
                .map(|&(z, _)| (z / h + 0.5).floor() as usize)
                .max()
                .unwrap_or(0);
            if top >= bound {
                return Err(Error::LatticeBound {
                    needed: top + 1,
                    bound,
                });
            }
            let mut masses = vec![0.0; top + 1];
            for &(z, p) in points {
                masses[(z / h + 0.5).floor() as usize] += p;
            }
            Ok(DiscretizedClaims {
                h,
                masses,
                truncated: 0.0,
            })
        }
        ClaimLaw::Gamma { .. } => {
            let mut masses = Vec::new();
            let mut lower = 0.0;
            loop {
                let k = masses.len();
                if k >= bound {
                    return Err(Error::LatticeBound {
                        needed: k + 1,
                        bound,
                    });
                }
                let upper = law.cdf((k as f64 + 0.5) * h);
                masses.push((upper - lower).max(0.0));
                lower = upper;
                if 1.0 - upper < tol {
                    break;
                }
            }
            let truncated = (1.0 - lower).max(0.0);
            Ok(DiscretizedClaims {
                h,
                masses,
                truncated,
            })
        }
    }
}

/// Aggregate law of a compound Poisson sum with mean count `lambda` on the
/// lattice points `0..len`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateLaw {
    pub h: f64,
    pub lambda: f64,
    pub probs: Vec<f64>,
}

impl AggregateLaw {
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * self.h * p)
            .sum()
    }
}

/// Panjer recursion for the compound Poisson law with intensity
/// `intensity` over `horizon`, computed on lattice points `0..len`.
///
/// The recursion runs on a rescaled sequence so that `g_0` may underflow
/// (large `Lambda`) without losing the rest of the distribution.
pub fn panjer_aggregate(
    claims: &DiscretizedClaims,
    intensity: f64,
    horizon: f64,
    len: usize,
) -> Result<AggregateLaw> {
    if !(intensity >= 0.0) || !(horizon >= 0.0) {
        return Err(invalid(
            "intensity",
            "intensity and horizon must be nonnegative",
        ));
    }
    let lambda = intensity * horizon;
    let len = len.max(1);
    let mut g = vec![0.0; len];
    if lambda == 0.0 {
        g[0] = 1.0;
        return Ok(AggregateLaw {
            h: claims.h,
            lambda,
            probs: g,
        });
    }
    let p = &claims.masses;
    let log_g0 = -lambda * (1.0 - p.first().copied().unwrap_or(0.0));
    // Work with g_k * exp(-log_g0 - shift); shift grows when values get large.
    let mut shift = 0.0;
    g[0] = 1.0;
    let jp: Vec<f64> = p.iter().enumerate().map(|(j, q)| j as f64 * q).collect();
    for k in 1..len {
        let top = k.min(p.len() - 1);
        let mut acc = 0.0;
        for j in 1..=top {
            acc += jp[j] * g[k - j];
        }
        g[k] = lambda / k as f64 * acc;
        if g[k] > 1e200 {
            let s = g[k];
            for v in &mut g[..=k] {
                *v /= s;
            }
            shift += s.ln();
        }
    }
    let scale = log_g0 + shift;
    for v in &mut g {
        *v = if *v == 0.0 {
            0.0
        } else {
            (v.ln() + scale).exp()
        };
    }
    Ok(AggregateLaw {
        h: claims.h,
        lambda,
        probs: g,
    })
}

/// `pi(d) = E[(A - d)^+]` for a lattice aggregate `A`, exact for real `d`
/// up to the truncation point of the law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopLossTransform {
    h: f64,
    mean: f64,
    cum: Vec<f64>,
    cum_first: Vec<f64>,
}

impl StopLossTransform {
    /// `mean` is `E[A]`, normally `Lambda` times the lattice claim mean.
    pub fn new(law: &AggregateLaw, mean: f64) -> Self {
        let mut cum = Vec::with_capacity(law.probs.len());
        let mut cum_first = Vec::with_capacity(law.probs.len());
        let (mut c, mut s) = (0.0, 0.0);
        for (m, p) in law.probs.iter().enumerate() {
            c += p;
            s += m as f64 * p;
            cum.push(c);
            cum_first.push(s);
        }
        Self {
            h: law.h,
            mean,
            cum,
            cum_first,
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Largest `d` for which [`Self::excess`] is exact.
    pub fn horizon(&self) -> f64 {
        self.h * self.cum.len() as f64
    }

    /// `E[(A - d)^+] = E[A] - d + E[(d - A)^+]`.
    pub fn excess(&self, d: f64) -> f64 {
        if d <= 0.0 {
            return self.mean - d;
        }
        let j = ((d / self.h).floor() as usize).min(self.cum.len() - 1);
        (self.mean - d + d * self.cum[j] - self.h * self.cum_first[j]).max(0.0)
    }

    /// `E[min(cap, (l + A - K)^+)]`.
    pub fn layer(&self, l: f64, attachment: f64, cap: f64) -> f64 {
        (self.excess(attachment - l) - self.excess(attachment + cap - l)).clamp(0.0, cap)
    }

    /// `P(A <= d)`.
    pub fn cdf(&self, d: f64) -> f64 {
        if d < 0.0 {
            return 0.0;
        }
        let j = ((d / self.h).floor() as usize).min(self.cum.len() - 1);
        self.cum[j]
    }
}

/// Lattice settings for contract valuation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub h: f64,
    pub tol: f64,
    pub bound: usize,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            h: 0.0625,
            tol: 1e-10,
            bound: DEFAULT_LATTICE_BOUND,
        }
    }
}

/// Expected layer payoff `E[phi(l + A)]` as a function of the current loss,
/// for compound Poisson `A` with a fixed mean count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerValue {
    transform: StopLossTransform,
    attachment: f64,
    cap: f64,
}

impl LayerValue {
    pub fn new(claims: &DiscretizedClaims, lambda: f64, payoff: &PayoffSpec) -> Result<Self> {
        let len = (payoff.exhaustion() / claims.h).ceil() as usize + 2;
        let law = panjer_aggregate(claims, lambda, 1.0, len)?;
        Ok(Self {
            transform: StopLossTransform::new(&law, lambda * claims.mean()),
            attachment: payoff.attachment(),
            cap: payoff.cap(),
        })
    }

    pub fn value(&self, l: f64) -> f64 {
        self.transform.layer(l, self.attachment, self.cap)
    }
}

/// Lattice law of the claims as seen by the contract (after the per-claim
/// transform of the payoff).
pub fn contract_claims(
    law: &ClaimLaw,
    payoff: &PayoffSpec,
    cfg: &LatticeConfig,
) -> Result<DiscretizedClaims> {
    let claims = discretize_claims(law, cfg.h, cfg.tol, cfg.bound)?;
    match payoff {
        PayoffSpec::StopLoss { .. } => Ok(claims),
        PayoffSpec::CappedXl { retention, .. } => {
            // Shift the lattice by the retention: (Z - M)^+ on the same grid.
            let shift = (retention / cfg.h + 0.5).floor() as usize;
            let mut masses = vec![0.0; claims.masses.len().saturating_sub(shift).max(1)];
            for (k, p) in claims.masses.iter().enumerate() {
                masses[k.saturating_sub(shift)] += p;
            }
            Ok(DiscretizedClaims {
                h: cfg.h,
                masses,
                truncated: claims.truncated,
            })
        }
    }
}
