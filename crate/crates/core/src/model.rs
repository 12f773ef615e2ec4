//! Model parameters, intensity and payoff maps, and assumption checks.
//!
//! The intensity factors follow
//!
//! ```text
//! dX = jump(X-) dH + kappa_x (mean_x - X) dt + sigma_x X dW1
//! dY = kappa_y (mean_y - Y) dt + sigma_y sqrt(Y) (rho dW1 + sqrt(1 - rho^2) dW2)
//! ```
//!
//! with loss intensity `lam_l(X)` and default intensity `lam_r(Y)`. Time is
//! measured in years and intensities per year.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Claim-size distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClaimLaw {
    /// Gamma with shape `alpha` and rate `beta` (mean `alpha / beta`).
    Gamma { alpha: f64, beta: f64 },
    /// Finite support: `(size, probability)` pairs.
    Discrete { points: Vec<(f64, f64)> },
}

impl ClaimLaw {
    pub fn gamma(alpha: f64, beta: f64) -> Self {
        Self::Gamma { alpha, beta }
    }

    pub fn check(&self) -> Result<()> {
        match self {
            Self::Gamma { alpha, beta } => {
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    return Err(invalid(
                        "claim.alpha",
                        format!("must be positive, got {alpha}"),
                    ));
                }
                if !(*beta > 0.0 && beta.is_finite()) {
                    return Err(invalid(
                        "claim.beta",
                        format!("must be positive, got {beta}"),
                    ));
                }
            }
            Self::Discrete { points } => {
                if points.is_empty() {
                    return Err(invalid("claim.points", "empty support"));
                }
                if points
                    .iter()
                    .any(|&(z, p)| !(z >= 0.0 && z.is_finite()) || !(p >= 0.0))
                {
                    return Err(invalid(
                        "claim.points",
                        "sizes and probabilities must be nonnegative",
                    ));
                }
                let total: f64 = points.iter().map(|p| p.1).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(invalid(
                        "claim.points",
                        format!("probabilities sum to {total}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// First moment `m1`.
    pub fn mean(&self) -> f64 {
        match self {
            Self::Gamma { alpha, beta } => alpha / beta,
            Self::Discrete { points } => points.iter().map(|(z, p)| z * p).sum(),
        }
    }

    /// Second moment `m2`.
    pub fn second_moment(&self) -> f64 {
        match self {
            Self::Gamma { alpha, beta } => alpha * (alpha + 1.0) / (beta * beta),
            Self::Discrete { points } => points.iter().map(|(z, p)| z * z * p).sum(),
        }
    }

    /// Distribution function `P(Z <= z)`.
    pub fn cdf(&self, z: f64) -> f64 {
        if z < 0.0 {
            return 0.0;
        }
        match self {
            Self::Gamma { alpha, beta } => statrs::function::gamma::gamma_lr(*alpha, beta * z),
            Self::Discrete { points } => points.iter().filter(|(s, _)| *s <= z).map(|p| p.1).sum(),
        }
    }

    pub fn sampler(&self) -> ClaimSampler {
        match self {
            Self::Gamma { alpha, beta } => {
                ClaimSampler::Gamma(Gamma::new(*alpha, 1.0 / beta).expect("validated gamma law"))
            }
            Self::Discrete { points } => {
                let mut acc = 0.0;
                let cum = points
                    .iter()
                    .map(|&(z, p)| {
                        acc += p;
                        (acc, z)
                    })
                    .collect();
                ClaimSampler::Discrete(cum)
            }
        }
    }
}

/// Draws claim sizes.
#[derive(Clone, Debug)]
pub enum ClaimSampler {
    Gamma(Gamma<f64>),
    Discrete(Vec<(f64, f64)>),
}

impl ClaimSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Gamma(g) => g.sample(rng),
            Self::Discrete(cum) => {
                let u: f64 = rng.random();
                cum.iter()
                    .find(|(c, _)| u < *c)
                    .or(cum.last())
                    .map(|&(_, z)| z)
                    .unwrap_or(0.0)
            }
        }
    }
}

/// Reinsurance payoff. Both kinds are `min(cap, (l - attachment)^+)` applied
/// to the aggregate of transformed claims.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PayoffSpec {
    /// `min(cap, (L_T - priority)^+)`.
    StopLoss { priority: f64, cap: f64 },
    /// `min(cap, sum (Z_n - retention)^+)`.
    CappedXl { retention: f64, cap: f64 },
}

impl PayoffSpec {
    pub fn stop_loss(priority: f64, cap: f64) -> Self {
        Self::StopLoss { priority, cap }
    }

    pub fn check(&self) -> Result<()> {
        let (a, cap) = match self {
            Self::StopLoss { priority, cap } => (*priority, *cap),
            Self::CappedXl { retention, cap } => (*retention, *cap),
        };
        if !(a >= 0.0 && a.is_finite()) {
            return Err(invalid(
                "payoff",
                format!("attachment must be nonnegative, got {a}"),
            ));
        }
        if !(cap > 0.0 && cap.is_finite()) {
            return Err(invalid(
                "payoff.cap",
                format!("must be positive and finite, got {cap}"),
            ));
        }
        Ok(())
    }

    pub fn cap(&self) -> f64 {
        match self {
            Self::StopLoss { cap, .. } | Self::CappedXl { cap, .. } => *cap,
        }
    }

    /// Loss level where the payoff starts paying.
    pub fn attachment(&self) -> f64 {
        match self {
            Self::StopLoss { priority, .. } => *priority,
            Self::CappedXl { .. } => 0.0,
        }
    }

    /// Loss level where the cap binds.
    pub fn exhaustion(&self) -> f64 {
        self.attachment() + self.cap()
    }

    /// Per-claim contribution to the contract's loss process.
    pub fn claim_transform(&self, z: f64) -> f64 {
        match self {
            Self::StopLoss { .. } => z,
            Self::CappedXl { retention, .. } => (z - retention).max(0.0),
        }
    }

    /// Payoff as a function of the (transformed) terminal aggregate loss.
    pub fn evaluate(&self, l: f64) -> f64 {
        (l - self.attachment()).max(0.0).min(self.cap())
    }
}

/// Map from an intensity factor to an intensity, clamped to `[0, ceiling]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntensityMap {
    Identity,
    Constant { value: f64 },
}

impl IntensityMap {
    pub fn raw(&self, factor: f64) -> f64 {
        match self {
            Self::Identity => factor,
            Self::Constant { value } => *value,
        }
    }

    pub fn eval(&self, factor: f64, ceiling: f64) -> f64 {
        self.raw(factor).clamp(0.0, ceiling)
    }

    /// Derivative of the clamped map.
    pub fn derivative(&self, factor: f64, ceiling: f64) -> f64 {
        match self {
            Self::Identity if factor > 0.0 && factor < ceiling => 1.0,
            _ => 0.0,
        }
    }
}

/// How the loss-intensity factor jumps at the reinsurer's default.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpKind {
    /// `X -> X (1 + gamma)`.
    #[default]
    Relative,
    /// `X -> X + gamma`.
    Absolute,
}

fn default_ceiling() -> f64 {
    1e4
}

fn identity_map() -> IntensityMap {
    IntensityMap::Identity
}

/// All model coefficients plus contract and CDS terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub x0: f64,
    pub y0: f64,
    #[serde(rename = "gammaX")]
    pub gamma_x: f64,
    #[serde(rename = "jumpKind", default)]
    pub jump_kind: JumpKind,
    #[serde(rename = "kappaX")]
    pub kappa_x: f64,
    #[serde(rename = "meanX")]
    pub mean_x: f64,
    #[serde(rename = "sigmaX")]
    pub sigma_x: f64,
    #[serde(rename = "kappaY")]
    pub kappa_y: f64,
    #[serde(rename = "meanY")]
    pub mean_y: f64,
    #[serde(rename = "sigmaY")]
    pub sigma_y: f64,
    pub rho: f64,
    pub r: f64,
    #[serde(rename = "T")]
    pub maturity: f64,
    #[serde(rename = "deltaR")]
    pub delta_r: f64,
    #[serde(rename = "deltaCDS")]
    pub delta_cds: f64,
    pub zeta: f64,
    pub claim: ClaimLaw,
    pub payoff: PayoffSpec,
    #[serde(rename = "lamL", default = "identity_map")]
    pub lam_l_map: IntensityMap,
    #[serde(rename = "lamR", default = "identity_map")]
    pub lam_r_map: IntensityMap,
    #[serde(rename = "lamMax", default = "default_ceiling")]
    pub lam_max: f64,
}

impl ModelParams {
    pub fn lam_l(&self, x: f64) -> f64 {
        self.lam_l_map.eval(x, self.lam_max)
    }

    pub fn lam_r(&self, y: f64) -> f64 {
        self.lam_r_map.eval(y, self.lam_max)
    }

    /// Jump of `X` at default, `gamma^X(x)`.
    pub fn jump(&self, x: f64) -> f64 {
        match self.jump_kind {
            JumpKind::Relative => self.gamma_x * x,
            JumpKind::Absolute => self.gamma_x,
        }
    }

    /// Post-default factor `x + gamma^X(x)`.
    pub fn post_default_x(&self, x: f64) -> f64 {
        x + self.jump(x)
    }

    pub fn drift_x(&self, x: f64) -> f64 {
        self.kappa_x * (self.mean_x - x)
    }

    pub fn vol_x(&self, x: f64) -> f64 {
        self.sigma_x * x.max(0.0)
    }

    pub fn drift_y(&self, y: f64) -> f64 {
        self.kappa_y * (self.mean_y - y)
    }

    pub fn vol_y(&self, y: f64) -> f64 {
        self.sigma_y * y.max(0.0).sqrt()
    }

    /// The loss-intensity factor is constant between jumps (no drift, no diffusion).
    pub fn has_static_loss_factor(&self) -> bool {
        self.kappa_x == 0.0 && self.sigma_x == 0.0
    }

    /// Hard domain checks; [`validate`] reports the softer assumptions.
    pub fn check(&self) -> Result<()> {
        let positive = [
            ("x0", self.x0),
            ("y0", self.y0),
            ("T", self.maturity),
            ("zeta", self.zeta),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [("deltaR", self.delta_r), ("deltaCDS", self.delta_cds)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(invalid(name, format!("must lie in (0, 1], got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(invalid(
                "rho",
                format!("must lie in [0, 1], got {}", self.rho),
            ));
        }
        let nonneg = [
            ("gammaX", self.gamma_x),
            ("kappaX", self.kappa_x),
            ("sigmaX", self.sigma_x),
            ("kappaY", self.kappa_y),
            ("meanY", self.mean_y),
            ("sigmaY", self.sigma_y),
            ("r", self.r),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be nonnegative, got {v}")));
            }
        }
        if !(self.lam_max > 0.0) {
            return Err(invalid(
                "lamMax",
                format!("must be positive, got {}", self.lam_max),
            ));
        }
        self.claim.check()?;
        self.payoff.check()
    }

    pub fn feller(&self) -> FellerIndicator {
        let lhs = 2.0 * self.kappa_y * self.mean_y;
        let rhs = self.sigma_y * self.sigma_y;
        FellerIndicator {
            lhs,
            rhs,
            satisfied: lhs >= rhs,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FellerIndicator {
    /// `2 kappa_y mean_y`.
    pub lhs: f64,
    /// `sigma_y^2`.
    pub rhs: f64,
    pub satisfied: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Warn,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub feller: FellerIndicator,
    pub claim_m1: f64,
    pub claim_m2: f64,
}

impl ValidationReport {
    pub fn status(&self) -> Status {
        self.checks
            .iter()
            .map(|c| c.status)
            .max()
            .unwrap_or(Status::Pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn is_usable(&self) -> bool {
        self.status() != Status::Fail
    }
}

fn push(checks: &mut Vec<Check>, name: &str, status: Status, detail: impl Into<String>) {
    checks.push(Check {
        name: name.to_string(),
        status,
        detail: detail.into(),
    });
}

/// Grid over which ellipticity lower bounds are reported.
fn state_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
}

/// Checks the regularity assumptions behind the valuation equations.
pub fn validate(params: &ModelParams) -> ValidationReport {
    let mut checks = Vec::new();
    match params.check() {
        Ok(()) => push(
            &mut checks,
            "domain",
            Status::Pass,
            "parameters inside their domains",
        ),
        Err(e) => push(&mut checks, "domain", Status::Fail, e.to_string()),
    }

    let feller = params.feller();
    let y_lo = 0.1
        * params
            .y0
            .min(params.mean_y.max(f64::MIN_POSITIVE))
            .max(1e-6);
    let y_hi = 10.0 * params.y0.max(params.mean_y);
    let x_lo = 0.1
        * params
            .x0
            .min(if params.mean_x > 0.0 {
                params.mean_x
            } else {
                params.x0
            })
            .max(1e-6);
    let x_hi = 10.0
        * params
            .post_default_x(params.x0)
            .max(params.mean_x)
            .max(params.x0);

    // (A1) Lipschitz coefficients.
    if params.sigma_x > 0.0 {
        push(
            &mut checks,
            "A1",
            Status::Warn,
            "geometric volatility sigma_x * x: Lipschitz but degenerate at x = 0, outside the uniformly elliptic family",
        );
    } else if params.sigma_y > 0.0 && !feller.satisfied {
        push(
            &mut checks,
            "A1",
            Status::Warn,
            "sigma_y * sqrt(y) is not Lipschitz at 0 and the Feller condition fails, so Y reaches 0",
        );
    } else {
        push(
            &mut checks,
            "A1",
            Status::Pass,
            "linear drifts; sqrt diffusion Lipschitz on the strictly positive region kept by the Feller condition",
        );
    }

    // (A2) uniform ellipticity, or (A2') when the loss factor has no diffusion.
    if params.sigma_x == 0.0 {
        let beta = state_grid(y_lo, y_hi, 64)
            .map(|y| params.vol_y(y))
            .fold(f64::INFINITY, f64::min);
        if params.sigma_y == 0.0 {
            push(
                &mut checks,
                "A2'",
                Status::Warn,
                "degenerate diffusion: sigma_y = 0 (admissible only for the sigma_x = sigma_y = 0 special case)",
            );
        } else {
            push(
                &mut checks,
                "A2'",
                Status::Pass,
                format!("sigma_y >= {beta:.6} on y in [{y_lo:.4}, {y_hi:.4}]"),
            );
        }
    } else {
        let mut beta = f64::INFINITY;
        for x in state_grid(x_lo, x_hi, 32) {
            for y in state_grid(y_lo, y_hi, 32) {
                let a = params.vol_x(x).powi(2);
                let c = params.vol_y(y).powi(2);
                let b = params.rho * params.vol_x(x) * params.vol_y(y);
                let min_eig = 0.5 * (a + c) - (0.25 * (a - c).powi(2) + b * b).sqrt();
                beta = beta.min(min_eig);
            }
        }
        push(
            &mut checks,
            "A2",
            Status::Warn,
            format!(
                "smallest eigenvalue of the factor covariance on x in [{x_lo:.3}, {x_hi:.3}], y in [{y_lo:.4}, {y_hi:.4}] is {beta:.3e}; it vanishes as x or y -> 0"
            ),
        );
    }

    // (A3) bounded, Lipschitz intensities.
    if params.lam_max.is_finite() {
        push(
            &mut checks,
            "A3",
            Status::Pass,
            format!("intensities clamped to [0, {}]", params.lam_max),
        );
    } else {
        push(
            &mut checks,
            "A3",
            Status::Fail,
            "intensity ceiling is not finite",
        );
    }

    // (A4) finite second moment of claims.
    let m2 = params.claim.second_moment();
    if m2.is_finite() {
        push(
            &mut checks,
            "A4",
            Status::Pass,
            format!("claim second moment {m2}"),
        );
    } else {
        push(
            &mut checks,
            "A4",
            Status::Fail,
            "claim second moment is infinite",
        );
    }

    push(
        &mut checks,
        "feller",
        if feller.satisfied {
            Status::Pass
        } else {
            Status::Warn
        },
        format!(
            "2 kappa_y mean_y = {} vs sigma_y^2 = {}",
            feller.lhs, feller.rhs
        ),
    );

    ValidationReport {
        checks,
        feller,
        claim_m1: params.claim.mean(),
        claim_m2: m2,
    }
}
