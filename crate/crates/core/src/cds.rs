//! CDS on the reinsurer under an affine (CIR) default intensity.
//!
//! With `s(tau, y) = E[exp(-int_0^tau Y_u du) | Y_0 = y] = exp(ln A(tau) - B(tau) y)`
//! and default density `h = -ds/dtau`, the pre-default value of the CDS to
//! the protection buyer is
//!
//! ```text
//! g(t, y) = int_0^{T-t} e^{-r tau} (delta h(tau, y) - zeta s(tau, y)) dtau.
//! ```

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{IntensityMap, ModelParams};
use crate::paths::ScenarioPath;
use crate::quad::CompositeRule;

/// `dY = kappa (mean - Y) dt + sigma sqrt(Y) dW`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CirParams {
    pub kappa: f64,
    pub mean: f64,
    pub sigma: f64,
}

/// `B`, `ln A` and `B'` at one horizon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Riccati {
    pub b: f64,
    pub ln_a: f64,
    pub db: f64,
}

impl CirParams {
    pub fn riccati(&self, tau: f64) -> Riccati {
        let CirParams { kappa, mean, sigma } = *self;
        let (b, ln_a) = if sigma.abs() < 1e-4 {
            if kappa.abs() < 1e-12 {
                (tau, 0.0)
            } else {
                let b = -(-kappa * tau).exp_m1() / kappa;
                (b, -mean * (tau - b))
            }
        } else {
            let g = (kappa * kappa + 2.0 * sigma * sigma).sqrt();
            let e = (g * tau).exp_m1();
            let den = (g + kappa) * e + 2.0 * g;
            let b = 2.0 * e / den;
            let ln_a = 2.0 * kappa * mean / (sigma * sigma)
                * ((2.0 * g).ln() + 0.5 * (g + kappa) * tau - den.ln());
            (b, ln_a)
        };
        let db = 1.0 - kappa * b - 0.5 * sigma * sigma * b * b;
        Riccati { b, ln_a, db }
    }
}

/// `E[exp(-int_t^u Y_s ds) | Y_t = y]` in closed form.
pub fn affine_survival(cir: &CirParams, t: f64, u: f64, y: f64) -> f64 {
    let r = cir.riccati(u - t);
    (r.ln_a - r.b * y).exp()
}

/// Default intensity as seen by the CDS.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum HazardModel {
    /// `lam_r(Y) = Y` with CIR dynamics.
    Cir(CirParams),
    /// `lam_r` constant.
    Flat(f64),
}

/// Survival, default density and their first two `y` derivatives at one horizon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HazardTerms {
    pub s: f64,
    pub s_y: f64,
    pub s_yy: f64,
    pub h: f64,
    pub h_y: f64,
    pub h_yy: f64,
}

impl HazardModel {
    pub fn from_params(p: &ModelParams) -> Self {
        match p.lam_r_map {
            IntensityMap::Constant { value } => HazardModel::Flat(value.clamp(0.0, p.lam_max)),
            IntensityMap::Identity => HazardModel::Cir(CirParams {
                kappa: p.kappa_y,
                mean: p.mean_y,
                sigma: p.sigma_y,
            }),
        }
    }

    /// Horizon-only quantities, reusable across `y`.
    pub fn node(&self, tau: f64) -> HazardNode {
        match self {
            HazardModel::Cir(c) => HazardNode {
                riccati: c.riccati(tau),
                kappa_mean: c.kappa * c.mean,
                flat: None,
            },
            HazardModel::Flat(c) => HazardNode {
                riccati: Riccati {
                    b: 0.0,
                    ln_a: -c * tau,
                    db: 0.0,
                },
                kappa_mean: 0.0,
                flat: Some(*c),
            },
        }
    }

    pub fn terms(&self, tau: f64, y: f64) -> HazardTerms {
        self.node(tau).terms(y)
    }

    pub fn survival(&self, tau: f64, y: f64) -> f64 {
        self.node(tau).terms(y).s
    }

    pub fn density(&self, tau: f64, y: f64) -> f64 {
        self.node(tau).terms(y).h
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HazardNode {
    riccati: Riccati,
    kappa_mean: f64,
    flat: Option<f64>,
}

impl HazardNode {
    pub fn terms(&self, y: f64) -> HazardTerms {
        let Riccati { b, ln_a, db } = self.riccati;
        let s = (ln_a - b * y).exp();
        if let Some(c) = self.flat {
            return HazardTerms {
                s,
                s_y: 0.0,
                s_yy: 0.0,
                h: c * s,
                h_y: 0.0,
                h_yy: 0.0,
            };
        }
        let q = self.kappa_mean * b + db * y;
        HazardTerms {
            s,
            s_y: -b * s,
            s_yy: b * b * s,
            h: s * q,
            h_y: s * (db - b * q),
            h_yy: s * (b * b * q - 2.0 * b * db),
        }
    }
}

/// CDS terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdsTerms {
    pub r: f64,
    pub delta: f64,
    pub zeta: f64,
    pub maturity: f64,
}

/// Value `g`, its derivatives, and the two legs at one `(t, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdsPoint {
    pub g: f64,
    pub g_y: f64,
    pub g_yy: f64,
    pub g_t: f64,
    pub protection: f64,
    pub annuity: f64,
}

/// Pre-default CDS value surface.
#[derive(Clone, Debug, PartialEq)]
pub struct CdsCurve {
    pub hazard: HazardModel,
    pub terms: CdsTerms,
    rule: CompositeRule,
}

const ORDER: usize = 16;
const MAX_PANELS: usize = 1024;

impl CdsCurve {
    pub fn new(p: &ModelParams) -> Result<Self> {
        Self::with_terms(
            HazardModel::from_params(p),
            CdsTerms {
                r: p.r,
                delta: p.delta_cds,
                zeta: p.zeta,
                maturity: p.maturity,
            },
            [p.y0, p.mean_y],
        )
    }

    /// Builds a curve, doubling the quadrature panels until the legs at the
    /// reference factor levels agree to `1e-12`.
    pub fn with_terms(hazard: HazardModel, terms: CdsTerms, reference: [f64; 2]) -> Result<Self> {
        if !(terms.maturity > 0.0) {
            return Err(invalid("T", "must be positive"));
        }
        let mut panels = 1;
        let ys = [
            reference[0],
            reference[1],
            10.0 * reference[0].max(reference[1]),
            0.0,
        ];
        loop {
            let coarse = Self {
                hazard,
                terms,
                rule: CompositeRule::new(panels, ORDER),
            };
            let fine = Self {
                hazard,
                terms,
                rule: CompositeRule::new(2 * panels, ORDER),
            };
            let gap = ys
                .iter()
                .map(|&y| {
                    let (a, b) = (coarse.point(0.0, y), fine.point(0.0, y));
                    (a.protection - b.protection)
                        .abs()
                        .max((a.annuity - b.annuity).abs())
                })
                .fold(0.0, f64::max);
            if gap < 1e-12 {
                return Ok(coarse);
            }
            panels *= 2;
            if panels > MAX_PANELS {
                return Err(Error::Quadrature(format!(
                    "CDS legs still differ by {gap:e} with {MAX_PANELS} panels"
                )));
            }
        }
    }

    pub fn panels(&self) -> usize {
        self.rule.panels()
    }

    pub fn with_zeta(&self, zeta: f64) -> Self {
        let mut c = self.clone();
        c.terms.zeta = zeta;
        c
    }

    /// All quantities at `(t, y)` in one pass over the quadrature nodes.
    pub fn point(&self, t: f64, y: f64) -> CdsPoint {
        self.slice(t).point(y)
    }

    pub fn value(&self, t: f64, y: f64) -> f64 {
        self.point(t, y).g
    }

    pub fn value_y(&self, t: f64, y: f64) -> f64 {
        self.point(t, y).g_y
    }

    /// `zeta* = protection / annuity` at `(0, y)`.
    pub fn fair_spread(&self, y: f64) -> Result<f64> {
        let p = self.point(0.0, y);
        if !(p.annuity > 0.0) {
            return Err(invalid("annuity", "premium leg has no value"));
        }
        Ok(p.protection / p.annuity)
    }

    /// Quadrature nodes for a fixed valuation time.
    pub fn slice(&self, t: f64) -> CdsSlice {
        let tau_max = (self.terms.maturity - t).max(0.0);
        let nodes = self
            .rule
            .points(0.0, tau_max)
            .into_iter()
            .map(|(tau, w)| (w * (-self.terms.r * tau).exp(), self.hazard.node(tau)))
            .collect();
        CdsSlice {
            terms: self.terms,
            end: self.hazard.node(tau_max),
            end_discount: (-self.terms.r * tau_max).exp(),
            nodes,
            expired: tau_max == 0.0,
        }
    }

    /// `Lambda_t = (1 - H_t) g(t, Y_t)` at grid index `k` of a path.
    pub fn lambda_on_path(&self, path: &ScenarioPath, k: usize) -> f64 {
        if path.hr_at(k) == 1.0 {
            0.0
        } else {
            self.value(path.time(k), path.y_at(k))
        }
    }

    /// Increment of the discounted gains process over `(t_from, t_to]`.
    pub fn gains_increment(&self, path: &ScenarioPath, from: usize, to: usize) -> f64 {
        let (a, b) = (path.time(from), path.time(to));
        let lam_a = self.lambda_on_path(path, from);
        let lam_b = self.lambda_on_path(path, to);
        self.gains_between(path.tau, a, b, lam_a, lam_b)
    }

    /// Gains increment given the CDS values already evaluated at both ends.
    pub fn gains_between(&self, tau: f64, a: f64, b: f64, lam_a: f64, lam_b: f64) -> f64 {
        let r = self.terms.r;
        let disc = |u: f64| (-r * u).exp();
        let mut ds = disc(b) * lam_b - disc(a) * lam_a;
        let stop = b.min(tau);
        if stop > a {
            ds -= self.terms.zeta * discount_integral(r, a, stop);
        }
        if tau > a && tau <= b {
            ds += self.terms.delta * disc(tau);
        }
        ds
    }

    /// Writes `t, y, g, g_y` on a rectangular grid.
    pub fn write_csv<W: Write>(&self, ts: &[f64], ys: &[f64], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "y", "g", "g_y"])?;
        for &t in ts {
            let slice = self.slice(t);
            for &y in ys {
                let p = slice.point(y);
                w.write_record(&[
                    t.to_string(),
                    y.to_string(),
                    p.g.to_string(),
                    p.g_y.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `int_a^b e^{-r u} du`.
pub fn discount_integral(r: f64, a: f64, b: f64) -> f64 {
    if r == 0.0 {
        b - a
    } else {
        ((-r * a).exp() - (-r * b).exp()) / r
    }
}

/// CDS evaluator at a fixed time with cached horizon terms.
#[derive(Clone, Debug)]
pub struct CdsSlice {
    terms: CdsTerms,
    nodes: Vec<(f64, HazardNode)>,
    end: HazardNode,
    end_discount: f64,
    expired: bool,
}

impl CdsSlice {
    pub fn point(&self, y: f64) -> CdsPoint {
        let CdsTerms { delta, zeta, .. } = self.terms;
        let mut out = CdsPoint {
            g: 0.0,
            g_y: 0.0,
            g_yy: 0.0,
            g_t: 0.0,
            protection: 0.0,
            annuity: 0.0,
        };
        if self.expired {
            return out;
        }
        for (w, node) in &self.nodes {
            let q = node.terms(y);
            out.protection += w * delta * q.h;
            out.annuity += w * q.s;
            out.g_y += w * (delta * q.h_y - zeta * q.s_y);
            out.g_yy += w * (delta * q.h_yy - zeta * q.s_yy);
        }
        out.g = out.protection - zeta * out.annuity;
        let e = self.end.terms(y);
        out.g_t = -self.end_discount * (delta * e.h - zeta * e.s);
        out
    }

    pub fn value(&self, y: f64) -> f64 {
        self.point(y).g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::Preset;
    use proptest::prelude::*;

    const CIR: CirParams = CirParams {
        kappa: 1.0,
        mean: 0.05,
        sigma: 0.1,
    };

    #[test]
    fn survival_examples() {
        assert_eq!(affine_survival(&CIR, 0.3, 0.3, 0.05), 1.0);
        let frozen = CirParams {
            kappa: 0.0,
            mean: 0.0,
            sigma: 0.0,
        };
        assert!((affine_survival(&frozen, 0.0, 2.0, 0.07) - (-0.14f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn riccati_solves_its_ode() {
        for tau in [0.1, 0.5, 1.0, 3.0] {
            let h = 1e-5;
            let (lo, hi, mid) = (CIR.riccati(tau - h), CIR.riccati(tau + h), CIR.riccati(tau));
            let db = (hi.b - lo.b) / (2.0 * h);
            let dlna = (hi.ln_a - lo.ln_a) / (2.0 * h);
            assert!((db - mid.db).abs() < 1e-8);
            assert!((dlna + CIR.kappa * CIR.mean * mid.b).abs() < 1e-8);
        }
    }

    #[test]
    fn small_sigma_matches_limit() {
        let near = CirParams { sigma: 2e-4, ..CIR };
        let zero = CirParams { sigma: 0.0, ..CIR };
        let (a, b) = (near.riccati(1.0), zero.riccati(1.0));
        assert!((a.b - b.b).abs() < 1e-7 && (a.ln_a - b.ln_a).abs() < 1e-7);
    }

    fn flat_curve(c: f64, zeta: f64) -> CdsCurve {
        CdsCurve::with_terms(
            HazardModel::Flat(c),
            CdsTerms {
                r: 0.0,
                delta: 1.0,
                zeta,
                maturity: 1.0,
            },
            [c, c],
        )
        .unwrap()
    }

    #[test]
    fn flat_hazard_examples() {
        let c = 0.05;
        let curve = flat_curve(c, 0.0);
        assert_eq!(curve.value(1.0, 0.3), 0.0);
        assert!((curve.value(0.0, 0.3) - (1.0 - (-c).exp())).abs() < 1e-14);
        assert!((curve.fair_spread(0.3).unwrap() - c).abs() < 1e-10);
    }

    #[test]
    fn zero_recovery_gives_zero_spread() {
        let mut p = Preset::Case1.params();
        p.delta_cds = 1.0;
        let curve = CdsCurve::new(&p).unwrap();
        let zero = CdsCurve::with_terms(
            curve.hazard,
            CdsTerms {
                delta: 0.0,
                ..curve.terms
            },
            [0.05, 0.05],
        )
        .unwrap();
        assert_eq!(zero.fair_spread(0.05).unwrap(), 0.0);
    }

    #[test]
    fn fair_spread_zeroes_the_contract() {
        let p = Preset::Case1.params();
        let curve = CdsCurve::new(&p).unwrap();
        assert!(curve.value(0.0, p.y0).abs() < 1e-10);
        assert!(p.zeta > 0.0 && p.zeta < 1.0);
        assert_eq!(curve.value(p.maturity, 0.2), 0.0);
        assert_eq!(curve.value_y(p.maturity, 0.2), 0.0);
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let curve = CdsCurve::new(&Preset::Case1.params()).unwrap();
        let (t, y, e) = (0.3, 0.07, 1e-4);
        let p = curve.point(t, y);
        let gy = (curve.value(t, y + e) - curve.value(t, y - e)) / (2.0 * e);
        let gyy = (curve.value(t, y + e) - 2.0 * p.g + curve.value(t, y - e)) / (e * e);
        let gt = (curve.value(t + e, y) - curve.value(t - e, y)) / (2.0 * e);
        assert!((p.g_y - gy).abs() < 1e-8);
        assert!((p.g_yy - gyy).abs() < 1e-4);
        assert!((p.g_t - gt).abs() < 1e-8);
    }

    #[test]
    fn gains_with_frozen_state() {
        let curve = CdsCurve::new(&Preset::Case1.params()).unwrap();
        let (y, a, b) = (0.05, 0.2, 0.6);
        let lam_a = curve.value(a, y);
        let lam_b = curve.value(b, y);
        let ds = curve.gains_between(f64::INFINITY, a, b, lam_a, lam_b);
        assert!((ds - (lam_b - lam_a - curve.terms.zeta * (b - a))).abs() < 1e-15);
        let full = curve.gains_between(f64::INFINITY, 0.0, 1.0, curve.value(0.0, y), 0.0);
        assert!((full + curve.value(0.0, y) + curve.terms.zeta).abs() < 1e-15);
    }

    #[test]
    fn default_payment_in_gains() {
        let curve = CdsCurve::new(&Preset::Case1.params()).unwrap();
        let ds = curve.gains_between(0.5, 0.4, 0.6, 0.01, 0.0);
        let expected = -0.01 - curve.terms.zeta * 0.1 + 1.0;
        assert!((ds - expected).abs() < 1e-14);
    }

    #[test]
    fn protection_only_value_is_increasing_in_y() {
        let curve = CdsCurve::new(&Preset::Case1.params())
            .unwrap()
            .with_zeta(0.0);
        for t in [0.0, 0.4, 0.9] {
            for y in [0.001, 0.02, 0.05, 0.2, 0.6] {
                assert!(curve.point(t, y).g_y >= 0.0);
            }
        }
    }

    proptest! {
        #[test]
        fn survival_decreases_in_horizon_and_level(u1 in 0.0f64..5.0, u2 in 0.0f64..5.0,
                                                    y1 in 0.0f64..1.0, y2 in 0.0f64..1.0) {
            let (ul, uh) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
            let (yl, yh) = if y1 <= y2 { (y1, y2) } else { (y2, y1) };
            prop_assert!(affine_survival(&CIR, 0.0, uh, y1) <= affine_survival(&CIR, 0.0, ul, y1) + 1e-15);
            prop_assert!(affine_survival(&CIR, 0.0, u1, yh) <= affine_survival(&CIR, 0.0, u1, yl) + 1e-15);
        }
    }
}
