//! Named parameter sets and JSON configuration loading.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cds::CdsCurve;
use crate::error::{invalid, Error, Result};
use crate::model::{ClaimLaw, IntensityMap, JumpKind, ModelParams, PayoffSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// `X0 = 100`, `gamma = 0.2`, constant loss factor, Gamma(1, 1) claims.
    Case1,
    /// `X0 = 10`, `gamma = 0.2`, constant loss factor, Gamma(10, 1) claims.
    Case2,
    /// `X0 = 100`, no contagion, `kappa = 1`, `sigma = 0.2`, `rho = 0.2`.
    Case3,
    /// Wrong-way risk sweeps: `kappa = 0.5`, `sigma = 0.2`, `gamma = rho = 0.2`.
    Sweep,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Case1, Preset::Case2, Preset::Case3, Preset::Sweep];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Case1 => "case1",
            Preset::Case2 => "case2",
            Preset::Case3 => "case3",
            Preset::Sweep => "sweep",
        }
    }

    /// Parameters with the CDS spread set to the fair spread.
    pub fn params(self) -> ModelParams {
        let (x0, gamma, kappa, sigma, rho, alpha) = match self {
            Preset::Case1 => (100.0, 0.2, 0.0, 0.0, 0.0, 1.0),
            Preset::Case2 => (10.0, 0.2, 0.0, 0.0, 0.0, 10.0),
            Preset::Case3 => (100.0, 0.0, 1.0, 0.2, 0.2, 1.0),
            Preset::Sweep => (100.0, 0.2, 0.5, 0.2, 0.2, 1.0),
        };
        let mut p = ModelParams {
            x0,
            y0: 0.05,
            gamma_x: gamma,
            jump_kind: JumpKind::Relative,
            kappa_x: kappa,
            mean_x: 100.0,
            sigma_x: sigma,
            kappa_y: 1.0,
            mean_y: 0.05,
            sigma_y: 0.1,
            rho,
            r: 0.0,
            maturity: 1.0,
            delta_r: 1.0,
            delta_cds: 1.0,
            zeta: 1.0,
            claim: ClaimLaw::gamma(alpha, 1.0),
            payoff: PayoffSpec::stop_loss(90.0, 200.0),
            lam_l_map: IntensityMap::Identity,
            lam_r_map: IntensityMap::Identity,
            lam_max: 1e4,
        };
        p.zeta = fair_spread_for(&p).expect("preset CDS is well posed");
        p
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s.to_ascii_lowercase())
            .ok_or_else(|| {
                invalid(
                    "preset",
                    format!("unknown preset `{s}` (case1, case2, case3, sweep)"),
                )
            })
    }
}

/// Fair spread of the model's CDS at `(0, y0)`.
pub fn fair_spread_for(params: &ModelParams) -> Result<f64> {
    CdsCurve::new(params)?.fair_spread(params.y0)
}

/// Parses a JSON configuration. A missing `zeta` is replaced by the fair spread.
pub fn params_from_json(text: &str) -> Result<ModelParams> {
    let mut value: serde_json::Value = serde_json::from_str(text)?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| invalid("config", "top level must be an object"))?;
    let fill = !obj.contains_key("zeta") || obj["zeta"].is_null();
    if fill {
        obj.insert("zeta".into(), serde_json::json!(1.0));
    }
    let mut params: ModelParams = serde_json::from_value(value)?;
    if fill {
        params.zeta = fair_spread_for(&params)?;
    }
    Ok(params)
}

pub fn load_params(path: &Path) -> Result<ModelParams> {
    params_from_json(&std::fs::read_to_string(path)?)
}
