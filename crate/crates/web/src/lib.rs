//! Browser bindings for three small experiments: the CDS fair-spread curve,
//! `CVA_0` against the contagion level, and a hedging backtest.
//!
//! Each export returns a JSON string. The plain functions behind them return
//! `Result<String, String>` so they can be tested natively.

use rccr::cds::CdsCurve;
use rccr::cva::{CvaModel, Example1Cva};
use rccr::hedge::{backtest, BacktestConfig, Pricers, StrategyKind};
use rccr::panjer::LatticeConfig;
use rccr::presets::{fair_spread_for, Preset};
use rccr::{ModelParams, SimGrid};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Coarser than the library default; keeps the page responsive.
fn demo_lattice() -> LatticeConfig {
    LatticeConfig {
        h: 0.25,
        ..LatticeConfig::default()
    }
}

/// 130 steps, 26 rebalancing dates.
fn demo_grid(maturity: f64) -> Result<SimGrid, String> {
    SimGrid::new(maturity, 130, 5).map_err(|e| e.to_string())
}

fn static_preset(name: &str) -> Result<ModelParams, String> {
    let p = name.parse::<Preset>().map_err(|e| e.to_string())?.params();
    if !p.has_static_loss_factor() {
        return Err(format!(
            "preset `{name}` has a diffusive loss factor; the demo supports case1 and case2"
        ));
    }
    Ok(p)
}

pub fn spread_curve_json(preset: &str, y_max: f64, points: usize) -> Result<String, String> {
    let p = preset
        .parse::<Preset>()
        .map_err(|e| e.to_string())?
        .params();
    if y_max.is_nan() || y_max <= 0.0 || !(2..=500).contains(&points) {
        return Err("need y_max > 0 and 2..=500 points".into());
    }
    let curve = CdsCurve::new(&p).map_err(|e| e.to_string())?;
    let ys: Vec<f64> = (0..points)
        .map(|i| y_max * i as f64 / (points - 1) as f64)
        .collect();
    let mut spread = Vec::with_capacity(points);
    let mut value = Vec::with_capacity(points);
    for &y in &ys {
        spread.push(curve.fair_spread(y).map_err(|e| e.to_string())?);
        value.push(curve.value(0.0, y));
    }
    Ok(
        json!({ "y0": p.y0, "zeta": p.zeta, "y": ys, "spread": spread, "value": value })
            .to_string(),
    )
}

pub fn cva_gamma_json(preset: &str, points: usize) -> Result<String, String> {
    let base = static_preset(preset)?;
    if !(2..=41).contains(&points) {
        return Err("need 2..=41 points".into());
    }
    let lattice = demo_lattice();
    let mut gammas = Vec::with_capacity(points);
    let mut cva = Vec::with_capacity(points);
    for i in 0..points {
        let mut p = base.clone();
        p.gamma_x = i as f64 / (points - 1) as f64;
        let model = Example1Cva::new(&p, &[0.0], &lattice).map_err(|e| e.to_string())?;
        gammas.push(p.gamma_x);
        cva.push(p.delta_r * model.value(0.0, 0.0, p.x0, p.y0));
    }
    Ok(json!({ "gamma": gammas, "cva0": cva }).to_string())
}

pub fn backtest_json(preset: &str, paths: usize, seed: u64) -> Result<String, String> {
    let mut p = static_preset(preset)?;
    if paths == 0 || paths > 20_000 {
        return Err("need 1..=20000 paths".into());
    }
    p.zeta = fair_spread_for(&p).map_err(|e| e.to_string())?;
    let pricers = Pricers::example1(&p, demo_grid(p.maturity)?, &demo_lattice())
        .map_err(|e| e.to_string())?;
    let cfg = BacktestConfig {
        trajectories: 0,
        ..BacktestConfig::new(paths, seed)
    };
    let rep = backtest(&pricers, &cfg).map_err(|e| e.to_string())?;
    let rows: Vec<_> = StrategyKind::TABLE
        .iter()
        .filter_map(|&k| rep.result(k))
        .map(|r| json!({ "name": r.name, "mse": r.mse.mean, "stderr": r.mse.stderr }))
        .collect();
    Ok(json!({
        "cva0": rep.cva0,
        "zeta": rep.zeta,
        "defaults": rep.default_count(),
        "paths": paths,
        "strategies": rows,
    })
    .to_string())
}

/// Fair CDS spread and contract value at `t = 0` over `y in [0, y_max]`.
#[wasm_bindgen]
pub fn spread_curve(preset: &str, y_max: f64, points: usize) -> Result<String, JsValue> {
    spread_curve_json(preset, y_max, points).map_err(|e| JsValue::from_str(&e))
}

/// `CVA_0` for contagion levels evenly spaced on `[0, 1]`.
#[wasm_bindgen]
pub fn cva_by_gamma(preset: &str, points: usize) -> Result<String, JsValue> {
    cva_gamma_json(preset, points).map_err(|e| JsValue::from_str(&e))
}

/// Mean squared tracking error of the unhedged, static and dynamic strategies.
#[wasm_bindgen]
pub fn run_backtest(preset: &str, paths: usize, seed: u64) -> Result<String, JsValue> {
    backtest_json(preset, paths, seed).map_err(|e| JsValue::from_str(&e))
}
