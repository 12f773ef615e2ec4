//! Mean-variance CDS hedging of the CVA and tracking-error backtests.
//!
//! The hedge ratio is `xi = d<M^CL, S>_t / d<S>_t`:
//!
//! ```text
//! num = delta_R e^{-2rt} [ rho sx sy f_x g_y + sy^2 f_y g_y + lam_r (delta - g)(v_post - f) ]
//! den = e^{-2rt} [ lam_r (delta - g)^2 + sy^2 g_y^2 ]
//! ```
//!
//! with `sx = sigma_x x`, `sy = sigma_y sqrt(y)`.

use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cds::{CdsCurve, CdsSlice};
use crate::cva::{
    credit_loss, CvaEstimator, CvaModel, CvaPoint, CvaSurface, Example1Cva, McConfig,
};
use crate::error::{invalid, Error, Result};
use crate::model::ModelParams;
use crate::panjer::LatticeConfig;
use crate::paths::{Mode, PathEngine, ScenarioPath, SimGrid, StartState};
use crate::pricer::{build_loss_value_table, PostDefault, ValueSurface, DEFAULT_DEGREE};
use crate::stats::{gaussian_kde, second_moment, silverman_bandwidth, Estimate, Histogram};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// No CDS position.
    Unhedged,
    /// `CVA_0 / zeta` CDS until default.
    StaticCds,
    /// Mean-variance optimal ratio.
    DynamicMv,
    /// Optimal ratio times a constant.
    ScaledDynamic(f64),
}

impl StrategyKind {
    pub const TABLE: [StrategyKind; 3] = [
        StrategyKind::Unhedged,
        StrategyKind::StaticCds,
        StrategyKind::DynamicMv,
    ];

    pub fn name(&self) -> String {
        match self {
            StrategyKind::Unhedged => "unhedged".into(),
            StrategyKind::StaticCds => "static".into(),
            StrategyKind::DynamicMv => "dynamic".into(),
            StrategyKind::ScaledDynamic(c) => format!("dynamic*{c}"),
        }
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unhedged" => Ok(StrategyKind::Unhedged),
            "static" => Ok(StrategyKind::StaticCds),
            "dynamic" => Ok(StrategyKind::DynamicMv),
            other => match other.strip_prefix("dynamic*").map(str::parse::<f64>) {
                Some(Ok(c)) => Ok(StrategyKind::ScaledDynamic(c)),
                _ => Err(invalid(
                    "strategy",
                    format!("unknown strategy `{s}` (unhedged, static, dynamic)"),
                )),
            },
        }
    }
}

/// Everything the hedge ratio needs at one pre-default state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HedgeInputs {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub cva: CvaPoint,
    pub v_post: f64,
    pub g: f64,
    pub g_y: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HedgeRatio {
    pub xi: f64,
    pub numerator: f64,
    pub denominator: f64,
}

/// General evaluator of the optimal ratio.
pub fn hedge_ratio_from(params: &ModelParams, q: &HedgeInputs) -> Result<HedgeRatio> {
    let disc2 = (-2.0 * params.r * q.t).exp();
    let sx = params.vol_x(q.x);
    let sy = params.vol_y(q.y);
    let lam = params.lam_r(q.y);
    let dg = params.delta_cds - q.g;
    let numerator = params.delta_r
        * disc2
        * (params.rho * sx * sy * q.cva.f_x * q.g_y
            + sy * sy * q.cva.f_y * q.g_y
            + lam * dg * (q.v_post - q.cva.f));
    let denominator = disc2 * (lam * dg * dg + sy * sy * q.g_y * q.g_y);
    if !(denominator.abs() >= 1e-12) {
        return Err(Error::DegenerateHedge(denominator));
    }
    Ok(HedgeRatio {
        xi: numerator / denominator,
        numerator,
        denominator,
    })
}

/// Pure jump hedge (no factor diffusion): `delta_R (v_post - f) / (delta - g)`.
pub fn jump_only_ratio(params: &ModelParams, q: &HedgeInputs) -> f64 {
    params.delta_r * (q.v_post - q.cva.f) / (params.delta_cds - q.g)
}

/// Ratio without loss-factor diffusion:
/// `delta_R (sy^2 f_y g_y + lam (delta - g)(v_post - f)) / (lam (delta - g)^2 + sy^2 g_y^2)`.
pub fn two_term_ratio(params: &ModelParams, q: &HedgeInputs) -> f64 {
    let sy2 = params.vol_y(q.y).powi(2);
    let lam = params.lam_r(q.y);
    let dg = params.delta_cds - q.g;
    params.delta_r * (sy2 * q.cva.f_y * q.g_y + lam * dg * (q.v_post - q.cva.f))
        / (lam * dg * dg + sy2 * q.g_y * q.g_y)
}

/// Settings for the regression pricers of the general model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionConfig {
    pub value_paths: usize,
    pub cva_paths: usize,
    /// Paths for the Monte Carlo estimate of `CVA_0`.
    pub cva0_paths: usize,
    pub seed: u64,
    pub degree: u32,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        Self {
            value_paths: 20_000,
            cva_paths: 20_000,
            cva0_paths: 20_000,
            seed: 0x0c0a,
            degree: DEFAULT_DEGREE,
        }
    }
}

/// Pricing ingredients shared by all hedging computations.
#[derive(Clone)]
pub struct Pricers {
    pub params: ModelParams,
    pub grid: SimGrid,
    pub post: PostDefault,
    pub cva: Arc<dyn CvaModel>,
    pub cds: CdsCurve,
    /// `CVA_0 = delta_R f(0, 0, x0, y0)`.
    pub cva0: f64,
    slices: Vec<CdsSlice>,
}

impl std::fmt::Debug for Pricers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pricers")
            .field("grid", &self.grid)
            .field("cva0", &self.cva0)
            .finish_non_exhaustive()
    }
}

impl Pricers {
    pub fn new(
        params: ModelParams,
        grid: SimGrid,
        post: PostDefault,
        cva: Arc<dyn CvaModel>,
        cva0: f64,
    ) -> Result<Self> {
        let cds = CdsCurve::new(&params)?;
        let slices = grid
            .date_indices()
            .iter()
            .map(|&k| cds.slice(grid.time(k)))
            .collect();
        Ok(Self {
            params,
            grid,
            post,
            cva,
            cds,
            cva0,
            slices,
        })
    }

    /// Panjer table after default and the semi-analytic `f` before.
    pub fn example1(params: &ModelParams, grid: SimGrid, lattice: &LatticeConfig) -> Result<Self> {
        let times: Vec<f64> = (0..=grid.n_steps).map(|k| grid.time(k)).collect();
        let table =
            build_loss_value_table(params, params.post_default_x(params.x0), &times, lattice)?;
        let dates: Vec<f64> = grid.date_indices().iter().map(|&k| grid.time(k)).collect();
        let cva = Example1Cva::new(params, &dates, lattice)?;
        let cva0 = params.delta_r * cva.value(0.0, 0.0, params.x0, params.y0);
        Self::new(
            params.clone(),
            grid,
            PostDefault::Table(table),
            Arc::new(cva),
            cva0,
        )
    }

    /// Regression surfaces for `v` and `f`; `CVA_0` by Monte Carlo from the
    /// initial state.
    pub fn general(params: &ModelParams, grid: SimGrid, cfg: &RegressionConfig) -> Result<Self> {
        let engine = PathEngine::new(params.clone(), grid)?;
        let v = ValueSurface::simulate(
            &engine,
            cfg.value_paths,
            cfg.seed,
            &ValueSurface::default_box(params).into(),
            cfg.degree,
        )?;
        let post = PostDefault::Surface(v);
        let f = CvaSurface::simulate(
            &engine,
            &post,
            cfg.cva_paths,
            cfg.seed.wrapping_add(1),
            &CvaSurface::default_box(params).into(),
            cfg.degree,
        )?;
        let est = CvaEstimator::new(
            engine,
            post.clone(),
            McConfig {
                n_paths: cfg.cva0_paths,
                seed: cfg.seed.wrapping_add(2),
            },
        );
        let cva0 = params.delta_r * est.cva_at(0.0, 0.0, params.x0, params.y0)?.mean;
        Self::new(params.clone(), grid, post, Arc::new(f), cva0)
    }

    /// Semi-analytic pricers when the loss factor is static, regressions otherwise.
    pub fn build(
        params: &ModelParams,
        grid: SimGrid,
        lattice: &LatticeConfig,
        cfg: &RegressionConfig,
    ) -> Result<Self> {
        if params.has_static_loss_factor() {
            Self::example1(params, grid, lattice)
        } else {
            Self::general(params, grid, cfg)
        }
    }

    fn cds_point(&self, t: f64, y: f64) -> (f64, f64) {
        let width = self.grid.dt * self.grid.stride as f64;
        let d = (t / width).round();
        if (d * width - t).abs() < 1e-12 {
            if let Some(s) = self.slices.get(d as usize) {
                let p = s.point(y);
                return (p.g, p.g_y);
            }
        }
        let p = self.cds.point(t, y);
        (p.g, p.g_y)
    }

    pub fn inputs(&self, t: f64, l: f64, x: f64, y: f64) -> HedgeInputs {
        let (g, g_y) = self.cds_point(t, y);
        HedgeInputs {
            t,
            x,
            y,
            cva: self.cva.point(t, l, x, y),
            v_post: self.post.value(&self.params, t, l, x),
            g,
            g_y,
        }
    }

    /// Optimal ratio at a pre-default state.
    pub fn hedge_ratio(&self, t: f64, l: f64, x: f64, y: f64) -> Result<HedgeRatio> {
        hedge_ratio_from(&self.params, &self.inputs(t, l, x, y))
    }

    /// Static CDS notional.
    pub fn static_position(&self) -> f64 {
        self.cva0 / self.params.zeta
    }
}

/// Per-date quantities along one full path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathLedger {
    /// Optimal ratio at each date before the last (0 after default).
    pub xi: Vec<f64>,
    /// Reinsurer alive at each date before the last.
    pub alive: Vec<bool>,
    /// Gains increment over each rebalancing interval.
    pub gains: Vec<f64>,
    /// `CVA_t` at each date.
    pub cva: Vec<f64>,
    /// Discounted credit loss.
    pub loss: f64,
    pub tau: f64,
}

/// Evaluates the hedge inputs along a full-mode path.
pub fn path_ledger(pricers: &Pricers, path: &ScenarioPath, need_ratio: bool) -> Result<PathLedger> {
    let p = &pricers.params;
    let grid = &pricers.grid;
    let dates = grid.date_indices();
    let nd = grid.n_dates();
    let mut lam = Vec::with_capacity(nd + 1);
    let mut cva = Vec::with_capacity(nd + 1);
    let mut xi = Vec::with_capacity(nd);
    let mut alive_at = Vec::with_capacity(nd);
    for (d, &k) in dates.iter().enumerate() {
        let t = grid.time(k);
        let alive = path.hr_at(k) == 0.0 && d < nd;
        if d < nd {
            alive_at.push(alive);
        }
        if !alive {
            lam.push(0.0);
            cva.push(0.0);
            if d < nd {
                xi.push(0.0);
            }
            continue;
        }
        let (l, x, y) = (path.l_at(k), path.x_at(k), path.y_at(k));
        let q = pricers.inputs(t, l, x, y);
        lam.push(q.g);
        cva.push(p.delta_r * (-p.r * t).exp() * q.cva.f);
        xi.push(if need_ratio {
            hedge_ratio_from(p, &q)?.xi
        } else {
            0.0
        });
    }
    let gains = (0..nd)
        .map(|d| {
            pricers.cds.gains_between(
                path.tau,
                grid.time(dates[d]),
                grid.time(dates[d + 1]),
                lam[d],
                lam[d + 1],
            )
        })
        .collect();
    Ok(PathLedger {
        xi,
        alive: alive_at,
        gains,
        cva,
        loss: credit_loss(p, &pricers.post, path),
        tau: path.tau,
    })
}

impl PathLedger {
    /// Positions held over each interval under `kind`.
    pub fn positions(&self, kind: StrategyKind, static_notional: f64) -> Vec<f64> {
        self.xi
            .iter()
            .zip(&self.alive)
            .map(|(&xi, &alive)| match kind {
                StrategyKind::Unhedged => 0.0,
                StrategyKind::StaticCds if alive => static_notional,
                StrategyKind::StaticCds => 0.0,
                StrategyKind::DynamicMv => xi,
                StrategyKind::ScaledDynamic(s) => s * xi,
            })
            .collect()
    }

    /// `e_T = loss - CVA_0 - sum xi dS`.
    pub fn terminal_error(&self, positions: &[f64], cva0: f64) -> f64 {
        let hedge: f64 = positions.iter().zip(&self.gains).map(|(a, b)| a * b).sum();
        self.loss - cva0 - hedge
    }

    /// Hedged-position error at each date,
    /// `e_t = e^{-rt} CVA_t + credit loss so far - CVA_0 - sum_{s<t} xi dS`.
    pub fn running_error(&self, positions: &[f64], cva0: f64, times: &[f64]) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for (d, &t) in times.iter().enumerate() {
            if d > 0 {
                acc += positions[d - 1] * self.gains[d - 1];
            }
            let cl = if self.tau <= t { self.loss } else { 0.0 };
            out.push(self.cva[d] + cl - cva0 - acc);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub strategies: Vec<StrategyKind>,
    /// Number of leading paths whose running errors are kept.
    pub trajectories: usize,
}

impl BacktestConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self {
            n_paths,
            seed,
            strategies: StrategyKind::TABLE.to_vec(),
            trajectories: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyResult {
    pub kind: StrategyKind,
    pub name: String,
    pub errors: Vec<f64>,
    /// `E[e_T^2]`.
    pub mse: Estimate,
    /// `E[e_T]`.
    pub mean: Estimate,
    /// Running errors `e_t` on the dates for the first paths.
    pub trajectories: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub cva0: f64,
    pub zeta: f64,
    pub dates: Vec<f64>,
    pub defaulted: Vec<bool>,
    pub results: Vec<StrategyResult>,
}

impl BacktestReport {
    pub fn result(&self, kind: StrategyKind) -> Option<&StrategyResult> {
        self.results.iter().find(|r| r.kind == kind)
    }

    pub fn default_count(&self) -> usize {
        self.defaulted.iter().filter(|&&d| d).count()
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["strategy", "mse", "mse_stderr", "mean_error", "mean_stderr"])?;
        for r in &self.results {
            w.write_record(&[
                r.name.clone(),
                r.mse.mean.to_string(),
                r.mse.stderr.to_string(),
                r.mean.mean.to_string(),
                r.mean.stderr.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_errors_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["path".to_string(), "defaulted".to_string()];
        header.extend(self.results.iter().map(|r| r.name.clone()));
        w.write_record(&header)?;
        for i in 0..self.defaulted.len() {
            let mut row = vec![i.to_string(), (self.defaulted[i] as u8).to_string()];
            row.extend(self.results.iter().map(|r| r.errors[i].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_trajectories_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["strategy", "path", "t", "e_t"])?;
        for r in &self.results {
            for (i, traj) in r.trajectories.iter().enumerate() {
                for (t, e) in self.dates.iter().zip(traj) {
                    w.write_record(&[r.name.clone(), i.to_string(), t.to_string(), e.to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Tracking errors of each strategy over simulated full-mode paths.
pub fn backtest(pricers: &Pricers, cfg: &BacktestConfig) -> Result<BacktestReport> {
    let engine = PathEngine::new(pricers.params.clone(), pricers.grid)?;
    let grid = pricers.grid;
    let dates: Vec<f64> = grid.date_indices().iter().map(|&k| grid.time(k)).collect();
    let need_ratio = cfg
        .strategies
        .iter()
        .any(|s| matches!(s, StrategyKind::DynamicMv | StrategyKind::ScaledDynamic(_)));
    let notional = pricers.static_position();
    let start = StartState::initial(&pricers.params).into();
    let rows = engine.map_paths(cfg.n_paths, cfg.seed, Mode::Full, &start, |i, path| {
        let ledger = path_ledger(pricers, path, need_ratio)?;
        let per: Vec<(f64, Option<Vec<f64>>)> = cfg
            .strategies
            .iter()
            .map(|&kind| {
                let pos = ledger.positions(kind, notional);
                let e = ledger.terminal_error(&pos, pricers.cva0);
                let traj = (i < cfg.trajectories)
                    .then(|| ledger.running_error(&pos, pricers.cva0, &dates));
                (e, traj)
            })
            .collect();
        Ok::<_, Error>((path.defaulted(), per))
    })?;
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let defaulted = rows.iter().map(|r| r.0).collect();
    let results = cfg
        .strategies
        .iter()
        .enumerate()
        .map(|(s, &kind)| {
            let errors: Vec<f64> = rows.iter().map(|r| r.1[s].0).collect();
            StrategyResult {
                kind,
                name: kind.name(),
                mse: second_moment(&errors),
                mean: Estimate::from_samples(&errors),
                trajectories: rows.iter().filter_map(|r| r.1[s].1.clone()).collect(),
                errors,
            }
        })
        .collect();
    Ok(BacktestReport {
        cva0: pricers.cva0,
        zeta: pricers.params.zeta,
        dates,
        defaulted,
        results,
    })
}

/// Conditional distribution of `e_T` on `{tau_R <= T}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub strategy: String,
    pub n_defaults: usize,
    pub histogram: Histogram,
    pub bandwidth: f64,
    pub kde_points: Vec<f64>,
    pub kde_density: Vec<f64>,
}

impl DensityReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_center", "mass", "density", "kde"])?;
        let centers = self.histogram.centers();
        for (i, c) in centers.iter().enumerate() {
            w.write_record(&[
                c.to_string(),
                self.histogram.masses[i].to_string(),
                self.histogram.density[i].to_string(),
                self.kde_density[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub const MIN_DEFAULTS: usize = 100;

/// Histogram and Gaussian kernel density of `e_T` over defaulted paths.
pub fn density_report(
    report: &BacktestReport,
    kind: StrategyKind,
    bins: usize,
    min_defaults: usize,
) -> Result<DensityReport> {
    let r = report
        .result(kind)
        .ok_or_else(|| invalid("strategy", format!("{} was not backtested", kind.name())))?;
    let sample: Vec<f64> = r
        .errors
        .iter()
        .zip(&report.defaulted)
        .filter(|(_, &d)| d)
        .map(|(e, _)| *e)
        .collect();
    if sample.len() < min_defaults {
        return Err(Error::TooFewDefaults {
            found: sample.len(),
            required: min_defaults,
        });
    }
    let histogram = Histogram::new(&sample, bins);
    let bandwidth = silverman_bandwidth(&sample);
    let kde_points = histogram.centers();
    let kde_density = gaussian_kde(&sample, bandwidth, &kde_points);
    Ok(DensityReport {
        strategy: r.name.clone(),
        n_defaults: sample.len(),
        histogram,
        bandwidth,
        kde_points,
        kde_density,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub loss: f64,
    pub xi: f64,
    pub static_level: f64,
}

/// Optimal ratio on the rebalancing dates of a path, with the static level.
pub fn strategy_trajectory(pricers: &Pricers, path: &ScenarioPath) -> Result<Vec<TrajectoryPoint>> {
    let ledger = path_ledger(pricers, path, true)?;
    let grid = &pricers.grid;
    Ok(grid.date_indices()[..grid.n_dates()]
        .iter()
        .zip(&ledger.xi)
        .map(|(&k, &xi)| TrajectoryPoint {
            t: grid.time(k),
            loss: path.l_at(k),
            xi,
            static_level: pricers.static_position(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::Preset;

    fn inputs() -> HedgeInputs {
        HedgeInputs {
            t: 0.3,
            x: 100.0,
            y: 0.07,
            cva: CvaPoint {
                f: 1.4,
                f_x: 0.02,
                f_y: 17.0,
            },
            v_post: 31.0,
            g: 0.004,
            g_y: 0.55,
        }
    }

    #[test]
    fn specialisations_match_general_formula() {
        let mut p = Preset::Case3.params();
        p.sigma_x = 0.0;
        let q = inputs();
        let general = hedge_ratio_from(&p, &q).unwrap().xi;
        assert!((general - two_term_ratio(&p, &q)).abs() < 1e-12 * general.abs().max(1.0));
        p.sigma_y = 0.0;
        let general = hedge_ratio_from(&p, &q).unwrap().xi;
        assert!((general - jump_only_ratio(&p, &q)).abs() < 1e-12 * general.abs().max(1.0));
    }

    #[test]
    fn discount_factors_cancel() {
        let mut p = Preset::Case3.params();
        let q = inputs();
        let a = hedge_ratio_from(&p, &q).unwrap();
        p.r = 0.05;
        let b = hedge_ratio_from(&p, &q).unwrap();
        assert!((a.xi - b.xi).abs() < 1e-12 * a.xi.abs());
        assert!(b.denominator < a.denominator);
    }

    #[test]
    fn degenerate_denominator_is_reported() {
        let mut p = Preset::Case1.params();
        p.lam_r_map = crate::model::IntensityMap::Constant { value: 0.0 };
        p.sigma_y = 0.0;
        assert!(matches!(
            hedge_ratio_from(&p, &inputs()),
            Err(Error::DegenerateHedge(_))
        ));
    }

    #[test]
    fn strategy_names_round_trip() {
        for k in [
            StrategyKind::Unhedged,
            StrategyKind::StaticCds,
            StrategyKind::DynamicMv,
            StrategyKind::ScaledDynamic(1.5),
        ] {
            assert_eq!(k.name().parse::<StrategyKind>().unwrap(), k);
        }
        assert!("sometimes".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn zero_hazard_has_no_tracking_error() {
        let mut p = Preset::Case1.params();
        p.lam_r_map = crate::model::IntensityMap::Constant { value: 0.0 };
        p.zeta = 0.01;
        let grid = SimGrid::new(1.0, 52, 2).unwrap();
        let pricers = Pricers::example1(&p, grid, &LatticeConfig::default()).unwrap();
        assert_eq!(pricers.cva0, 0.0);
        let cfg = BacktestConfig {
            strategies: vec![StrategyKind::Unhedged, StrategyKind::StaticCds],
            ..BacktestConfig::new(50, 1)
        };
        let report = backtest(&pricers, &cfg).unwrap();
        for r in &report.results {
            assert!(r.errors.iter().all(|&e| e == 0.0));
        }
    }

    #[test]
    fn post_default_positions_are_flat() {
        let p = Preset::Case1.params();
        let grid = SimGrid::new(1.0, 52, 2).unwrap();
        let pricers = Pricers::example1(&p, grid, &LatticeConfig::default()).unwrap();
        let engine = PathEngine::new(p.clone(), grid).unwrap();
        let paths = engine.simulate_paths(200, 3, Mode::Full).unwrap();
        let path = paths.iter().find(|p| p.defaulted()).unwrap();
        let traj = strategy_trajectory(&pricers, path).unwrap();
        for (pt, &k) in traj.iter().zip(&grid.date_indices()) {
            if path.hr_at(k) == 1.0 {
                assert_eq!(pt.xi, 0.0);
            } else {
                assert!(pt.xi > 0.0);
            }
            assert_eq!(pt.static_level, pricers.cva0 / p.zeta);
        }
    }

    #[test]
    fn density_needs_enough_defaults() {
        let report = BacktestReport {
            cva0: 1.0,
            zeta: 0.05,
            dates: vec![0.0, 1.0],
            defaulted: vec![true, false, true],
            results: vec![StrategyResult {
                kind: StrategyKind::Unhedged,
                name: "unhedged".into(),
                errors: vec![1.0, -1.0, 2.0],
                mse: Estimate::exact(2.0),
                mean: Estimate::exact(0.67),
                trajectories: vec![],
            }],
        };
        assert!(matches!(
            density_report(&report, StrategyKind::Unhedged, 10, 100),
            Err(Error::TooFewDefaults { found: 2, .. })
        ));
        let d = density_report(&report, StrategyKind::Unhedged, 4, 2).unwrap();
        assert_eq!(d.n_defaults, 2);
        assert!((d.histogram.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
