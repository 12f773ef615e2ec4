//! Default-free value of the reinsurance contract,
//! `v(t, l, x) = e^{-r(T-t)} E[phi(L_T) | L_t = l, X_t = x]`.
//!
//! With a constant loss intensity the remaining loss is compound Poisson and
//! [`LossValueTable`] evaluates `v` through Panjer recursion. Otherwise
//! [`ValueSurface`] regresses simulated terminal payoffs on `(l, x)` at each
//! rebalancing date.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{ModelParams, PayoffSpec};
use crate::panjer::{contract_claims, DiscretizedClaims, LatticeConfig, LayerValue};
use crate::par::map_indexed;
use crate::paths::{Mode, PathEngine, ScenarioPath, SimGrid, Start, StartBox};
use crate::regression::PolyFit;

/// Basis degree for value regressions.
pub const DEFAULT_DEGREE: u32 = 3;

/// `v(t, l)` at one constant loss intensity on a time grid, exact in `l`
/// and linear in `t` between grid times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossValueTable {
    pub intensity: f64,
    pub r: f64,
    pub maturity: f64,
    pub times: Vec<f64>,
    pub payoff: PayoffSpec,
    pub h: f64,
    slices: Vec<LayerValue>,
}

/// Builds the table for the regime with loss factor `x`.
pub fn build_loss_value_table(
    params: &ModelParams,
    x: f64,
    times: &[f64],
    cfg: &LatticeConfig,
) -> Result<LossValueTable> {
    if !params.has_static_loss_factor() {
        return Err(invalid(
            "kappaX/sigmaX",
            "Panjer tables need a constant loss intensity",
        ));
    }
    let claims = contract_claims(&params.claim, &params.payoff, cfg)?;
    LossValueTable::from_claims(params, &claims, params.lam_l(x), times)
}

impl LossValueTable {
    pub fn from_claims(
        params: &ModelParams,
        claims: &DiscretizedClaims,
        intensity: f64,
        times: &[f64],
    ) -> Result<Self> {
        if times.is_empty() || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("times", "must be nonempty and increasing"));
        }
        let maturity = params.maturity;
        let slices = map_indexed(times.len(), |i| {
            LayerValue::new(
                claims,
                intensity * (maturity - times[i]).max(0.0),
                &params.payoff,
            )
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            intensity,
            r: params.r,
            maturity,
            times: times.to_vec(),
            payoff: params.payoff.clone(),
            h: claims.h,
            slices,
        })
    }

    fn slice_value(&self, i: usize, l: f64) -> f64 {
        (-self.r * (self.maturity - self.times[i])).exp() * self.slices[i].value(l)
    }

    pub fn value(&self, t: f64, l: f64) -> f64 {
        let n = self.times.len();
        let j = self.times.partition_point(|&s| s <= t);
        if j == 0 {
            return self.slice_value(0, l);
        }
        if j >= n {
            return self.slice_value(n - 1, l);
        }
        let (a, b) = (self.times[j - 1], self.times[j]);
        let w = (t - a) / (b - a);
        (1.0 - w) * self.slice_value(j - 1, l) + w * self.slice_value(j, l)
    }

    /// Values on lattice points `0, h, ..., exhaustion` at grid time `i`.
    pub fn lattice_values(&self, i: usize) -> Vec<f64> {
        let top = (self.payoff.exhaustion() / self.h).ceil() as usize + 1;
        (0..=top)
            .map(|m| self.slice_value(i, m as f64 * self.h))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "l", "value"])?;
        for (i, t) in self.times.iter().enumerate() {
            for (m, v) in self.lattice_values(i).into_iter().enumerate() {
                w.write_record(&[
                    t.to_string(),
                    (m as f64 * self.h).to_string(),
                    v.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Regression estimate of `v(t, l, x)` on the rebalancing dates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueSurface {
    pub grid: SimGrid,
    pub r: f64,
    pub payoff: PayoffSpec,
    /// One fit per date except the last, where `v = phi`.
    fits: Vec<PolyFit>,
}

impl ValueSurface {
    /// Fits per-date regressions on a stored tilde-mode batch.
    pub fn fit(
        params: &ModelParams,
        grid: &SimGrid,
        paths: &[ScenarioPath],
        degree: u32,
    ) -> Result<Self> {
        if paths.iter().any(|p| p.mode != Mode::Tilde) {
            return Err(invalid(
                "paths",
                "value regressions need contagion-free paths",
            ));
        }
        let rows: Vec<_> = paths
            .iter()
            .map(|p| Self::extract(params, grid, p))
            .collect();
        Self::from_rows(params, grid, &rows, degree)
    }

    fn extract(params: &ModelParams, grid: &SimGrid, path: &ScenarioPath) -> (Vec<[f64; 2]>, f64) {
        let states = grid.date_indices()[..grid.n_dates()]
            .iter()
            .map(|&k| {
                if k < path.start {
                    [f64::NAN, f64::NAN]
                } else {
                    [path.l_at(k), path.x_at(k)]
                }
            })
            .collect();
        (states, params.payoff.evaluate(*path.l.last().unwrap()))
    }

    fn from_rows(
        params: &ModelParams,
        grid: &SimGrid,
        rows: &[(Vec<[f64; 2]>, f64)],
        degree: u32,
    ) -> Result<Self> {
        let dates = grid.date_indices();
        let fits = map_indexed(grid.n_dates(), |d| {
            let disc = (-params.r * (params.maturity - grid.time(dates[d]))).exp();
            let (z, v): (Vec<Vec<f64>>, Vec<f64>) = rows
                .iter()
                .filter(|(s, _)| !s[d][0].is_nan())
                .map(|(s, phi)| (s[d].to_vec(), disc * phi))
                .unzip();
            PolyFit::fit(&z, &v, degree)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: *grid,
            r: params.r,
            payoff: params.payoff.clone(),
            fits,
        })
    }

    /// Fits on a streamed batch started from `start`, keeping only the date states.
    pub fn simulate(
        engine: &PathEngine,
        n_paths: usize,
        seed: u64,
        start: &Start,
        degree: u32,
    ) -> Result<Self> {
        let (params, grid) = (engine.params(), engine.grid());
        let rows = engine.map_paths(n_paths, seed, Mode::Tilde, start, |_, p| {
            Self::extract(params, grid, p)
        })?;
        Self::from_rows(params, grid, &rows, degree)
    }

    /// Start box used for value regressions: the loss factor ranges over
    /// pre- and post-jump levels.
    pub fn default_box(params: &ModelParams) -> StartBox {
        StartBox {
            index: 0,
            l: (0.0, 0.0),
            x: (0.6 * params.x0, 1.4 * params.post_default_x(params.x0)),
            y: (params.y0, params.y0),
        }
    }

    pub fn fit_at(&self, d: usize) -> Option<&PolyFit> {
        self.fits.get(d)
    }

    fn date_value(&self, d: usize, l: f64, x: f64) -> f64 {
        let cap = self.payoff.cap();
        match self.fits.get(d) {
            Some(f) => f.eval(&[l, x]).clamp(0.0, cap),
            None => self.payoff.evaluate(l),
        }
    }

    fn date_gradient(&self, d: usize, l: f64, x: f64) -> [f64; 2] {
        match self.fits.get(d) {
            Some(f) => {
                let g = f.gradient(&[l, x]);
                [g[0], g[1]]
            }
            None => [0.0, 0.0],
        }
    }

    fn bracket(&self, t: f64) -> (usize, f64) {
        let width = self.grid.dt * self.grid.stride as f64;
        let u = (t / width).clamp(0.0, self.grid.n_dates() as f64);
        let d = (u.floor() as usize).min(self.grid.n_dates().saturating_sub(1));
        (d, u - d as f64)
    }

    pub fn value(&self, t: f64, l: f64, x: f64) -> f64 {
        let (d, w) = self.bracket(t);
        if w == 0.0 {
            return self.date_value(d, l, x);
        }
        (1.0 - w) * self.date_value(d, l, x) + w * self.date_value(d + 1, l, x)
    }

    /// `(dv/dl, dv/dx)` of the fitted polynomial at the nearest earlier date.
    pub fn gradient(&self, t: f64, l: f64, x: f64) -> [f64; 2] {
        let (d, _) = self.bracket(t);
        self.date_gradient(d, l, x)
    }
}

/// Contract value after the reinsurer's default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PostDefault {
    /// Panjer table at the post-jump intensity.
    Table(LossValueTable),
    /// Regression surface evaluated at the post-jump loss factor.
    Surface(ValueSurface),
}

impl PostDefault {
    /// `v(t, l, x + gamma(x))` for the pre-jump factor `x`.
    pub fn value(&self, params: &ModelParams, t: f64, l: f64, x: f64) -> f64 {
        match self {
            PostDefault::Table(tab) => tab.value(t, l),
            PostDefault::Surface(s) => s.value(t, l, params.post_default_x(x)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::IntensityMap;
    use crate::presets::Preset;
    use proptest::prelude::*;

    fn times() -> Vec<f64> {
        (0..=26).map(|i| i as f64 / 26.0).collect()
    }

    #[test]
    fn terminal_slice_is_payoff() {
        let p = Preset::Case1.params();
        let tab = build_loss_value_table(&p, 120.0, &times(), &LatticeConfig::default()).unwrap();
        let vals = tab.lattice_values(26);
        for (m, v) in vals.iter().enumerate() {
            assert!((v - p.payoff.evaluate(m as f64 * tab.h)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_intensity_freezes_value() {
        let mut p = Preset::Case1.params();
        p.lam_l_map = IntensityMap::Constant { value: 0.0 };
        let tab = build_loss_value_table(&p, 100.0, &times(), &LatticeConfig::default()).unwrap();
        for t in [0.0, 0.3, 0.77] {
            for l in [0.0, 95.0, 150.5, 500.0] {
                assert!((tab.value(t, l) - p.payoff.evaluate(l)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn table_is_bounded_and_monotone_in_l() {
        let p = Preset::Case1.params();
        let tab = build_loss_value_table(&p, 120.0, &times(), &LatticeConfig::default()).unwrap();
        for i in [0, 10, 25] {
            let vals = tab.lattice_values(i);
            assert!(vals.windows(2).all(|w| w[0] <= w[1] + 1e-12));
            assert!(vals.iter().all(|&v| (0.0..=200.0 + 1e-9).contains(&v)));
        }
    }

    #[test]
    fn halving_the_lattice_step_is_stable() {
        let p = Preset::Case1.params();
        let a = build_loss_value_table(&p, 120.0, &[0.0, 1.0], &LatticeConfig::default()).unwrap();
        let fine = LatticeConfig {
            h: 0.5 * LatticeConfig::default().h,
            ..LatticeConfig::default()
        };
        let b = build_loss_value_table(&p, 120.0, &[0.0, 1.0], &fine).unwrap();
        let (va, vb) = (a.value(0.0, 0.0), b.value(0.0, 0.0));
        assert!(((va - vb) / vb).abs() < 1e-3, "{va} {vb}");
    }

    #[test]
    fn diffusive_model_is_rejected() {
        let p = Preset::Case3.params();
        assert!(build_loss_value_table(&p, 100.0, &times(), &LatticeConfig::default()).is_err());
    }

    #[test]
    fn constant_payoff_regression_is_flat() {
        // A cap far below any loss level: phi(L_T) = 0 on every path.
        let mut p = Preset::Case3.params();
        p.payoff = PayoffSpec::stop_loss(1e6, 5.0);
        let grid = SimGrid::new(1.0, 52, 13).unwrap();
        let e = PathEngine::new(p.clone(), grid).unwrap();
        let paths = e.simulate_paths(200, 1, Mode::Tilde).unwrap();
        let s = ValueSurface::fit(&p, &grid, &paths, 3).unwrap();
        for t in [0.0, 0.25, 0.6, 1.0] {
            assert!(s.value(t, 50.0, 100.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_path_is_rank_deficient() {
        let p = Preset::Case3.params();
        let grid = SimGrid::new(1.0, 52, 13).unwrap();
        let e = PathEngine::new(p.clone(), grid).unwrap();
        let paths = e.simulate_paths(1, 1, Mode::Tilde).unwrap();
        assert!(ValueSurface::fit(&p, &grid, &paths, 3).is_err());
    }

    #[test]
    fn regression_needs_tilde_paths() {
        let p = Preset::Case3.params();
        let grid = SimGrid::new(1.0, 52, 13).unwrap();
        let e = PathEngine::new(p.clone(), grid).unwrap();
        let paths = e.simulate_paths(50, 1, Mode::Full).unwrap();
        assert!(ValueSurface::fit(&p, &grid, &paths, 3).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn table_value_monotone_in_l(t in 0.0f64..1.0, l1 in 0.0f64..320.0, l2 in 0.0f64..320.0) {
            let p = Preset::Case2.params();
            let tab = build_loss_value_table(&p, 12.0, &[0.0, 0.5, 1.0], &LatticeConfig::default()).unwrap();
            let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
            prop_assert!(tab.value(t, lo) <= tab.value(t, hi) + 1e-12);
        }
    }
}
