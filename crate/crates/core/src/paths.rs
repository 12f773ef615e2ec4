//! Joint simulation of the intensity factors, the claims process and the
//! reinsurer's default time.
//!
//! Claims are generated by a time change: a unit-rate arrival clock is run
//! against the cumulative loss intensity `theta(t) = int_0^t lam_l(X_s) ds`.
//! The default time is the first time the cumulative hazard
//! `int_0^t lam_r(Y_s) ds` reaches an independent unit exponential threshold.
//! In [`Mode::Tilde`] the contagion jump of `X` at default is suppressed; the
//! random streams are consumed identically in both modes, so full and tilde
//! paths coincide before default.

use std::io::Write;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{ClaimSampler, ModelParams};
use crate::par::map_indexed;
use crate::rng::{substream, Component};
use crate::stats::Estimate;

/// Uniform simulation grid on `[0, T]` with a rebalancing stride.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    pub n_steps: usize,
    pub dt: f64,
    pub stride: usize,
}

impl SimGrid {
    pub fn new(maturity: f64, n_steps: usize, stride: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(invalid("nSteps", "must be at least 1"));
        }
        if !(maturity > 0.0) {
            return Err(invalid("T", "must be positive"));
        }
        if stride == 0 || !n_steps.is_multiple_of(stride) {
            return Err(invalid(
                "stride",
                format!("{stride} does not divide {n_steps}"),
            ));
        }
        Ok(Self {
            n_steps,
            dt: maturity / n_steps as f64,
            stride,
        })
    }

    /// 26 rebalancing dates per year with 20 substeps each (`dt = 1/520` for `T = 1`).
    pub fn biweekly(maturity: f64) -> Self {
        let dates = ((26.0 * maturity).round() as usize).max(1);
        Self::new(maturity, dates * 20, 20).expect("valid biweekly grid")
    }

    pub fn maturity(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.maturity()
        } else {
            k as f64 * self.dt
        }
    }

    /// Grid index of the last point at or before `t`.
    pub fn floor_index(&self, t: f64) -> usize {
        ((t / self.dt + 1e-9).floor().max(0.0) as usize).min(self.n_steps)
    }

    pub fn n_dates(&self) -> usize {
        self.n_steps / self.stride
    }

    /// Grid indices of the rebalancing dates `0, stride, ..., n_steps`.
    pub fn date_indices(&self) -> Vec<usize> {
        (0..=self.n_dates()).map(|d| d * self.stride).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `X` jumps at the default time.
    Full,
    /// Contagion-free processes.
    Tilde,
}

/// Pre-default state at a grid index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartState {
    pub index: usize,
    pub l: f64,
    pub x: f64,
    pub y: f64,
}

impl StartState {
    pub fn initial(params: &ModelParams) -> Self {
        Self {
            index: 0,
            l: 0.0,
            x: params.x0,
            y: params.y0,
        }
    }
}

/// Per-path uniformly random starting state, used for regression batches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartBox {
    pub index: usize,
    pub l: (f64, f64),
    pub x: (f64, f64),
    pub y: (f64, f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Start {
    State(StartState),
    Box(StartBox),
}

impl From<StartState> for Start {
    fn from(s: StartState) -> Self {
        Start::State(s)
    }
}

impl From<StartBox> for Start {
    fn from(b: StartBox) -> Self {
        Start::Box(b)
    }
}

impl Start {
    fn index(&self) -> usize {
        match self {
            Start::State(s) => s.index,
            Start::Box(b) => b.index,
        }
    }

    fn draw(&self, seed: u64, path: u64) -> StartState {
        match *self {
            Start::State(s) => s,
            Start::Box(b) => {
                let mut rng = substream(seed, Component::Start, path);
                let mut u = |(lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
                StartState {
                    index: b.index,
                    l: u(b.l),
                    x: u(b.x),
                    y: u(b.y),
                }
            }
        }
    }
}

/// One simulated trajectory on grid points `start..=n_steps`.
///
/// Arrays are indexed by `k - start`; use the accessors taking global grid
/// indices. `l` is the loss process seen by the contract (claims after the
/// payoff's per-claim transform).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPath {
    pub mode: Mode,
    pub start: usize,
    pub dt: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub l: Vec<f64>,
    pub n: Vec<u32>,
    /// `int_{t_start}^{t_k} lam_r(Y_s) ds`.
    pub cum_hazard: Vec<f64>,
    /// `int_{t_start}^{t_k} lam_l(X_s) ds`.
    pub cum_intensity: Vec<f64>,
    pub claim_times: Vec<f64>,
    pub claim_sizes: Vec<f64>,
    /// Default time, `f64::INFINITY` if none before maturity.
    pub tau: f64,
    pub threshold: f64,
}

impl ScenarioPath {
    pub fn end(&self) -> usize {
        self.start + self.x.len() - 1
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (self.start..=self.end()).map(|k| self.time(k)).collect()
    }

    pub fn x_at(&self, k: usize) -> f64 {
        self.x[k - self.start]
    }

    pub fn y_at(&self, k: usize) -> f64 {
        self.y[k - self.start]
    }

    pub fn l_at(&self, k: usize) -> f64 {
        self.l[k - self.start]
    }

    pub fn n_at(&self, k: usize) -> u32 {
        self.n[k - self.start]
    }

    pub fn cum_hazard_at(&self, k: usize) -> f64 {
        self.cum_hazard[k - self.start]
    }

    pub fn cum_intensity_at(&self, k: usize) -> f64 {
        self.cum_intensity[k - self.start]
    }

    /// `H^R_{t_k}`.
    pub fn hr_at(&self, k: usize) -> f64 {
        if self.tau <= self.time(k) {
            1.0
        } else {
            0.0
        }
    }

    pub fn hr(&self) -> Vec<f64> {
        (self.start..=self.end()).map(|k| self.hr_at(k)).collect()
    }

    pub fn defaulted(&self) -> bool {
        self.tau.is_finite()
    }

    /// Contract loss just before time `t` (claims strictly before `t`).
    pub fn loss_before(&self, t: f64) -> f64 {
        let k = self.claim_times.partition_point(|&s| s < t);
        self.l[0] + self.claim_sizes[..k].iter().sum::<f64>()
    }

    /// Cumulative hazard at an arbitrary time, by linear interpolation.
    pub fn cum_hazard_time(&self, t: f64) -> f64 {
        let u = (t / self.dt - self.start as f64).max(0.0);
        let j = (u.floor() as usize).min(self.cum_hazard.len() - 1);
        if j + 1 >= self.cum_hazard.len() {
            return self.cum_hazard[j];
        }
        let w = u - j as f64;
        self.cum_hazard[j] * (1.0 - w) + self.cum_hazard[j + 1] * w
    }
}

/// Path simulator for one parameter set and grid.
#[derive(Clone, Debug)]
pub struct PathEngine {
    params: ModelParams,
    grid: SimGrid,
    claims: ClaimSampler,
}

impl PathEngine {
    pub fn new(params: ModelParams, grid: SimGrid) -> Result<Self> {
        params.check()?;
        if (grid.maturity() - params.maturity).abs() > 1e-9 * params.maturity {
            return Err(invalid("grid", "grid horizon differs from the maturity"));
        }
        let claims = params.claim.sampler();
        Ok(Self {
            params,
            grid,
            claims,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &SimGrid {
        &self.grid
    }

    /// Simulates path number `index` of the batch keyed by `seed`.
    pub fn simulate_one(
        &self,
        seed: u64,
        index: u64,
        mode: Mode,
        start: &Start,
    ) -> Result<ScenarioPath> {
        let s0 = start.draw(seed, index);
        let p = &self.params;
        let g = &self.grid;
        if s0.index > g.n_steps {
            return Err(invalid("start", "index beyond the grid"));
        }
        let mut bm = substream(seed, Component::Brownian, index);
        let mut clock = substream(seed, Component::Claims, index);
        let threshold: f64 = substream(seed, Component::Threshold, index).sample(Exp1);

        let len = g.n_steps - s0.index + 1;
        let mut path = ScenarioPath {
            mode,
            start: s0.index,
            dt: g.dt,
            x: Vec::with_capacity(len),
            y: Vec::with_capacity(len),
            l: Vec::with_capacity(len),
            n: Vec::with_capacity(len),
            cum_hazard: Vec::with_capacity(len),
            cum_intensity: Vec::with_capacity(len),
            claim_times: Vec::new(),
            claim_sizes: Vec::new(),
            tau: f64::INFINITY,
            threshold,
        };
        let (mut x, mut y, mut l) = (s0.x, s0.y, s0.l);
        let (mut n, mut hazard, mut theta) = (0u32, 0.0, 0.0);
        let mut next_arrival: f64 = clock.sample(Exp1);
        let sq = (1.0 - p.rho * p.rho).max(0.0).sqrt();
        let sqrt_dt = g.dt.sqrt();
        self.push(&mut path, x, y, l, n, hazard, theta);

        for k in s0.index..g.n_steps {
            let (t0, t1) = (g.time(k), g.time(k + 1));
            let z1: f64 = bm.sample(StandardNormal);
            let z2: f64 = bm.sample(StandardNormal);

            // Full-truncation Euler for Y; y holds the raw scheme value.
            let yp = y.max(0.0);
            let y_next = y
                + p.kappa_y * (p.mean_y - yp) * (t1 - t0)
                + p.sigma_y * yp.sqrt() * sqrt_dt * (p.rho * z1 + sq * z2);
            let h0 = p.lam_r(yp);
            let h1 = p.lam_r(y_next.max(0.0));
            let hazard_next = hazard + 0.5 * (h0 + h1) * (t1 - t0);
            let mut tau_here = None;
            if !path.tau.is_finite() && hazard_next >= threshold {
                let w = if hazard_next > hazard {
                    (threshold - hazard) / (hazard_next - hazard)
                } else {
                    1.0
                };
                path.tau = t0 + w.clamp(0.0, 1.0) * (t1 - t0);
                tau_here = Some(path.tau);
            }

            // Loss intensity is frozen over the step, switching regimes at tau.
            let raw = p.lam_l_map.raw(x);
            if raw > p.lam_max {
                return Err(Error::IntensityBound {
                    value: raw,
                    ceiling: p.lam_max,
                    time: t0,
                });
            }
            let jumped = match (tau_here, mode) {
                (Some(tau), Mode::Full) => Some((tau, p.post_default_x(x))),
                _ => None,
            };
            let mut segments = [(t0, t1, p.lam_l(x)), (t1, t1, 0.0)];
            if let Some((tau, xj)) = jumped {
                let raw_j = p.lam_l_map.raw(xj);
                if raw_j > p.lam_max {
                    return Err(Error::IntensityBound {
                        value: raw_j,
                        ceiling: p.lam_max,
                        time: tau,
                    });
                }
                segments = [(t0, tau, p.lam_l(x)), (tau, t1, p.lam_l(xj))];
            }
            for (a, b, rate) in segments {
                let theta_end = theta + rate * (b - a);
                while next_arrival <= theta_end && rate > 0.0 {
                    let s = a + (next_arrival - theta) / rate;
                    let z = p.payoff.claim_transform(self.claims.sample(&mut clock));
                    path.claim_times.push(s.min(b));
                    path.claim_sizes.push(z);
                    l += z;
                    n += 1;
                    next_arrival += clock.sample::<f64, _>(Exp1);
                }
                theta = theta_end;
            }

            let xp = x.max(0.0);
            let mut x_next = x + p.drift_x(x) * (t1 - t0) + p.sigma_x * xp * sqrt_dt * z1;
            if let Some((_, xj)) = jumped {
                x_next += xj - x;
            }
            x = x_next;
            y = y_next;
            hazard = hazard_next;
            self.push(&mut path, x, y, l, n, hazard, theta);
        }
        Ok(path)
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &self,
        path: &mut ScenarioPath,
        x: f64,
        y: f64,
        l: f64,
        n: u32,
        hazard: f64,
        theta: f64,
    ) {
        path.x.push(x);
        path.y.push(y.max(0.0));
        path.l.push(l);
        path.n.push(n);
        path.cum_hazard.push(hazard);
        path.cum_intensity.push(theta);
    }

    /// Batch of `n_paths` trajectories from the model's initial state.
    pub fn simulate_paths(
        &self,
        n_paths: usize,
        seed: u64,
        mode: Mode,
    ) -> Result<Vec<ScenarioPath>> {
        self.map_paths(
            n_paths,
            seed,
            mode,
            &StartState::initial(&self.params).into(),
            |_, p| p.clone(),
        )
    }

    /// Simulates `n_paths` trajectories and reduces each one with `f`, in
    /// parallel, without keeping the batch in memory. Output order is path order.
    pub fn map_paths<R, F>(
        &self,
        n_paths: usize,
        seed: u64,
        mode: Mode,
        start: &Start,
        f: F,
    ) -> Result<Vec<R>>
    where
        R: Send,
        F: Fn(usize, &ScenarioPath) -> R + Sync + Send,
    {
        if start.index() > self.grid.n_steps {
            return Err(invalid("start", "index beyond the grid"));
        }
        map_indexed(n_paths, |i| {
            self.simulate_one(seed, i as u64, mode, start)
                .map(|path| f(i, &path))
        })
        .into_iter()
        .collect()
    }
}

/// Survival probability `Q(tau_R > t)` by two estimators on the same paths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalEstimate {
    /// Fraction of paths with `tau_R > t`.
    pub indicator: Estimate,
    /// Conditional estimator `E[exp(-int_0^t lam_r(Y_s) ds)]`.
    pub conditional: Estimate,
}

pub fn survival_probability_mc(
    engine: &PathEngine,
    n_paths: usize,
    seed: u64,
    t: f64,
) -> Result<SurvivalEstimate> {
    if !(0.0..=engine.params.maturity * (1.0 + 1e-12)).contains(&t) {
        return Err(invalid("t", format!("{t} outside [0, T]")));
    }
    let start = StartState::initial(&engine.params).into();
    let pairs = engine.map_paths(n_paths, seed, Mode::Tilde, &start, |_, path| {
        let alive = if path.tau > t { 1.0 } else { 0.0 };
        (alive, (-path.cum_hazard_time(t)).exp())
    })?;
    let (a, c): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(SurvivalEstimate {
        indicator: Estimate::from_samples(&a),
        conditional: Estimate::from_samples(&c),
    })
}

/// `Q(tau_R <= t)`, the complement of [`survival_probability_mc`].
pub fn default_probability_mc(
    engine: &PathEngine,
    n_paths: usize,
    seed: u64,
    t: f64,
) -> Result<SurvivalEstimate> {
    let s = survival_probability_mc(engine, n_paths, seed, t)?;
    let flip = |e: Estimate| Estimate {
        mean: 1.0 - e.mean,
        ..e
    };
    Ok(SurvivalEstimate {
        indicator: flip(s.indicator),
        conditional: flip(s.conditional),
    })
}

/// Writes `path, t, X, Y, L, HR` rows.
pub fn write_paths_csv<W: Write>(paths: &[ScenarioPath], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["path", "t", "X", "Y", "L", "HR"])?;
    for (i, p) in paths.iter().enumerate() {
        for k in p.start..=p.end() {
            w.write_record(&[
                i.to_string(),
                p.time(k).to_string(),
                p.x_at(k).to_string(),
                p.y_at(k).to_string(),
                p.l_at(k).to_string(),
                p.hr_at(k).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::IntensityMap;
    use crate::presets::Preset;
    use proptest::prelude::*;

    fn engine(preset: Preset, steps: usize) -> PathEngine {
        let p = preset.params();
        PathEngine::new(p.clone(), SimGrid::new(p.maturity, steps, 1).unwrap()).unwrap()
    }

    #[test]
    fn zero_hazard_never_defaults() {
        let mut p = Preset::Case1.params();
        p.lam_r_map = IntensityMap::Constant { value: 0.0 };
        let e = PathEngine::new(p, SimGrid::new(1.0, 52, 1).unwrap()).unwrap();
        for path in e.simulate_paths(200, 1, Mode::Full).unwrap() {
            assert_eq!(path.tau, f64::INFINITY);
            assert!(path.hr().iter().all(|&h| h == 0.0));
        }
    }

    #[test]
    fn path_invariants() {
        let e = engine(Preset::Case3, 104);
        for path in e.simulate_paths(300, 3, Mode::Full).unwrap() {
            assert_eq!(path.l[0], 0.0);
            assert!(path.l.windows(2).all(|w| w[0] <= w[1]));
            let hr = path.hr();
            assert!(hr.windows(2).all(|w| w[0] <= w[1]));
            assert!(hr.iter().all(|&h| h == 0.0 || h == 1.0));
            assert!(path.y.iter().all(|&y| y >= 0.0));
            assert_eq!(
                path.n.last().copied().unwrap() as usize,
                path.claim_times.len()
            );
            assert!(path.claim_times.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn full_and_tilde_coincide_before_default() {
        let e = engine(Preset::Case3, 260);
        let full = e.simulate_paths(200, 11, Mode::Full).unwrap();
        let tilde = e.simulate_paths(200, 11, Mode::Tilde).unwrap();
        let mut seen_default = 0;
        for (f, t) in full.iter().zip(&tilde) {
            assert_eq!(f.tau, t.tau);
            assert_eq!(f.y, t.y);
            let cut = (f.start..=f.end())
                .find(|&k| f.time(k) >= f.tau)
                .unwrap_or(f.end() + 1);
            for k in f.start..cut {
                assert_eq!(f.x_at(k), t.x_at(k));
                assert_eq!(f.l_at(k), t.l_at(k));
                assert_eq!(f.n_at(k), t.n_at(k));
            }
            let pre = |p: &ScenarioPath| p.claim_times.iter().filter(|&&s| s < f.tau).count();
            assert_eq!(pre(f), pre(t));
            assert_eq!(&f.claim_sizes[..pre(f)], &t.claim_sizes[..pre(t)]);
            if f.defaulted() {
                seen_default += 1;
            }
        }
        assert!(seen_default > 0);
    }

    #[test]
    fn relative_jump_at_default_in_full_mode() {
        let e = engine(Preset::Case1, 52);
        let paths = e.simulate_paths(400, 5, Mode::Full).unwrap();
        let path = paths.iter().find(|p| p.defaulted()).expect("some default");
        let k = (0..=52).find(|&k| path.time(k) >= path.tau).unwrap();
        assert_eq!(path.x_at(k - 1), 100.0);
        assert!((path.x_at(k) - 120.0).abs() < 1e-12);
    }

    #[test]
    fn batches_are_reproducible() {
        let e = engine(Preset::Case3, 52);
        let a = e.simulate_paths(50, 9, Mode::Full).unwrap();
        let b = e.simulate_paths(50, 9, Mode::Full).unwrap();
        assert_eq!(a, b);
        let c = e.simulate_paths(50, 10, Mode::Full).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn path_prefix_does_not_depend_on_batch_size() {
        let e = engine(Preset::Case1, 52);
        let a = e.simulate_paths(10, 4, Mode::Full).unwrap();
        let b = e.simulate_paths(30, 4, Mode::Full).unwrap();
        assert_eq!(a[..], b[..10]);
    }

    #[test]
    fn intensity_ceiling_is_enforced() {
        let mut p = Preset::Case1.params();
        p.lam_max = 50.0;
        let e = PathEngine::new(p, SimGrid::new(1.0, 10, 1).unwrap()).unwrap();
        assert!(matches!(
            e.simulate_paths(2, 1, Mode::Tilde),
            Err(Error::IntensityBound { .. })
        ));
    }

    #[test]
    fn survival_at_zero_is_one() {
        let e = engine(Preset::Case1, 52);
        let s = survival_probability_mc(&e, 100, 1, 0.0).unwrap();
        assert_eq!(s.indicator.mean, 1.0);
        assert_eq!(s.conditional.mean, 1.0);
    }

    #[test]
    fn constant_hazard_survival() {
        let mut p = Preset::Case1.params();
        p.lam_r_map = IntensityMap::Constant { value: 0.3 };
        let e = PathEngine::new(p, SimGrid::new(1.0, 52, 1).unwrap()).unwrap();
        let s = survival_probability_mc(&e, 20_000, 2, 0.7).unwrap();
        let exact = (-0.3f64 * 0.7).exp();
        assert!((s.conditional.mean - exact).abs() < 1e-12);
        assert!(
            s.indicator.within(exact, 4.0),
            "{:?} vs {exact}",
            s.indicator
        );
    }

    #[test]
    fn random_starts_stay_in_box() {
        let e = engine(Preset::Case3, 52);
        let b = StartBox {
            index: 26,
            l: (0.0, 10.0),
            x: (80.0, 120.0),
            y: (0.02, 0.1),
        };
        let starts = e
            .map_paths(100, 3, Mode::Tilde, &b.into(), |_, p| {
                (p.start, p.l[0], p.x[0], p.y[0])
            })
            .unwrap();
        for (k, l, x, y) in starts {
            assert_eq!(k, 26);
            assert!(
                (0.0..10.0).contains(&l) && (80.0..120.0).contains(&x) && (0.02..0.1).contains(&y)
            );
        }
    }

    #[test]
    fn csv_dump_has_one_row_per_point() {
        let e = engine(Preset::Case1, 4);
        let paths = e.simulate_paths(2, 1, Mode::Full).unwrap();
        let mut buf = Vec::new();
        write_paths_csv(&paths, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 5);
        assert!(text.starts_with("path,t,X,Y,L,HR"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn loss_is_nondecreasing_for_any_seed(seed in any::<u64>()) {
            let e = engine(Preset::Case1, 26);
            let path = e.simulate_one(seed, 0, Mode::Full, &StartState::initial(e.params()).into()).unwrap();
            prop_assert!(path.l.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(path.l[0], 0.0);
        }
    }
}
