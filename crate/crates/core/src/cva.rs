//! Credit value adjustment `CVA_t = delta_R (1 - H_t) f(t, L_t, X_t, Y_t)`.
//!
//! `f` is the value of the payment-at-default claim
//!
//! ```text
//! f(t, l, x, y) = E[ int_t^T v(s, L~_s, X~_s + gamma(X~_s)) lam_r(Y_s)
//!                      exp(-int_t^s (r + lam_r(Y_u)) du) ds ]
//! ```
//!
//! over contagion-free paths started at `(l, x, y)`. Three evaluators are
//! provided: a Monte Carlo estimator ([`CvaEstimator`]), a semi-analytic
//! evaluator for a constant pre-default loss intensity ([`Example1Cva`]) and
//! per-date regression surfaces ([`CvaSurface`]).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cds::{HazardModel, HazardNode};
use crate::error::{invalid, Result};
use crate::model::ModelParams;
use crate::panjer::{contract_claims, DiscretizedClaims, LatticeConfig, LayerValue};
use crate::par::map_indexed;
use crate::paths::{Mode, PathEngine, ScenarioPath, SimGrid, Start, StartBox, StartState};
use crate::pricer::{build_loss_value_table, PostDefault, ValueSurface, DEFAULT_DEGREE};
use crate::quad::CompositeRule;
use crate::regression::PolyFit;
use crate::stats::{paired_difference, Estimate};

/// `f` and its factor sensitivities at one state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CvaPoint {
    pub f: f64,
    pub f_x: f64,
    pub f_y: f64,
}

/// Evaluator of `f(t, l, x, y)` and its `x`, `y` derivatives.
pub trait CvaModel: Send + Sync {
    fn point(&self, t: f64, l: f64, x: f64, y: f64) -> CvaPoint;

    fn value(&self, t: f64, l: f64, x: f64, y: f64) -> f64 {
        self.point(t, l, x, y).f
    }
}

/// Pathwise payment-at-default integral on a tilde path, trapezoid in time.
pub fn payment_at_default(params: &ModelParams, post: &PostDefault, path: &ScenarioPath) -> f64 {
    let t0 = path.time(path.start);
    let q = |k: usize| {
        let s = path.time(k);
        let lam = params.lam_r(path.y_at(k));
        if lam == 0.0 {
            return 0.0;
        }
        let v = post.value(params, s, path.l_at(k), path.x_at(k));
        v * lam * (-params.r * (s - t0) - path.cum_hazard_at(k)).exp()
    };
    let mut acc = 0.0;
    let mut prev = q(path.start);
    for k in path.start + 1..=path.end() {
        let next = q(k);
        acc += 0.5 * path.dt * (prev + next);
        prev = next;
    }
    acc
}

/// Monte Carlo configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
}

/// Finite-difference bump sizes for sensitivities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bumps {
    pub dx: f64,
    pub dy: f64,
}

impl Default for Bumps {
    fn default() -> Self {
        Self { dx: 1.0, dy: 0.005 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sensitivities {
    pub d_x: Estimate,
    pub d_y: Estimate,
    /// Set when a difference is dominated by noise (stderr above 25% of the value).
    pub warnings: Vec<String>,
}

/// Monte Carlo estimator of `f` over contagion-free paths.
#[derive(Clone, Debug)]
pub struct CvaEstimator {
    pub engine: PathEngine,
    pub post: PostDefault,
    pub mc: McConfig,
}

impl CvaEstimator {
    pub fn new(engine: PathEngine, post: PostDefault, mc: McConfig) -> Self {
        Self { engine, post, mc }
    }

    /// Constant-intensity estimator: post-default values from a Panjer table at the
    /// jumped intensity, on the simulation grid.
    pub fn example1(
        params: &ModelParams,
        grid: SimGrid,
        lattice: &LatticeConfig,
        mc: McConfig,
    ) -> Result<Self> {
        let times: Vec<f64> = (0..=grid.n_steps).map(|k| grid.time(k)).collect();
        let table =
            build_loss_value_table(params, params.post_default_x(params.x0), &times, lattice)?;
        Ok(Self::new(
            PathEngine::new(params.clone(), grid)?,
            PostDefault::Table(table),
            mc,
        ))
    }

    /// Per-path samples of the payment-at-default integral from `(t, l, x, y)`.
    pub fn samples(&self, t: f64, l: f64, x: f64, y: f64) -> Result<Vec<f64>> {
        let grid = self.engine.grid();
        if !(0.0..=grid.maturity() + 1e-12).contains(&t) {
            return Err(invalid("t", format!("{t} outside [0, T]")));
        }
        let start = StartState {
            index: grid.floor_index(t),
            l,
            x,
            y,
        };
        let params = self.engine.params();
        self.engine.map_paths(
            self.mc.n_paths,
            self.mc.seed,
            Mode::Tilde,
            &start.into(),
            |_, p| payment_at_default(params, &self.post, p),
        )
    }

    pub fn cva_at(&self, t: f64, l: f64, x: f64, y: f64) -> Result<Estimate> {
        Ok(Estimate::from_samples(&self.samples(t, l, x, y)?))
    }

    /// Central differences in `x` and `y` with common random numbers.
    pub fn cva_sensitivities(
        &self,
        t: f64,
        l: f64,
        x: f64,
        y: f64,
        bumps: Bumps,
    ) -> Result<Sensitivities> {
        let diff = |a: Vec<f64>, b: Vec<f64>, h: f64| {
            let e = paired_difference(&a, &b);
            Estimate {
                mean: e.mean / (2.0 * h),
                stderr: e.stderr / (2.0 * h),
                n: e.n,
            }
        };
        let d_x = diff(
            self.samples(t, l, x + bumps.dx, y)?,
            self.samples(t, l, x - bumps.dx, y)?,
            bumps.dx,
        );
        let d_y = diff(
            self.samples(t, l, x, y + bumps.dy)?,
            self.samples(t, l, x, (y - bumps.dy).max(0.0))?,
            bumps.dy,
        );
        let mut warnings = Vec::new();
        for (name, e) in [("x", &d_x), ("y", &d_y)] {
            if e.stderr > 0.25 * e.mean.abs() && e.stderr > 0.0 {
                warnings.push(format!(
                    "d/d{name}: stderr {:.3e} exceeds 25% of {:.3e}",
                    e.stderr, e.mean
                ));
            }
        }
        Ok(Sensitivities { d_x, d_y, warnings })
    }
}

/// Semi-analytic `f` when the pre-default loss intensity is constant.
///
/// Conditioning on the default time `s`, the loss at maturity is compound
/// Poisson with mean count `lam(x)(s - t) + lam(x_post)(T - s)`, so
///
/// ```text
/// f(t, l, x, y) = e^{-r(T-t)} int_t^T E[phi(l + A_{Lambda(s)})] h(s - t, y) ds
/// ```
///
/// with `h` the default density of the hazard model. The `s`-integral uses a
/// composite Gauss-Legendre rule; nodes for the rebalancing dates are cached.
#[derive(Clone, Debug)]
pub struct Example1Cva {
    params: ModelParams,
    hazard: HazardModel,
    claims: DiscretizedClaims,
    rule: CompositeRule,
    x: f64,
    cache: Vec<(f64, Vec<Node>)>,
}

#[derive(Clone, Debug)]
struct Node {
    weight: f64,
    layer: LayerValue,
    hazard: HazardNode,
}

impl Example1Cva {
    pub const PANELS: usize = 4;
    pub const ORDER: usize = 8;

    /// Caches the integration nodes for valuation times `dates` at the
    /// initial loss factor.
    pub fn new(params: &ModelParams, dates: &[f64], lattice: &LatticeConfig) -> Result<Self> {
        Self::with_rule(
            params,
            dates,
            lattice,
            CompositeRule::new(Self::PANELS, Self::ORDER),
        )
    }

    pub fn with_rule(
        params: &ModelParams,
        dates: &[f64],
        lattice: &LatticeConfig,
        rule: CompositeRule,
    ) -> Result<Self> {
        if !params.has_static_loss_factor() {
            return Err(invalid(
                "kappaX/sigmaX",
                "the semi-analytic CVA needs a constant loss intensity",
            ));
        }
        let claims = contract_claims(&params.claim, &params.payoff, lattice)?;
        let mut me = Self {
            params: params.clone(),
            hazard: HazardModel::from_params(params),
            claims,
            rule,
            x: params.x0,
            cache: Vec::new(),
        };
        let cache = map_indexed(dates.len(), |i| {
            me.nodes(dates[i], me.x).map(|n| (dates[i], n))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        me.cache = cache;
        Ok(me)
    }

    fn nodes(&self, t: f64, x: f64) -> Result<Vec<Node>> {
        let p = &self.params;
        let (pre, post) = (p.lam_l(x), p.lam_l(p.post_default_x(x)));
        let maturity = p.maturity;
        self.rule
            .points(t, maturity)
            .into_iter()
            .map(|(s, w)| {
                let lambda = pre * (s - t) + post * (maturity - s);
                Ok(Node {
                    weight: w,
                    layer: LayerValue::new(&self.claims, lambda, &p.payoff)?,
                    hazard: self.hazard.node(s - t),
                })
            })
            .collect()
    }

    fn eval(&self, nodes: &[Node], t: f64, l: f64, y: f64) -> CvaPoint {
        let disc = (-self.params.r * (self.params.maturity - t)).exp();
        let (mut f, mut f_y) = (0.0, 0.0);
        for n in nodes {
            let phi = n.layer.value(l);
            let h = n.hazard.terms(y);
            f += n.weight * phi * h.h;
            f_y += n.weight * phi * h.h_y;
        }
        CvaPoint {
            f: disc * f,
            f_x: 0.0,
            f_y: disc * f_y,
        }
    }
}

impl CvaModel for Example1Cva {
    fn point(&self, t: f64, l: f64, x: f64, y: f64) -> CvaPoint {
        if t >= self.params.maturity {
            return CvaPoint::default();
        }
        if x == self.x {
            if let Some((_, nodes)) = self.cache.iter().find(|(s, _)| (s - t).abs() < 1e-12) {
                return self.eval(nodes, t, l, y);
            }
        }
        let nodes = self.nodes(t, x).expect("lattice validated at construction");
        self.eval(&nodes, t, l, y)
    }
}

/// Regression surfaces for `f(t, l, x, y)` on the rebalancing dates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvaSurface {
    pub grid: SimGrid,
    pub cap: f64,
    fits: Vec<PolyFit>,
}

impl CvaSurface {
    /// Start box for `f` regressions.
    pub fn default_box(params: &ModelParams) -> StartBox {
        StartBox {
            index: 0,
            l: (0.0, 0.0),
            x: (0.75 * params.x0, 1.25 * params.x0),
            y: (0.4 * params.y0, 2.0 * params.y0),
        }
    }

    /// Simulates tilde paths from `start` and regresses, for every date, the
    /// remaining payment-at-default integral on the state `(l, x, y)`.
    pub fn simulate(
        engine: &PathEngine,
        post: &PostDefault,
        n_paths: usize,
        seed: u64,
        start: &Start,
        degree: u32,
    ) -> Result<Self> {
        let params = engine.params();
        let grid = *engine.grid();
        let dates = grid.date_indices();
        let rows = engine.map_paths(n_paths, seed, Mode::Tilde, start, |_, path| {
            // Q_k = int_0^{t_k} q ds with q discounted to the path start.
            let t0 = path.time(path.start);
            let q = |k: usize| {
                let lam = params.lam_r(path.y_at(k));
                let s = path.time(k);
                let v = if lam == 0.0 {
                    0.0
                } else {
                    post.value(params, s, path.l_at(k), path.x_at(k))
                };
                v * lam * (-params.r * (s - t0) - path.cum_hazard_at(k)).exp()
            };
            let mut cum = vec![0.0; path.end() - path.start + 1];
            let mut prev = q(path.start);
            for k in path.start + 1..=path.end() {
                let next = q(k);
                cum[k - path.start] = cum[k - 1 - path.start] + 0.5 * path.dt * (prev + next);
                prev = next;
            }
            let total = *cum.last().unwrap();
            dates[..grid.n_dates()]
                .iter()
                .map(|&k| {
                    if k < path.start {
                        return ([f64::NAN; 3], 0.0);
                    }
                    let j = k - path.start;
                    let growth = (params.r * (path.time(k) - t0) + path.cum_hazard[j]).exp();
                    ([path.l[j], path.x[j], path.y[j]], growth * (total - cum[j]))
                })
                .collect::<Vec<_>>()
        })?;
        let fits = map_indexed(grid.n_dates(), |d| {
            let (z, v): (Vec<Vec<f64>>, Vec<f64>) = rows
                .iter()
                .filter(|r| !r[d].0[0].is_nan())
                .map(|r| (r[d].0.to_vec(), r[d].1))
                .unzip();
            PolyFit::fit(&z, &v, degree)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid,
            cap: params.payoff.cap(),
            fits,
        })
    }

    pub fn fit_at(&self, d: usize) -> Option<&PolyFit> {
        self.fits.get(d)
    }

    fn date_point(&self, d: usize, l: f64, x: f64, y: f64) -> CvaPoint {
        match self.fits.get(d) {
            Some(fit) => {
                let z = [l, x, y];
                let g = fit.gradient(&z);
                CvaPoint {
                    f: fit.eval(&z).clamp(0.0, self.cap),
                    f_x: g[1],
                    f_y: g[2],
                }
            }
            None => CvaPoint::default(),
        }
    }
}

impl CvaModel for CvaSurface {
    fn point(&self, t: f64, l: f64, x: f64, y: f64) -> CvaPoint {
        let width = self.grid.dt * self.grid.stride as f64;
        let u = (t / width).clamp(0.0, self.grid.n_dates() as f64);
        let d = (u.floor() as usize).min(self.grid.n_dates().saturating_sub(1));
        let w = u - d as f64;
        let a = self.date_point(d, l, x, y);
        if w < 1e-9 {
            return a;
        }
        let b = self.date_point(d + 1, l, x, y);
        CvaPoint {
            f: (1.0 - w) * a.f + w * b.f,
            f_x: a.f_x,
            f_y: a.f_y,
        }
    }
}

/// `CVA_t` at the rebalancing dates of a full-mode path.
pub fn cva_path(
    params: &ModelParams,
    model: &dyn CvaModel,
    grid: &SimGrid,
    path: &ScenarioPath,
) -> Result<Vec<f64>> {
    if path.mode != Mode::Full {
        return Err(invalid("path", "CVA paths need full-mode simulation"));
    }
    Ok(grid
        .date_indices()
        .into_iter()
        .filter(|&k| k >= path.start)
        .map(|k| {
            if path.hr_at(k) == 1.0 {
                0.0
            } else {
                params.delta_r * model.value(path.time(k), path.l_at(k), path.x_at(k), path.y_at(k))
            }
        })
        .collect())
}

/// Discounted credit loss `delta_R e^{-r tau} V_tau 1{tau <= T}` of a full path.
pub fn credit_loss(params: &ModelParams, post: &PostDefault, path: &ScenarioPath) -> f64 {
    if !path.defaulted() {
        return 0.0;
    }
    let tau = path.tau;
    let k = ((tau / path.dt).floor() as usize).clamp(path.start, path.end());
    let v = post.value(params, tau, path.loss_before(tau), path.x_at(k));
    params.delta_r * (-params.r * tau).exp() * v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Gamma,
    Rho,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub grid: SimGrid,
    /// Paths per sweep point for `CVA_0`.
    pub n_paths: usize,
    /// Paths for the value regression shared by all points.
    pub value_paths: usize,
    pub seed: u64,
    pub degree: u32,
}

impl SweepConfig {
    pub fn new(grid: SimGrid, n_paths: usize, seed: u64) -> Self {
        Self {
            grid,
            n_paths,
            value_paths: 20_000,
            seed,
            degree: DEFAULT_DEGREE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub cva0: Estimate,
    /// Paired increment from the previous point.
    pub increment: Option<Estimate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub param: SweepParam,
    pub points: Vec<SweepPoint>,
    /// Every increment is at least `-3` standard errors.
    pub monotone: bool,
    /// Paired estimate of `CVA_0(last) - CVA_0(first)`.
    pub total_increase: Estimate,
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let name = match self.param {
            SweepParam::Gamma => "gamma",
            SweepParam::Rho => "rho",
        };
        w.write_record([name, "cva0", "stderr", "increment", "increment_stderr"])?;
        for p in &self.points {
            let (inc, se) = p.increment.map_or((String::new(), String::new()), |e| {
                (e.mean.to_string(), e.stderr.to_string())
            });
            w.write_record(&[
                p.value.to_string(),
                p.cva0.mean.to_string(),
                p.cva0.stderr.to_string(),
                inc,
                se,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `CVA_0` across a range of contagion or correlation levels, with common
/// random numbers across points.
///
/// `v` does not depend on `gamma` or `rho`, so one value regression (over a
/// loss-factor box wide enough for the largest jump) serves all points.
pub fn wrong_way_sweep(
    base: &ModelParams,
    param: SweepParam,
    from: f64,
    to: f64,
    n_points: usize,
    cfg: &SweepConfig,
) -> Result<SweepTable> {
    if n_points < 2 {
        return Err(invalid("points", "a sweep needs at least two points"));
    }
    if !(0.0..=1.0).contains(&from) || !(0.0..=1.0).contains(&to) {
        return Err(invalid("sweep", "range must lie in [0, 1]"));
    }
    let values: Vec<f64> = (0..n_points)
        .map(|i| from + (to - from) * i as f64 / (n_points - 1) as f64)
        .collect();
    let at = |v: f64| {
        let mut p = base.clone();
        match param {
            SweepParam::Gamma => p.gamma_x = v,
            SweepParam::Rho => p.rho = v,
        }
        p
    };
    let shared = if base.has_static_loss_factor() {
        None
    } else {
        let mut widest = base.clone();
        widest.gamma_x = match param {
            SweepParam::Gamma => from.max(to),
            SweepParam::Rho => base.gamma_x,
        };
        let engine = PathEngine::new(widest.clone(), cfg.grid)?;
        let start = ValueSurface::default_box(&widest).into();
        Some(ValueSurface::simulate(
            &engine,
            cfg.value_paths,
            cfg.seed ^ 0x5eed,
            &start,
            cfg.degree,
        )?)
    };
    let mut samples = Vec::with_capacity(n_points);
    for &v in &values {
        let p = at(v);
        let post = match &shared {
            Some(s) => PostDefault::Surface(s.clone()),
            None => {
                let times: Vec<f64> = (0..=cfg.grid.n_steps).map(|k| cfg.grid.time(k)).collect();
                PostDefault::Table(build_loss_value_table(
                    &p,
                    p.post_default_x(p.x0),
                    &times,
                    &LatticeConfig::default(),
                )?)
            }
        };
        let est = CvaEstimator::new(
            PathEngine::new(p.clone(), cfg.grid)?,
            post,
            McConfig {
                n_paths: cfg.n_paths,
                seed: cfg.seed,
            },
        );
        samples.push(est.samples(0.0, 0.0, p.x0, p.y0)?);
    }
    let mut points = Vec::with_capacity(n_points);
    let mut monotone = true;
    for (i, &v) in values.iter().enumerate() {
        let increment = (i > 0).then(|| paired_difference(&samples[i], &samples[i - 1]));
        if let Some(e) = increment {
            monotone &= e.mean >= -3.0 * e.stderr;
        }
        points.push(SweepPoint {
            value: v,
            cva0: Estimate::from_samples(&samples[i]),
            increment,
        });
    }
    Ok(SweepTable {
        param,
        points,
        monotone,
        total_increase: paired_difference(&samples[n_points - 1], &samples[0]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::IntensityMap;
    use crate::presets::Preset;

    fn grid() -> SimGrid {
        SimGrid::new(1.0, 104, 4).unwrap()
    }

    #[test]
    fn zero_at_maturity_and_without_hazard() {
        let p = Preset::Case1.params();
        let est = CvaEstimator::example1(
            &p,
            grid(),
            &LatticeConfig::default(),
            McConfig {
                n_paths: 50,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(est.cva_at(1.0, 0.0, 100.0, 0.05).unwrap().mean, 0.0);
        let mut q = p.clone();
        q.lam_r_map = IntensityMap::Constant { value: 0.0 };
        let est = CvaEstimator::example1(
            &q,
            grid(),
            &LatticeConfig::default(),
            McConfig {
                n_paths: 50,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(est.cva_at(0.0, 0.0, 100.0, 0.05).unwrap().mean, 0.0);
        let semi = Example1Cva::new(&q, &[0.0], &LatticeConfig::default()).unwrap();
        assert_eq!(semi.value(0.0, 0.0, 100.0, 0.05), 0.0);
    }

    #[test]
    fn semi_analytic_quadrature_is_converged() {
        let p = Preset::Case1.params();
        let a = Example1Cva::new(&p, &[0.0], &LatticeConfig::default()).unwrap();
        let b = Example1Cva::with_rule(
            &p,
            &[0.0],
            &LatticeConfig::default(),
            CompositeRule::new(16, 8),
        )
        .unwrap();
        for (l, y) in [(0.0, 0.05), (40.0, 0.08), (90.0, 0.02)] {
            let (pa, pb) = (a.point(0.0, l, 100.0, y), b.point(0.0, l, 100.0, y));
            assert!((pa.f - pb.f).abs() < 1e-8 * (1.0 + pb.f), "{pa:?} {pb:?}");
            assert!((pa.f_y - pb.f_y).abs() < 1e-6 * (1.0 + pb.f_y.abs()));
        }
    }

    #[test]
    fn semi_analytic_y_derivative() {
        let p = Preset::Case1.params();
        let a = Example1Cva::new(&p, &[0.2], &LatticeConfig::default()).unwrap();
        let (l, y, e) = (30.0, 0.06, 1e-5);
        let fd = (a.value(0.2, l, 100.0, y + e) - a.value(0.2, l, 100.0, y - e)) / (2.0 * e);
        let pt = a.point(0.2, l, 100.0, y);
        assert!((pt.f_y - fd).abs() < 1e-6 * (1.0 + fd.abs()));
        assert!(pt.f_y > 0.0);
    }

    #[test]
    fn semi_analytic_matches_monte_carlo() {
        let p = Preset::Case1.params();
        let semi = Example1Cva::new(&p, &[0.0], &LatticeConfig::default()).unwrap();
        let grid = SimGrid::new(1.0, 520, 20).unwrap();
        let est = CvaEstimator::example1(
            &p,
            grid,
            &LatticeConfig::default(),
            McConfig {
                n_paths: 20_000,
                seed: 4,
            },
        )
        .unwrap();
        let mc = est.cva_at(0.0, 0.0, 100.0, 0.05).unwrap();
        let exact = semi.value(0.0, 0.0, 100.0, 0.05);
        assert!(mc.within(exact, 3.0), "{mc:?} vs {exact}");
    }

    #[test]
    fn bounded_by_cap() {
        let p = Preset::Case2.params();
        let semi = Example1Cva::new(&p, &[0.0, 0.5], &LatticeConfig::default()).unwrap();
        for l in [0.0, 50.0, 120.0, 400.0] {
            for y in [0.0, 0.05, 0.5] {
                let f = semi.value(0.5, l, 10.0, y);
                assert!((0.0..=200.0).contains(&f));
            }
        }
    }

    #[test]
    fn flat_hazard_has_no_y_sensitivity() {
        let mut p = Preset::Case1.params();
        p.lam_r_map = IntensityMap::Constant { value: 0.05 };
        let est = CvaEstimator::example1(
            &p,
            grid(),
            &LatticeConfig::default(),
            McConfig {
                n_paths: 500,
                seed: 2,
            },
        )
        .unwrap();
        let s = est
            .cva_sensitivities(0.0, 0.0, 100.0, 0.05, Bumps::default())
            .unwrap();
        assert_eq!(s.d_y.mean, 0.0);
    }

    #[test]
    fn cva_path_vanishes_after_default() {
        let p = Preset::Case1.params();
        let g = SimGrid::new(1.0, 52, 2).unwrap();
        let dates: Vec<f64> = g.date_indices().iter().map(|&k| g.time(k)).collect();
        let semi = Example1Cva::new(&p, &dates, &LatticeConfig::default()).unwrap();
        let engine = PathEngine::new(p.clone(), g).unwrap();
        let cva0 = p.delta_r * semi.value(0.0, 0.0, p.x0, p.y0);
        for path in engine.simulate_paths(300, 8, Mode::Full).unwrap() {
            let c = cva_path(&p, &semi, &g, &path).unwrap();
            assert_eq!(c[0], cva0);
            assert_eq!(*c.last().unwrap(), 0.0);
            for (d, &k) in g.date_indices().iter().enumerate() {
                if path.hr_at(k) == 1.0 {
                    assert_eq!(c[d], 0.0);
                }
            }
        }
    }

    #[test]
    fn general_surface_fits_and_is_bounded() {
        let p = Preset::Case3.params();
        let g = SimGrid::new(1.0, 104, 4).unwrap();
        let engine = PathEngine::new(p.clone(), g).unwrap();
        let v = ValueSurface::simulate(&engine, 2000, 1, &ValueSurface::default_box(&p).into(), 3)
            .unwrap();
        let post = PostDefault::Surface(v);
        let f = CvaSurface::simulate(
            &engine,
            &post,
            2000,
            2,
            &CvaSurface::default_box(&p).into(),
            3,
        )
        .unwrap();
        let pt = f.point(0.0, 0.0, 100.0, 0.05);
        assert!(pt.f > 0.0 && pt.f < 200.0);
        assert!(pt.f_y > 0.0);
        assert_eq!(f.value(1.0, 10.0, 100.0, 0.05), 0.0);
    }
}
