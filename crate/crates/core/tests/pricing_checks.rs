//! Cross-checks of the pricing layers against independent computations.

mod common;

use common::ConstantHazardOracle;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rccr::cds::CdsCurve;
use rccr::cva::{Bumps, CvaEstimator, CvaModel, Example1Cva, McConfig};
use rccr::hedge::{backtest, BacktestConfig, Pricers, StrategyKind};
use rccr::panjer::LatticeConfig;
use rccr::paths::{Start, StartBox};
use rccr::presets::{fair_spread_for, Preset};
use rccr::pricer::{build_loss_value_table, ValueSurface};
use rccr::stats::{quantile, Estimate};
use rccr::{Mode, PathEngine, SimGrid, StartState};

fn engine(p: &rccr::ModelParams) -> PathEngine {
    PathEngine::new(p.clone(), SimGrid::biweekly(p.maturity)).unwrap()
}

#[test]
fn terminal_loss_has_compound_poisson_mean() {
    let p = Preset::Case1.params();
    let e = engine(&p);
    let start = StartState::initial(&p).into();
    let l = e
        .map_paths(100_000, 11, Mode::Tilde, &start, |_, path| {
            path.l_at(path.end())
        })
        .unwrap();
    let est = Estimate::from_samples(&l);
    assert!(est.within(100.0, 3.0), "{est:?}");
}

#[test]
fn panjer_value_matches_direct_simulation() {
    let p = Preset::Case1.params();
    let x = p.post_default_x(p.x0);
    let table = build_loss_value_table(&p, x, &[0.0, 1.0], &LatticeConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let count = Poisson::new(x).unwrap();
    let samples: Vec<f64> = (0..200_000)
        .map(|_| {
            let n: f64 = count.sample(&mut rng);
            let total = if n > 0.0 {
                Gamma::new(n, 1.0).unwrap().sample(&mut rng)
            } else {
                0.0
            };
            common::stop_loss(total, 90.0, 200.0)
        })
        .collect();
    let mc = Estimate::from_samples(&samples);
    let v = table.value(0.0, 0.0);
    assert!(mc.within(v, 3.0), "table {v}, mc {mc:?}");
}

#[test]
fn loss_regression_tracks_the_panjer_table() {
    let p = Preset::Case1.params();
    let grid = SimGrid::biweekly(p.maturity);
    let e = PathEngine::new(p.clone(), grid).unwrap();
    let start = Start::Box(StartBox {
        index: 0,
        l: (40.0, 120.0),
        x: (p.x0, p.x0),
        y: (p.y0, p.y0),
    });
    let surface = ValueSurface::simulate(&e, 40_000, 3, &start, 3).unwrap();
    let dates: Vec<f64> = grid.date_indices().iter().map(|&k| grid.time(k)).collect();
    let table = build_loss_value_table(&p, p.x0, &dates, &LatticeConfig::default()).unwrap();
    let mut worst: f64 = 0.0;
    for d in [0, 6, 13, 20] {
        let fit = surface.fit_at(d).unwrap();
        let t = dates[d];
        // Typical losses at this date for the sampled starting range.
        for l in [60.0 + 100.0 * t, 80.0 + 100.0 * t, 100.0 + 100.0 * t] {
            let exact = table.value(t, l);
            let got = surface.value(t, l, p.x0);
            let se = fit.stderr(&[l, p.x0]);
            worst = worst.max((got - exact).abs() / se);
        }
    }
    assert!(worst <= 3.0, "worst scaled gap {worst}");
}

#[test]
fn cds_legs_match_simulation() {
    let p = Preset::Case1.params();
    let curve = CdsCurve::new(&p).unwrap();
    let zeta = curve.fair_spread(p.y0).unwrap();
    assert!(zeta > 0.0 && zeta < 0.2);
    assert!(curve.with_zeta(zeta).value(0.0, p.y0).abs() < 1e-12);
    let e = engine(&p);
    let start = StartState::initial(&p).into();
    let legs = e
        .map_paths(100_000, 17, Mode::Tilde, &start, |_, path| {
            let hit = path.tau <= p.maturity;
            (
                if hit { p.delta_cds } else { 0.0 },
                path.tau.min(p.maturity),
            )
        })
        .unwrap();
    let (prot, ann): (Vec<f64>, Vec<f64>) = legs.into_iter().unzip();
    let q = curve.point(0.0, p.y0);
    assert!(Estimate::from_samples(&prot).within(q.protection, 3.0));
    assert!(Estimate::from_samples(&ann).within(q.annuity, 3.0));
}

#[test]
fn hazard_sensitivity_matches_differentiated_oracle() {
    // Y frozen at y0, so the identity map gives a flat hazard c = y0 and
    // df/dy = df/dc.
    let mut p = Preset::Case1.params();
    p.sigma_y = 0.0;
    p.kappa_y = 0.0;
    p.zeta = fair_spread_for(&p).unwrap();
    let mc = McConfig {
        n_paths: 20_000,
        seed: 23,
    };
    let est = CvaEstimator::example1(
        &p,
        SimGrid::biweekly(p.maturity),
        &LatticeConfig::default(),
        mc,
    )
    .unwrap();
    let oracle = ConstantHazardOracle {
        lam_pre: p.x0,
        lam_post: p.post_default_x(p.x0),
        c: p.y0,
        maturity: p.maturity,
        priority: 90.0,
        cap: 200.0,
        h: 0.0625,
    };
    let s = est
        .cva_sensitivities(0.0, 0.0, p.x0, p.y0, Bumps::default())
        .unwrap();
    let want = oracle.d_hazard(0.0, 0.0, 40);
    assert!(s.d_y.within(want, 3.0), "mc {:?}, oracle {want}", s.d_y);
    // With a constant loss intensity the x-bump only moves the regimes, so
    // the semi-analytic model reports no x sensitivity.
    let model = Example1Cva::new(&p, &[0.0], &LatticeConfig::default()).unwrap();
    assert_eq!(model.point(0.0, 0.0, p.x0, p.y0).f_x, 0.0);
}

#[test]
fn cva_increases_with_hazard_level() {
    let p = Preset::Case1.params();
    let dates = [0.0, 0.25, 0.5, 0.75];
    let model = Example1Cva::new(&p, &dates, &LatticeConfig::default()).unwrap();
    for t in dates {
        for l in [0.0, 30.0, 60.0, 90.0] {
            for y in [0.01, 0.05, 0.12] {
                assert!(model.point(t, l, p.x0, y).f_y >= 0.0, "t {t} l {l} y {y}");
            }
        }
    }
}

#[test]
fn conditional_error_distributions_case1() {
    let p = Preset::Case1.params();
    let pr =
        Pricers::example1(&p, SimGrid::biweekly(p.maturity), &LatticeConfig::default()).unwrap();
    let rep = backtest(&pr, &BacktestConfig::new(4000, 31)).unwrap();
    let on_default = |k: StrategyKind| -> Vec<f64> {
        rep.result(k)
            .unwrap()
            .errors
            .iter()
            .zip(&rep.defaulted)
            .filter(|(_, &d)| d)
            .map(|(e, _)| *e)
            .collect()
    };
    let (u, s, d) = (
        on_default(StrategyKind::Unhedged),
        on_default(StrategyKind::StaticCds),
        on_default(StrategyKind::DynamicMv),
    );
    assert!(u.len() > 100);
    // The unhedged cedent loses the replacement cost, net of CVA_0.
    assert!(u.iter().all(|&e| e > -rep.cva0 - 1e-12));
    let v0 = build_loss_value_table(&p, p.x0, &[0.0], &LatticeConfig::default())
        .unwrap()
        .value(0.0, 0.0);
    let worst = u.iter().copied().fold(f64::MIN, f64::max);
    assert!(
        worst > 1.5 * v0 && worst < 4.0 * v0,
        "max unhedged {worst}, v0 {v0}"
    );
    // Dynamic errors sit inside the static tails.
    for q in [0.05, 0.95] {
        assert!(quantile(&d, q).abs() < quantile(&s, q).abs(), "q {q}");
    }
    let spread = |x: &[f64]| quantile(x, 0.9) - quantile(x, 0.1);
    assert!(spread(&d) < 0.5 * spread(&s));
}

#[test]
fn optimal_position_rises_with_the_loss() {
    let p = Preset::Case1.params();
    let pr =
        Pricers::example1(&p, SimGrid::biweekly(p.maturity), &LatticeConfig::default()).unwrap();
    let t = 10.0 / 26.0;
    let xi: Vec<f64> = [20.0, 40.0, 60.0, 80.0]
        .iter()
        .map(|&l| pr.hedge_ratio(t, l, p.x0, p.y0).unwrap().xi)
        .collect();
    assert!(xi.windows(2).all(|w| w[1] > w[0]), "{xi:?}");
    assert!(xi[3] > 2.0 * xi[0]);
}
