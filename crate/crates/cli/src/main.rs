use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rccr::cds::CdsCurve;
use rccr::cva::{
    wrong_way_sweep, Bumps, CvaEstimator, CvaModel, Example1Cva, McConfig, SweepConfig, SweepParam,
};
use rccr::hedge::{
    backtest, density_report, strategy_trajectory, BacktestConfig, Pricers, RegressionConfig,
    StrategyKind, MIN_DEFAULTS,
};
use rccr::model::{validate, Status};
use rccr::panjer::LatticeConfig;
use rccr::presets::{params_from_json, Preset};
use rccr::pricer::{build_loss_value_table, PostDefault, ValueSurface, DEFAULT_DEGREE};
use rccr::{Mode, ModelParams, PathEngine, SimGrid, StartState};
use serde::Serialize;
use serde_json::{json, Value};

const DATES: usize = 26;

#[derive(Parser, Debug)]
#[command(
    name = "rccr",
    version,
    about = "Reinsurance counterparty credit risk: pricing, CVA and hedging experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Parameter preset: case1, case2, case3 or sweep.
    #[arg(long)]
    preset: Option<String>,
    /// JSON file with model parameters and an optional `run` object
    /// (`paths`, `seed`, `steps`); values override the preset, flags override the file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Monte Carlo paths.
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulation steps per unit time; must be a multiple of 26.
    #[arg(long)]
    steps: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the model assumptions and write validation.json.
    Validate(Common),
    /// Reinsurance value v(t, l) before and after default.
    Price(Common),
    /// CDS value surface and fair spread.
    Cds(Common),
    /// CVA_0 with standard error and factor sensitivities.
    Cva(Common),
    /// CVA_0 across contagion or correlation levels.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "gamma")]
        param: String,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 1.0)]
        to: f64,
        #[arg(long, default_value_t = 11)]
        points: usize,
    },
    /// Tracking errors of the hedging strategies.
    Backtest {
        #[command(flatten)]
        common: Common,
        /// Comma-separated strategies (unhedged, static, dynamic, dynamic*c).
        #[arg(long, default_value = "unhedged,static,dynamic")]
        strategy: String,
    },
    /// Distribution of the terminal error on defaulted paths.
    Density {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "unhedged,static,dynamic")]
        strategy: String,
        #[arg(long, default_value_t = 40)]
        bins: usize,
    },
    /// Optimal CDS position along one path.
    Trajectory {
        #[command(flatten)]
        common: Common,
        /// Path index; defaults to the first path with a default.
        #[arg(long)]
        path: Option<u64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Price(_) => "price",
            Command::Cds(_) => "cds",
            Command::Cva(_) => "cva",
            Command::Sweep { .. } => "sweep",
            Command::Backtest { .. } => "backtest",
            Command::Density { .. } => "density",
            Command::Trajectory { .. } => "trajectory",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Validate(c) | Command::Price(c) | Command::Cds(c) | Command::Cva(c) => c,
            Command::Sweep { common, .. }
            | Command::Backtest { common, .. }
            | Command::Density { common, .. }
            | Command::Trajectory { common, .. } => common,
        }
    }

    fn default_paths(&self) -> usize {
        match self {
            Command::Validate(_) | Command::Cds(_) => 0,
            Command::Price(_) | Command::Sweep { .. } => 20_000,
            Command::Cva(_) => 200_000,
            Command::Backtest { .. } | Command::Density { .. } | Command::Trajectory { .. } => 2000,
        }
    }
}

#[derive(Debug)]
struct CliError {
    kind: &'static str,
    message: String,
}

impl CliError {
    fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }
}

impl From<rccr::Error> for CliError {
    fn from(e: rccr::Error) -> Self {
        use rccr::Error as E;
        let kind = match &e {
            E::InvalidParameter { .. } => "invalid_parameter",
            E::IntensityBound { .. } => "intensity_bound",
            E::LatticeBound { .. } => "lattice_bound",
            E::RankDeficient { .. } => "rank_deficient",
            E::Quadrature(_) => "quadrature",
            E::TooFewDefaults { .. } => "too_few_defaults",
            E::DegenerateHedge(_) => "degenerate_hedge",
            E::MissingTable(_) => "missing_table",
            E::Io(_) => "io",
            E::Csv(_) => "csv",
            E::Json(_) => "json",
        };
        Self::new(kind, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new("io", e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::new("json", e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Fully resolved settings of one run.
#[derive(Debug, Clone, Serialize)]
struct Resolved {
    preset: String,
    config: Option<PathBuf>,
    seed: u64,
    paths: usize,
    steps: usize,
    params: ModelParams,
}

impl Resolved {
    fn grid(&self) -> Result<SimGrid> {
        if self.steps == 0 || !self.steps.is_multiple_of(DATES) {
            return Err(CliError::new(
                "invalid_parameter",
                format!(
                    "--steps must be a positive multiple of {DATES}, got {}",
                    self.steps
                ),
            ));
        }
        let n = (self.steps as f64 * self.params.maturity).round() as usize;
        let n = n.max(DATES).div_ceil(DATES) * DATES;
        Ok(SimGrid::new(self.params.maturity, n, n / DATES)?)
    }

    fn header(&self) -> String {
        format!("# rccr preset={} seed={}\n", self.preset, self.seed)
    }

    fn stamp(&self, mut v: Value) -> Value {
        if let Value::Object(m) = &mut v {
            m.insert("preset".into(), json!(self.preset));
            m.insert("seed".into(), json!(self.seed));
        }
        v
    }
}

fn resolve(cmd: &Command) -> Result<Resolved> {
    let c = cmd.common();
    let default_preset = if matches!(cmd, Command::Sweep { .. }) {
        Preset::Sweep
    } else {
        Preset::Case1
    };
    let preset = match &c.preset {
        Some(name) => name.parse::<Preset>()?,
        None => default_preset,
    };
    let mut run = serde_json::Map::new();
    let (params, label) = match &c.config {
        None => (preset.params(), preset.name().to_string()),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::new("io", format!("cannot read {}: {e}", path.display())))?;
            let mut file: Value = serde_json::from_str(&text)?;
            let obj = file.as_object_mut().ok_or_else(|| {
                CliError::new("invalid_parameter", "config must be a JSON object")
            })?;
            if let Some(Value::Object(r)) = obj.remove("run") {
                run = r;
            }
            let base = match obj.remove("preset") {
                Some(Value::String(s)) if c.preset.is_none() => s.parse::<Preset>()?,
                _ => preset,
            };
            let mut merged = serde_json::to_value(base.params())?;
            let keep_zeta = obj.contains_key("zeta");
            for (k, v) in obj.iter() {
                merged[k.as_str()] = v.clone();
            }
            if !keep_zeta {
                merged.as_object_mut().expect("object").remove("zeta");
            }
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            (
                params_from_json(&merged.to_string())?,
                format!("{}+{stem}", base.name()),
            )
        }
    };
    params.check()?;
    let from_run = |key: &str| run.get(key).and_then(Value::as_u64);
    Ok(Resolved {
        preset: label,
        config: c.config.clone(),
        seed: c.seed.or(from_run("seed")).unwrap_or(7),
        paths: c
            .paths
            .or(from_run("paths").map(|v| v as usize))
            .unwrap_or(cmd.default_paths()),
        steps: c
            .steps
            .or(from_run("steps").map(|v| v as usize))
            .unwrap_or(20 * DATES),
        params,
    })
}

struct Outputs<'a> {
    dir: &'a Path,
    run: &'a Resolved,
    files: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn csv(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
    ) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        w.write_all(self.run.header().as_bytes())?;
        body(&mut w)?;
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, value: Value) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.run.stamp(value))?;
        fs::write(self.dir.join(name), text + "\n")?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn strategies(list: &str) -> Result<Vec<StrategyKind>> {
    list.split(',')
        .map(|s| s.trim().parse::<StrategyKind>().map_err(CliError::from))
        .collect()
}

fn pricers(run: &Resolved, grid: SimGrid) -> Result<Pricers> {
    let cfg = RegressionConfig {
        seed: run.seed ^ 0x0c0a,
        ..RegressionConfig::default()
    };
    Ok(Pricers::build(
        &run.params,
        grid,
        &LatticeConfig::default(),
        &cfg,
    )?)
}

fn execute(cmd: &Command, run: &Resolved, out: &mut Outputs) -> Result<Value> {
    let p = &run.params;
    let grid = run.grid()?;
    let dates: Vec<f64> = grid.date_indices().iter().map(|&k| grid.time(k)).collect();
    match cmd {
        Command::Validate(_) => {
            let report = validate(p);
            out.json("validation.json", serde_json::to_value(&report)?)?;
            if report.status() == Status::Fail {
                let failed: Vec<String> = report
                    .checks
                    .iter()
                    .filter(|c| c.status == Status::Fail)
                    .map(|c| format!("{}: {}", c.name, c.detail))
                    .collect();
                return Err(CliError::new("validation_failed", failed.join("; ")));
            }
            Ok(json!({ "status": report.status() }))
        }
        Command::Price(_) => {
            let post_x = p.post_default_x(p.x0);
            let levels: Vec<f64> = (0..=150).map(|i| 2.0 * i as f64).collect();
            let value: Box<dyn Fn(f64, f64, f64) -> f64> = if p.has_static_loss_factor() {
                let lattice = LatticeConfig::default();
                let pre = build_loss_value_table(p, p.x0, &dates, &lattice)?;
                let post = build_loss_value_table(p, post_x, &dates, &lattice)?;
                Box::new(move |t, l, x| {
                    if x == p.x0 {
                        pre.value(t, l)
                    } else {
                        post.value(t, l)
                    }
                })
            } else {
                let engine = PathEngine::new(p.clone(), grid)?;
                let start = ValueSurface::default_box(p).into();
                let surface =
                    ValueSurface::simulate(&engine, run.paths, run.seed, &start, DEFAULT_DEGREE)?;
                Box::new(move |t, l, x| surface.value(t, l, x))
            };
            out.csv("value.csv", |w| {
                writeln!(w, "t,l,v,v_post")?;
                for &t in &dates {
                    for &l in &levels {
                        writeln!(w, "{t},{l},{},{}", value(t, l, p.x0), value(t, l, post_x))?;
                    }
                }
                Ok(())
            })?;
            Ok(json!({ "v0": value(0.0, 0.0, p.x0), "v0_post": value(0.0, 0.0, post_x) }))
        }
        Command::Cds(_) => {
            let curve = CdsCurve::new(p)?;
            let ys: Vec<f64> = (0..=40).map(|i| 0.005 * i as f64).collect();
            out.csv("cds.csv", |w| Ok(curve.write_csv(&dates, &ys, w)?))?;
            let fair = curve.fair_spread(p.y0)?;
            let summary = json!({
                "fair_spread": fair,
                "zeta": p.zeta,
                "g0": curve.value(0.0, p.y0),
                "panels": curve.panels(),
            });
            out.json("cds.json", summary.clone())?;
            Ok(summary)
        }
        Command::Cva(_) => {
            let mc = McConfig {
                n_paths: run.paths,
                seed: run.seed,
            };
            let est = if p.has_static_loss_factor() {
                CvaEstimator::example1(p, grid, &LatticeConfig::default(), mc)?
            } else {
                let engine = PathEngine::new(p.clone(), grid)?;
                let start = ValueSurface::default_box(p).into();
                let surface = ValueSurface::simulate(
                    &engine,
                    20_000,
                    run.seed ^ 0x5eed,
                    &start,
                    DEFAULT_DEGREE,
                )?;
                CvaEstimator::new(engine, PostDefault::Surface(surface), mc)
            };
            let f = est.cva_at(0.0, 0.0, p.x0, p.y0)?;
            let sens = est.cva_sensitivities(0.0, 0.0, p.x0, p.y0, Bumps::default())?;
            let semi = if p.has_static_loss_factor() {
                let model = Example1Cva::new(p, &[0.0], &LatticeConfig::default())?;
                Some(p.delta_r * model.value(0.0, 0.0, p.x0, p.y0))
            } else {
                None
            };
            let summary = json!({
                "cva0": p.delta_r * f.mean,
                "cva0_stderr": p.delta_r * f.stderr,
                "cva0_semi_analytic": semi,
                "df_dx": sens.d_x,
                "df_dy": sens.d_y,
                "warnings": sens.warnings,
                "paths": run.paths,
            });
            out.json("cva.json", summary.clone())?;
            Ok(summary)
        }
        Command::Sweep {
            param,
            from,
            to,
            points,
            ..
        } => {
            let which = match param.as_str() {
                "gamma" => SweepParam::Gamma,
                "rho" => SweepParam::Rho,
                other => {
                    return Err(CliError::new(
                        "invalid_parameter",
                        format!("unknown sweep parameter `{other}` (gamma, rho)"),
                    ))
                }
            };
            let cfg = SweepConfig::new(grid, run.paths, run.seed);
            let table = wrong_way_sweep(p, which, *from, *to, *points, &cfg)?;
            out.csv("sweep.csv", |w| Ok(table.write_csv(w)?))?;
            Ok(json!({
                "param": param,
                "monotone": table.monotone,
                "total_increase": table.total_increase,
            }))
        }
        Command::Backtest { strategy, .. } => {
            let pr = pricers(run, grid)?;
            let cfg = BacktestConfig {
                strategies: strategies(strategy)?,
                ..BacktestConfig::new(run.paths, run.seed)
            };
            let rep = backtest(&pr, &cfg)?;
            out.csv("summary.csv", |w| Ok(rep.write_summary_csv(w)?))?;
            out.csv("errors.csv", |w| Ok(rep.write_errors_csv(w)?))?;
            out.csv("trajectories.csv", |w| Ok(rep.write_trajectories_csv(w)?))?;
            let table: Vec<Value> = rep
                .results
                .iter()
                .map(|r| json!({ "strategy": r.name, "mse": r.mse.mean, "mse_stderr": r.mse.stderr, "mean_error": r.mean.mean }))
                .collect();
            let summary = json!({
                "cva0": rep.cva0,
                "zeta": rep.zeta,
                "paths": run.paths,
                "defaults": rep.default_count(),
                "strategies": table,
            });
            out.json("summary.json", summary.clone())?;
            Ok(summary)
        }
        Command::Density { strategy, bins, .. } => {
            let pr = pricers(run, grid)?;
            let cfg = BacktestConfig {
                strategies: strategies(strategy)?,
                trajectories: 0,
                ..BacktestConfig::new(run.paths, run.seed)
            };
            let rep = backtest(&pr, &cfg)?;
            let mut stats = Vec::new();
            for &kind in &cfg.strategies {
                let d = density_report(&rep, kind, *bins, MIN_DEFAULTS)?;
                out.csv(
                    &format!("density_{}.csv", d.strategy.replace('*', "x")),
                    |w| Ok(d.write_csv(w)?),
                )?;
                stats.push(json!({ "strategy": d.strategy, "defaults": d.n_defaults, "bandwidth": d.bandwidth }));
            }
            Ok(json!({ "densities": stats }))
        }
        Command::Trajectory { path, .. } => {
            let pr = pricers(run, grid)?;
            let engine = PathEngine::new(p.clone(), grid)?;
            let start = StartState::initial(p).into();
            let index = match path {
                Some(i) => *i,
                None => (0..run.paths as u64)
                    .find(|&i| {
                        engine
                            .simulate_one(run.seed, i, Mode::Full, &start)
                            .is_ok_and(|s| s.defaulted())
                    })
                    .unwrap_or(0),
            };
            let scenario = engine.simulate_one(run.seed, index, Mode::Full, &start)?;
            let points = strategy_trajectory(&pr, &scenario)?;
            out.csv("trajectory.csv", |w| {
                writeln!(w, "t,loss,xi,static")?;
                for q in &points {
                    writeln!(w, "{},{},{},{}", q.t, q.loss, q.xi, q.static_level)?;
                }
                Ok(())
            })?;
            Ok(json!({ "path": index, "tau": scenario.tau, "defaulted": scenario.defaulted() }))
        }
    }
}

fn write_error(dir: &Path, cmd: &str, err: &CliError) {
    let record = json!({ "command": cmd, "error": err.kind, "message": err.message });
    let _ = fs::create_dir_all(dir);
    let _ = fs::write(
        dir.join("error.json"),
        serde_json::to_string_pretty(&record).unwrap_or_default() + "\n",
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cmd = &cli.command;
    let dir = cmd.common().out.clone();
    let started = Instant::now();
    let result = (|| -> Result<()> {
        let run = resolve(cmd)?;
        fs::create_dir_all(&dir)?;
        let _ = fs::remove_file(dir.join("error.json"));
        let mut out = Outputs {
            dir: &dir,
            run: &run,
            files: Vec::new(),
        };
        let summary = execute(cmd, &run, &mut out)?;
        let manifest = json!({
            "tool": "rccr",
            "version": env!("CARGO_PKG_VERSION"),
            "command": cmd.name(),
            "run": run,
            "outputs": out.files,
            "summary": summary,
            "started_unix": SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            "runtime_seconds": started.elapsed().as_secs_f64(),
        });
        fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)? + "\n",
        )?;
        println!("{}", serde_json::to_string_pretty(&summary)?);
        Ok(())
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error ({}): {}", e.kind, e.message);
            write_error(&dir, cmd.name(), &e);
            ExitCode::FAILURE
        }
    }
}
