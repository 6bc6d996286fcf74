//! `ppscore` command-line runner: simulate patterns, estimate summary
//! statistics, score forecasts, compare score tables, fit cluster models and
//! run the packaged experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ppscore::estimate::{default_bandwidth, default_upper_r, f_hat, k_hat_plugin, kernel_intensity, KPlugin, PixelGrid};
use ppscore::fitting::{fit_family, Family, FitConfig, Theta};
use ppscore::harness::{
    generate_synthetic_catalog, generate_synthetic_plots, run_catalog_sweep, run_study1, run_study2, run_tree_selection,
    Experiment, RunConfig, Scale,
};
use ppscore::inference::{permutation_test, PairedScores};
use ppscore::io::{
    join_scores, read_catalog_csv, read_pattern_csv, read_pattern_dir, read_scores_csv, write_curve_csv,
    write_field_csv, write_json, write_meta, write_pattern_csv, write_pattern_dir, write_scores_csv, Meta, ScoreRow,
};
use ppscore::rng::labeled_seed;
use ppscore::scoring::{k_score_grid, Estimator, ForecastCurves, ForecastSource, PoissonForecast};
use ppscore::{Error, ModelSpec, PointPattern, RGrid, Result, Window};

#[derive(Parser, Debug)]
#[command(name = "ppscore", version, about = "Proper scoring rules for spatial point-pattern forecasts")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Global {
    /// Run configuration in TOML. Without it a built-in preset is used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Preset that supplies models and window to the single-step commands
    /// when no configuration file is given.
    #[arg(long, global = true, value_enum, default_value_t = PresetArg::Study1)]
    preset: PresetArg,
    /// Use the full replication sizes in presets.
    #[arg(long, global = true)]
    paper_scale: bool,
    /// Root seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Observation window as `xmin,xmax,ymin,ymax`, overriding the configuration.
    #[arg(long, global = true)]
    window: Option<String>,
    /// Exit with status 2 when any result carries a flag.
    #[arg(long, global = true)]
    strict: bool,
    /// Print the resolved configuration as TOML and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case")]
enum PresetArg {
    Study1,
    Study2,
    Sweep,
    Trees,
}

impl From<PresetArg> for Experiment {
    fn from(p: PresetArg) -> Experiment {
        match p {
            PresetArg::Study1 => Experiment::Study1,
            PresetArg::Study2 => Experiment::Study2,
            PresetArg::Sweep => Experiment::Sweep,
            PresetArg::Trees => Experiment::Trees,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum EstimatorArg {
    Intensity,
    Kfun,
    Ffun,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum ScoreArg {
    Intensity,
    Kfun,
    Ffun,
    Log,
    Brehmer,
}

impl ScoreArg {
    fn name(self) -> &'static str {
        match self {
            ScoreArg::Intensity => "intensity",
            ScoreArg::Kfun => "kfun",
            ScoreArg::Ffun => "ffun",
            ScoreArg::Log => "log",
            ScoreArg::Brehmer => "brehmer",
        }
    }
}

/// Estimator settings shared by `estimate` and `score`.
#[derive(Args, Debug, Clone, Serialize)]
struct EstimatorOpts {
    /// Kernel bandwidth; defaults to an eighth of the window diameter over sqrt 2.
    #[arg(long)]
    sigma: Option<f64>,
    /// Largest distance of the K or F grid; defaults to a quarter of the
    /// shorter window side.
    #[arg(long)]
    upper_r: Option<f64>,
    /// Points of the K or F grid.
    #[arg(long, default_value_t = 64)]
    n_r: usize,
    /// Pixels per side of the intensity grid.
    #[arg(long, default_value_t = 128)]
    pixels: usize,
    /// Intensity plug-in of K̂ as JSON, e.g. `{"kind":"count_based"}`.
    #[arg(long)]
    k_plugin: Option<String>,
}

impl EstimatorOpts {
    fn plugin(&self) -> Result<KPlugin> {
        match &self.k_plugin {
            Some(text) => Ok(serde_json::from_str(text)?),
            None => Ok(KPlugin::default()),
        }
    }

    fn r_grid(&self, w: &Window, kfun: bool) -> Result<RGrid> {
        let upper = self.upper_r.unwrap_or_else(|| default_upper_r(w));
        if kfun {
            k_score_grid(w, upper, self.n_r)
        } else {
            RGrid::uniform(upper, self.n_r)
        }
    }

    fn estimator(&self, kind: EstimatorArg, w: &Window) -> Result<Estimator> {
        Ok(match kind {
            EstimatorArg::Intensity => Estimator::Intensity {
                sigma: self.sigma.unwrap_or_else(|| default_bandwidth(w)),
                nx: self.pixels,
                ny: self.pixels,
            },
            EstimatorArg::Kfun => Estimator::KFunction {
                grid: self.r_grid(w, true)?,
                plugin: self.plugin()?,
            },
            EstimatorArg::Ffun => Estimator::FFunction {
                grid: self.r_grid(w, false)?,
                probe_spacing: None,
                erosion: Default::default(),
            },
        })
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw patterns from a configured model into a directory of CSV files.
    Simulate(SimulateArgs),
    /// Estimate a summary statistic for every pattern in a directory.
    Estimate(EstimateArgs),
    /// Score a configured model against observed patterns.
    Score(ScoreArgs),
    /// Paired permutation test between two score tables.
    Permtest(PermtestArgs),
    /// Fit a cluster-model family by minimum contrast.
    Fit(FitArgs),
    /// Five-model comparison with the intensity and K-function scores.
    Study1(OutArgs),
    /// Bandwidth study of Gaussian Poisson forecasts.
    Study2(OutArgs),
    /// Cross-validated mixture-model sweep on an event catalog.
    Sweep(SweepArgs),
    /// Leave-half-out cluster-model selection on plot data.
    Trees(TreesArgs),
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    /// Model key in the configuration.
    #[arg(long)]
    model: String,
    /// Number of patterns.
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct EstimateArgs {
    /// Directory of pattern CSV files.
    #[arg(long)]
    #[serde(skip)]
    obs: PathBuf,
    #[arg(long, value_enum)]
    estimator: EstimatorArg,
    #[command(flatten)]
    opts: EstimatorOpts,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct ScoreArgs {
    /// Directory of observed pattern CSV files.
    #[arg(long)]
    #[serde(skip)]
    obs: PathBuf,
    /// Forecast model key in the configuration.
    #[arg(long)]
    model: String,
    #[arg(long, value_enum)]
    score: ScoreArg,
    #[command(flatten)]
    opts: EstimatorOpts,
    /// Monte-Carlo draws of the forecast.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Weight of the count penalty in the Brehmer score.
    #[arg(long, default_value_t = 1.0)]
    brehmer_c: f64,
    /// Output score table.
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct PermtestArgs {
    /// Score table of the first forecast.
    #[arg(long)]
    #[serde(skip)]
    a: PathBuf,
    /// Score table of the second forecast.
    #[arg(long)]
    #[serde(skip)]
    b: PathBuf,
    #[arg(long, default_value_t = 999)]
    n_perm: usize,
    /// Output JSON; printed to stdout when absent.
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct FitArgs {
    /// Model family: poisson, thomas, matern, cauchy, var_gamma or lgcp.
    #[arg(long)]
    family: String,
    /// Directory of training pattern CSV files.
    #[arg(long)]
    #[serde(skip)]
    train: PathBuf,
    /// Upper limit of the contrast integral.
    #[arg(long)]
    rmax: Option<f64>,
    #[arg(long, default_value_t = 64)]
    n_r: usize,
    /// Output JSON; printed to stdout when absent.
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct OutArgs {
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    /// Catalog CSV with x, y and optional magnitude columns. Without it a
    /// synthetic catalog is generated and written to the output directory.
    #[arg(long)]
    #[serde(skip)]
    catalog: Option<PathBuf>,
    /// Anchor pattern CSV for the anchor smoothing mode.
    #[arg(long)]
    #[serde(skip)]
    anchors: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct TreesArgs {
    /// Directory of plot pattern CSV files. Without it synthetic plots are
    /// generated and written to `<out>/plots`.
    #[arg(long)]
    #[serde(skip)]
    plots: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

fn parse_window(text: &str) -> Result<Window> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("window '{text}': {e}")))?;
    match v.as_slice() {
        [x0, x1, y0, y1] => Window::new(*x0, *x1, *y0, *y1),
        _ => Err(Error::Config(format!("window '{text}' needs four numbers"))),
    }
}

/// Configuration from `--config` or the preset, with command-line overrides.
/// Experiment commands require a configuration of their own kind.
fn resolve(g: &Global, experiment: Option<Experiment>) -> Result<RunConfig> {
    let scale = if g.paper_scale { Scale::Paper } else { Scale::Desk };
    let mut cfg = match &g.config {
        Some(path) => {
            let cfg = RunConfig::load(path)?;
            if let Some(e) = experiment {
                if cfg.experiment != e {
                    return Err(Error::Config(format!(
                        "configuration is for {:?}, the command needs {e:?}",
                        cfg.experiment
                    )));
                }
            }
            if g.paper_scale {
                log::warn!("--paper-scale only affects presets; the configuration file sets its own sizes");
            }
            cfg
        }
        None => RunConfig::preset(experiment.unwrap_or(g.preset.into()), scale),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(w) = &g.window {
        cfg.window = parse_window(w)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn experiment_of(cmd: &Command) -> Option<Experiment> {
    match cmd {
        Command::Study1(_) => Some(Experiment::Study1),
        Command::Study2(_) => Some(Experiment::Study2),
        Command::Sweep(_) => Some(Experiment::Sweep),
        Command::Trees(_) => Some(Experiment::Trees),
        _ => None,
    }
}

fn meta_for(command: &str, cfg: &RunConfig, args: &impl Serialize, n: usize) -> Result<Meta> {
    Meta::new(command, &(cfg, args), cfg.seed, n)
}

fn read_patterns(dir: &Path, w: &Window) -> Result<Vec<(String, PointPattern)>> {
    let patterns = read_pattern_dir(dir, w)?;
    if patterns.is_empty() {
        return Err(Error::Empty(format!("no pattern CSV files in {}", dir.display())));
    }
    Ok(patterns)
}

fn emit_json(out: Option<&Path>, value: &impl Serialize) -> Result<()> {
    match out {
        Some(path) => write_json(path, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn simulate(cfg: &RunConfig, a: &SimulateArgs) -> Result<Vec<String>> {
    let seed = labeled_seed(cfg.seed, &format!("simulate/{}", a.model));
    let patterns = cfg.model(&a.model)?.prepare(&cfg.window)?.draw_many(a.count, seed)?;
    let mut paths = write_pattern_dir(&a.out, &a.model, &patterns)?;
    let manifest = a.out.join("simulate");
    write_meta(&manifest, &meta_for("simulate", cfg, a, a.count)?)?;
    paths.push(ppscore::io::meta_path(&manifest));
    report(&paths);
    Ok(Vec::new())
}

fn estimate(cfg: &RunConfig, a: &EstimateArgs) -> Result<Vec<String>> {
    let w = cfg.window;
    let mut flags = Vec::new();
    let mut paths = Vec::new();
    for (stem, p) in read_patterns(&a.obs, &w)? {
        let path = a.out.join(format!("{stem}_{}.csv", a.estimator.to_possible_value().expect("named").get_name()));
        match a.opts.estimator(a.estimator, &w)? {
            Estimator::Intensity { sigma, nx, ny } => {
                let field = kernel_intensity(&p, sigma, &PixelGrid::new(w, nx, ny)?)?;
                write_field_csv(&path, &field)?;
            }
            Estimator::KFunction { grid, plugin } => {
                let (curve, diag) = k_hat_plugin(&p, &grid, &plugin)?;
                if !diag.is_clean() {
                    flags.push(format!("{stem}: degenerate K estimate {diag:?}"));
                }
                write_curve_csv(&path, &curve)?;
            }
            Estimator::FFunction { grid, probe_spacing, .. } => {
                write_curve_csv(&path, &f_hat(&p, &grid, probe_spacing)?)?;
            }
        }
        paths.push(path);
    }
    let manifest = a.out.join("estimate");
    write_meta(&manifest, &meta_for("estimate", cfg, a, 0)?)?;
    report(&paths);
    Ok(flags)
}

fn score(cfg: &RunConfig, a: &ScoreArgs) -> Result<Vec<String>> {
    let w = cfg.window;
    let spec: &ModelSpec = cfg.model(&a.model)?;
    let obs = read_patterns(&a.obs, &w)?;
    let mut flags = Vec::new();
    let mut rows = Vec::with_capacity(obs.len());
    let name = a.score.name();
    let seed = labeled_seed(cfg.seed, &format!("score/{}", a.model));
    let mut push = |obs_id: &str, value: f64, n: usize, flagged: bool, flags: &mut Vec<String>| {
        if flagged {
            flags.push(format!("{obs_id}: degenerate estimate"));
        }
        if !value.is_finite() {
            flags.push(format!("{obs_id}: score is {value}"));
        }
        rows.push(ScoreRow {
            obs_id: obs_id.to_string(),
            score_name: name.to_string(),
            value,
            n,
            seed,
        });
    };
    match a.score {
        ScoreArg::Log | ScoreArg::Brehmer => {
            let lambda = spec
                .poisson_intensity()
                .ok_or_else(|| Error::Config(format!("the {name} score needs a Poisson model, '{}' is not one", a.model)))?;
            let forecast = PoissonForecast::new(lambda, &w)?;
            for (id, y) in &obs {
                let v = match a.score {
                    ScoreArg::Log => forecast.log_score(y),
                    _ => forecast.brehmer_score(y, a.brehmer_c)?,
                };
                push(id, v, 0, false, &mut flags);
            }
        }
        ScoreArg::Intensity | ScoreArg::Kfun | ScoreArg::Ffun => {
            let kind = match a.score {
                ScoreArg::Intensity => EstimatorArg::Intensity,
                ScoreArg::Kfun => EstimatorArg::Kfun,
                _ => EstimatorArg::Ffun,
            };
            let est = a.opts.estimator(kind, &w)?;
            let curves = ForecastCurves::from_source(&est, &ForecastSource::Model(spec.clone()), &w, a.n, seed)?;
            if curves.flagged_draws() > 0 {
                flags.push(format!("{} forecast draws had degenerate estimates", curves.flagged_draws()));
            }
            for (id, y) in &obs {
                let (v, flagged) = curves.score_flagged(y)?;
                push(id, v, a.n, flagged, &mut flags);
            }
        }
    }
    write_scores_csv(&a.out, &rows)?;
    write_meta(&a.out, &meta_for("score", cfg, a, rows.first().map_or(0, |r| r.n))?)?;
    report(std::slice::from_ref(&a.out));
    Ok(flags)
}

#[derive(Serialize)]
struct PermtestOutput {
    p_value: f64,
    mean_diff: f64,
    n: usize,
    n_perm: usize,
    seed: u64,
    truncated_infinite: bool,
    excluded: usize,
    unmatched: Vec<String>,
}

fn permtest(cfg: &RunConfig, a: &PermtestArgs) -> Result<Vec<String>> {
    let ta = read_scores_csv(&a.a)?;
    let tb = read_scores_csv(&a.b)?;
    let (_, va, vb, unmatched) = join_scores(&ta, &tb)?;
    let mut flags = Vec::new();
    if !unmatched.is_empty() {
        flags.push(format!("{} observations appear in only one table", unmatched.len()));
    }
    let paired = PairedScores::new(a.a.display().to_string(), a.b.display().to_string(), &va, &vb)?;
    let t = permutation_test(&paired, a.n_perm, labeled_seed(cfg.seed, "permtest"))?;
    if t.truncated_infinite {
        flags.push("infinite score differences were truncated".into());
    }
    let out = PermtestOutput {
        p_value: t.p_value,
        mean_diff: t.mean_diff,
        n: t.n,
        n_perm: t.n_perm,
        seed: t.seed,
        truncated_infinite: t.truncated_infinite,
        excluded: t.excluded,
        unmatched,
    };
    emit_json(a.out.as_deref(), &out)?;
    if let Some(path) = &a.out {
        write_meta(path, &meta_for("permtest", cfg, a, 0)?)?;
    }
    Ok(flags)
}

#[derive(Serialize)]
struct FitOutput {
    family: Family,
    theta_hat: Theta,
    intensity: f64,
    objective: Option<f64>,
    converged: bool,
    iterations: Option<u64>,
    model: ModelSpec,
}

fn fit(cfg: &RunConfig, a: &FitArgs) -> Result<Vec<String>> {
    let family = Family::parse(&a.family)?;
    let train: Vec<PointPattern> = read_patterns(&a.train, &cfg.window)?.into_iter().map(|(_, p)| p).collect();
    let fc = FitConfig {
        r_max: a.rmax,
        n_r: a.n_r,
        ..FitConfig::default()
    };
    let m = fit_family(family, &train, &fc)?;
    let out = FitOutput {
        family,
        theta_hat: m.theta,
        intensity: m.intensity,
        objective: m.fit.as_ref().map(|f| f.objective),
        converged: m.converged(),
        iterations: m.fit.as_ref().map(|f| f.iterations),
        model: m.spec.clone(),
    };
    emit_json(a.out.as_deref(), &out)?;
    if let Some(path) = &a.out {
        write_meta(path, &meta_for("fit", cfg, a, 0)?)?;
    }
    Ok(if out.converged {
        Vec::new()
    } else {
        vec![format!("{family} fit did not converge")]
    })
}

fn sweep(cfg: &RunConfig, a: &SweepArgs) -> Result<Vec<String>> {
    let w = cfg.window;
    let s = cfg.sweep.as_ref().expect("validated");
    let mut paths = Vec::new();
    let (catalog, anchors) = match &a.catalog {
        Some(path) => {
            let anchors = a.anchors.as_deref().map(|p| read_pattern_csv(p, &w)).transpose()?;
            (read_catalog_csv(path, &w)?, anchors)
        }
        None => {
            let syn = s
                .synthetic
                .as_ref()
                .ok_or_else(|| Error::Config("no catalog given and no synthetic catalog configured".into()))?;
            let data = generate_synthetic_catalog(&w, syn, cfg.seed)?;
            let (c, an) = data.write(&a.out)?;
            paths.extend([c, an]);
            (data.catalog, Some(data.anchors))
        }
    };
    let result = run_catalog_sweep(cfg, &catalog, anchors.as_ref())?;
    paths.extend(result.write(&a.out)?);
    report(&paths);
    if let Some((alpha, eta)) = result.argmin("log") {
        log::info!("log-score optimum at alpha = {alpha}, eta = {eta}");
    }
    Ok(result.flags)
}

fn trees(cfg: &RunConfig, a: &TreesArgs) -> Result<Vec<String>> {
    let mut paths = Vec::new();
    let plots = match &a.plots {
        Some(dir) => read_patterns(dir, &cfg.window)?,
        None => {
            let plots = generate_synthetic_plots(cfg)?;
            for (name, p) in &plots {
                let path = a.out.join("plots").join(format!("{name}.csv"));
                write_pattern_csv(&path, p)?;
                paths.push(path);
            }
            plots
        }
    };
    let result = run_tree_selection(cfg, &plots)?;
    paths.extend(result.write(&a.out)?);
    report(&paths);
    Ok(result.flags)
}

fn run(cli: &Cli) -> Result<Vec<String>> {
    let cfg = resolve(&cli.global, experiment_of(&cli.command))?;
    if cli.global.print_config {
        print!("{}", cfg.to_toml_string()?);
        return Ok(Vec::new());
    }
    match &cli.command {
        Command::Simulate(a) => simulate(&cfg, a),
        Command::Estimate(a) => estimate(&cfg, a),
        Command::Score(a) => score(&cfg, a),
        Command::Permtest(a) => permtest(&cfg, a),
        Command::Fit(a) => fit(&cfg, a),
        Command::Study1(a) => {
            let r = run_study1(&cfg)?;
            report(&r.write(&a.out)?);
            Ok(r.flags)
        }
        Command::Study2(a) => {
            let r = run_study2(&cfg)?;
            report(&r.write(&a.out)?);
            Ok(r.flags)
        }
        Command::Sweep(a) => sweep(&cfg, a),
        Command::Trees(a) => trees(&cfg, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(flags) => {
            for f in &flags {
                log::warn!("{f}");
            }
            if cli.global.strict && !flags.is_empty() {
                eprintln!("{} flagged result(s) under --strict", flags.len());
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
