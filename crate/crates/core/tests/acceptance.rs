//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero when any criterion fails.
//!
//! Run all criteria with `cargo test -p ppscore --test acceptance`, or a
//! subset by number: `cargo test -p ppscore --test acceptance -- 3 7`.

use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use ppscore::estimate::{k_hat, kernel_intensity, LambdaSource, PixelGrid};
use ppscore::fitting::{fit_family, fit_min_contrast, model_k, ContrastProblem, Family, FitConfig, Theta};
use ppscore::harness::{
    generate_synthetic_catalog, generate_synthetic_plots, run_catalog_sweep, run_study1, run_study2,
    run_tree_selection, Experiment, RunConfig, Scale, Study1Result,
};
use ppscore::intensity::IntensityFn;
use ppscore::io::write_pattern_dir;
use ppscore::rng::labeled_seed;
use ppscore::scoring::{crps_empirical, summary_statistic_score, Estimator, ForecastCurves, ForecastSource, PoissonForecast};
use ppscore::simulate::{ClusterKernel, ClusterSpec};
use ppscore::{ModelSpec, PointPattern, RGrid, Window};

const SEED: u64 = 7_919;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn sq10() -> Window {
    Window::square(10.0).unwrap()
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Full-size five-model comparison shared by criteria 1, 2 and 5.
fn study1() -> &'static (RunConfig, Study1Result) {
    static RUN: OnceLock<(RunConfig, Study1Result)> = OnceLock::new();
    RUN.get_or_init(|| {
        let mut cfg = RunConfig::preset(Experiment::Study1, Scale::Paper);
        cfg.seed = SEED;
        let r = run_study1(&cfg).expect("study 1 runs");
        (cfg, r)
    })
}

fn criterion_1() -> Outcome {
    let (_, r) = study1();
    let (li, ti) = r.diagonal_minimum_count("intensity");
    let (lk, tk) = r.diagonal_minimum_count("kfun");
    outcome(
        li >= 24 && lk >= 24 && ti == 25 && tk == 25,
        format!("diagonal minima: intensity {li}/{ti}, K {lk}/{tk}; need >= 24/25 each"),
    )
}

/// (score, truth, forecast, significant at 5%).
const TABLE_CELLS: [(&str, &str, &str, bool); 16] = [
    ("intensity", "hP", "Str", false),
    ("intensity", "Str", "hP", false),
    ("intensity", "hP", "hP+", true),
    ("intensity", "hP", "ihP", true),
    ("intensity", "hP+", "hP", true),
    ("intensity", "ihP", "hP", true),
    ("intensity", "Str", "ihP", true),
    ("intensity", "hP", "ihT", true),
    ("kfun", "hP", "hP+", false),
    ("kfun", "hP+", "hP", false),
    ("kfun", "hP", "ihP", false),
    ("kfun", "ihP", "hP", false),
    ("kfun", "hP", "Str", true),
    ("kfun", "Str", "hP", true),
    ("kfun", "hP", "ihT", true),
    ("kfun", "ihT", "hP", true),
];

fn criterion_2() -> Outcome {
    let (_, r) = study1();
    let mut hits = 0;
    let mut misses = Vec::new();
    for (score, truth, forecast, significant) in TABLE_CELLS {
        let p = r.p_value(score, truth, forecast).expect("cell present");
        if (p < 0.05) == significant {
            hits += 1;
        } else {
            misses.push(format!("{score} {truth}->{forecast} p={p:.3}"));
        }
    }
    outcome(hits >= 13, format!("{hits}/16 cells match; mismatches: [{}]", misses.join(", ")))
}

fn criterion_3() -> Outcome {
    let grid = RGrid::uniform(2.5, 25).unwrap();
    let model = ModelSpec::HomPoisson { lambda: 0.5 }.prepare(&sq10()).unwrap();
    let draws = model.draw_many(500, labeled_seed(SEED, "k-unbiased")).unwrap();
    let curves: Vec<Vec<f64>> = draws
        .iter()
        .map(|p| k_hat(p, &grid, LambdaSource::Constant(0.5)).unwrap().into_values())
        .collect();
    let mut worst: f64 = 0.0;
    for (k, &r) in grid.values().iter().enumerate() {
        let column: Vec<f64> = curves.iter().map(|c| c[k]).collect();
        let (m, sd) = mean_sd(&column);
        let z = (m - std::f64::consts::PI * r * r).abs() / (sd / (column.len() as f64).sqrt());
        worst = worst.max(z);
    }
    outcome(worst <= 3.0, format!("largest |mean - pi r^2| is {worst:.2} standard errors over 25 radii"))
}

fn criterion_4() -> Outcome {
    let w = sq10();
    let grid = PixelGrid::new(w, 128, 128).unwrap();
    let models = RunConfig::preset(Experiment::Study1, Scale::Desk).models;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (i, spec) in models.values().cycle().take(100).enumerate() {
        let p = spec.prepare(&w).unwrap().draw(labeled_seed(SEED, &format!("mass/{i}"))).unwrap();
        if p.is_empty() {
            continue;
        }
        let field = kernel_intensity(&p, 1.25, &grid).unwrap();
        let mass: f64 = field.values().iter().sum::<f64>() * grid.cell_area();
        worst = worst.max((mass / p.len() as f64 - 1.0).abs());
        count += 1;
    }
    outcome(
        worst <= 0.02 && count >= 95,
        format!("{count} patterns, largest relative mass error {:.2e}", worst),
    )
}

/// Paired-difference check: the truth's mean score is not significantly
/// worse than the forecast's.
fn proper(truth_scores: &[f64], forecast_scores: &[f64]) -> (bool, f64, f64) {
    let d: Vec<f64> = truth_scores.iter().zip(forecast_scores).map(|(g, f)| g - f).collect();
    let (m, sd) = mean_sd(&d);
    let half = 1.96 * sd / (d.len() as f64).sqrt();
    (m <= 0.0 || m - half <= 0.0, m, half)
}

fn criterion_5() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    let hand = [
        (1.0, vec![1.0, 1.0, 1.0], 0.0),
        (0.0, vec![1.0, 1.0], 1.0),
        (0.0, vec![-1.0, 1.0], 0.0),
    ];
    for (y, s, want) in &hand {
        let got = crps_empirical(*y, s).unwrap();
        if (got - want).abs() > 1e-12 {
            ok = false;
            notes.push(format!("crps({y}, {s:?}) = {got}, want {want}"));
        }
    }
    let y = ModelSpec::HomPoisson { lambda: 0.5 }.prepare(&sq10()).unwrap().draw(1).unwrap();
    let est = Estimator::KFunction {
        grid: RGrid::uniform(2.5, 16).unwrap(),
        plugin: Default::default(),
    };
    let ens = ForecastSource::Ensemble(vec![y.clone(), y.clone()]);
    let s = summary_statistic_score(&y, &ens, &est, 2, 0).unwrap();
    if s.abs() > 1e-12 {
        ok = false;
        notes.push(format!("ensemble equal to y scored {s}"));
    }

    // Intensity and K scores from the shared study-1 run.
    let (cfg, r) = study1();
    let s1 = cfg.study1.as_ref().unwrap();
    let values = |score: &str, truth: &str, forecast: &str| -> Vec<f64> {
        r.scores
            .iter()
            .filter(|s| s.score_name == score && s.truth == truth && s.forecast == forecast)
            .map(|s| s.value)
            .collect()
    };
    let mut checked = 0;
    let mut failed = Vec::new();
    for score in ["intensity", "kfun"] {
        for g in &s1.models {
            for f in &s1.models {
                let (pass, m, half) = proper(&values(score, g, g), &values(score, g, f));
                checked += 1;
                if !pass {
                    failed.push(format!("{score} {g}->{f} {m:.3e}±{half:.1e}"));
                }
            }
        }
    }

    // Empty-space score on the same five models.
    let w = cfg.window;
    let est = Estimator::FFunction {
        grid: RGrid::uniform(2.0, 32).unwrap(),
        probe_spacing: None,
        erosion: Default::default(),
    };
    let obs: Vec<Vec<PointPattern>> = s1
        .models
        .iter()
        .map(|k| cfg.model(k).unwrap().prepare(&w).unwrap().draw_many(100, labeled_seed(SEED, &format!("f-obs/{k}"))).unwrap())
        .collect();
    let curves: Vec<ForecastCurves> = s1
        .models
        .iter()
        .map(|k| {
            let source = ForecastSource::Model(cfg.model(k).unwrap().clone());
            ForecastCurves::from_source(&est, &source, &w, 100, labeled_seed(SEED, &format!("f-forecast/{k}"))).unwrap()
        })
        .collect();
    for (gi, g) in s1.models.iter().enumerate() {
        let own = curves[gi].score_all(&obs[gi]).unwrap();
        for (fi, f) in s1.models.iter().enumerate() {
            let other = curves[fi].score_all(&obs[gi]).unwrap();
            let (pass, m, half) = proper(&own, &other);
            checked += 1;
            if !pass {
                failed.push(format!("ffun {g}->{f} {m:.3e}±{half:.1e}"));
            }
        }
    }

    // Log and Brehmer scores on the models with an intensity function.
    let poisson: Vec<&String> = s1.models.iter().filter(|k| cfg.model(k).unwrap().poisson_intensity().is_some()).collect();
    for g in &poisson {
        let ys = cfg.model(g).unwrap().prepare(&w).unwrap().draw_many(100, labeled_seed(SEED, &format!("lik/{g}"))).unwrap();
        let forecast = |k: &str| PoissonForecast::new(cfg.model(k).unwrap().poisson_intensity().unwrap(), &w).unwrap();
        let own = forecast(g);
        for f in &poisson {
            let other = forecast(f);
            let log_g: Vec<f64> = ys.iter().map(|y| own.log_score(y)).collect();
            let log_f: Vec<f64> = ys.iter().map(|y| other.log_score(y)).collect();
            let br_g: Vec<f64> = ys.iter().map(|y| own.brehmer_score(y, 1.0).unwrap()).collect();
            let br_f: Vec<f64> = ys.iter().map(|y| other.brehmer_score(y, 1.0).unwrap()).collect();
            for (name, a, b) in [("log", &log_g, &log_f), ("brehmer", &br_g, &br_f)] {
                let (pass, m, half) = proper(a, b);
                checked += 1;
                if !pass {
                    failed.push(format!("{name} {g}->{f} {m:.3e}±{half:.1e}"));
                }
            }
        }
    }
    ok &= failed.is_empty();
    notes.push(format!("{} hand values exact; {checked} propriety checks, failures: [{}]", hand.len() + 1, failed.join(", ")));
    outcome(ok, notes.join("; "))
}

fn criterion_6() -> Outcome {
    let thomas = ModelSpec::Cluster(ClusterSpec {
        parent: IntensityFn::Constant { value: 0.25 },
        offspring_mean: 2.0,
        kernel: ClusterKernel::Thomas { sigma: 0.5 },
        buffer: None,
    });
    let train = thomas.prepare(&sq10()).unwrap().draw_many(50, labeled_seed(SEED, "thomas")).unwrap();
    let fitted = fit_family(Family::Thomas, &train, &FitConfig::default()).unwrap();
    let (Theta::Thomas { kappa, sigma }, ModelSpec::Cluster(spec)) = (&fitted.theta, &fitted.spec) else {
        return outcome(false, format!("unexpected fit {fitted:?}"));
    };
    let errors = [
        (kappa / 0.25 - 1.0).abs(),
        (spec.offspring_mean / 2.0 - 1.0).abs(),
        (sigma / 0.5 - 1.0).abs(),
    ];
    let recovered = errors.iter().all(|e| *e <= 0.25);

    let grid = RGrid::uniform(2.5, 64).unwrap();
    let mut worst_obj: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    for truth in [
        Theta::Thomas { kappa: 0.25, sigma: 0.5 },
        Theta::Matern { kappa: 0.4, sigma: 0.7 },
        Theta::Cauchy { kappa: 0.3, sigma: 0.3 },
        Theta::VarGamma { kappa: 0.3, sigma: 0.4, nu: 0.5 },
        Theta::Lgcp { tau2: 1.2, scale: 0.6 },
    ] {
        let k = model_k(&truth, &grid).unwrap();
        let problem = ContrastProblem::new(truth.family(), &k, 2.5).unwrap();
        let start: Vec<f64> = truth.to_unconstrained().iter().map(|v| v + 2f64.ln()).collect();
        let fit = fit_min_contrast(&problem, &Theta::from_unconstrained(truth.family(), &start), 4000).unwrap();
        worst_obj = worst_obj.max(fit.objective);
        for (a, b) in fit.theta.to_unconstrained().iter().zip(truth.to_unconstrained()) {
            worst_rel = worst_rel.max((a - b).abs());
        }
    }
    let round_trip = worst_obj < 1e-10 && worst_rel < 0.01;
    outcome(
        recovered && round_trip,
        format!(
            "relative errors kappa {:.3}, offspring {:.3}, sigma {:.3}; round trip worst objective {worst_obj:.1e}, worst log-parameter error {worst_rel:.1e}",
            errors[0], errors[1], errors[2]
        ),
    )
}

fn criterion_7() -> Outcome {
    let w = sq10();
    let ys = ModelSpec::HomPoisson { lambda: 0.5 }
        .prepare(&w)
        .unwrap()
        .draw_many(200, labeled_seed(SEED, "log-order"))
        .unwrap();
    let lambdas = [0.4, 0.5, 0.6];
    let analytic: Vec<f64> = lambdas.iter().map(|&l: &f64| -50.0 * l.ln() + 100.0 * l).collect();
    let empirical: Vec<f64> = lambdas
        .iter()
        .map(|&l| {
            let f = PoissonForecast::new(IntensityFn::Constant { value: l }, &w).unwrap();
            ys.iter().map(|y| f.log_score(y)).sum::<f64>() / ys.len() as f64
        })
        .collect();
    let order = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        idx
    };
    outcome(
        order(&analytic) == order(&empirical),
        format!("analytic {analytic:.3?}, empirical {empirical:.3?}"),
    )
}

fn criterion_8() -> Outcome {
    let mut cfg = RunConfig::preset(Experiment::Study2, Scale::Paper);
    cfg.seed = SEED;
    let s = cfg.study2.as_mut().unwrap();
    s.sigmas = vec![0.4, 1.6];
    s.max_obs = 10;
    s.box_sizes = vec![10];
    let r = run_study2(&cfg).unwrap();
    let p = |score: &str, model: &str| r.mean_p(score, model, 10).unwrap();
    let (log_f3, i04_f3) = (p("log", "F3"), p("intensity_0.4", "F3"));
    let (i04_f5, i16_f5) = (p("intensity_0.4", "F5"), p("intensity_1.6", "F5"));
    outcome(
        log_f3 < 0.1 && i04_f3 < 0.1 && i16_f5 > i04_f5,
        format!("mean p at N=10: log vs F3 {log_f3:.3}, sigma 0.4 vs F3 {i04_f3:.3}; F5: sigma 1.6 {i16_f5:.3} vs sigma 0.4 {i04_f5:.3}"),
    )
}

fn criterion_9() -> Outcome {
    let mut cfg = RunConfig::preset(Experiment::Sweep, Scale::Desk);
    cfg.seed = SEED;
    cfg.sweep.as_mut().unwrap().sigmas.clear();
    let s = cfg.sweep.as_ref().unwrap();
    let data = generate_synthetic_catalog(&cfg.window, s.synthetic.as_ref().unwrap(), cfg.seed).unwrap();
    let r = run_catalog_sweep(&cfg, &data.catalog, Some(&data.anchors)).unwrap();
    let (alpha, eta) = r.argmin("log").unwrap();
    outcome(
        (alpha - 0.75).abs() < 1e-9 && eta == 4.0,
        format!(
            "log-score optimum at ({alpha}, {eta}) over {}x{} grid, {} events",
            s.alphas.len(),
            s.etas.len(),
            data.catalog.pattern.len()
        ),
    )
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn criterion_10() -> Outcome {
    let run_all = |dir: &Path| {
        let mut s1 = RunConfig::preset(Experiment::Study1, Scale::Desk);
        s1.study1.as_mut().unwrap().observations = 6;
        s1.study1.as_mut().unwrap().draws = 8;
        run_study1(&s1).unwrap().write(dir).unwrap();

        let mut s2 = RunConfig::preset(Experiment::Study2, Scale::Desk);
        let c = s2.study2.as_mut().unwrap();
        c.pool = 20;
        c.draws = 6;
        c.sigmas = vec![0.4];
        c.max_obs = 4;
        c.repetitions = 5;
        c.box_sizes = vec![10];
        run_study2(&s2).unwrap().write(dir).unwrap();

        let mut sw = RunConfig::preset(Experiment::Sweep, Scale::Desk);
        let c = sw.sweep.as_mut().unwrap();
        c.alphas = vec![0.7, 0.8];
        c.etas = vec![4.0];
        c.draws = 3;
        c.pixels = 16;
        c.synthetic.as_mut().unwrap().events = 400.0;
        let data = generate_synthetic_catalog(&sw.window, c.synthetic.as_ref().unwrap(), sw.seed).unwrap();
        data.write(dir).unwrap();
        run_catalog_sweep(&sw, &data.catalog, Some(&data.anchors)).unwrap().write(dir).unwrap();

        let mut tr = RunConfig::preset(Experiment::Trees, Scale::Desk);
        let c = tr.trees.as_mut().unwrap();
        c.families = vec![Family::Thomas, Family::Cauchy];
        c.draws = 5;
        c.synthetic.as_mut().unwrap().plots = 4;
        let plots = generate_synthetic_plots(&tr).unwrap();
        let patterns: Vec<PointPattern> = plots.iter().map(|(_, p)| p.clone()).collect();
        write_pattern_dir(dir, "plot", &patterns).unwrap();
        run_tree_selection(&tr, &plots).unwrap().write(dir).unwrap();
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_all(a.path());
    run_all(b.path());
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    let differing: Vec<&str> = sa
        .iter()
        .zip(&sb)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    outcome(
        sa.len() == sb.len() && differing.is_empty() && !sa.is_empty(),
        format!("{} files from study 1, study 2, sweep and trees; differing: {differing:?}", sa.len()),
    )
}

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "diagonal dominance", criterion_1),
        (2, "significance pattern", criterion_2),
        (3, "K unbiasedness", criterion_3),
        (4, "kernel mass identity", criterion_4),
        (5, "CRPS exactness and propriety", criterion_5),
        (6, "minimum-contrast recovery", criterion_6),
        (7, "log-score ordering", criterion_7),
        (8, "bandwidth study p-values", criterion_8),
        (9, "sweep self-consistency", criterion_9),
        (10, "determinism", criterion_10),
    ];
    let mut failures = 0;
    for (n, name, check) in criteria {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {n:>2} {name}: {verdict} ({}) [{:.1}s]",
            o.detail,
            start.elapsed().as_secs_f64()
        );
        failures += usize::from(!o.pass);
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}
