//! Python bindings: windows, point patterns and models as classes, plus the
//! estimators, scores, permutation test, model fitting and experiment
//! runners as functions. Structured results come back as plain Python
//! dictionaries and lists.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use ppscore::estimate::{f_hat, k_hat_plugin, kernel_intensity, KPlugin, PixelGrid};
use ppscore::fitting::{fit_family as fit_family_rs, Family, FitConfig};
use ppscore::harness::{
    generate_synthetic_catalog, generate_synthetic_plots, run_catalog_sweep, run_study1, run_study2,
    run_tree_selection, Experiment, RunConfig, Scale,
};
use ppscore::inference::{permutation_test as permutation_test_rs, PairedScores};
use ppscore::io::{read_catalog_csv, read_pattern_csv, read_pattern_dir, write_pattern_csv};
use ppscore::scoring::{
    crps_empirical as crps_rs, k_score_grid, Estimator, ForecastCurves, ForecastSource, PoissonForecast,
};
use ppscore::{Error, ModelSpec, Point, RGrid};

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Converts any serialisable value to the equivalent Python object.
fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Axis-aligned rectangular observation window.
#[pyclass(name = "Window", module = "ppscore", frozen, from_py_object, eq)]
#[derive(Clone, Copy, PartialEq)]
pub struct PyWindow(ppscore::Window);

#[pymethods]
impl PyWindow {
    #[new]
    fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> PyResult<Self> {
        ppscore::Window::new(xmin, xmax, ymin, ymax).map(PyWindow).map_err(err)
    }

    #[staticmethod]
    fn square(side: f64) -> PyResult<Self> {
        ppscore::Window::square(side).map(PyWindow).map_err(err)
    }

    #[getter]
    fn bounds(&self) -> (f64, f64, f64, f64) {
        (self.0.xmin(), self.0.xmax(), self.0.ymin(), self.0.ymax())
    }

    #[getter]
    fn area(&self) -> f64 {
        self.0.area()
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        self.0.contains(x, y)
    }

    fn __repr__(&self) -> String {
        let (a, b, c, d) = self.bounds();
        format!("Window({a}, {b}, {c}, {d})")
    }
}

/// Finite point pattern inside a window.
#[pyclass(name = "PointPattern", module = "ppscore", frozen, from_py_object, eq)]
#[derive(Clone, PartialEq)]
pub struct PyPattern(ppscore::PointPattern);

#[pymethods]
impl PyPattern {
    #[new]
    fn new(xs: Vec<f64>, ys: Vec<f64>, window: &PyWindow) -> PyResult<Self> {
        if xs.len() != ys.len() {
            return Err(PyValueError::new_err(format!("{} x values but {} y values", xs.len(), ys.len())));
        }
        let pts = xs.into_iter().zip(ys).map(|(x, y)| Point::new(x, y)).collect();
        ppscore::PointPattern::new(pts, window.0).map(PyPattern).map_err(err)
    }

    #[staticmethod]
    fn read_csv(path: PathBuf, window: &PyWindow) -> PyResult<Self> {
        read_pattern_csv(&path, &window.0).map(PyPattern).map_err(err)
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        write_pattern_csv(&path, &self.0).map_err(err)
    }

    #[getter]
    fn xs(&self) -> Vec<f64> {
        self.0.points().iter().map(|p| p.x).collect()
    }

    #[getter]
    fn ys(&self) -> Vec<f64> {
        self.0.points().iter().map(|p| p.y).collect()
    }

    #[getter]
    fn window(&self) -> PyWindow {
        PyWindow(*self.0.window())
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("PointPattern(n={})", self.0.len())
    }
}

/// Generative point-process model, described by the same JSON objects as
/// the `[models]` tables of a run configuration.
#[pyclass(name = "Model", module = "ppscore", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyModel(ModelSpec);

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec: ModelSpec = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        spec.validate().map_err(err)?;
        Ok(PyModel(spec))
    }

    #[staticmethod]
    fn hom_poisson(lam: f64) -> PyResult<Self> {
        let spec = ModelSpec::HomPoisson { lambda: lam };
        spec.validate().map_err(err)?;
        Ok(PyModel(spec))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Draws `n` patterns; draw `i` uses a seed derived from `seed` and `i`.
    #[pyo3(signature = (window, n=1, seed=0))]
    fn simulate(&self, py: Python<'_>, window: &PyWindow, n: usize, seed: u64) -> PyResult<Vec<PyPattern>> {
        let (spec, w) = (self.0.clone(), window.0);
        let draws = py
            .detach(move || spec.prepare(&w)?.draw_many(n, seed))
            .map_err(err)?;
        Ok(draws.into_iter().map(PyPattern).collect())
    }

    fn __repr__(&self) -> String {
        format!("Model({})", self.to_json().unwrap_or_default())
    }
}

/// CRPS of `y` against the empirical distribution of `samples`.
#[pyfunction]
fn crps_empirical(y: f64, samples: Vec<f64>) -> PyResult<f64> {
    crps_rs(y, &samples).map_err(err)
}

fn uniform_grid(r_max: f64, n_r: usize) -> PyResult<RGrid> {
    RGrid::uniform(r_max, n_r).map_err(err)
}

/// Ripley's K on `n_r` equally spaced distances up to `r_max`. The
/// intensity plug-in is `lam` when given, else the count-based estimate.
/// Returns `(r, k)`.
#[pyfunction]
#[pyo3(signature = (pattern, r_max, n_r=64, lam=None))]
fn k_function(pattern: &PyPattern, r_max: f64, n_r: usize, lam: Option<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let grid = uniform_grid(r_max, n_r)?;
    let plugin = match lam {
        Some(lambda) => KPlugin::Constant { lambda },
        None => KPlugin::CountBased,
    };
    let (c, _) = k_hat_plugin(&pattern.0, &grid, &plugin).map_err(err)?;
    Ok((c.r().to_vec(), c.values().to_vec()))
}

/// Empty-space function on `n_r` equally spaced distances up to `r_max`.
/// Returns `(r, f)`.
#[pyfunction]
#[pyo3(signature = (pattern, r_max, n_r=64))]
fn f_function(pattern: &PyPattern, r_max: f64, n_r: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let c = f_hat(&pattern.0, &uniform_grid(r_max, n_r)?, None).map_err(err)?;
    Ok((c.r().to_vec(), c.values().to_vec()))
}

/// Edge-corrected kernel intensity on an `nx x ny` pixel grid, as rows of
/// pixel values (row `j` holds the pixels with the `j`-th y centre).
#[pyfunction]
#[pyo3(signature = (pattern, sigma, nx=128, ny=128))]
fn kernel_intensity_field(pattern: &PyPattern, sigma: f64, nx: usize, ny: usize) -> PyResult<Vec<Vec<f64>>> {
    let grid = PixelGrid::new(*pattern.0.window(), nx, ny).map_err(err)?;
    let field = kernel_intensity(&pattern.0, sigma, &grid).map_err(err)?;
    Ok(field.values().chunks(nx).map(|row| row.to_vec()).collect())
}

fn summary_scores(
    py: Python<'_>,
    observations: Vec<PyPattern>,
    model: &PyModel,
    estimator: Estimator,
    n: usize,
    seed: u64,
) -> PyResult<Vec<f64>> {
    let first = observations
        .first()
        .ok_or_else(|| PyValueError::new_err("no observations"))?;
    let w = *first.0.window();
    let spec = model.0.clone();
    let ys: Vec<_> = observations.into_iter().map(|p| p.0).collect();
    py.detach(move || {
        ForecastCurves::from_source(&estimator, &ForecastSource::Model(spec), &w, n, seed)?.score_all(&ys)
    })
    .map_err(err)
}

/// Intensity scores of `model` on each observation, from `n` forecast draws
/// shared by all observations.
#[pyfunction]
#[pyo3(signature = (observations, model, sigma, n=100, seed=0, pixels=128))]
fn intensity_score(
    py: Python<'_>,
    observations: Vec<PyPattern>,
    model: &PyModel,
    sigma: f64,
    n: usize,
    seed: u64,
    pixels: usize,
) -> PyResult<Vec<f64>> {
    let est = Estimator::Intensity {
        sigma,
        nx: pixels,
        ny: pixels,
    };
    summary_scores(py, observations, model, est, n, seed)
}

/// K-function scores of `model` on each observation.
#[pyfunction]
#[pyo3(signature = (observations, model, upper_r, n_r=64, n=100, seed=0))]
fn k_function_score(
    py: Python<'_>,
    observations: Vec<PyPattern>,
    model: &PyModel,
    upper_r: f64,
    n_r: usize,
    n: usize,
    seed: u64,
) -> PyResult<Vec<f64>> {
    let w = *observations
        .first()
        .ok_or_else(|| PyValueError::new_err("no observations"))?
        .0
        .window();
    let est = Estimator::KFunction {
        grid: k_score_grid(&w, upper_r, n_r).map_err(err)?,
        plugin: Default::default(),
    };
    summary_scores(py, observations, model, est, n, seed)
}

fn poisson_forecast(model: &PyModel, pattern: &PyPattern) -> PyResult<PoissonForecast> {
    let lambda = model
        .0
        .poisson_intensity()
        .ok_or_else(|| PyValueError::new_err("the score needs a Poisson model"))?;
    PoissonForecast::new(lambda, pattern.0.window()).map_err(err)
}

/// Logarithmic score of a Poisson model, up to an additive constant.
#[pyfunction]
fn log_score(observation: &PyPattern, model: &PyModel) -> PyResult<f64> {
    Ok(poisson_forecast(model, observation)?.log_score(&observation.0))
}

/// Brehmer intensity score of a Poisson model with count weight `c`.
#[pyfunction]
#[pyo3(signature = (observation, model, c=1.0))]
fn brehmer_score(observation: &PyPattern, model: &PyModel, c: f64) -> PyResult<f64> {
    poisson_forecast(model, observation)?
        .brehmer_score(&observation.0, c)
        .map_err(err)
}

/// Two-sided paired sign-flip test on the differences `a - b`.
#[pyfunction]
#[pyo3(signature = (a, b, n_perm=999, seed=0))]
fn permutation_test<'py>(py: Python<'py>, a: Vec<f64>, b: Vec<f64>, n_perm: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let paired = PairedScores::new("a", "b", &a, &b).map_err(err)?;
    to_py(py, &permutation_test_rs(&paired, n_perm, seed).map_err(err)?)
}

/// Minimum-contrast fit of a model family to training patterns.
#[pyfunction]
#[pyo3(signature = (family, patterns, r_max=None, n_r=64))]
fn fit_family<'py>(
    py: Python<'py>,
    family: &str,
    patterns: Vec<PyPattern>,
    r_max: Option<f64>,
    n_r: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let family = Family::parse(family).map_err(err)?;
    let cfg = FitConfig {
        r_max,
        n_r,
        ..FitConfig::default()
    };
    let train: Vec<_> = patterns.into_iter().map(|p| p.0).collect();
    let fitted = py.detach(move || fit_family_rs(family, &train, &cfg)).map_err(err)?;
    to_py(py, &fitted)
}

/// Preset run configuration as TOML text.
#[pyfunction]
#[pyo3(signature = (experiment, paper_scale=false))]
fn preset_config(experiment: &str, paper_scale: bool) -> PyResult<String> {
    let e = Experiment::parse(experiment).map_err(err)?;
    let scale = if paper_scale { Scale::Paper } else { Scale::Desk };
    RunConfig::preset(e, scale).to_toml_string().map_err(err)
}

/// Runs the experiment described by a TOML configuration and writes its
/// tables to `out_dir`. `data` is the catalog CSV for a sweep or the plot
/// directory for tree selection; without it synthetic data is generated.
/// Returns `{"files": [...], "flags": [...]}`.
#[pyfunction]
#[pyo3(signature = (config, out_dir, data=None, anchors=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config: &str,
    out_dir: PathBuf,
    data: Option<PathBuf>,
    anchors: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = RunConfig::from_toml_str(config).map_err(err)?;
    let run = move || -> ppscore::Result<(Vec<PathBuf>, Vec<String>)> {
        let w = cfg.window;
        match cfg.experiment {
            Experiment::Study1 => {
                let r = run_study1(&cfg)?;
                Ok((r.write(&out_dir)?, r.flags))
            }
            Experiment::Study2 => {
                let r = run_study2(&cfg)?;
                Ok((r.write(&out_dir)?, r.flags))
            }
            Experiment::Sweep => {
                let (catalog, anchor_pattern) = match data {
                    Some(path) => (
                        read_catalog_csv(&path, &w)?,
                        anchors.map(|p| read_pattern_csv(&p, &w)).transpose()?,
                    ),
                    None => {
                        let syn = cfg.sweep.as_ref().and_then(|s| s.synthetic.as_ref()).ok_or_else(|| {
                            Error::Config("no catalog given and no synthetic catalog configured".into())
                        })?;
                        let d = generate_synthetic_catalog(&w, syn, cfg.seed)?;
                        d.write(&out_dir)?;
                        (d.catalog, Some(d.anchors))
                    }
                };
                let r = run_catalog_sweep(&cfg, &catalog, anchor_pattern.as_ref())?;
                Ok((r.write(&out_dir)?, r.flags))
            }
            Experiment::Trees => {
                let plots = match data {
                    Some(dir) => read_pattern_dir(&dir, &w)?,
                    None => generate_synthetic_plots(&cfg)?,
                };
                let r = run_tree_selection(&cfg, &plots)?;
                Ok((r.write(&out_dir)?, r.flags))
            }
            Experiment::Custom => Err(Error::Config("a custom configuration defines no experiment to run".into())),
        }
    };
    let (files, flags) = py.detach(run).map_err(err)?;
    #[derive(Serialize)]
    struct Outcome {
        files: Vec<PathBuf>,
        flags: Vec<String>,
    }
    to_py(py, &Outcome { files, flags })
}

/// Adds the classes and functions to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyWindow>()?;
    m.add_class::<PyPattern>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(crps_empirical, m)?)?;
    m.add_function(wrap_pyfunction!(k_function, m)?)?;
    m.add_function(wrap_pyfunction!(f_function, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_intensity_field, m)?)?;
    m.add_function(wrap_pyfunction!(intensity_score, m)?)?;
    m.add_function(wrap_pyfunction!(k_function_score, m)?)?;
    m.add_function(wrap_pyfunction!(log_score, m)?)?;
    m.add_function(wrap_pyfunction!(brehmer_score, m)?)?;
    m.add_function(wrap_pyfunction!(permutation_test, m)?)?;
    m.add_function(wrap_pyfunction!(fit_family, m)?)?;
    m.add_function(wrap_pyfunction!(preset_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}

#[pymodule(name = "ppscore")]
fn ppscore_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}
