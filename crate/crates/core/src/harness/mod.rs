//! Reproducible experiment runners: the five-model comparison, the Gaussian
//! Poisson bandwidth study, the mixture-model catalog sweep and the
//! cluster-model selection on plot data.
//!
//! Every runner is a pure function of its [`RunConfig`] (and input files):
//! random streams are derived from the root seed with labels, work runs in
//! parallel, and results are collected in a canonical order, so reruns
//! produce byte-identical tables.

mod config;
mod study1;
mod study2;
mod sweep;
mod trees;

pub use config::{Experiment, RunConfig, Scale, Study1Config, Study2Config, SweepConfig, SweepMode, SyntheticCatalog, SyntheticPlots, TreesConfig};
pub use study1::{run_study1, Study1Cell, Study1PValue, Study1Result};
pub use study2::{run_study2, Study2Result};
pub use sweep::{generate_synthetic_catalog, run_catalog_sweep, SweepCell, SweepResult, SyntheticCatalogData};
pub use trees::{generate_synthetic_plots, run_tree_selection, TreesResult};

use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::io::{write_meta, write_rows, Meta};

/// Writes `rows` to `dir/name` with a metadata sidecar and records the path.
pub(crate) fn emit<T: serde::Serialize>(
    dir: &Path,
    name: &str,
    rows: &[T],
    meta: &Meta,
    written: &mut Vec<PathBuf>,
) -> Result<()> {
    let path = dir.join(name);
    write_rows(&path, rows)?;
    write_meta(&path, meta)?;
    written.push(path);
    Ok(())
}
