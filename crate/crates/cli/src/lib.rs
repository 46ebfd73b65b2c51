//! Command-line front end for `igeo-core`.
//!
//! ```text
//! igeo <curvature|geodesic|ige|sweep|validate> [--config PATH] [flags]
//! ```
//!
//! Flags are written over the configuration file before validation, so a
//! flag always wins over the same key in the file.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod validate;

pub use config::{load_config, RunConfig};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "igeo", version, about = "Information geometry of macro-correlated Gaussian manifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scalar curvature and Ricci components at the reference point.
    Curvature {
        #[command(flatten)]
        common: Common,
        /// Use the uncorrelated closed forms (every r_k = 0).
        #[arg(long)]
        baseline: bool,
        /// Compare against finite-difference Christoffel and Ricci values.
        #[arg(long)]
        check_numeric: bool,
    },
    /// Closed-form or integrated geodesic trajectories.
    Geodesic {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = ["full", "diag", "canonical", "analytic"])]
        mode: Option<String>,
        #[arg(long)]
        tau_end: Option<f64>,
        /// Samples on [0, tau_end] for the analytic mode.
        #[arg(long)]
        points: Option<u64>,
    },
    /// Information geometric complexity and entropy on the tau grid.
    Ige {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = ["closed", "quadrature", "both"])]
        modes: Option<String>,
        #[arg(long, value_parser = ["exact", "antiderivative", "asymptotic"])]
        closed_mode: Option<String>,
    },
    /// Parameter sweep over r, lambda, xi and l.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Run even when the grid exceeds the point cap.
        #[arg(long)]
        allow_large: bool,
        #[arg(long)]
        max_points: Option<u64>,
    },
    /// Run the invariant suites at pinned seeds.
    Validate {
        /// Run only these suites (repeatable).
        #[arg(long = "suite")]
        suites: Vec<String>,
        /// List suite names and exit.
        #[arg(long)]
        list: bool,
    },
}

/// Flags shared by the computing subcommands.
#[derive(Debug, Args, Default)]
pub struct Common {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub l: Option<u64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub r: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub lambda: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub xi: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub tau_start: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub tau_stop: Option<f64>,
    #[arg(long)]
    pub tau_points: Option<u64>,
    /// Evenly spaced instead of log-spaced tau grid.
    #[arg(long)]
    pub linear_grid: bool,
    #[arg(long, value_parser = ["paper", "determinant"])]
    pub density_mode: Option<String>,
    #[arg(long)]
    pub ode_rel: Option<f64>,
    #[arg(long)]
    pub ode_abs: Option<f64>,
    #[arg(long)]
    pub quadrature_abs: Option<f64>,
    #[arg(long)]
    pub fd_step: Option<f64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Output formats, comma separated: csv, json, gnuplot-data.
    #[arg(long, value_delimiter = ',')]
    pub format: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn nums(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| json!(x)).collect())
}

impl Common {
    fn patches(&self) -> Vec<(&'static str, Value)> {
        let mut p = Vec::new();
        if let Some(l) = self.l {
            p.push(("l", json!(l)));
        }
        for (key, v) in [("r", &self.r), ("lambda", &self.lambda), ("xi", &self.xi)] {
            if let Some(v) = v {
                p.push((key, nums(v)));
            }
        }
        if let Some(x) = self.tau_start {
            p.push(("tau.start", json!(x)));
        }
        if let Some(x) = self.tau_stop {
            p.push(("tau.end", json!(x)));
        }
        if let Some(n) = self.tau_points {
            p.push(("tau.points", json!(n)));
        }
        if self.linear_grid {
            p.push(("tau.log", json!(false)));
        }
        if let Some(d) = &self.density_mode {
            p.push(("density_mode", json!(d)));
        }
        for (key, v) in [
            ("tolerances.ode_rel", self.ode_rel),
            ("tolerances.ode_abs", self.ode_abs),
            ("tolerances.quadrature_abs", self.quadrature_abs),
            ("tolerances.fd_step", self.fd_step),
        ] {
            if let Some(x) = v {
                p.push((key, json!(x)));
            }
        }
        if let Some(d) = &self.output_dir {
            p.push(("output.directory", json!(d.to_string_lossy())));
        }
        if let Some(f) = &self.format {
            p.push(("output.formats", json!(f)));
        }
        if let Some(s) = self.seed {
            p.push(("seed", json!(s)));
        }
        p
    }

    /// Loads the config file (or an empty document) and applies the flags.
    pub fn resolve(&self, extra: Vec<(&'static str, Value)>) -> CliResult<RunConfig> {
        let mut doc = match &self.config {
            Some(path) => config::read_document(path)?,
            None => Value::Object(Map::new()),
        };
        for (path, v) in self.patches().into_iter().chain(extra) {
            config::set_path(&mut doc, path, v);
        }
        config::from_value(&doc)
    }
}

/// Runs one parsed invocation, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Curvature { common, baseline, check_numeric } => {
            let mut extra = Vec::new();
            if baseline {
                extra.push(("curvature.baseline", json!(true)));
            }
            if check_numeric {
                extra.push(("curvature.check_numeric", json!(true)));
            }
            commands::curvature(&common.resolve(extra)?, out).map(drop)
        }
        Command::Geodesic { common, mode, tau_end, points } => {
            let mut extra = Vec::new();
            if let Some(m) = mode {
                extra.push(("geodesic.mode", json!(m)));
            }
            if let Some(t) = tau_end {
                extra.push(("geodesic.tau_end", json!(t)));
            }
            if let Some(n) = points {
                extra.push(("geodesic.points", json!(n)));
            }
            commands::geodesic(&common.resolve(extra)?, out).map(drop)
        }
        Command::Ige { common, modes, closed_mode } => {
            let mut extra = Vec::new();
            if let Some(m) = modes {
                extra.push(("ige.modes", json!(m)));
            }
            if let Some(m) = closed_mode {
                extra.push(("ige.closed_mode", json!(m)));
            }
            commands::ige(&common.resolve(extra)?, out).map(drop)
        }
        Command::Sweep { common, allow_large, max_points } => {
            let mut extra = Vec::new();
            if allow_large {
                extra.push(("sweep.allow_large", json!(true)));
            }
            if let Some(n) = max_points {
                extra.push(("sweep.max_points", json!(n)));
            }
            commands::sweep(&common.resolve(extra)?, out).map(drop)
        }
        Command::Validate { suites, list } => {
            if list {
                for s in validate::SUITES {
                    writeln!(out, "{}", s.name).map_err(|e| CliError::io("<stdout>", e))?;
                }
                return Ok(());
            }
            validate::validate(&suites, out).map(drop)
        }
    }
}
