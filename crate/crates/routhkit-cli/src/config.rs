//! Run configuration: command-line flags merged over an optional config file.
//!
//! Config files are TOML with the sections `[system]`, `[connection]`,
//! `[run]`, `[tolerances]` and, for user-defined Wong systems, `[wong]`.
//! Flags override file values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use indexmap::IndexMap;
use nalgebra::DMatrix;
use routhkit::reconstruct::LevelConnectionKind;
use routhkit::systems::{packaged, packaged_wong_custom, PackagedSystem, WongGroup, WongSpec};
use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::table::Format;

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Config file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Packaged system name, or a path to a config file.
    #[arg(long)]
    pub system: Option<String>,
    /// System parameter, `NAME=VALUE`; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub tf: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub dt: Option<f64>,
    /// `mechanical` or `vertical-lift`.
    #[arg(long)]
    pub connection: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `csv` or `json`.
    #[arg(long)]
    pub format: Option<String>,
    /// Seed for `--random-initial`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Initial full state `x, θ, v^i, v^a` as a comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    pub initial: Option<String>,
    /// Draw the initial state from the system's sampler.
    #[arg(long)]
    pub random_initial: bool,
    /// Reduced trajectory to reconstruct from (reconstruct only).
    #[arg(long)]
    pub reduced: Option<PathBuf>,
    /// Group curve output (reconstruct only).
    #[arg(long)]
    pub group_out: Option<PathBuf>,
    /// Tolerance override, `NAME=VALUE` (compare only).
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    pub tolerances: Vec<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    system: Option<SystemSection>,
    connection: Option<ConnectionSection>,
    run: Option<RunSection>,
    tolerances: Option<BTreeMap<String, f64>>,
    wong: Option<WongSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    name: Option<String>,
    #[serde(default)]
    params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConnectionSection {
    kind: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    t0: Option<f64>,
    tf: Option<f64>,
    dt: Option<f64>,
    out: Option<PathBuf>,
    format: Option<String>,
    seed: Option<u64>,
    initial: Option<Vec<f64>>,
    random_initial: Option<bool>,
    reduced: Option<PathBuf>,
    group_out: Option<PathBuf>,
}

/// A user-defined Wong system.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WongSection {
    /// `so3` or `abelian`.
    pub group: String,
    pub h: Vec<Vec<f64>>,
    pub base_metric: Vec<Vec<f64>>,
    #[serde(default)]
    pub conformal: f64,
    /// `m` rows of `n` entries.
    pub gauge_const: Vec<Vec<f64>>,
    /// One `m × n` block per base coordinate.
    pub gauge_linear: Vec<Vec<Vec<f64>>>,
    pub mu: Vec<f64>,
    pub x0: Vec<f64>,
    pub xdot0: Vec<f64>,
    pub theta0: Option<Vec<f64>>,
}

fn matrix(rows: &[Vec<f64>], what: &str) -> CliResult<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    if r == 0 || rows.iter().any(|x| x.len() != c) {
        return Err(CliError::Usage(format!("[wong] {what} must be a nonempty rectangular array")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl WongSection {
    pub fn spec(&self) -> CliResult<WongSpec> {
        let h = matrix(&self.h, "h")?;
        let group = match self.group.as_str() {
            "so3" | "su2" => WongGroup::So3,
            "abelian" => WongGroup::Abelian(h.nrows()),
            other => return Err(CliError::Usage(format!("[wong] unknown group {other:?}"))),
        };
        Ok(WongSpec {
            group,
            h,
            base_metric: matrix(&self.base_metric, "base_metric")?,
            conformal: self.conformal,
            gauge_const: matrix(&self.gauge_const, "gauge_const")?,
            gauge_linear: self.gauge_linear.iter().map(|g| matrix(g, "gauge_linear")).collect::<CliResult<_>>()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Max-norm gap between the two pipelines.
    pub discrepancy: f64,
    /// Momentum drift under full integration.
    pub momentum: f64,
    /// EL residual of the reconstructed curve.
    pub el_residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { discrepancy: 1e-6, momentum: 1e-8, el_residual: 1e-6 }
    }
}

impl Tolerances {
    fn set(&mut self, key: &str, v: f64) -> CliResult<()> {
        if !(v > 0.0) || !v.is_finite() {
            return Err(CliError::Usage(format!("tolerance {key} must be positive")));
        }
        match key {
            "discrepancy" => self.discrepancy = v,
            "momentum" => self.momentum = v,
            "el_residual" => self.el_residual = v,
            other => return Err(CliError::Usage(format!("unknown tolerance {other:?}"))),
        }
        Ok(())
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub system: String,
    pub params: IndexMap<String, f64>,
    pub wong: Option<WongSection>,
    pub t0: f64,
    pub tf: f64,
    pub dt: f64,
    pub connection: LevelConnectionKind,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
    pub initial: Option<Vec<f64>>,
    pub random_initial: bool,
    pub reduced: Option<PathBuf>,
    pub group_out: Option<PathBuf>,
    pub tolerances: Tolerances,
    pub config_file: Option<PathBuf>,
}

fn parse_kv(s: &str) -> CliResult<(String, f64)> {
    let (k, v) = s.split_once('=').ok_or_else(|| CliError::Usage(format!("expected NAME=VALUE, got {s:?}")))?;
    let v: f64 = v.trim().parse().map_err(|_| CliError::Usage(format!("{k}: {v:?} is not a number")))?;
    Ok((k.trim().to_string(), v))
}

fn parse_list(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("{x:?} is not a number"))))
        .collect()
}

fn load_file(path: &Path) -> CliResult<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {}", path.display(), e.message())))
}

fn looks_like_path(s: &str) -> bool {
    s.ends_with(".toml") || s.contains('/') || Path::new(s).is_file()
}

impl RunConfig {
    pub fn resolve(args: &RunArgs) -> CliResult<Self> {
        let mut config_file = args.config.clone();
        let mut system_flag = args.system.clone();
        if let Some(s) = &args.system {
            if looks_like_path(s) {
                if config_file.is_some() {
                    return Err(CliError::Usage("give either --config or a config path in --system, not both".into()));
                }
                config_file = Some(PathBuf::from(s));
                system_flag = None;
            }
        }
        let file = match &config_file {
            Some(p) => load_file(p)?,
            None => FileConfig::default(),
        };
        let sys = file.system.clone().unwrap_or_default();
        let run = file.run.clone().unwrap_or_default();

        let system = system_flag
            .or(sys.name.clone())
            .or_else(|| file.wong.as_ref().map(|_| "wong-custom".to_string()))
            .ok_or_else(|| CliError::Usage("no system given (use --system or [system] name)".into()))?;
        let mut params: IndexMap<String, f64> = sys.params.into_iter().collect();
        for p in &args.params {
            let (k, v) = parse_kv(p)?;
            params.insert(k, v);
        }
        let connection = args
            .connection
            .clone()
            .or(file.connection.and_then(|c| c.kind))
            .unwrap_or_else(|| "mechanical".into())
            .parse::<LevelConnectionKind>()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let format = args.format.clone().or(run.format).unwrap_or_else(|| "csv".into()).parse::<Format>()?;
        let initial = match &args.initial {
            Some(s) => Some(parse_list(s)?),
            None => run.initial,
        };
        let mut tolerances = Tolerances::default();
        for (k, v) in file.tolerances.unwrap_or_default() {
            tolerances.set(&k, v)?;
        }
        for t in &args.tolerances {
            let (k, v) = parse_kv(t)?;
            tolerances.set(&k, v)?;
        }
        let cfg = RunConfig {
            system,
            params,
            wong: file.wong,
            t0: args.t0.or(run.t0).unwrap_or(0.0),
            tf: args.tf.or(run.tf).unwrap_or(10.0),
            dt: args.dt.or(run.dt).unwrap_or(1e-3),
            connection,
            out: args.out.clone().or(run.out),
            format,
            seed: args.seed.or(run.seed).unwrap_or(0),
            initial,
            random_initial: args.random_initial || run.random_initial.unwrap_or(false),
            reduced: args.reduced.clone().or(run.reduced),
            group_out: args.group_out.clone().or(run.group_out),
            tolerances,
            config_file,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(CliError::Usage(format!("dt must be positive, got {}", self.dt)));
        }
        if !self.t0.is_finite() || !self.tf.is_finite() || self.tf < self.t0 {
            return Err(CliError::Usage(format!("need finite t0 ≤ tf, got [{}, {}]", self.t0, self.tf)));
        }
        if self.initial.is_some() && self.random_initial {
            return Err(CliError::Usage("give either an initial state or --random-initial, not both".into()));
        }
        Ok(())
    }

    /// Builds the packaged or user-defined system.
    pub fn build_system(&self) -> CliResult<PackagedSystem> {
        if self.system == "wong-custom" {
            let w = self
                .wong
                .as_ref()
                .ok_or_else(|| CliError::Usage("system wong-custom needs a [wong] section".into()))?;
            if !self.params.is_empty() {
                return Err(CliError::Usage("wong-custom takes its data from [wong], not parameters".into()));
            }
            let spec = w.spec()?;
            let theta0 = w.theta0.clone().unwrap_or_else(|| vec![0.0; spec.group_dim()]);
            return Ok(packaged_wong_custom(spec, &w.mu, &w.x0, &w.xdot0, &theta0)?);
        }
        match packaged(&self.system, &self.params) {
            Err(routhkit::RouthError::Argument(msg)) if msg.starts_with("unknown system") => Err(CliError::Usage(msg)),
            other => Ok(other?),
        }
    }

    /// `key = value` lines recording the resolved configuration.
    pub fn echo(&self, sys: &PackagedSystem) -> Vec<(String, String)> {
        let mut out = vec![("system".to_string(), self.system.clone())];
        for (k, v) in &sys.params {
            out.push((format!("param.{k}"), format!("{v}")));
        }
        if let Some(w) = &self.wong {
            out.push(("wong".into(), format!("{w:?}")));
        }
        out.push(("connection".into(), self.connection.to_string()));
        out.push(("t0".into(), format!("{}", self.t0)));
        out.push(("tf".into(), format!("{}", self.tf)));
        out.push(("dt".into(), format!("{}", self.dt)));
        out.push(("seed".into(), format!("{}", self.seed)));
        if let Some(init) = &self.initial {
            out.push(("initial".into(), format!("{init:?}")));
        }
        out.push(("random_initial".into(), format!("{}", self.random_initial)));
        if let Some(c) = &self.config_file {
            out.push(("config_file".into(), c.display().to_string()));
        }
        out
    }
}
