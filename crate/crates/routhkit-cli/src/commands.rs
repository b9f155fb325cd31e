//! The four subcommands. Each returns its tables and summary so the same
//! code serves the binary and the acceptance checks.

use std::path::{Path, PathBuf};

use log::{info, warn};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use routhkit::bundle::FullState;
use routhkit::integrate::Trajectory;
use routhkit::lagrangian::{el_residual, max_momentum_drift};
use routhkit::reconstruct::{reconstruct, Reconstruction};
use routhkit::routh::{integrate_reduced, project_to_reduced, solve_level_set};
use routhkit::systems::PackagedSystem;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::table::{write_text, Format, Table};

/// Output of a command before anything is written.
#[derive(Debug, Clone)]
pub struct Output {
    pub table: Table,
    /// Reconstruct only: the developed group curve and the lift angles.
    pub group: Option<Table>,
    pub summary: Value,
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
    format!("[{}]", parts.join(", "))
}

fn parse_meta_list(s: &str) -> CliResult<Vec<f64>> {
    let inner = s.trim().trim_start_matches('[').trim_end_matches(']');
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad list entry {x:?}"))))
        .collect()
}

/// Initial state from the config: an explicit state, a seeded random draw,
/// or the packaged default. With `on_level`, random draws are moved onto the
/// momentum level by re-solving `v^a`, and explicit states must already lie
/// on it.
pub fn initial_state(cfg: &RunConfig, sys: &PackagedSystem, on_level: bool) -> CliResult<FullState> {
    let (n, m) = (sys.system.base_dim(), sys.system.group_dim());
    let s = if let Some(v) = &cfg.initial {
        if v.len() != 2 * (n + m) {
            return Err(CliError::Usage(format!(
                "initial state has {} entries, {} needs {} (x, θ, v^i, v^a)",
                v.len(),
                sys.name,
                2 * (n + m)
            )));
        }
        FullState::from_slice(n, m, v)?
    } else if cfg.random_initial {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut s = sys.random_state(&mut rng);
        if on_level {
            s.v_group = solve_level_set(&sys.system, &sys.level, &s.x, &s.theta, &s.v_base, None)?;
        }
        s
    } else {
        sys.initial.clone()
    };
    if on_level {
        let res = sys.level.momentum_residual(&sys.system, &s);
        if res > sys.level.membership_tol() {
            return Err(CliError::Tolerance(format!(
                "initial momentum mismatch: |J(q, v) − μ| = {res:e} exceeds {:e}",
                sys.level.membership_tol()
            )));
        }
    }
    Ok(s)
}

fn base_meta(cfg: &RunConfig, sys: &PackagedSystem, command: &str) -> Table {
    let mut t = Table::default();
    t.meta("command", command);
    for (k, v) in cfg.echo(sys) {
        t.meta(k, v);
    }
    t.meta("chart", sys.system.chart().name());
    t.meta("mu", fmt_list(&sys.level.mu));
    t
}

/// Columns `x_i, theta_a, vb_i, vg_a` followed by the trajectory's
/// diagnostics.
fn full_columns(table: &mut Table, traj: &Trajectory, n: usize, m: usize) {
    table.push_column("t", traj.times.clone());
    let names = (0..n)
        .map(|i| format!("x_{i}"))
        .chain((0..m).map(|a| format!("theta_{a}")))
        .chain((0..n).map(|i| format!("vb_{i}")))
        .chain((0..m).map(|a| format!("vg_{a}")));
    for (k, name) in names.enumerate() {
        table.push_column(name, traj.component(k));
    }
    for (name, col) in &traj.diagnostics {
        table.push_column(name.clone(), col.clone());
    }
}

pub fn cmd_simulate(cfg: &RunConfig) -> CliResult<Output> {
    let sys = cfg.build_system()?;
    let s0 = initial_state(cfg, &sys, false)?;
    let traj = sys.system.simulate(&s0, cfg.t0, cfg.tf, cfg.dt)?;
    let drift = max_momentum_drift(&traj);
    let (n, m) = (sys.system.base_dim(), sys.system.group_dim());
    let mut table = base_meta(cfg, &sys, "simulate");
    table.meta("initial_state", fmt_list(&s0.to_vec()));
    table.meta("summary.max_momentum_drift", format!("{drift:e}"));
    full_columns(&mut table, &traj, n, m);
    info!("simulate {}: {} samples, momentum drift {drift:e}", sys.name, traj.len());
    let summary = json!({ "command": "simulate", "system": sys.name, "samples": traj.len(), "max_momentum_drift": drift });
    Ok(Output { table, group: None, summary })
}

/// Reduced trajectory plus the initial state it was started from.
pub fn run_reduce(cfg: &RunConfig, sys: &PackagedSystem) -> CliResult<(Trajectory, FullState)> {
    let s0 = initial_state(cfg, sys, true)?;
    let r0 = project_to_reduced(&sys.level, &s0);
    Ok((integrate_reduced(&sys.system, &sys.level, &r0, cfg.t0, cfg.tf, cfg.dt)?, s0))
}

pub fn cmd_reduce(cfg: &RunConfig) -> CliResult<Output> {
    let sys = cfg.build_system()?;
    let (traj, s0) = run_reduce(cfg, &sys)?;
    let n = sys.system.base_dim();
    let mut table = base_meta(cfg, &sys, "reduce");
    table.meta("initial_state", fmt_list(&s0.to_vec()));
    table.meta("lift_seed", fmt_list(&sys.level.theta_iso(&s0.theta)));
    table.push_column("t", traj.times.clone());
    let names = (0..n)
        .map(|i| format!("x_{i}"))
        .chain(sys.level.coord_comp().iter().map(|k| format!("theta_{k}")))
        .chain((0..n).map(|i| format!("vb_{i}")));
    for (k, name) in names.enumerate() {
        table.push_column(name, traj.component(k));
    }
    for (name, col) in &traj.diagnostics {
        table.push_column(name.clone(), col.clone());
    }
    let worst = traj.diagnostics.get("gbar_cond").map_or(0.0, |c| c.iter().copied().fold(0.0, f64::max));
    let summary = json!({ "command": "reduce", "system": sys.name, "samples": traj.len(), "max_gbar_cond": worst });
    Ok(Output { table, group: None, summary })
}

fn read_table(path: &Path) -> CliResult<Table> {
    if path.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Table::from_json(&text)
    } else {
        Table::read_csv(path)
    }
}

/// Checks that a reduced table was produced for the configured system and
/// rebuilds the trajectory from its columns.
pub fn reduced_from_table(table: &Table, cfg: &RunConfig, sys: &PackagedSystem) -> CliResult<Trajectory> {
    match table.get_meta("system") {
        Some(name) if name == sys.name => {}
        Some(name) => {
            return Err(CliError::Usage(format!("reduced file is for system {name}, config says {}", sys.name)));
        }
        None => return Err(CliError::Usage("reduced file has no system metadata".into())),
    }
    for (k, v) in cfg.echo(sys) {
        if (k.starts_with("param.") || k == "wong") && table.get_meta(&k) != Some(v.as_str()) {
            return Err(CliError::Usage(format!("reduced file was made with a different {k}")));
        }
    }
    let n = sys.system.base_dim();
    let names: Vec<String> = (0..n)
        .map(|i| format!("x_{i}"))
        .chain(sys.level.coord_comp().iter().map(|k| format!("theta_{k}")))
        .chain((0..n).map(|i| format!("vb_{i}")))
        .collect();
    let t = table.column("t").ok_or_else(|| CliError::Usage("reduced file has no t column".into()))?;
    let cols: Vec<&[f64]> = names
        .iter()
        .map(|c| table.column(c).ok_or_else(|| CliError::Usage(format!("reduced file has no {c} column"))))
        .collect::<CliResult<_>>()?;
    if t.len() < 5 {
        return Err(CliError::Usage("reduced file needs at least five samples".into()));
    }
    let mut traj = Trajectory::new();
    for (k, &tk) in t.iter().enumerate() {
        traj.push(tk, cols.iter().map(|c| c[k]).collect());
    }
    Ok(traj)
}

/// Reconstruction from a reduced trajectory. The lift starts at `seed`, the
/// `θ^A` values of the state the reduced run started from.
pub fn run_reconstruct(cfg: &RunConfig, sys: &PackagedSystem, reduced: &Trajectory, seed: &[f64]) -> CliResult<Reconstruction> {
    Ok(reconstruct(&sys.system, &sys.level, reduced, cfg.connection, None, Some(seed))?)
}

pub fn cmd_reconstruct(cfg: &RunConfig) -> CliResult<Output> {
    let path = cfg.reduced.as_ref().ok_or_else(|| CliError::Usage("reconstruct needs --reduced FILE".into()))?;
    let sys = cfg.build_system()?;
    let input = read_table(path)?;
    let reduced = reduced_from_table(&input, cfg, &sys)?;
    let seed = match input.get_meta("lift_seed") {
        Some(s) => parse_meta_list(s)?,
        None => sys.level.theta_iso(&initial_state(cfg, &sys, true)?.theta),
    };
    if seed.len() != sys.level.isotropy_dim() {
        return Err(CliError::Usage("lift_seed in the reduced file has the wrong length".into()));
    }
    let rec = run_reconstruct(cfg, &sys, &reduced, &seed)?;
    let (n, m) = (sys.system.base_dim(), sys.system.group_dim());
    let mut full = rec.full.clone();
    let p0 = sys.level.mu.clone();
    sys.system.attach_diagnostics(&mut full, &p0)?;
    let level_err = max_momentum_drift(&full);
    let mut table = base_meta(cfg, &sys, "reconstruct");
    table.meta("reduced_file", path.display());
    table.meta("lift_seed", fmt_list(&seed));
    table.meta("summary.max_level_error", format!("{level_err:e}"));
    full_columns(&mut table, &full, n, m);

    let mut group = base_meta(cfg, &sys, "reconstruct-group");
    group.push_column("t", rec.group.times.clone());
    for a in 0..m {
        group.push_column(format!("g_{a}"), rec.group.component(a));
    }
    for a in 0..m {
        group.push_column(format!("lift_theta_{a}"), rec.lift.component(n + a));
    }
    let summary = json!({
        "command": "reconstruct",
        "system": sys.name,
        "connection": cfg.connection.to_string(),
        "samples": full.len(),
        "max_level_error": level_err,
    });
    Ok(Output { table, group: Some(group), summary })
}

fn max_state_gap(a: &Trajectory, b: &Trajectory) -> f64 {
    a.states
        .iter()
        .zip(&b.states)
        .flat_map(|(u, v)| u.iter().zip(v).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

/// Runs the full and the reduce-reconstruct pipelines from one initial state
/// and checks them against the configured tolerances.
pub fn cmd_compare(cfg: &RunConfig) -> CliResult<Output> {
    let sys = cfg.build_system()?;
    let s0 = initial_state(cfg, &sys, true)?;
    let seed = sys.level.theta_iso(&s0.theta);
    let (full, rec) = std::thread::scope(|scope| {
        let full = scope.spawn(|| sys.system.simulate(&s0, cfg.t0, cfg.tf, cfg.dt));
        let rec = scope.spawn(|| -> CliResult<Reconstruction> {
            let r0 = project_to_reduced(&sys.level, &s0);
            let red = integrate_reduced(&sys.system, &sys.level, &r0, cfg.t0, cfg.tf, cfg.dt)?;
            run_reconstruct(cfg, &sys, &red, &seed)
        });
        (full.join().expect("full pipeline thread"), rec.join().expect("reduced pipeline thread"))
    });
    let full = full?;
    let rec = rec?;
    if full.len() != rec.full.len() {
        return Err(CliError::Usage("pipelines produced different time grids".into()));
    }
    let tol = cfg.tolerances;
    let discrepancy = max_state_gap(&full, &rec.full);
    let drift = max_momentum_drift(&full);
    let mut rfull = rec.full.clone();
    sys.system.attach_diagnostics(&mut rfull, &sys.level.mu)?;
    let level_err = max_momentum_drift(&rfull);
    let el = if rec.full.len() >= 5 { el_residual(&sys.system, &rec.full)? } else { 0.0 };
    let metrics = [
        ("discrepancy", discrepancy, tol.discrepancy),
        ("momentum_drift", drift, tol.momentum),
        ("reconstructed_level_error", level_err, tol.momentum),
        ("el_residual", el, tol.el_residual),
    ];
    let pass = metrics.iter().all(|(_, v, t)| v <= t);
    let mut report = serde_json::Map::new();
    report.insert("command".into(), json!("compare"));
    let config: serde_json::Map<String, Value> = cfg.echo(&sys).into_iter().map(|(k, v)| (k, Value::String(v))).collect();
    report.insert("config".into(), Value::Object(config));
    report.insert("samples".into(), json!(full.len()));
    let mut m = serde_json::Map::new();
    for (name, v, t) in metrics {
        if v > t {
            warn!("compare {}: {name} = {v:e} exceeds {t:e}", sys.name);
        }
        m.insert(name.into(), json!({ "value": v, "tolerance": t, "pass": v <= t }));
    }
    report.insert("metrics".into(), Value::Object(m));
    report.insert("pass".into(), json!(pass));

    let mut table = base_meta(cfg, &sys, "compare");
    full_columns(&mut table, &full, sys.system.base_dim(), sys.system.group_dim());
    Ok(Output { table, group: None, summary: Value::Object(report) })
}

fn group_path(cfg: &RunConfig) -> Option<PathBuf> {
    if let Some(p) = &cfg.group_out {
        return Some(p.clone());
    }
    let out = cfg.out.as_ref()?;
    let stem = out.file_stem()?.to_string_lossy();
    let ext = match cfg.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    Some(out.with_file_name(format!("{stem}_group.{ext}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Reduce,
    Reconstruct,
    Compare,
}

/// Runs a command and writes its outputs. Files go where the config says;
/// without `--out`, the table (or the compare report) goes to stdout.
pub fn execute(command: Command, cfg: &RunConfig) -> CliResult<()> {
    let out = match command {
        Command::Simulate => cmd_simulate(cfg)?,
        Command::Reduce => cmd_reduce(cfg)?,
        Command::Reconstruct => cmd_reconstruct(cfg)?,
        Command::Compare => {
            let out = cmd_compare(cfg)?;
            let text = serde_json::to_string_pretty(&out.summary).expect("JSON serialization") + "\n";
            write_text(cfg.out.as_deref(), &text)?;
            if out.summary["pass"] != json!(true) {
                let failed: Vec<&str> = out.summary["metrics"]
                    .as_object()
                    .map(|m| m.iter().filter(|(_, v)| v["pass"] != json!(true)).map(|(k, _)| k.as_str()).collect())
                    .unwrap_or_default();
                return Err(CliError::Tolerance(format!("compare failed: {}", failed.join(", "))));
            }
            return Ok(());
        }
    };
    out.table.write(cfg.out.as_deref(), cfg.format)?;
    if let Some(group) = &out.group {
        if let Some(p) = group_path(cfg) {
            group.write(Some(&p), cfg.format)?;
        }
    }
    if cfg.out.is_some() {
        println!("{}", out.summary);
    }
    Ok(())
}
