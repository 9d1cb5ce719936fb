//! Command dispatch and output files.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use totc::inner::value_function_sweep;
use totc::outer::{find_optimal_time, growth_check};
use totc::study::run_study;
use totc::{Discretization, SolveReport, SpaceTimeField};

use crate::config::{Command, RunConfig};
use crate::error::CliError;

/// Round-trip formatting: 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt17(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

/// Files written by a command and whether every solve converged.
#[derive(Debug)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub converged: bool,
    pub summary: String,
}

struct Output {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Output {
    fn new(dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Output { dir, files: Vec::new() })
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(&path, io),
            other => CliError::Config(format!("{other:?}")),
        })?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(value).expect("report serializes");
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }
}

pub fn run(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<RunOutcome, CliError> {
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_path.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let mut out = Output::new(dir)?;
    let (converged, summary) = match cfg.command {
        Command::Solve => solve(cfg, &mut out)?,
        Command::Sweep => sweep(cfg, &mut out)?,
        Command::Eoc => eoc(cfg, &mut out)?,
        Command::GrowthCheck => growth(cfg, &mut out)?,
    };
    Ok(RunOutcome { files: out.files, converged, summary })
}

fn solve_report_json(cfg: &RunConfig, disc: &Discretization, r: &SolveReport) -> Value {
    let k = &r.kkt;
    json!({
        "command": cfg.command.name(),
        "M": disc.n_steps(),
        "n_div": disc.mesh.n_div,
        "N": disc.n_nodes(),
        "initial_constraint": cfg.initial_constraint,
        "t_opt": r.t_opt,
        "newton_steps": r.newton_steps,
        "cg_steps": r.total_cg_steps,
        "pg_steps": r.total_pg_steps,
        "delta_history": r.delta_history,
        "newton_increments": r.newton_increments,
        "converged": r.inner.converged,
        "distance": r.inner.distance,
        "delta": r.inner.delta,
        "gap": r.inner.gap,
        "kkt": {
            "mu": k.mu,
            "residual_adjoint": k.residual_adjoint,
            "residual_v": k.residual_v,
            "residual_t": k.residual_t,
            "residual_complementarity": k.residual_complementarity,
            "sign_violations": k.sign_violations,
        },
    })
}

/// Up to `count` evenly spaced step indices including the first and last.
fn snapshot_steps(n_steps: usize, count: usize) -> Vec<usize> {
    if n_steps <= count {
        return (0..n_steps).collect();
    }
    let mut steps: Vec<usize> = (0..count).map(|k| k * (n_steps - 1) / (count - 1)).collect();
    steps.dedup();
    steps
}

fn node_rows<'a>(
    label: &'a str,
    field: &'a SpaceTimeField,
    disc: &'a Discretization,
    steps: &'a [usize],
) -> impl Iterator<Item = Vec<String>> + 'a {
    let all = field.to_all_nodes(&disc.mesh);
    steps.iter().flat_map(move |&j| {
        let s = disc.grid.t[j + 1];
        let values = all.step(j).to_vec();
        disc.mesh.nodes.iter().zip(values).map(move |(x, v)| {
            vec![label.to_string(), (j + 1).to_string(), fmt17(s), fmt17(x[0]), fmt17(x[1]), fmt17(v)]
        })
    })
}

fn solve(cfg: &RunConfig, out: &mut Output) -> Result<(bool, String), CliError> {
    let disc = cfg.disc()?;
    let r = find_optimal_time(&cfg.spec, &disc, &cfg.outer, &cfg.inner)?;
    out.json("report.json", &solve_report_json(cfg, &disc, &r))?;

    let terminal = disc.mesh.extend_by_zero(r.inner.state.field.step(disc.n_steps() - 1));
    out.csv(
        "terminal.csv",
        &["x1", "x2", "value"],
        disc.mesh.nodes.iter().zip(&terminal).map(|(x, &v)| vec![fmt17(x[0]), fmt17(x[1]), fmt17(v)]),
    )?;
    let steps = snapshot_steps(disc.n_steps(), 10);
    let rows = node_rows("state", &r.inner.state.field, &disc, &steps)
        .chain(node_rows("control", &r.inner.v_opt, &disc, &steps));
    out.csv("snapshots.csv", &["field", "step", "s", "x1", "x2", "value"], rows)?;

    let summary = format!(
        "T_opt = {} after {} Newton steps (M = {}, N = {}, mu = {:.6})",
        fmt17(r.t_opt),
        r.newton_steps,
        disc.n_steps(),
        disc.n_nodes(),
        r.kkt.mu
    );
    Ok((r.inner.converged, summary))
}

fn sweep(cfg: &RunConfig, out: &mut Output) -> Result<(bool, String), CliError> {
    let disc = cfg.disc()?;
    let s = cfg.sweep.expect("checked by parse_config");
    let points = value_function_sweep(&cfg.spec, &disc, &cfg.inner, s.t_start, s.t_end, s.count)?;
    out.csv(
        "sweep.csv",
        &["T", "delta", "converged"],
        points.iter().map(|p| vec![fmt17(p.horizon), fmt17(p.delta), p.converged.to_string()]),
    )?;
    let capped = points.iter().filter(|p| !p.converged).count();
    out.json(
        "report.json",
        &json!({
            "command": cfg.command.name(),
            "M": disc.n_steps(),
            "n_div": disc.mesh.n_div,
            "initial_constraint": cfg.initial_constraint,
            "converged": capped == 0,
            "points": points,
        }),
    )?;
    let summary = format!(
        "{} points ({} at the iteration cap), delta({}) = {:.6}, delta({}) = {:.6}",
        points.len(),
        capped,
        s.t_start,
        points[0].delta,
        s.t_end,
        points[points.len() - 1].delta
    );
    // a capped point still bounds delta from above; it is flagged in the table
    // instead of failing the whole sweep
    Ok((true, summary))
}

fn eoc(cfg: &RunConfig, out: &mut Output) -> Result<(bool, String), CliError> {
    let study = run_study(&cfg.study_config()?)?;
    out.csv(
        "eoc.csv",
        &["M", "N", "T_sigma", "abs_error", "EOC", "Newton steps", "cG steps"],
        study.rows.iter().map(|r| {
            vec![
                r.m.to_string(),
                r.n.to_string(),
                fmt17(r.t_sigma),
                fmt17(r.abs_error),
                opt17(r.eoc),
                r.newton_steps.to_string(),
                r.cg_steps.to_string(),
            ]
        }),
    )?;
    let converged = study.rows.iter().all(|r| r.converged);
    out.json(
        "report.json",
        &json!({
            "command": cfg.command.name(),
            "initial_constraint": cfg.initial_constraint,
            "converged": converged,
            "study": study,
        }),
    )?;
    let summary = format!(
        "T_ref = {}, {} rows, fitted slope {}",
        fmt17(study.t_ref),
        study.rows.len(),
        study.fitted_slope.map_or("n/a".into(), |s| format!("{s:.3}"))
    );
    Ok((converged, summary))
}

fn growth(cfg: &RunConfig, out: &mut Output) -> Result<(bool, String), CliError> {
    let disc = cfg.disc()?;
    let r = find_optimal_time(&cfg.spec, &disc, &cfg.outer, &cfg.inner)?;
    let g = growth_check(&r, &cfg.spec, &disc, cfg.samples, cfg.seed, &cfg.outer)?;
    out.csv(
        "growth.csv",
        &["index", "T_first", "control_dist_sq", "ratio"],
        g.samples
            .iter()
            .map(|s| vec![s.index.to_string(), opt17(s.t_first), fmt17(s.control_dist_sq), opt17(s.ratio)]),
    )?;
    let summary = format!(
        "T_opt = {}, samples = {}, censored = {}, kappa_lower = {}, all_above = {}",
        fmt17(g.t_opt),
        g.samples.len(),
        g.censored,
        opt17(g.kappa_lower),
        g.all_above
    );
    out.json(
        "report.json",
        &json!({
            "command": cfg.command.name(),
            "solve": solve_report_json(cfg, &disc, &r),
            "seed": cfg.seed,
            "growth": g,
            "summary": summary,
        }),
    )?;
    Ok((r.inner.converged, summary))
}
