//! Scenario execution: output files plus a manifest that pins every input.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sweep_core::crowd::{simulate, CrowdConfig, RunStatus};
use sweep_core::geometry::{
    active_constraints, gamma_estimate, good_direction, hausdorff_estimate, hypomonotonicity_check,
    MovingSet,
};
use sweep_core::sde::{
    brownian_path, euler_project, pathwise_study, stability_sweep, sub_seed, write_convergence_csv,
    write_sweep_csv,
};
use sweep_core::skorohod::{catching_up, refine_compare, support_check, write_error_table, write_paths_csv};
use sweep_core::{Error, Point, TimeGrid};

use crate::error::{exit, CliError, CliResult};
use crate::overrides::{apply_override, parse_override, set_key};
use crate::scenario::{
    GeometryScenario, Scenario, ScenarioFile, SdeScenario, SkorohodScenario, StabilityScenario,
};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub overrides: Vec<String>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub message: String,
    pub node: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario_file: String,
    pub name: Option<String>,
    pub kind: &'static str,
    pub seed: u64,
    /// The scenario after all flags and overrides; rerunning it reproduces
    /// every output.
    pub config: Value,
    pub status: &'static str,
    pub error: Option<ErrorRecord>,
    pub discarded: usize,
    pub outputs: Vec<String>,
    pub summary: Value,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub exit_code: u8,
    /// Human-readable report for commands that print one.
    pub report: Option<String>,
}

/// Reads a scenario and applies `--seed`, `--paths` and `--override`, in
/// that order.
pub fn load(path: &Path, opts: &RunOptions) -> CliResult<(Value, ScenarioFile)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Some(seed) = opts.seed {
        set_key(&mut doc, "seed", json!(seed))?;
    }
    if let Some(paths) = opts.paths {
        let kind = doc.pointer("/scenario/kind").and_then(Value::as_str).unwrap_or("");
        if !matches!(kind, "sde" | "stability") {
            return Err(CliError::Config(format!("--paths does not apply to `{kind}` scenarios")));
        }
        set_key(&mut doc, "scenario.paths", json!(paths))?;
    }
    for o in &opts.overrides {
        let (key, value) = parse_override(o)?;
        apply_override(&mut doc, &key, value)?;
    }
    let file = ScenarioFile::from_value(doc.clone())?;
    // the manifest records the seed even when the file relies on the default
    set_key(&mut doc, "seed", json!(file.seed))?;
    Ok((doc, file))
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn write<F>(&mut self, name: &str, body: F) -> CliResult<()>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<(), std::io::Error>,
    {
        let mut buf = Vec::new();
        let path = self.dir.join(name);
        body(&mut buf).map_err(|e| CliError::io(&path, e))?;
        fs::write(&path, buf).map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }
}

struct Summary {
    value: Value,
    discarded: usize,
    report: Option<String>,
}

impl Summary {
    fn new(value: Value) -> Self {
        Summary {
            value,
            discarded: 0,
            report: None,
        }
    }
}

pub fn run(path: &Path, opts: &RunOptions) -> CliResult<RunOutcome> {
    let (config, file) = load(path, opts)?;
    run_loaded(path, config, &file, &opts.out_dir)
}

pub fn run_loaded(path: &Path, config: Value, file: &ScenarioFile, out_dir: &Path) -> CliResult<RunOutcome> {
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let start = Instant::now();
    let mut outputs = Outputs {
        dir: out_dir.to_path_buf(),
        files: Vec::new(),
    };
    let result = execute(file, &mut outputs);
    let (status, error, exit_code, summary) = match result {
        Ok(s) => ("ok", None, exit::OK, s),
        Err(e @ CliError::Io { .. }) => return Err(e),
        Err(e) => (
            e.status(),
            Some(ErrorRecord {
                message: e.to_string(),
                node: e.node(),
            }),
            e.exit_code(),
            Summary::new(Value::Null),
        ),
    };
    let manifest = Manifest {
        tool: "sweep",
        version: env!("CARGO_PKG_VERSION"),
        scenario_file: path.display().to_string(),
        name: file.name.clone(),
        kind: file.scenario.kind(),
        seed: file.seed,
        config,
        status,
        error,
        discarded: summary.discarded,
        outputs: outputs.files.clone(),
        summary: summary.value,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    let manifest_path = out_dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, text + "\n").map_err(|e| CliError::io(&manifest_path, e))?;
    Ok(RunOutcome {
        manifest,
        exit_code,
        report: summary.report,
    })
}

fn execute(file: &ScenarioFile, out: &mut Outputs) -> CliResult<Summary> {
    match &file.scenario {
        Scenario::Skorohod(s) => run_skorohod(s, out),
        Scenario::Sde(s) => run_sde(s, file.seed, out),
        Scenario::Stability(s) => run_stability(s, file.seed, out),
        Scenario::Crowd(c) => run_crowd(c, file.seed, out),
        Scenario::GeometryCheck(g) => run_geometry(g, file.seed, out),
    }
}

fn start_point(u0: &[f64], set: &dyn MovingSet) -> CliResult<Point> {
    if u0.len() != set.dim() {
        return Err(CliError::Config(format!(
            "u0 has dimension {}, the set has {}",
            u0.len(),
            set.dim()
        )));
    }
    Ok(Point::from_vec(u0.to_vec()))
}

fn run_skorohod(s: &SkorohodScenario, out: &mut Outputs) -> CliResult<Summary> {
    let grid = TimeGrid::new(s.horizon, s.step)?;
    let set = s.set.build(s.horizon)?;
    let u0 = start_point(&s.u0, &*set)?;
    let driver = s.driver.build(grid)?;
    let sol = catching_up(&*set, &driver, &u0)?;
    out.write("trajectory.csv", |b| sol.write_csv(b).map_err(Into::into))?;
    let violations = support_check(&sol, &*set, 1e3 * set.boundary_tolerance());
    let mut summary = json!({
        "final_tv_k": sol.final_tv(),
        "contact_nodes": sol.contact.iter().filter(|&&c| c).count(),
        "support_violations": violations.len(),
    });
    if !s.refine.is_empty() {
        let rows = refine_compare(&*set, &driver, &u0, &s.refine)?;
        out.write("errors.csv", |b| write_error_table(&rows, b).map_err(Into::into))?;
        summary["errors"] = json!(rows.iter().map(|r| json!({"h": r.h, "sup_error": r.sup_error, "tv_k": r.tv_k})).collect::<Vec<_>>());
    }
    Ok(Summary::new(summary))
}

fn run_sde(s: &SdeScenario, seed: u64, out: &mut Outputs) -> CliResult<Summary> {
    if s.paths == 0 {
        return Err(CliError::Config("sde scenario needs at least one path".into()));
    }
    let grid = TimeGrid::new(s.horizon, s.step)?;
    let set = s.set.build(s.horizon)?;
    let u0 = start_point(&s.u0, &*set)?;
    let fields = s.fields.build(set.dim())?;
    let results: Vec<_> = (0..s.paths)
        .into_par_iter()
        .map(|i| euler_project(&*set, &fields, &u0, &brownian_path(sub_seed(seed, i as u64), grid)))
        .collect();
    let mut kept = Vec::new();
    let mut discarded = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(sol) => kept.push((i, sol)),
            // a lone path is the experiment, so its failure is the run's
            Err(e) if e.is_step_too_large() && s.paths > 1 => discarded += 1,
            Err(e) => return Err(e.into()),
        }
    }
    out.write("trajectories.csv", |b| write_paths_csv(&kept, b).map_err(Into::into))?;
    let tol = 1e3 * set.boundary_tolerance();
    let violations: usize = kept.iter().map(|(_, sol)| support_check(sol, &*set, tol).len()).sum();
    let mut final_mean = Point::zeros(set.dim());
    for (_, sol) in &kept {
        final_mean += sol.x.last().unwrap();
    }
    if !kept.is_empty() {
        final_mean /= kept.len() as f64;
    }
    let mut summary = json!({
        "paths": kept.len(),
        "final_mean": final_mean.as_slice(),
        "support_violations": violations,
    });
    let mut report = None;
    if let Some(p) = &s.pathwise {
        let seeds: Vec<u64> = (0..p.seeds as u64).map(|i| sub_seed(seed, i)).collect();
        let study = pathwise_study(&*set, &fields, &u0, &seeds, grid, p.levels)?;
        out.write("convergence.csv", |b| write_convergence_csv(&study.tables, b).map_err(Into::into))?;
        let passing = study.passing(p.min_ratio);
        summary["pathwise"] = json!({
            "levels": p.levels,
            "seeds": seeds.len(),
            "passing": passing,
            "min_ratio": p.min_ratio,
            "discarded_seeds": study.discarded,
        });
        discarded += study.discarded.len();
        report = Some(format!(
            "pathwise convergence: {passing} of {} seeds decrease with ratio >= {} at every level ({} discarded)",
            study.tables.len(),
            p.min_ratio,
            study.discarded.len()
        ));
    }
    Ok(Summary {
        value: summary,
        discarded,
        report,
    })
}

fn run_stability(s: &StabilityScenario, seed: u64, out: &mut Outputs) -> CliResult<Summary> {
    let grid = TimeGrid::new(s.horizon, s.step)?;
    let set = s.set.build(s.horizon)?;
    let u0 = start_point(&s.u0, &*set)?;
    let fields = s.fields.build(set.dim())?;
    let report = stability_sweep(&*set, &fields, &u0, &s.epsilons, s.paths, seed, grid)?;
    out.write("stability.csv", |b| write_sweep_csv(&report.rows, "epsilon", b).map_err(Into::into))?;
    let mut text = String::from("epsilon        estimate       std_error      paths  discarded\n");
    for r in &report.rows {
        text += &format!(
            "{:<14} {:<14.6e} {:<14.6e} {:<6} {}\n",
            r.parameter, r.estimate, r.std_error, r.n_paths, r.discarded
        );
    }
    match report.slope {
        Some(slope) => text += &format!("log-log slope: {slope:.4}\n"),
        None => text += "log-log slope: undefined\n",
    }
    if let Some(w) = &report.warning {
        text += &format!("warning: {w}\n");
    }
    Ok(Summary {
        value: json!({
            "slope": report.slope,
            "monotone": report.monotone_within(0.0),
            "warning": report.warning,
        }),
        discarded: report.discarded(),
        report: Some(text),
    })
}

fn run_crowd(c: &CrowdConfig, seed: u64, out: &mut Outputs) -> CliResult<Summary> {
    let traj = simulate(c, seed)?;
    out.write("trajectory.csv", |b| traj.write_csv(b).map_err(Into::into))?;
    if let RunStatus::Aborted { error, .. } = &traj.status {
        return Err(error.clone().into());
    }
    Ok(Summary::new(json!({
        "steps": traj.len() - 1,
        "min_gap": finite_or_null(traj.overall_min_gap()),
        "max_active": traj.active.iter().max(),
        "cumulative_k": traj.cumulative_k.last(),
        "activation": c.activation(),
    })))
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn error_text(e: &Error) -> String {
    match e.root() {
        Error::ReverseTriangleFails { distance } => {
            format!("R_rho fails: distance from the origin to the hull of active normals is {distance:e}")
        }
        _ => e.to_string(),
    }
}

/// Pointwise certificates; infeasible probes are reported as skipped.
pub fn geometry_report(g: &GeometryScenario, seed: u64) -> CliResult<Value> {
    let set = g.set.build(g.horizon)?;
    let constraints = g.set.constraint_set(g.horizon)?;
    let mut probes = Vec::new();
    for p in &g.probes {
        let x = Point::from_vec(p.x.clone());
        if x.len() != set.dim() {
            probes.push(json!({"t": p.t, "x": p.x, "status": "skipped", "reason": "dimension mismatch"}));
            continue;
        }
        let distance = set.distance(p.t, &x);
        if distance > set.boundary_tolerance() {
            probes.push(json!({
                "t": p.t, "x": p.x, "status": "skipped",
                "reason": format!("point is not in C(t): distance {distance:e}"),
            }));
            continue;
        }
        let mut entry = json!({"t": p.t, "x": p.x, "status": "ok", "prox_constant": finite_or_null(set.prox_constant())});
        if let Some(cs) = &constraints {
            let active = active_constraints(cs, p.t, &x, cs.activation());
            entry["active"] = json!(active.indices);
            entry["p"] = json!(cs.constraints().len());
            entry["alpha"] = json!(cs.alpha());
            entry["beta"] = json!(cs.beta());
            if active.indices.is_empty() {
                entry["gamma"] = Value::Null;
                entry["r_rho"] = json!("vacuous: no active constraints");
                entry["good_direction"] = Value::Null;
                entry["admissibility"] = json!("interior point: no active constraints");
                probes.push(entry);
                continue;
            }
            let normals: Result<Vec<Point>, Error> = active
                .indices
                .iter()
                .map(|&i| cs.constraints()[i].gradient(p.t, &x).map(|g| g.normalize()))
                .collect();
            match normals.and_then(|n| gamma_estimate(&n)) {
                Ok(gamma) => {
                    entry["gamma"] = json!(gamma);
                    entry["r_rho"] = json!("holds");
                }
                Err(e) => {
                    entry["gamma"] = Value::Null;
                    entry["r_rho"] = json!(error_text(&e));
                }
            }
            match good_direction(cs, p.t, &x) {
                Ok(d) => {
                    entry["good_direction"] = json!({
                        "u": d.u.as_slice(),
                        "nu": d.nu,
                        "inner_products": d.inner_products,
                    });
                    entry["admissibility"] = json!("certified");
                }
                Err(e) => {
                    entry["good_direction"] = Value::Null;
                    entry["admissibility"] = json!(format!("not certified: {}", error_text(&e)));
                }
            }
        }
        probes.push(entry);
    }
    let mut report = json!({ "probes": probes });
    if let Some(h) = &g.hypomonotonicity {
        let eta = h.eta.unwrap_or_else(|| set.prox_constant());
        let r = hypomonotonicity_check(&*set, h.t, eta, h.samples, seed, &h.window, h.tolerance)?;
        report["hypomonotonicity"] = json!({
            "eta": r.eta,
            "triples": r.triples,
            "violations": r.violation_count,
            "worst_excess": r.worst_excess,
            "passed": r.passed(),
        });
    }
    if let Some(h) = &g.hausdorff {
        let samples = h
            .pairs
            .iter()
            .map(|&[a, b]| {
                hausdorff_estimate(&*set, a, &*set, b, &h.window, h.samples, seed)
                    .map(|d| json!({"t_a": a, "t_b": b, "estimate": d}))
            })
            .collect::<Result<Vec<_>, _>>()?;
        report["hausdorff"] = json!(samples);
    }
    Ok(report)
}

fn run_geometry(g: &GeometryScenario, seed: u64, out: &mut Outputs) -> CliResult<Summary> {
    let report = geometry_report(g, seed)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    out.write("report.json", |b| {
        b.extend_from_slice(text.as_bytes());
        Ok(())
    })?;
    let skipped = report["probes"]
        .as_array()
        .map_or(0, |p| p.iter().filter(|e| e["status"] == "skipped").count());
    Ok(Summary {
        value: json!({"probes": g.probes.len(), "skipped": skipped}),
        discarded: 0,
        report: Some(text),
    })
}
