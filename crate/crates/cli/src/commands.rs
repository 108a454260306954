use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mefcons::analysis::{
    analytical_coherence, assemble_global, empirical_deviation, exp_bound_constants, phi_max, predict_equilibrium,
    projected_disagreement, spectral_report, BoundMethod, IssBound,
};
use mefcons::config::ScenarioConfig;
use mefcons::disturbance::DisturbanceKind;
use mefcons::graph::{build_laplacian, left_null_vector};
use mefcons::simulate::{simulate_classical, simulate_mef, RiccatiMode, Scenario, Trajectory};
use mefcons::Error;
use serde::Serialize;

use crate::output::{indexed, write_json, CsvOut, CSV_SCHEMA};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_SOLVER: u8 = 4;
pub const EXIT_BOUND: u8 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonFinite { .. } | Error::ZeroDenominator(_) => EXIT_NUMERICAL,
            Error::Solver(_) => EXIT_SOLVER,
            _ => EXIT_CONFIG,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::config(format!("{}: {e}", path.display()))
}

type Outcome = Result<Vec<String>, CliError>;

#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
    pub riccati: Option<RiccatiMode>,
}

/// A fully resolved scenario ready to run.
pub struct Run {
    pub config: ScenarioConfig,
    pub source: PathBuf,
    started: Instant,
}

pub fn load(path: &Path, overrides: &Overrides) -> Result<Run, CliError> {
    let started = Instant::now();
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut config = if path.extension().is_some_and(|ext| ext == "json") {
        // a manifest from an earlier run; its `config` field is the echo
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| io_error(path, e))?;
        let inner = value.get("config").cloned().unwrap_or(value);
        serde_json::from_value(inner).map_err(|e| io_error(path, e))?
    } else {
        ScenarioConfig::from_toml_str(&text).map_err(|e| io_error(path, e))?
    };
    if let Some(seed) = overrides.seed {
        config.seed = seed;
        config.disturbance.seed = Some(seed);
    }
    if let Some(tol) = overrides.tolerance {
        config.analysis.tolerance = tol;
    }
    if let Some(mode) = overrides.riccati {
        config.filter.riccati = mode;
    }
    let config = config.resolved()?;
    // surfaces parameter errors before any command starts writing
    config.scenario::<f64>()?;
    Ok(Run {
        config,
        source: path.to_path_buf(),
        started,
    })
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema: &'static str,
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    source: String,
    seed: u64,
    config: &'a ScenarioConfig,
    artifacts: BTreeMap<&'static str, String>,
    csv_schema: &'static str,
    warnings: &'a [String],
    wall_clock_seconds: f64,
}

fn prepare(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| io_error(out, e))
}

fn write_manifest(
    run: &Run,
    out: &Path,
    command: &'static str,
    artifacts: BTreeMap<&'static str, String>,
    warnings: &[String],
) -> Result<(), CliError> {
    let manifest = Manifest {
        schema: "mefcons.manifest/1",
        tool: "mefcons",
        version: env!("CARGO_PKG_VERSION"),
        command,
        source: run.source.display().to_string(),
        seed: run.config.seed,
        config: &run.config,
        artifacts,
        csv_schema: CSV_SCHEMA,
        warnings,
        wall_clock_seconds: run.started.elapsed().as_secs_f64(),
    };
    let path = out.join("manifest.json");
    write_json(&path, &manifest).map_err(|e| io_error(&path, e))
}

fn write_trajectory(path: &Path, traj: &Trajectory<f64>) -> std::io::Result<()> {
    let n = traj.node_count();
    let header: Vec<String> = std::iter::once("t".to_owned())
        .chain(indexed("x", n))
        .chain(indexed("xhat", n))
        .chain(indexed("e", n))
        .chain(indexed("u", n))
        .collect();
    let mut csv = CsvOut::create(path, &header)?;
    for k in 0..traj.len() {
        csv.row(
            std::iter::once(traj.times[k])
                .chain(traj.x[k].iter().copied())
                .chain(traj.x_hat[k].iter().copied())
                .chain(traj.e[k].iter().copied())
                .chain(traj.u[k].iter().copied()),
        )?;
    }
    csv.finish()
}

fn write_measurements(path: &Path, sc: &Scenario<f64>, traj: &Trajectory<f64>) -> std::io::Result<()> {
    let n = sc.node_count();
    let header: Vec<String> = std::iter::once("t".to_owned())
        .chain((1..=n).map(|i| format!("y_{i}_{i}")))
        .chain(
            sc.topology
                .edges()
                .iter()
                .map(|e| format!("y_{}_{}", e.observer + 1, e.observed + 1)),
        )
        .collect();
    let mut csv = CsvOut::create(path, &header)?;
    for k in 0..traj.len() {
        csv.row(
            std::iter::once(traj.times[k])
                .chain(traj.y_self[k].iter().copied())
                .chain(traj.y_edge[k].iter().copied()),
        )?;
    }
    csv.finish()
}

pub fn simulate(run: &Run, out: &Path) -> Outcome {
    let sc = run.config.scenario::<f64>()?;
    let traj = simulate_mef(&sc)?;
    prepare(out)?;
    let mut artifacts = BTreeMap::new();
    let path = out.join("trajectory.csv");
    write_trajectory(&path, &traj).map_err(|e| io_error(&path, e))?;
    artifacts.insert("trajectory", "trajectory.csv".to_owned());
    if sc.record_measurements {
        let path = out.join("measurements.csv");
        write_measurements(&path, &sc, &traj).map_err(|e| io_error(&path, e))?;
        artifacts.insert("measurements", "measurements.csv".to_owned());
    }
    write_manifest(run, out, "simulate", artifacts, &traj.warnings)?;
    Ok(traj.warnings)
}

#[derive(Serialize)]
struct SpectralJson {
    eigenvalues: Vec<[f64; 2]>,
    zero_tolerance: f64,
    zero_count: usize,
    null_space_dim: usize,
    stable_count: usize,
    spectral_abscissa_nonzero: Option<f64>,
}

#[derive(Serialize)]
struct EquilibriumJson {
    x_star: f64,
    omega: Vec<f64>,
}

#[derive(Serialize)]
struct ExpBoundJson {
    a: f64,
    b: f64,
    method: &'static str,
}

#[derive(Serialize)]
struct AnalyzeReport {
    schema: &'static str,
    nodes: usize,
    edges: usize,
    strongly_connected: bool,
    balanced: bool,
    q_star: Vec<f64>,
    xi: Vec<f64>,
    spectral: SpectralJson,
    equilibrium: Option<EquilibriumJson>,
    exp_bound: Option<ExpBoundJson>,
    delta_max: f64,
    eps_max: f64,
    phi_max: f64,
    iss_ball_radius: Option<f64>,
    coherence_d_ave: Option<f64>,
    warnings: Vec<String>,
}

fn method_name(m: BoundMethod) -> &'static str {
    match m {
        BoundMethod::Eigenbasis => "eigenbasis",
        BoundMethod::Schur => "schur",
    }
}

pub fn analyze(run: &Run, out: &Path) -> Outcome {
    let sc = run.config.scenario::<f64>()?;
    let topo = &sc.topology;
    let sys = assemble_global(topo, &sc.params)?;
    let spectral = spectral_report(&sys, run.config.analysis.tolerance)?;
    let mut warnings = Vec::new();
    if spectral.zero_count != 1 {
        warnings.push(format!(
            "F has {} zero eigenvalues; consensus needs exactly one (strongly connected graph)",
            spectral.zero_count
        ));
    }
    let equilibrium = match left_null_vector(&build_laplacian(topo)) {
        Ok(null) => {
            let e0: Vec<f64> = sc.prior.iter().zip(&sc.x0).map(|(p, x)| p - x).collect();
            let pred = predict_equilibrium(&sys, &null.omega, &sc.x0, &e0)?;
            Some(EquilibriumJson {
                x_star: pred.x_star,
                omega: null.omega.iter().copied().collect(),
            })
        }
        Err(e) => {
            warnings.push(format!("no consensus value: {e}"));
            None
        }
    };
    let exp_bound = match exp_bound_constants(&spectral, &sys) {
        Ok(b) => Some(b),
        Err(e) => {
            warnings.push(format!("no exponential bound: {e}"));
            None
        }
    };
    let d = &sc.disturbance;
    let phi = phi_max(&sc.params, topo, d.delta_max, d.eps_max)?;
    let coherence_d_ave = analytical_coherence(topo).ok().and_then(|(_, v)| v);
    let report = AnalyzeReport {
        schema: "mefcons.analyze/1",
        nodes: topo.node_count(),
        edges: topo.edge_count(),
        strongly_connected: topo.is_strongly_connected(),
        balanced: topo.is_balanced(),
        q_star: sys.q_star.iter().copied().collect(),
        xi: sys.xi.iter().copied().collect(),
        spectral: SpectralJson {
            eigenvalues: spectral.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
            zero_tolerance: spectral.zero_tolerance,
            zero_count: spectral.zero_count,
            null_space_dim: spectral.null_space_dim,
            stable_count: spectral.stable_count,
            spectral_abscissa_nonzero: spectral.spectral_abscissa_nonzero,
        },
        equilibrium,
        iss_ball_radius: exp_bound.map(|b| b.b * phi / b.a),
        exp_bound: exp_bound.map(|b| ExpBoundJson {
            a: b.a,
            b: b.b,
            method: method_name(b.method),
        }),
        delta_max: d.delta_max,
        eps_max: d.eps_max,
        phi_max: phi,
        coherence_d_ave,
        warnings: warnings.clone(),
    };
    prepare(out)?;
    let path = out.join("report.json");
    write_json(&path, &report).map_err(|e| io_error(&path, e))?;
    let mut stdout = std::io::stdout().lock();
    // a closed pipe on stdout is not an error; report.json has the same content
    let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&report).expect("report serialises"));
    write_manifest(run, out, "analyze", BTreeMap::from([("report", "report.json".to_owned())]), &warnings)?;
    Ok(warnings)
}

#[derive(Serialize)]
struct RunSummary {
    empirical_deviation: Option<f64>,
    final_deviation: f64,
}

#[derive(Serialize)]
struct CompareSummary {
    schema: &'static str,
    nodes: usize,
    seed: u64,
    disturbance: DisturbanceKind,
    window_start: Option<f64>,
    baseline: RunSummary,
    mef: RunSummary,
    analytical_d_ave: Option<f64>,
    mef_below_baseline: Option<bool>,
}

fn summarize(traj: &Trajectory<f64>) -> (RunSummary, Option<f64>) {
    let stat = empirical_deviation(traj);
    let dev = traj.deviation_from_mean();
    (
        RunSummary {
            empirical_deviation: stat.map(|s| s.0),
            final_deviation: dev.last().copied().unwrap_or(0.0),
        },
        stat.map(|s| s.1),
    )
}

pub fn compare(run: &Run, out: &Path) -> Outcome {
    let sc = run.config.scenario::<f64>()?;
    let (base, mef) = std::thread::scope(|s| {
        let base = s.spawn(|| simulate_classical(&sc));
        let mef = simulate_mef(&sc);
        (base.join().expect("baseline thread"), mef)
    });
    let (base, mef) = (base?, mef?);
    let mut warnings = mef.warnings.clone();
    let analytical = match analytical_coherence(&sc.topology) {
        Ok((_, v)) => v,
        Err(e) => {
            warnings.push(format!("no analytical coherence: {e}"));
            None
        }
    };
    prepare(out)?;
    let path = out.join("compare.csv");
    let write = || -> std::io::Result<()> {
        let header = ["t", "baseline_deviation", "mef_deviation"].map(String::from);
        let mut csv = CsvOut::create(&path, &header)?;
        for ((t, b), m) in base.times.iter().zip(base.deviation_from_mean()).zip(mef.deviation_from_mean()) {
            csv.row([*t, b, m])?;
        }
        csv.finish()
    };
    write().map_err(|e| io_error(&path, e))?;
    let (base_sum, window) = summarize(&base);
    let (mef_sum, _) = summarize(&mef);
    let below = match (base_sum.empirical_deviation, mef_sum.empirical_deviation) {
        (Some(b), Some(m)) => Some(m < b),
        _ => None,
    };
    let summary = CompareSummary {
        schema: "mefcons.compare/1",
        nodes: sc.node_count(),
        seed: run.config.seed,
        disturbance: sc.disturbance.kind,
        window_start: window,
        baseline: base_sum,
        mef: mef_sum,
        analytical_d_ave: analytical,
        mef_below_baseline: below,
    };
    let spath = out.join("compare_summary.json");
    write_json(&spath, &summary).map_err(|e| io_error(&spath, e))?;
    write_manifest(
        run,
        out,
        "compare",
        BTreeMap::from([
            ("comparison", "compare.csv".to_owned()),
            ("summary", "compare_summary.json".to_owned()),
        ]),
        &warnings,
    )?;
    Ok(warnings)
}

#[derive(Serialize)]
struct EnvelopeSummary {
    schema: &'static str,
    a: f64,
    b: f64,
    method: &'static str,
    phi_max: f64,
    initial_norm: f64,
    asymptotic_radius: f64,
    max_ratio: f64,
    violations: usize,
    first_violation: Option<f64>,
}

pub fn envelope(run: &Run, out: &Path) -> Outcome {
    let sc = run.config.scenario::<f64>()?;
    if !sc.disturbance.is_bounded_continuous() {
        return Err(CliError::config(
            "disturbance.kind = \"white\" is not bounded and continuous; the envelope needs \"sinusoid\" or \"zero\"",
        ));
    }
    let sys = assemble_global(&sc.topology, &sc.params)?;
    let spectral = spectral_report(&sys, run.config.analysis.tolerance)?;
    let bound = exp_bound_constants(&spectral, &sys)?;
    let omega = left_null_vector(&build_laplacian(&sc.topology))?.omega;
    let d = &sc.disturbance;
    let phi = phi_max(&sc.params, &sc.topology, d.delta_max, d.eps_max)?;
    let e0: Vec<f64> = sc.prior.iter().zip(&sc.x0).map(|(p, x)| p - x).collect();
    let z0 = projected_disagreement(&sys, &omega, &sc.x0, &e0)?.1;
    let iss = IssBound::new(bound, phi, z0);
    let traj = simulate_mef(&sc)?;

    prepare(out)?;
    let path = out.join("envelope.csv");
    let mut violations = 0;
    let mut first_violation = None;
    let mut max_ratio: f64 = 0.0;
    let mut rows = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        let t = traj.times[k];
        let norm = projected_disagreement(&sys, &omega, &traj.x[k], &traj.e[k])?.1;
        let env = iss.envelope(t);
        if norm > env {
            violations += 1;
            first_violation.get_or_insert(t);
        }
        if env > 0.0 {
            max_ratio = max_ratio.max(norm / env);
        }
        rows.push([t, norm, env]);
    }
    let write = || -> std::io::Result<()> {
        let header = ["t", "disagreement_norm", "envelope"].map(String::from);
        let mut csv = CsvOut::create(&path, &header)?;
        for r in &rows {
            csv.row(*r)?;
        }
        csv.finish()
    };
    write().map_err(|e| io_error(&path, e))?;
    let summary = EnvelopeSummary {
        schema: "mefcons.envelope/1",
        a: bound.a,
        b: bound.b,
        method: method_name(bound.method),
        phi_max: phi,
        initial_norm: z0,
        asymptotic_radius: iss.asymptotic_radius(),
        max_ratio,
        violations,
        first_violation,
    };
    let spath = out.join("envelope_summary.json");
    write_json(&spath, &summary).map_err(|e| io_error(&spath, e))?;
    write_manifest(
        run,
        out,
        "envelope",
        BTreeMap::from([
            ("envelope", "envelope.csv".to_owned()),
            ("summary", "envelope_summary.json".to_owned()),
        ]),
        &traj.warnings,
    )?;
    if violations > 0 {
        return Err(CliError {
            code: EXIT_BOUND,
            message: format!(
                "disagreement norm left the envelope at {violations} grid points (first at t = {})",
                first_violation.unwrap_or_default()
            ),
        });
    }
    Ok(traj.warnings)
}
