//! The four command bodies: load a request, run it, write the output
//! bundle, return the manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use consensus_observer::geometry::{self, ConditionCheck, ConditionReport, VectorField};
use consensus_observer::graph;
use consensus_observer::lemma_lab::{self, Lemma5Outcome, TrialRecord};
use consensus_observer::linalg::{self, Matrix};
use consensus_observer::models::{self, LeaderModel};
use consensus_observer::observer::{self, ConvergenceCertificate, ObserverError, ObserverGain};
use consensus_observer::sim::{self, Coupling, SimError, Trajectory};
use serde::Serialize;

use crate::config::{GainCmdConfig, GeometryConfig, ScenarioConfig};
use crate::{CliError, RunManifest};

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn ensure_dir(out_dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", out_dir.display())))
}

fn write_file(out_dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::write(out_dir.join(name), contents)
        .map_err(|e| CliError::Io(format!("writing {name}: {e}")))
}

fn echo<T: Serialize>(value: &T) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(value).map_err(|e| CliError::Io(format!("encoding config echo: {e}")))
}

/// Appends the manifest itself to the file list and writes it, always as
/// the last file, so an existing manifest means the bundle is complete.
fn finish_manifest(out_dir: &Path, mut manifest: RunManifest) -> Result<RunManifest, CliError> {
    manifest.files.push("manifest.json".into());
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Io(format!("encoding manifest: {e}")))?;
    write_file(out_dir, "manifest.json", &(text + "\n"))?;
    Ok(manifest)
}

/// Observer design failures split into "the request was wrong" and "the
/// numbers refused".
fn observer_error(e: &ObserverError) -> CliError {
    match e {
        ObserverError::BadMultiplier { .. }
        | ObserverError::BadCoupling { .. }
        | ObserverError::BadMu { .. }
        | ObserverError::MissingCanonicalData { .. }
        | ObserverError::BadDimensions { .. }
        | ObserverError::Graph(_) => CliError::Config(e.to_string()),
        ObserverError::UnstableNetwork { .. } | ObserverError::Linalg(_) => {
            CliError::Design(e.to_string())
        }
        ObserverError::EstimateOutOfDomain { .. } => CliError::Design(e.to_string()),
    }
}

fn sim_error(e: SimError) -> CliError {
    match &e {
        SimError::BadScenario { .. } => CliError::Config(e.to_string()),
        SimError::Observer(o) => observer_error(o),
        SimError::Control(_) | SimError::NonFiniteDerivative | SimError::DegenerateFit { .. } => {
            CliError::Design(e.to_string())
        }
    }
}

/// Runs a scenario config end to end and writes the run bundle:
/// `trajectory.csv`, `metrics.txt`, `plot.gp`, `manifest.json`. A run that
/// diverges mid-flight still succeeds here; the manifest carries the flag
/// and the caller decides what that means for the exit code.
pub fn cmd_simulate(config_path: &Path, out_dir: &Path) -> Result<RunManifest, CliError> {
    let started = Instant::now();
    let cfg: ScenarioConfig = read_config(config_path)?;
    let scenario = cfg.to_scenario()?;
    let traj = sim::simulate(&scenario).map_err(sim_error)?;

    ensure_dir(out_dir)?;
    write_file(out_dir, "trajectory.csv", &sim::trajectory_csv(&traj))?;
    write_file(out_dir, "metrics.txt", &render_metrics(&cfg, &traj))?;
    write_file(out_dir, "plot.gp", &render_plot_script(&traj))?;

    let manifest = RunManifest {
        command: "simulate".into(),
        scenario_path: Some(config_path.display().to_string()),
        config_echo: echo(&cfg)?,
        out_dir: out_dir.display().to_string(),
        files: vec![
            "trajectory.csv".into(),
            "metrics.txt".into(),
            "plot.gp".into(),
        ],
        duration_seconds: started.elapsed().as_secs_f64(),
        diverged: traj.divergence.is_some(),
        divergence_time: traj.divergence.as_ref().map(|d| d.t),
        divergence_reason: traj.divergence.as_ref().map(|d| d.reason.clone()),
    };
    finish_manifest(out_dir, manifest)
}

/// Key=value run summary: grid and error norms always, the decay fit when
/// one exists, per-follower tracking gaps when followers ran.
fn render_metrics(cfg: &ScenarioConfig, traj: &Trajectory) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "mode={}", cfg.mode.name());
    let _ = writeln!(out, "samples={}", traj.times.len());
    let _ = writeln!(out, "dt={}", cfg.dt);
    let _ = writeln!(out, "horizon={}", cfg.horizon);
    let _ = writeln!(out, "seed={}", cfg.seed);
    let _ = writeln!(out, "diverged={}", traj.divergence.is_some());
    if let Some(d) = &traj.divergence {
        let _ = writeln!(out, "divergence_time={:.6e}", d.t);
        let _ = writeln!(out, "divergence_reason={}", d.reason);
    }
    let stacked = traj.stacked_error_norm();
    if let (Some(first), Some(last)) = (stacked.first(), stacked.last()) {
        let _ = writeln!(out, "initial_error_norm={first:.6e}");
        let _ = writeln!(out, "final_error_norm={last:.6e}");
        if *first > 0.0 {
            let _ = writeln!(out, "error_ratio={:.6e}", last / first);
        }
    }
    // Fit only the first nine decades of decay: once the error reaches the
    // integrator's noise floor the series goes flat and would drag the
    // slope toward zero.
    let peak = stacked.iter().fold(0.0_f64, |a, &b| a.max(b));
    let cut = stacked
        .iter()
        .position(|&n| n < 1e-9 * peak)
        .unwrap_or(stacked.len());
    match sim::fit_decay_rate(&traj.times[..cut], &stacked[..cut], 0.5) {
        Ok(fit) => {
            let _ = writeln!(out, "decay_rate={:.6e}", fit.rate);
            let _ = writeln!(out, "decay_residual={:.6e}", fit.residual);
            let _ = writeln!(out, "decay_samples={}", fit.samples);
        }
        Err(_) => {
            let _ = writeln!(out, "decay_fit=degenerate");
        }
    }
    if traj.mode.has_followers() {
        if let Ok(metrics) = sim::tracking_metrics(traj) {
            for (i, m) in metrics.per_follower.iter().enumerate() {
                let tag = i + 1;
                let _ = writeln!(out, "follower_{tag}_final_gap={:.6e}", m.final_gap);
                let _ = writeln!(out, "follower_{tag}_sup_tail_gap={:.6e}", m.sup_tail_gap);
                let _ = writeln!(out, "follower_{tag}_max_theta={:.6e}", m.max_theta_norm);
            }
        }
    }
    out
}

fn plot_lines(series: &[(String, String)]) -> String {
    let parts: Vec<String> = series
        .iter()
        .map(|(col, title)| {
            format!(
                "\"trajectory.csv\" using (column(\"t\")):(column(\"{col}\")) with lines title \"{title}\""
            )
        })
        .collect();
    format!("plot {}\n", parts.join(", \\\n     "))
}

/// Gnuplot script next to the CSV. Columns are picked by header name, so
/// the script survives layout changes; observer runs get the per-node
/// error norms on a log axis, control runs get the output gaps.
fn render_plot_script(traj: &Trajectory) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Run next to trajectory.csv: gnuplot -p plot.gp");
    let _ = writeln!(out, "set datafile separator comma");
    let _ = writeln!(out, "set xlabel \"t\"");
    let _ = writeln!(out, "set key outside right");
    if traj.mode.has_followers() {
        let followers = traj.output_gaps.first().map_or(0, |row| row.len());
        let _ = writeln!(out, "set ylabel \"output gap\"");
        let series: Vec<(String, String)> = (0..followers)
            .map(|i| (format!("eps[{i}]"), format!("follower {}", i + 1)))
            .collect();
        out.push_str(&plot_lines(&series));
    } else {
        let nodes = traj.error_norms.first().map_or(0, |row| row.len());
        let _ = writeln!(out, "set ylabel \"estimation error norm\"");
        let _ = writeln!(out, "set logscale y");
        let series: Vec<(String, String)> = (0..nodes)
            .map(|i| (format!("e_norm[{i}]"), format!("node {}", i + 1)))
            .collect();
        out.push_str(&plot_lines(&series));
    }
    out
}

/// Parameters for the Monte-Carlo spectral-bound trials.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LemmaParams {
    pub trials: usize,
    pub dim: usize,
    pub mu: f64,
    pub seed: u64,
    /// Worker-thread cap; `None` picks the default. Results are identical
    /// either way.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

/// Runs both spectral-bound verifications and writes four scatter CSVs, a
/// violation summary, and a plot script.
pub fn cmd_lemmas(params: &LemmaParams, out_dir: &Path) -> Result<RunManifest, CliError> {
    let started = Instant::now();
    if params.trials == 0 {
        return Err(CliError::Config("at least one trial is required".into()));
    }
    if params.dim == 0 {
        return Err(CliError::Config("matrix dimension must be at least 1".into()));
    }
    if !(params.mu > 0.0 && params.mu.is_finite()) {
        return Err(CliError::Config(format!(
            "mu must be positive and finite, got {}",
            params.mu
        )));
    }

    let product =
        lemma_lab::verify_lemma4_with_jobs(params.trials, params.dim, params.seed, params.jobs);
    let lyapunov = lemma_lab::verify_lemma5_with_jobs(
        params.trials,
        params.dim,
        params.mu,
        params.seed,
        params.jobs,
    )
    .map_err(|e| CliError::Design(e.to_string()))?;

    ensure_dir(out_dir)?;
    let scatter = |name: &str, records: &[TrialRecord]| -> Result<(), CliError> {
        lemma_lab::export_scatter(records, out_dir.join(name))
            .map_err(|e| CliError::Io(format!("writing {name}: {e}")))
    };
    scatter("product_bound.csv", &product)?;
    scatter("lyapunov_abscissa.csv", &lyapunov.abscissa)?;
    scatter("lyapunov_symmetric.csv", &lyapunov.symmetric_part)?;
    scatter("symmetric_equality.csv", &lyapunov.hermitian_equality)?;
    write_file(
        out_dir,
        "summary.txt",
        &render_lemma_summary(params, &product, &lyapunov),
    )?;
    write_file(out_dir, "plot.gp", LEMMA_PLOT)?;

    let manifest = RunManifest {
        command: "lemmas".into(),
        scenario_path: None,
        config_echo: echo(params)?,
        out_dir: out_dir.display().to_string(),
        files: vec![
            "product_bound.csv".into(),
            "lyapunov_abscissa.csv".into(),
            "lyapunov_symmetric.csv".into(),
            "symmetric_equality.csv".into(),
            "summary.txt".into(),
            "plot.gp".into(),
        ],
        duration_seconds: started.elapsed().as_secs_f64(),
        diverged: false,
        divergence_time: None,
        divergence_reason: None,
    };
    finish_manifest(out_dir, manifest)
}

fn min_margin(records: &[TrialRecord]) -> f64 {
    records
        .iter()
        .map(|r| r.margin)
        .fold(f64::INFINITY, f64::min)
}

fn render_lemma_summary(
    params: &LemmaParams,
    product: &[TrialRecord],
    lyapunov: &Lemma5Outcome,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "trials={}", params.trials);
    let _ = writeln!(out, "dim={}", params.dim);
    let _ = writeln!(out, "mu={}", params.mu);
    let _ = writeln!(out, "seed={}", params.seed);
    let _ = writeln!(
        out,
        "product_bound_printed_violations={}",
        lemma_lab::lemma4_printed_violations(product)
    );
    let _ = writeln!(
        out,
        "product_bound_corrected_violations={}",
        lemma_lab::lemma4_corrected_violations(product)
    );
    let _ = writeln!(
        out,
        "product_bound_min_printed_margin={:.6e}",
        min_margin(product)
    );
    let _ = writeln!(
        out,
        "lyapunov_abscissa_violations={}",
        lemma_lab::violations(&lyapunov.abscissa)
    );
    let _ = writeln!(
        out,
        "lyapunov_abscissa_min_margin={:.6e}",
        min_margin(&lyapunov.abscissa)
    );
    let _ = writeln!(
        out,
        "lyapunov_symmetric_violations={}",
        lemma_lab::violations(&lyapunov.symmetric_part)
    );
    let _ = writeln!(
        out,
        "lyapunov_symmetric_min_margin={:.6e}",
        min_margin(&lyapunov.symmetric_part)
    );
    let worst_equality = lyapunov
        .hermitian_equality
        .iter()
        .map(|r| r.lhs)
        .fold(0.0_f64, f64::max);
    let _ = writeln!(out, "symmetric_equality_worst={worst_equality:.6e}");
    out
}

/// The lemma scatter filenames are fixed, so the plot script is static.
const LEMMA_PLOT: &str = r#"# Run next to the scatter CSVs: gnuplot -p plot.gp
set datafile separator comma
set multiplot layout 2,2
set xlabel "printed bound"
set ylabel "abscissa of P A + A' P"
plot "product_bound.csv" using (column("rhs")):(column("lhs")) with points pt 7 ps 0.4 title "trials", \
     x with lines title "printed", 2*x with lines title "doubled"
set xlabel "trial"
set ylabel "abscissa product"
plot "lyapunov_abscissa.csv" using (column("trial")):(column("lhs")) with points pt 7 ps 0.4 title "product", \
     "lyapunov_abscissa.csv" using (column("trial")):(column("rhs")) with lines title "-mu"
set ylabel "symmetric-part product"
plot "lyapunov_symmetric.csv" using (column("trial")):(column("lhs")) with points pt 7 ps 0.4 title "product", \
     "lyapunov_symmetric.csv" using (column("trial")):(column("rhs")) with lines title "-2 mu"
set logscale y
set ylabel "symmetric equality deviation"
plot "symmetric_equality.csv" using (column("trial")):(column("lhs")) with points pt 7 ps 0.4 title "|dev|"
unset multiplot
"#;

/// Resolved geometry-check request. `samples: None` takes the per-model
/// default budget.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GeometryParams {
    pub model: String,
    pub tau_scale: f64,
    pub samples: Option<usize>,
    pub tol: f64,
    pub seed: u64,
}

/// Loads a geometry request file, filling unset fields from the given
/// command-line fallbacks.
pub fn geometry_params_from_file(
    path: &Path,
    samples: Option<usize>,
    tol: f64,
    seed: u64,
) -> Result<GeometryParams, CliError> {
    let cfg: GeometryConfig = read_config(path)?;
    Ok(GeometryParams {
        model: cfg.model,
        tau_scale: cfg.tau_scale,
        samples: cfg.samples.or(samples),
        tol: cfg.tol.unwrap_or(tol),
        seed: cfg.seed.unwrap_or(seed),
    })
}

/// Sample box and default sample count per bundled model. The boxes sit
/// inside each model's domain with margin for the finite-difference
/// stencils; the counts keep the deepest derivative chains affordable.
fn sample_plan(model: &LeaderModel) -> (Vec<(f64, f64)>, usize) {
    match model.name() {
        "vdp" => (vec![(-2.0, 2.0); 2], 20),
        "esslm" => (vec![(-2.0, 2.0); 4], 4),
        "example1" => (vec![(-1.5, 1.5); 4], 10),
        _ => (
            model
                .domain_box()
                .iter()
                .map(|&(lo, hi)| (0.75 * lo, 0.75 * hi))
                .collect(),
            8,
        ),
    }
}

/// Evaluates the observable-form conditions for a bundled leader model and
/// writes `report.txt`. A failing report is a design error (exit 3), but
/// the report and manifest are written first so the verdict is on disk.
pub fn cmd_check_geometry(params: &GeometryParams, out_dir: &Path) -> Result<RunManifest, CliError> {
    let started = Instant::now();
    let model =
        models::leader_by_name(&params.model).map_err(|e| CliError::Config(e.to_string()))?;
    if !(params.tau_scale.is_finite() && params.tau_scale != 0.0) {
        return Err(CliError::Config(format!(
            "tauScale must be finite and nonzero, got {}",
            params.tau_scale
        )));
    }
    let (bounds, default_samples) = sample_plan(&model);
    let count = params.samples.unwrap_or(default_samples);
    if count == 0 {
        return Err(CliError::Config("at least one sample is required".into()));
    }
    let points = geometry::sample_box(&bounds, count, params.seed);
    let taus: Vec<VectorField> = if params.tau_scale == 1.0 {
        model.taus().to_vec()
    } else {
        let s = params.tau_scale;
        model
            .taus()
            .iter()
            .map(|tau| {
                let tau = tau.clone();
                VectorField::new(tau.dim(), move |w| {
                    tau.eval(w).into_iter().map(|v| s * v).collect()
                })
            })
            .collect()
    };
    let report = geometry::check_ocf_conditions(
        model.p(),
        model.outputs(),
        model.degrees(),
        &taus,
        &points,
        params.tol,
    )
    .map_err(|e| CliError::Design(e.to_string()))?;

    ensure_dir(out_dir)?;
    let resolved = GeometryParams {
        samples: Some(count),
        ..params.clone()
    };
    write_file(out_dir, "report.txt", &render_condition_report(&resolved, &report))?;
    let manifest = RunManifest {
        command: "check-geometry".into(),
        scenario_path: None,
        config_echo: echo(&resolved)?,
        out_dir: out_dir.display().to_string(),
        files: vec!["report.txt".into()],
        duration_seconds: started.elapsed().as_secs_f64(),
        diverged: false,
        divergence_time: None,
        divergence_reason: None,
    };
    let manifest = finish_manifest(out_dir, manifest)?;
    if !report.pass {
        return Err(CliError::Design(format!(
            "observable-form conditions failed for '{}' (see {})",
            params.model,
            out_dir.join("report.txt").display()
        )));
    }
    Ok(manifest)
}

fn render_condition_report(params: &GeometryParams, report: &ConditionReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "model={}", params.model);
    let _ = writeln!(out, "samples={}", report.samples);
    let _ = writeln!(out, "tol={:.6e}", params.tol);
    let _ = writeln!(out, "tau_scale={}", params.tau_scale);
    let _ = writeln!(out, "seed={}", params.seed);
    let checks: [(&str, &ConditionCheck); 4] = [
        ("observability", &report.observability),
        ("intersections", &report.intersections),
        ("commutators", &report.commutators),
        ("normalization", &report.normalization),
    ];
    for (name, check) in checks {
        let verdict = if check.pass { "pass" } else { "fail" };
        let _ = writeln!(out, "{name}={verdict}");
        let _ = writeln!(out, "{name}_worst_sample={}", check.worst_sample);
        let _ = writeln!(out, "{name}_worst_value={:.6e}", check.worst_value);
    }
    let overall = if report.pass { "pass" } else { "fail" };
    let _ = writeln!(out, "overall={overall}");
    out
}

/// Designs the observer gain for a model on a graph, reports the network
/// spectrum and (when the model carries canonical data) the convergence
/// certificate. The report goes to `gain.txt` and stdout.
pub fn cmd_gain(config_path: &Path, out_dir: &Path) -> Result<RunManifest, CliError> {
    let started = Instant::now();
    let cfg: GainCmdConfig = read_config(config_path)?;
    let model = models::leader_by_name(&cfg.model).map_err(|e| CliError::Config(e.to_string()))?;
    let net = cfg.graph.build()?;
    let spec = cfg.gain.build(model.state_dim())?;
    let identity = Matrix::identity(model.state_dim());
    let q = spec.q.clone().unwrap_or_else(|| identity.clone());
    let r = spec.r.clone().unwrap_or(identity);
    let gain = match spec.coupling {
        Coupling::Multiplier(m) => observer::design_gain(&model, &net, &q, &r, m),
        Coupling::Explicit(c) => {
            observer::design_gain(&model, &net, &q, &r, 1.0).and_then(|g| g.with_coupling(c))
        }
    }
    .map_err(|e| observer_error(&e))?;

    let pinned = graph::pinned_matrix(&net);
    let network = observer::assemble_m(model.a0(), gain.f(), gain.c(), &pinned)
        .map_err(|e| observer_error(&e))?;
    let (abscissa, _) =
        linalg::spectral_bounds(&network).map_err(|e| CliError::Design(e.to_string()))?;
    let bound = graph::coupling_bound(&net).map_err(|e| CliError::Design(e.to_string()))?;

    let certificate = if model.has_canonical_data() {
        let boxes = cfg
            .output_box
            .clone()
            .unwrap_or_else(|| vec![(-2.0, 2.0); model.output_dim()]);
        Some(
            observer::convergence_certificate(&model, &gain, &net, spec.mu, &boxes)
                .map_err(|e| observer_error(&e))?,
        )
    } else {
        None
    };

    let text = render_gain_report(&cfg, &gain, bound, abscissa, certificate.as_ref());
    print!("{text}");
    ensure_dir(out_dir)?;
    write_file(out_dir, "gain.txt", &text)?;
    let manifest = RunManifest {
        command: "gain".into(),
        scenario_path: Some(config_path.display().to_string()),
        config_echo: echo(&cfg)?,
        out_dir: out_dir.display().to_string(),
        files: vec!["gain.txt".into()],
        duration_seconds: started.elapsed().as_secs_f64(),
        diverged: false,
        divergence_time: None,
        divergence_reason: None,
    };
    finish_manifest(out_dir, manifest)
}

fn render_gain_report(
    cfg: &GainCmdConfig,
    gain: &ObserverGain,
    bound: f64,
    abscissa: f64,
    cert: Option<&ConvergenceCertificate>,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "model={}", cfg.model);
    let _ = writeln!(out, "nodes={}", cfg.graph.nodes);
    let _ = writeln!(out, "coupling_bound={:.12e}", bound);
    let _ = writeln!(out, "c={:.12e}", gain.c());
    let f = gain.f();
    for i in 0..f.rows() {
        let row: Vec<String> = f.row(i).iter().map(|v| format!("{v:.12e}")).collect();
        let _ = writeln!(out, "f_row_{}={}", i + 1, row.join(", "));
    }
    let _ = writeln!(out, "network_abscissa={abscissa:.12e}");
    let _ = writeln!(out, "network_hurwitz={}", abscissa < 0.0);
    match cert {
        Some(c) => {
            let _ = writeln!(out, "mu={}", c.mu);
            let _ = writeln!(out, "alpha={:.12e}", c.alpha);
            let _ = writeln!(out, "kappa_bound={:.12e}", c.kappa_bound);
            let _ = writeln!(out, "decay_rate_bound={:.12e}", c.decay_rate_bound);
            let _ = writeln!(out, "certificate_sufficient={}", c.sufficient);
        }
        None => {
            let _ = writeln!(out, "certificate=unavailable (model lacks canonical-form data)");
        }
    }
    out
}
