//! `twtoa` — command-line front end for TW-TOA positioning.
//!
//! Subcommands: `simulate` (draw a measurement batch), `estimate` (fit one
//! or more methods to a batch), `bench` (Monte Carlo RMSE table), `crlb`
//! (position error bound across the noise grid), `trace` (robust-estimator
//! convergence traces).
//!
//! All commands start from a JSON config (defaults apply when `--config` is
//! omitted), layer any command-line overrides on top, and — when `--out` is
//! given — write the effective config next to the output as
//! `<out>.config.json`, so every artifact carries its own provenance.
//!
//! Exit codes: 0 success; 1 runtime failure; 2 bad config or usage;
//! 3 benchmark finished but its failure rate exceeded the soundness limit.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use twtoa_core::bench::{
    bench_anchors, convergence_trace, detail_to_csv, run_experiment_detailed, scenario_at,
    traces_to_csv, trial_setup, Method, TrialSetup, MAX_FAILURE_RATE,
};
use twtoa_core::config::{ConfigError, ExperimentConfig, NlosSection};
use twtoa_core::crlb::crlb_position;
use twtoa_core::estimators::{amle, cccp_socp_detailed, lls, mle, sqls, CccpConfig, MleState};
use twtoa_core::model::{EstimateReport, MeasurementBatch, Position};
use twtoa_core::sim::{batch_from_csv, batch_to_csv, simulate_with_flags, SimConfig};

// ---------- command line ----------

#[derive(Parser)]
#[command(
    name = "twtoa",
    version,
    about = "Positioning from two-way time-of-arrival ranging under clock skew"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw one measurement batch and write it as CSV.
    Simulate(CommonOpts),
    /// Run estimators on a batch (simulated, or read with --batch).
    Estimate {
        #[command(flatten)]
        common: CommonOpts,
        /// Measurement batch CSV produced by `simulate`.
        #[arg(long)]
        batch: Option<PathBuf>,
    },
    /// Monte Carlo RMSE table over the configured noise grid.
    Bench {
        #[command(flatten)]
        common: CommonOpts,
        /// Also write per-trial outcomes to `<out>.detail.csv`.
        #[arg(long)]
        detail: bool,
    },
    /// Position error bound for each noise level.
    Crlb(CommonOpts),
    /// Robust-estimator residual traces from random start points.
    Trace {
        #[command(flatten)]
        common: CommonOpts,
        /// Number of random start points.
        #[arg(long, default_value_t = 20)]
        inits: usize,
    },
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted. Also triggers the
    /// `<out>.config.json` sidecar.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Run a single method instead of the configured list.
    #[arg(long)]
    method: Option<String>,
    /// Number of reference nodes (3 to 8).
    #[arg(long, alias = "n")]
    n_anchors: Option<usize>,
    /// Rounds per reference node.
    #[arg(long)]
    k_rounds: Option<usize>,
    /// Range-noise grid in meters, comma separated.
    #[arg(long, alias = "c-sigma", value_delimiter = ',')]
    c_sigma_m: Option<Vec<f64>>,
    /// NLOS contamination probability (0 disables NLOS).
    #[arg(long)]
    nlos_prob: Option<f64>,
    /// Largest NLOS path bias in meters (with --nlos-prob).
    #[arg(long)]
    nlos_bias_m: Option<f64>,
    /// Monte Carlo trials per noise level.
    #[arg(long)]
    trials: Option<usize>,
    /// Replace the duplicated grid corner with the edge midpoint [800, 0].
    #[arg(long)]
    fix_duplicate_anchor: bool,
    /// Prefix outputs with a generation-time comment line (off by default
    /// so files are pure CSV and reruns are byte-identical).
    #[arg(long)]
    timestamp: bool,
}

// ---------- errors ----------

enum CliError {
    Config(ConfigError),
    Io { path: PathBuf, msg: String },
    Usage(String),
    Run(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Io { path, msg } => write!(f, "{}: {msg}", path.display()),
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Run(msg) => write!(f, "{msg}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) | CliError::Io { .. } | CliError::Usage(_) => ExitCode::from(2),
            CliError::Run(_) => ExitCode::from(1),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

fn run_err(e: impl fmt::Display) -> CliError {
    CliError::Run(e.to_string())
}

fn io_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Io { path: path.to_path_buf(), msg: e.to_string() }
}

// ---------- config loading and output ----------

fn load_config(opts: &CommonOpts) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &opts.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(m) = &opts.method {
        cfg.methods = vec![m.clone()];
    }
    if let Some(n) = opts.n_anchors {
        cfg.n_anchors = n;
    }
    if let Some(k) = opts.k_rounds {
        cfg.k_rounds = k;
    }
    if let Some(grid) = &opts.c_sigma_m {
        cfg.c_sigma_m = grid.clone();
        // A noise override invalidates any report-noise grid from the file.
        cfg.c_gamma_m = None;
    }
    if let Some(p) = opts.nlos_prob {
        if p == 0.0 {
            cfg.nlos = None;
        } else {
            let bias = opts
                .nlos_bias_m
                .or(cfg.nlos.map(|n| n.bias_max_m))
                .unwrap_or(5.0);
            cfg.nlos = Some(NlosSection { probability: p, bias_max_m: bias });
        }
    } else if let (Some(bias), Some(n)) = (opts.nlos_bias_m, &mut cfg.nlos) {
        n.bias_max_m = bias;
    }
    if let Some(t) = opts.trials {
        cfg.trials = t;
    }
    if opts.fix_duplicate_anchor {
        cfg.fix_duplicate_anchor = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sidecar_path(out: &Path) -> PathBuf {
    PathBuf::from(format!("{}.config.json", out.display()))
}

/// Write `content` to `--out` (plus the effective-config sidecar) or stdout.
fn emit(opts: &CommonOpts, cfg: &ExperimentConfig, content: &str) -> Result<(), CliError> {
    let body = if opts.timestamp {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        format!("# generated_at_unix_s: {now}\n{content}")
    } else {
        content.to_string()
    };
    match &opts.out {
        Some(path) => {
            fs::write(path, body).map_err(|e| io_err(path, e))?;
            let sidecar = sidecar_path(path);
            fs::write(&sidecar, cfg.to_json()).map_err(|e| io_err(&sidecar, e))?;
        }
        None => print!("{body}"),
    }
    Ok(())
}

// ---------- subcommands ----------

fn cmd_simulate(opts: &CommonOpts) -> Result<ExitCode, CliError> {
    let cfg = load_config(opts)?;
    let spec = cfg.to_spec()?;
    let setup = trial_setup(&spec, 0, 0).map_err(run_err)?;
    let sim_cfg = SimConfig { seed: setup.sim_seed, nlos: spec.nlos, ref_skews: None };
    let (batch, flags) = simulate_with_flags(&setup.scenario, &sim_cfg).map_err(run_err)?;
    emit(opts, &cfg, &batch_to_csv(&batch, Some(&flags)))?;
    Ok(ExitCode::SUCCESS)
}

/// Start point shared by the iterative methods: the scenario truth when the
/// batch was simulated here, otherwise the linear estimate.
struct WarmStart {
    position: Position,
    skew: f64,
    turnaround_s: Vec<f64>,
    cccp_x0: Position,
}

fn warm_start(
    batch: &MeasurementBatch,
    anchors: &[Position],
    sigma_s: &[f64],
    gamma_s: &[f64],
    c_mps: f64,
    target_skew: f64,
    setup: Option<&TrialSetup>,
) -> Result<WarmStart, CliError> {
    match setup {
        Some(s) => Ok(WarmStart {
            position: s.scenario.target,
            skew: target_skew,
            turnaround_s: s.scenario.turnaround_s.clone(),
            cccp_x0: s.cccp_x0,
        }),
        None => {
            let rep = lls(batch, anchors, c_mps, sigma_s, gamma_s)
                .map_err(|e| CliError::Run(format!("warm start (LLS) failed: {e}")))?;
            let state = MleState::from_reports(rep.position, batch);
            Ok(WarmStart {
                position: rep.position,
                skew: rep.skew,
                turnaround_s: state.turnaround_s,
                cccp_x0: rep.position,
            })
        }
    }
}

fn cmd_estimate(opts: &CommonOpts, batch_path: Option<&Path>) -> Result<ExitCode, CliError> {
    let cfg = load_config(opts)?;
    let spec = cfg.to_spec()?;
    let anchors = bench_anchors(spec.n_anchors, spec.fix_duplicate_anchor);
    let n = anchors.len();
    let sigma_s = vec![spec.c_sigma_m[0] / spec.c_mps; n];
    let gamma_m = spec.c_gamma_m.as_ref().map_or(spec.c_sigma_m[0], |g| g[0]);
    let gamma_s = vec![gamma_m / spec.c_mps; n];

    let (batch, setup) = match batch_path {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            let (batch, _flags) = batch_from_csv(&text).map_err(|e| io_err(path, e))?;
            if batch.n_anchors() != n {
                return Err(CliError::Usage(format!(
                    "batch has {} reference nodes but the config says {n}",
                    batch.n_anchors()
                )));
            }
            (batch, None)
        }
        None => {
            let setup = trial_setup(&spec, 0, 0).map_err(run_err)?;
            let sim_cfg = SimConfig { seed: setup.sim_seed, nlos: spec.nlos, ref_skews: None };
            let (batch, _) = simulate_with_flags(&setup.scenario, &sim_cfg).map_err(run_err)?;
            (batch, Some(setup))
        }
    };

    let needs_warm = spec
        .methods
        .iter()
        .any(|m| matches!(m, Method::Mle | Method::Amle | Method::Cccp));
    let warm = if needs_warm {
        Some(warm_start(
            &batch,
            &anchors,
            &sigma_s,
            &gamma_s,
            spec.c_mps,
            spec.target_skew,
            setup.as_ref(),
        )?)
    } else {
        None
    };

    let mut out = String::from(EstimateReport::csv_header());
    out.push('\n');
    for &method in &spec.methods {
        let report = match method {
            Method::Mle => {
                let w = warm.as_ref().expect("warm start prepared");
                let init = MleState::new(w.position, w.skew, w.turnaround_s.clone());
                mle(&batch, &anchors, &sigma_s, &gamma_s, spec.c_mps, &init)
            }
            Method::Amle => {
                let w = warm.as_ref().expect("warm start prepared");
                amle(&batch, &anchors, &sigma_s, &gamma_s, spec.c_mps, (w.position, w.skew))
            }
            Method::Lls => lls(&batch, &anchors, spec.c_mps, &sigma_s, &gamma_s),
            Method::Sqls => sqls(&batch, &anchors, spec.c_mps, &sigma_s, &gamma_s),
            Method::Cccp => {
                let w = warm.as_ref().expect("warm start prepared");
                let mut c = CccpConfig::new(w.cccp_x0);
                c.max_outer = spec.cccp_max_outer;
                cccp_socp_detailed(&batch, &anchors, spec.c_mps, &c).map(|o| o.report)
            }
        }
        .map_err(|e| CliError::Run(format!("{method}: {e}")))?;
        out.push_str(&report.to_csv_row(method.name(), cfg.seed));
        out.push('\n');
    }
    emit(opts, &cfg, &out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(opts: &CommonOpts, detail: bool) -> Result<ExitCode, CliError> {
    if detail && opts.out.is_none() {
        return Err(CliError::Usage("--detail needs --out to name its file".into()));
    }
    let cfg = load_config(opts)?;
    let spec = cfg.to_spec()?;
    let (table, details) = run_experiment_detailed(&spec).map_err(run_err)?;
    emit(opts, &cfg, &table.to_csv())?;
    if detail {
        let out = opts.out.as_ref().expect("checked above");
        let path = PathBuf::from(format!("{}.detail.csv", out.display()));
        fs::write(&path, detail_to_csv(&details)).map_err(|e| io_err(&path, e))?;
    }
    let rate = table.worst_failure_rate();
    if rate > MAX_FAILURE_RATE {
        eprintln!(
            "warning: worst per-row failure rate {:.1}% exceeds the {:.0}% soundness limit; \
             results were written but should not be trusted",
            100.0 * rate,
            100.0 * MAX_FAILURE_RATE
        );
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_crlb(opts: &CommonOpts) -> Result<ExitCode, CliError> {
    let cfg = load_config(opts)?;
    let spec = cfg.to_spec()?;
    let target = match spec.fixed_target {
        Some(t) => t,
        None => trial_setup(&spec, 0, 0).map_err(run_err)?.scenario.target,
    };
    let mut out = String::from("c_sigma_m,crlb_m\n");
    for g in 0..spec.c_sigma_m.len() {
        let scenario = scenario_at(&spec, target, g).map_err(run_err)?;
        // The bound is undefined at zero noise; report 0 there.
        let bound_m = crlb_position(&scenario).map(f64::sqrt).unwrap_or(0.0);
        out.push_str(&format!("{},{}\n", spec.c_sigma_m[g], bound_m));
    }
    emit(opts, &cfg, &out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_trace(opts: &CommonOpts, inits: usize) -> Result<ExitCode, CliError> {
    let cfg = load_config(opts)?;
    let spec = cfg.to_spec()?;
    let traces = convergence_trace(&spec, inits).map_err(run_err)?;
    emit(opts, &cfg, &traces_to_csv(&traces))?;
    Ok(ExitCode::SUCCESS)
}

// ---------- entry point ----------

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match &cli.cmd {
        Cmd::Simulate(opts) => cmd_simulate(opts),
        Cmd::Estimate { common, batch } => cmd_estimate(common, batch.as_deref()),
        Cmd::Bench { common, detail } => cmd_bench(common, *detail),
        Cmd::Crlb(opts) => cmd_crlb(opts),
        Cmd::Trace { common, inits } => cmd_trace(common, *inits),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
