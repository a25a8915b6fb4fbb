//! Monte Carlo benchmark harness: RMSE-versus-noise tables, robustness
//! studies under NLOS contamination, convergence traces for the robust
//! estimator, and method timing comparisons.
//!
//! Everything is deterministic in the experiment's `master_seed`. Each
//! (noise-grid-index, trial) pair owns a dedicated counter-mode RNG stream,
//! so trials can run on a worker pool in any order and still reproduce
//! bit-for-bit; results are reduced by trial index, never by completion
//! order. Within a trial, all methods see the same measurement batch, which
//! pairs the method comparisons.
//!
//! Draw order per trial stream (frozen — changing it changes every table):
//! target position, simulator seed, robust-estimator start point.

use std::fmt;
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::crlb::crlb_position;
use crate::estimators::{
    amle, cccp_socp_detailed, lls, mle, sqls, CccpConfig, EstimatorError, MleState,
};
use crate::model::{
    ClockModel, EstimateReport, MeasurementBatch, NetworkScenario, Position, ScenarioError,
    SolverStatus,
};
use crate::sim::{simulate, NlosConfig, SimConfig, SimError};

// ---------- benchmark geometry ----------

/// Eight-node reference grid on the ±800 m square. Index 4 deliberately
/// duplicates the first corner — [`bench_anchors`] can swap it for the edge
/// midpoint `[800, 0]` when a non-degenerate ring is wanted.
pub const ANCHOR_GRID: [Position; 8] = [
    Position::new(800.0, 800.0),
    Position::new(800.0, -800.0),
    Position::new(-800.0, 800.0),
    Position::new(-800.0, -800.0),
    Position::new(800.0, 800.0),
    Position::new(0.0, 800.0),
    Position::new(-800.0, 0.0),
    Position::new(0.0, -800.0),
];

/// Half-width of the square deployment region, meters.
pub const REGION_HALF_M: f64 = 800.0;

/// Targets are never placed closer than this to a reference node, meters.
pub const ANCHOR_EXCLUSION_M: f64 = 1.0;

/// Failure-rate threshold above which an experiment run is considered
/// unsound; enforced by front ends via [`RmseTable::worst_failure_rate`].
pub const MAX_FAILURE_RATE: f64 = 0.05;

/// The first `n_anchors` grid nodes, optionally replacing the duplicated
/// corner (index 4) with the edge midpoint `[800, 0]`.
pub fn bench_anchors(n_anchors: usize, fix_duplicate: bool) -> Vec<Position> {
    let mut anchors = ANCHOR_GRID[..n_anchors.min(ANCHOR_GRID.len())].to_vec();
    if fix_duplicate && anchors.len() > 4 {
        anchors[4] = Position::new(800.0, 0.0);
    }
    anchors
}

// ---------- methods ----------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Mle,
    Amle,
    Lls,
    Sqls,
    Cccp,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Mle, Method::Amle, Method::Lls, Method::Sqls, Method::Cccp];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mle => "MLE",
            Method::Amle => "AMLE",
            Method::Lls => "LLS",
            Method::Sqls => "SQLS",
            Method::Cccp => "CCCP",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mle" => Ok(Method::Mle),
            "amle" => Ok(Method::Amle),
            "lls" => Ok(Method::Lls),
            "sqls" => Ok(Method::Sqls),
            "cccp" | "cccp-socp" | "cccp_socp" => Ok(Method::Cccp),
            _ => Err(BenchError::UnknownMethod(s.to_string())),
        }
    }
}

// ---------- experiment description ----------

/// One benchmark campaign: a scenario template, a noise grid, a method list
/// and a trial budget, all hanging off a single master seed.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    /// Reference nodes drawn from [`ANCHOR_GRID`]; 3 to 8.
    pub n_anchors: usize,
    pub k_rounds: usize,
    /// True target clock skew `w`.
    pub target_skew: f64,
    /// Uniform turn-around wait, seconds.
    pub turnaround_s: f64,
    pub c_mps: f64,
    /// Range-noise grid, meters (`c * sigma`). Zero entries are allowed and
    /// model exact measurements.
    pub c_sigma_m: Vec<f64>,
    /// Optional report-noise grid, meters; defaults to `c_sigma_m`.
    pub c_gamma_m: Option<Vec<f64>>,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub nlos: Option<NlosConfig>,
    pub master_seed: u64,
    /// Replace the duplicated grid corner with `[800, 0]`.
    pub fix_duplicate_anchor: bool,
    /// Outer iterations for the robust estimator.
    pub cccp_max_outer: usize,
    /// Pin the target instead of drawing it per trial.
    pub fixed_target: Option<Position>,
}

impl ExperimentSpec {
    /// Spec with the standard defaults: skew 1.0001, wait 1 microsecond,
    /// speed 3e8 m/s, two rounds, paired noise grids, three outer robust
    /// iterations.
    pub fn new(
        n_anchors: usize,
        c_sigma_m: Vec<f64>,
        trials: usize,
        methods: Vec<Method>,
        master_seed: u64,
    ) -> Self {
        ExperimentSpec {
            n_anchors,
            k_rounds: 2,
            target_skew: 1.0001,
            turnaround_s: 1.0e-6,
            c_mps: 3.0e8,
            c_sigma_m,
            c_gamma_m: None,
            trials,
            methods,
            nlos: None,
            master_seed,
            fix_duplicate_anchor: false,
            cccp_max_outer: 3,
            fixed_target: None,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if !(3..=ANCHOR_GRID.len()).contains(&self.n_anchors) {
            return Err(BenchError::BadSpec("n_anchors must be between 3 and 8"));
        }
        if self.k_rounds == 0 {
            return Err(BenchError::BadSpec("k_rounds must be at least 1"));
        }
        if self.trials == 0 {
            return Err(BenchError::BadSpec("trials must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(BenchError::BadSpec("at least one method is required"));
        }
        if self.c_sigma_m.is_empty() {
            return Err(BenchError::BadSpec("noise grid must not be empty"));
        }
        if self.c_sigma_m.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(BenchError::BadSpec("noise grid entries must be finite and >= 0"));
        }
        if let Some(g) = &self.c_gamma_m {
            if g.len() != self.c_sigma_m.len() {
                return Err(BenchError::BadSpec("c_gamma_m must match the noise grid length"));
            }
            if g.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(BenchError::BadSpec("c_gamma_m entries must be finite and >= 0"));
            }
        }
        if !(self.target_skew.is_finite() && self.target_skew > 0.0) {
            return Err(BenchError::BadSpec("target_skew must be positive"));
        }
        if !(self.turnaround_s.is_finite() && self.turnaround_s >= 0.0) {
            return Err(BenchError::BadSpec("turnaround_s must be finite and >= 0"));
        }
        if !(self.c_mps.is_finite() && self.c_mps > 0.0) {
            return Err(BenchError::BadSpec("c_mps must be positive"));
        }
        if self.cccp_max_outer == 0 {
            return Err(BenchError::BadSpec("cccp_max_outer must be at least 1"));
        }
        if let Some(n) = self.nlos {
            n.validate()?;
        }
        if let Some(t) = self.fixed_target {
            if !t.is_finite() {
                return Err(BenchError::BadSpec("fixed target must be finite"));
            }
            let anchors = bench_anchors(self.n_anchors, self.fix_duplicate_anchor);
            if anchors.iter().any(|a| t.distance_to(a) <= ANCHOR_EXCLUSION_M) {
                return Err(BenchError::BadSpec("fixed target sits on a reference node"));
            }
        }
        Ok(())
    }

    fn gamma_for(&self, grid_idx: usize) -> f64 {
        match &self.c_gamma_m {
            Some(g) => g[grid_idx],
            None => self.c_sigma_m[grid_idx],
        }
    }
}

// ---------- errors ----------

#[derive(Debug, Clone, PartialEq)]
pub enum BenchError {
    BadSpec(&'static str),
    UnknownMethod(String),
    Scenario(ScenarioError),
    Sim(SimError),
}

impl fmt::Display for BenchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchError::BadSpec(msg) => write!(f, "invalid experiment spec: {msg}"),
            BenchError::UnknownMethod(m) => {
                write!(f, "unknown method '{m}' (expected MLE, AMLE, LLS, SQLS or CCCP)")
            }
            BenchError::Scenario(e) => write!(f, "scenario construction failed: {e}"),
            BenchError::Sim(e) => write!(f, "simulation failed: {e}"),
        }
    }
}

impl std::error::Error for BenchError {}

impl From<ScenarioError> for BenchError {
    fn from(e: ScenarioError) -> Self {
        BenchError::Scenario(e)
    }
}

impl From<SimError> for BenchError {
    fn from(e: SimError) -> Self {
        BenchError::Sim(e)
    }
}

// ---------- results ----------

#[derive(Debug, Clone, PartialEq)]
pub struct RmseRow {
    pub method: Method,
    pub n_anchors: usize,
    pub k_rounds: usize,
    pub c_sigma_m: f64,
    pub trials: usize,
    pub failures: usize,
    /// RMSE over the successful trials, meters; 0.0 when nothing succeeded.
    pub rmse_m: f64,
    /// Square root of the mean position error bound over all trials, meters;
    /// 0.0 for zero-noise rows where the bound is undefined.
    pub crlb_m: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RmseTable {
    pub rows: Vec<RmseRow>,
}

impl RmseTable {
    pub const CSV_HEADER: &'static str = "method,N,K,c_sigma_m,trials,failures,rmse_m,crlb_m";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.method, r.n_anchors, r.k_rounds, r.c_sigma_m, r.trials, r.failures, r.rmse_m,
                r.crlb_m
            ));
        }
        out
    }

    /// Largest failures/trials ratio across rows (0.0 for an empty table).
    pub fn worst_failure_rate(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.failures as f64 / r.trials.max(1) as f64)
            .fold(0.0, f64::max)
    }
}

/// One (method, trial) outcome, for the per-trial detail output.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub method: Method,
    pub c_sigma_m: f64,
    pub trial: usize,
    pub target: Position,
    /// None when the estimator returned a hard error.
    pub report: Option<EstimateReport>,
    pub error_m: Option<f64>,
    pub failed: bool,
}

pub const DETAIL_CSV_HEADER: &str =
    "method,c_sigma_m,trial,target_x,target_y,est_x,est_y,w_hat,status,error_m";

pub fn detail_to_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from(DETAIL_CSV_HEADER);
    out.push('\n');
    for r in records {
        let (ex, ey, w, status) = match &r.report {
            Some(rep) => (
                format!("{}", rep.position.x),
                format!("{}", rep.position.y),
                format!("{}", rep.skew),
                rep.solver_status.to_string(),
            ),
            None => ("".into(), "".into(), "".into(), "error".into()),
        };
        let err = r.error_m.map(|e| format!("{e}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.method, r.c_sigma_m, r.trial, r.target.x, r.target.y, ex, ey, w, status, err
        ));
    }
    out
}

// ---------- deterministic trial inputs ----------

/// RNG stream for one (noise-grid index, trial) cell.
fn trial_stream(master_seed: u64, grid_idx: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((grid_idx as u64) << 32) | trial as u64);
    rng
}

/// Streams above this base are reserved for convergence-trace draws.
const TRACE_STREAM_BASE: u64 = 1 << 48;

/// Uniform position in the square region, at least [`ANCHOR_EXCLUSION_M`]
/// away from every reference node.
fn sample_position(rng: &mut ChaCha8Rng, anchors: &[Position]) -> Position {
    loop {
        let x = rng.random_range(-REGION_HALF_M..=REGION_HALF_M);
        let y = rng.random_range(-REGION_HALF_M..=REGION_HALF_M);
        let p = Position::new(x, y);
        if anchors.iter().all(|a| p.distance_to(a) > ANCHOR_EXCLUSION_M) {
            return p;
        }
    }
}

struct TrialInput {
    target: Position,
    batch: MeasurementBatch,
    cccp_x0: Position,
    crlb_m2: f64,
}

/// Scenario for one noise-grid entry with the given target.
pub fn scenario_at(
    spec: &ExperimentSpec,
    target: Position,
    grid_idx: usize,
) -> Result<NetworkScenario, BenchError> {
    if grid_idx >= spec.c_sigma_m.len() {
        return Err(BenchError::BadSpec("noise grid index out of range"));
    }
    let anchors = bench_anchors(spec.n_anchors, spec.fix_duplicate_anchor);
    let n = anchors.len();
    let sigma = spec.c_sigma_m[grid_idx] / spec.c_mps;
    let gamma = spec.gamma_for(grid_idx) / spec.c_mps;
    Ok(NetworkScenario::new(
        anchors,
        target,
        ClockModel::with_skew(spec.target_skew),
        vec![spec.turnaround_s; n],
        vec![sigma; n],
        vec![gamma; n],
        spec.c_mps,
        spec.k_rounds,
    )?)
}

/// Deterministic inputs for one (noise-grid, trial) cell: the scenario with
/// its drawn (or pinned) target, the simulator seed, and the robust
/// estimator's start point. Front ends use this to reproduce exactly the
/// draws the harness makes.
#[derive(Debug, Clone)]
pub struct TrialSetup {
    pub scenario: NetworkScenario,
    pub sim_seed: u64,
    pub cccp_x0: Position,
}

pub fn trial_setup(
    spec: &ExperimentSpec,
    grid_idx: usize,
    trial: usize,
) -> Result<TrialSetup, BenchError> {
    spec.validate()?;
    let anchors = bench_anchors(spec.n_anchors, spec.fix_duplicate_anchor);
    let mut rng = trial_stream(spec.master_seed, grid_idx, trial);
    let target = match spec.fixed_target {
        Some(t) => t,
        None => sample_position(&mut rng, &anchors),
    };
    let sim_seed = rng.next_u64();
    let cccp_x0 = sample_position(&mut rng, &anchors);
    Ok(TrialSetup { scenario: scenario_at(spec, target, grid_idx)?, sim_seed, cccp_x0 })
}

fn draw_trial(
    spec: &ExperimentSpec,
    grid_idx: usize,
    trial: usize,
) -> Result<TrialInput, BenchError> {
    let setup = trial_setup(spec, grid_idx, trial)?;
    let cfg = SimConfig { seed: setup.sim_seed, nlos: spec.nlos, ref_skews: None };
    let batch = simulate(&setup.scenario, &cfg)?;
    // The error bound is undefined at zero noise; report it as zero there.
    let crlb_m2 = crlb_position(&setup.scenario).unwrap_or(0.0);
    Ok(TrialInput {
        target: setup.scenario.target,
        batch,
        cccp_x0: setup.cccp_x0,
        crlb_m2,
    })
}

fn run_method(
    method: Method,
    spec: &ExperimentSpec,
    anchors: &[Position],
    grid_idx: usize,
    input: &TrialInput,
) -> Result<EstimateReport, EstimatorError> {
    let n = anchors.len();
    let sigma = vec![spec.c_sigma_m[grid_idx] / spec.c_mps; n];
    let gamma = vec![spec.gamma_for(grid_idx) / spec.c_mps; n];
    match method {
        Method::Mle => {
            // Likelihood methods are benchmarked from the true parameters.
            let init =
                MleState::new(input.target, spec.target_skew, vec![spec.turnaround_s; n]);
            mle(&input.batch, anchors, &sigma, &gamma, spec.c_mps, &init)
        }
        Method::Amle => amle(
            &input.batch,
            anchors,
            &sigma,
            &gamma,
            spec.c_mps,
            (input.target, spec.target_skew),
        ),
        Method::Lls => lls(&input.batch, anchors, spec.c_mps, &sigma, &gamma),
        Method::Sqls => sqls(&input.batch, anchors, spec.c_mps, &sigma, &gamma),
        Method::Cccp => {
            let mut cfg = CccpConfig::new(input.cccp_x0);
            cfg.max_outer = spec.cccp_max_outer;
            cccp_socp_detailed(&input.batch, anchors, spec.c_mps, &cfg).map(|o| o.report)
        }
    }
}

// ---------- experiment drivers ----------

/// Per-trial worker output: the drawn inputs plus one outcome per method.
type TrialOutcomes = (TrialInput, Vec<Result<EstimateReport, EstimatorError>>);

/// Run the campaign and reduce to one RMSE row per (method, noise level).
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RmseTable, BenchError> {
    run_experiment_detailed(spec).map(|(table, _)| table)
}

/// As [`run_experiment`], also returning every (method, trial) outcome.
pub fn run_experiment_detailed(
    spec: &ExperimentSpec,
) -> Result<(RmseTable, Vec<TrialRecord>), BenchError> {
    spec.validate()?;
    let anchors = bench_anchors(spec.n_anchors, spec.fix_duplicate_anchor);

    let mut table = RmseTable::default();
    let mut details = Vec::new();

    for grid_idx in 0..spec.c_sigma_m.len() {
        // Workers fill a vector indexed by trial; reduction below is strictly
        // in trial order, so the table never depends on scheduling.
        let per_trial: Vec<Result<TrialOutcomes, BenchError>> =
            (0..spec.trials)
                .into_par_iter()
                .map(|trial| {
                    let input = draw_trial(spec, grid_idx, trial)?;
                    let outcomes = spec
                        .methods
                        .iter()
                        .map(|&m| run_method(m, spec, &anchors, grid_idx, &input))
                        .collect();
                    Ok((input, outcomes))
                })
                .collect();

        let mut crlb_sum = 0.0;
        let mut sq_err = vec![0.0f64; spec.methods.len()];
        let mut successes = vec![0usize; spec.methods.len()];
        let mut failures = vec![0usize; spec.methods.len()];

        for (trial, item) in per_trial.into_iter().enumerate() {
            let (input, outcomes) = item?;
            crlb_sum += input.crlb_m2;
            for (mi, outcome) in outcomes.into_iter().enumerate() {
                let method = spec.methods[mi];
                // Failure means no usable estimate: a hard error, an
                // exhausted iteration budget, or a non-finite position.
                // A finite estimate flagged as degenerate still enters the
                // RMSE — dropping it would censor exactly the worst cases.
                let (report, error_m, failed) = match outcome {
                    Ok(report) => {
                        let err = report.position.distance_to(&input.target);
                        let ok = report.solver_status != SolverStatus::MaxIter
                            && err.is_finite();
                        (Some(report), Some(err), !ok)
                    }
                    Err(_) => (None, None, true),
                };
                if failed {
                    failures[mi] += 1;
                } else {
                    successes[mi] += 1;
                    let e = error_m.expect("successful trials carry an error");
                    sq_err[mi] += e * e;
                }
                details.push(TrialRecord {
                    method,
                    c_sigma_m: spec.c_sigma_m[grid_idx],
                    trial,
                    target: input.target,
                    report,
                    error_m,
                    failed,
                });
            }
        }

        let crlb_m = (crlb_sum / spec.trials as f64).max(0.0).sqrt();
        for (mi, &method) in spec.methods.iter().enumerate() {
            let rmse_m = if successes[mi] > 0 {
                (sq_err[mi] / successes[mi] as f64).sqrt()
            } else {
                0.0
            };
            table.rows.push(RmseRow {
                method,
                n_anchors: spec.n_anchors,
                k_rounds: spec.k_rounds,
                c_sigma_m: spec.c_sigma_m[grid_idx],
                trials: spec.trials,
                failures: failures[mi],
                rmse_m,
                crlb_m,
            });
        }
    }

    Ok((table, details))
}

// ---------- convergence traces ----------

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub init_id: usize,
    /// l1 range residual in seconds; entry 0 at the start point, entry `j`
    /// after outer iteration `j`.
    pub residual_l1_s: Vec<f64>,
}

pub const TRACE_CSV_HEADER: &str = "init_id,iter,residual_l1_s";

pub fn traces_to_csv(traces: &[TraceRecord]) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for t in traces {
        for (iter, r) in t.residual_l1_s.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", t.init_id, iter, r));
        }
    }
    out
}

/// Robust-estimator residual traces from `inits` random start points on one
/// shared scenario (first noise-grid entry). Stream layout: the scenario and
/// batch come from stream `2^48`, start point `i` from stream `2^48 + 1 + i`.
pub fn convergence_trace(
    spec: &ExperimentSpec,
    inits: usize,
) -> Result<Vec<TraceRecord>, BenchError> {
    spec.validate()?;
    if inits == 0 {
        return Err(BenchError::BadSpec("need at least one start point"));
    }
    let anchors = bench_anchors(spec.n_anchors, spec.fix_duplicate_anchor);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.master_seed);
    rng.set_stream(TRACE_STREAM_BASE);
    let target = match spec.fixed_target {
        Some(t) => t,
        None => sample_position(&mut rng, anchors.as_slice()),
    };
    let sim_seed = rng.next_u64();
    let scenario = scenario_at(spec, target, 0)?;
    let cfg = SimConfig { seed: sim_seed, nlos: spec.nlos, ref_skews: None };
    let batch = simulate(&scenario, &cfg)?;

    let traces: Vec<Result<TraceRecord, BenchError>> = (0..inits)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.master_seed);
            rng.set_stream(TRACE_STREAM_BASE + 1 + i as u64);
            let x0 = sample_position(&mut rng, anchors.as_slice());
            let mut cfg = CccpConfig::new(x0);
            cfg.max_outer = spec.cccp_max_outer;
            let out = cccp_socp_detailed(&batch, &anchors, spec.c_mps, &cfg)
                .map_err(|_| BenchError::BadSpec("robust estimator failed on a trace"))?;
            Ok(TraceRecord { init_id: i, residual_l1_s: out.residual_trace_s })
        })
        .collect();
    traces.into_iter().collect()
}

// ---------- timing ----------

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub method: Method,
    pub mean_ms: f64,
    /// Mean of the per-trial `iterations` field (solver steps; meaning is
    /// method-specific).
    pub mean_iterations: f64,
}

pub const TIMING_CSV_HEADER: &str = "method,mean_ms,mean_iterations";

pub fn timing_to_csv(rows: &[TimingRow]) -> String {
    let mut out = String::from(TIMING_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.method, r.mean_ms, r.mean_iterations));
    }
    out
}

/// Mean wall-clock per method over the spec's trials at the first noise
/// level. Runs sequentially — parallel workers would distort the clocks.
/// Failed estimates still count toward time but not toward iterations.
pub fn timing_report(spec: &ExperimentSpec) -> Result<Vec<TimingRow>, BenchError> {
    spec.validate()?;
    let anchors = bench_anchors(spec.n_anchors, spec.fix_duplicate_anchor);

    let inputs: Vec<TrialInput> = (0..spec.trials)
        .map(|t| draw_trial(spec, 0, t))
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::with_capacity(spec.methods.len());
    for &method in &spec.methods {
        let mut total_s = 0.0;
        let mut iter_sum = 0.0;
        let mut iter_count = 0usize;
        for input in &inputs {
            let start = Instant::now();
            let outcome = run_method(method, spec, &anchors, 0, input);
            total_s += start.elapsed().as_secs_f64();
            if let Ok(report) = outcome {
                iter_sum += report.iterations as f64;
                iter_count += 1;
            }
        }
        rows.push(TimingRow {
            method,
            mean_ms: 1e3 * total_s / spec.trials as f64,
            mean_iterations: if iter_count > 0 { iter_sum / iter_count as f64 } else { 0.0 },
        });
    }
    Ok(rows)
}

// ---------- tests ----------
