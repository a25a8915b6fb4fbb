//! Measurement model for two-way time-of-arrival ranging with an imperfect
//! target clock.
//!
//! The target initiates a round trip with reference node `i`; the node waits
//! a turn-around time `T_i` and replies. The target halves the round-trip
//! time it observed on its own clock, whose rate is `w` (skew, 1.0 = ideal):
//!
//! ```text
//! z[k,i] = w * (d_i / c + T_i / 2) + n[k,i] / 2,     n ~ N(0, sigma_i^2)
//! ```
//!
//! The noise `n` rides on the full round trip, hence the half factor — the
//! variance of `z` is `sigma_i^2 / 4`. Reference node `i` also reports its
//! own measurement of the wait, timed on its (nominally ideal) clock:
//!
//! ```text
//! t_hat[k,i] = T_i + eps[k,i],                       eps ~ N(0, gamma_i^2)
//! ```
//!
//! Clock offsets cancel in the round trip, so the unknowns are the target
//! position, the skew `w`, and (for the full likelihood) the waits `T_i`.
//! Several estimators work with the calibrated range residual
//! `z * alpha - t_hat / 2 - d / c` where `alpha = 1 / w`.

use std::fmt;

use nalgebra::DMatrix;

// ---------- geometry ----------

/// A point in the 2-D deployment plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Euclidean distance to `other`, in meters.
    pub fn distance_to(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

// ---------- clocks ----------

/// Affine clock: at true time `t` this clock reads `skew * t + offset_s`.
///
/// Only intervals enter two-way measurements, so the offset cancels and the
/// skew is the single observable clock parameter. The offset is carried
/// anyway so a simulation describes the physical clock completely.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockModel {
    /// Rate relative to true time, dimensionless (1.0 = ideal).
    pub skew: f64,
    /// Reading at true time zero, in seconds.
    pub offset_s: f64,
}

impl ClockModel {
    pub const fn ideal() -> Self {
        Self { skew: 1.0, offset_s: 0.0 }
    }

    pub const fn with_skew(skew: f64) -> Self {
        Self { skew, offset_s: 0.0 }
    }

    /// Reading of this clock at true time `t_s`.
    pub fn read(&self, t_s: f64) -> f64 {
        self.skew * t_s + self.offset_s
    }

    /// A true duration `dt_s` as measured by this clock.
    pub fn measure_interval(&self, dt_s: f64) -> f64 {
        self.skew * dt_s
    }
}

// ---------- scenario ----------

/// Everything that defines one ranging setup: reference geometry, target
/// state, per-node protocol timings and noise levels. The simulator, the
/// estimators' weight models and the error-bound code all read from this.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkScenario {
    /// Known reference-node positions (at least 3 for a 2-D fix).
    pub anchors: Vec<Position>,
    /// True target position — what the estimators try to recover.
    pub target: Position,
    /// The target's clock; its skew scales every interval the target times.
    pub target_clock: ClockModel,
    /// Turn-around waits `T_i`, seconds, one per reference node.
    pub turnaround_s: Vec<f64>,
    /// Round-trip noise standard deviations `sigma_i`, seconds.
    pub sigma_s: Vec<f64>,
    /// Reported-wait noise standard deviations `gamma_i`, seconds.
    pub gamma_s: Vec<f64>,
    /// Propagation speed, meters per second.
    pub c_mps: f64,
    /// Ranging rounds `K` per reference node.
    pub rounds: usize,
}

impl NetworkScenario {
    /// Validating constructor; see [`ScenarioError`] for what is rejected.
    ///
    /// Zero noise levels are accepted — exact measurements are the limiting
    /// case the round-trip tests rely on. Code that genuinely needs positive
    /// variances (the error bound, likelihood weights) guards separately.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        anchors: Vec<Position>,
        target: Position,
        target_clock: ClockModel,
        turnaround_s: Vec<f64>,
        sigma_s: Vec<f64>,
        gamma_s: Vec<f64>,
        c_mps: f64,
        rounds: usize,
    ) -> Result<Self, ScenarioError> {
        let scenario = Self {
            anchors,
            target,
            target_clock,
            turnaround_s,
            sigma_s,
            gamma_s,
            c_mps,
            rounds,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Shortcut for the common benchmarking setup where every reference node
    /// shares the same wait and noise levels.
    #[allow(clippy::too_many_arguments)]
    pub fn uniform(
        anchors: Vec<Position>,
        target: Position,
        skew: f64,
        turnaround_s: f64,
        sigma_s: f64,
        gamma_s: f64,
        c_mps: f64,
        rounds: usize,
    ) -> Result<Self, ScenarioError> {
        let n = anchors.len();
        Self::new(
            anchors,
            target,
            ClockModel::with_skew(skew),
            vec![turnaround_s; n],
            vec![sigma_s; n],
            vec![gamma_s; n],
            c_mps,
            rounds,
        )
    }

    pub fn n_anchors(&self) -> usize {
        self.anchors.len()
    }

    /// True target-to-reference distances, meters.
    pub fn distances_m(&self) -> Vec<f64> {
        self.anchors.iter().map(|a| self.target.distance_to(a)).collect()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let n = self.anchors.len();
        if n < 3 {
            return Err(ScenarioError::TooFewAnchors(n));
        }
        if self.turnaround_s.len() != n || self.sigma_s.len() != n || self.gamma_s.len() != n {
            return Err(ScenarioError::LengthMismatch {
                anchors: n,
                turnaround: self.turnaround_s.len(),
                sigma: self.sigma_s.len(),
                gamma: self.gamma_s.len(),
            });
        }
        if !self.anchors.iter().all(Position::is_finite) || !self.target.is_finite() {
            return Err(ScenarioError::NonFinite("anchor or target position"));
        }
        if !(self.target_clock.skew.is_finite() && self.target_clock.skew > 0.0) {
            return Err(ScenarioError::InvalidSkew(self.target_clock.skew));
        }
        if !self.target_clock.offset_s.is_finite() {
            return Err(ScenarioError::NonFinite("clock offset"));
        }
        if self.turnaround_s.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(ScenarioError::NonFinite("turn-around times must be finite and >= 0"));
        }
        if self.sigma_s.iter().chain(&self.gamma_s).any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(ScenarioError::NonFinite("noise levels must be finite and >= 0"));
        }
        if !(self.c_mps.is_finite() && self.c_mps > 0.0) {
            return Err(ScenarioError::InvalidSpeed(self.c_mps));
        }
        if self.rounds == 0 {
            return Err(ScenarioError::NoRounds);
        }
        Ok(())
    }
}

/// Why a scenario was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioError {
    TooFewAnchors(usize),
    LengthMismatch { anchors: usize, turnaround: usize, sigma: usize, gamma: usize },
    NonFinite(&'static str),
    InvalidSkew(f64),
    InvalidSpeed(f64),
    NoRounds,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::TooFewAnchors(n) => {
                write!(f, "need at least 3 reference nodes for a 2-D fix, got {n}")
            }
            ScenarioError::LengthMismatch { anchors, turnaround, sigma, gamma } => write!(
                f,
                "per-node vectors must match anchor count {anchors}: \
                 turnaround {turnaround}, sigma {sigma}, gamma {gamma}"
            ),
            ScenarioError::NonFinite(what) => write!(f, "non-finite or negative input: {what}"),
            ScenarioError::InvalidSkew(w) => write!(f, "clock skew must be finite and > 0, got {w}"),
            ScenarioError::InvalidSpeed(c) => {
                write!(f, "propagation speed must be finite and > 0, got {c}")
            }
            ScenarioError::NoRounds => write!(f, "at least one ranging round is required"),
        }
    }
}

impl std::error::Error for ScenarioError {}

// ---------- measurements ----------

/// One batch of observations: `K` rounds by `N` reference nodes.
///
/// `z` holds the halved round-trip times and `t_hat` the reported
/// turn-arounds, both in seconds. Rows index the round `k`, columns the
/// reference node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBatch {
    pub z: DMatrix<f64>,
    pub t_hat: DMatrix<f64>,
}

impl MeasurementBatch {
    pub fn new(z: DMatrix<f64>, t_hat: DMatrix<f64>) -> Result<Self, ScenarioError> {
        if z.shape() != t_hat.shape() {
            return Err(ScenarioError::LengthMismatch {
                anchors: z.ncols(),
                turnaround: t_hat.ncols(),
                sigma: z.nrows(),
                gamma: t_hat.nrows(),
            });
        }
        if z.iter().chain(t_hat.iter()).any(|v| !v.is_finite()) {
            return Err(ScenarioError::NonFinite("measurement entries"));
        }
        Ok(Self { z, t_hat })
    }

    pub fn rounds(&self) -> usize {
        self.z.nrows()
    }

    pub fn n_anchors(&self) -> usize {
        self.z.ncols()
    }
}

/// Noise-free expected half round trip for reference node `anchor`, seconds:
/// `w * (d_i / c + T_i / 2)`.
///
/// # Panics
/// If `anchor` is out of range; callers index validated scenarios.
pub fn predict_twtoa(scenario: &NetworkScenario, anchor: usize) -> f64 {
    let d = scenario.target.distance_to(&scenario.anchors[anchor]);
    scenario.target_clock.skew * (d / scenario.c_mps + scenario.turnaround_s[anchor] / 2.0)
}

/// Sum of absolute calibrated range residuals over a batch, in seconds:
///
/// ```text
/// sum over (k, i) of | z[k,i] * alpha - t_hat[k,i] / 2 - d_i(position) / c |
/// ```
///
/// with `alpha = 1 / w`. This is the merit function the robust estimator
/// drives down and the quantity convergence traces report.
pub fn residual_l1(
    position: Position,
    alpha: f64,
    batch: &MeasurementBatch,
    anchors: &[Position],
    c_mps: f64,
) -> f64 {
    assert_eq!(
        batch.n_anchors(),
        anchors.len(),
        "batch columns must match the anchor list"
    );
    let mut total = 0.0;
    for i in 0..anchors.len() {
        let d = position.distance_to(&anchors[i]);
        for k in 0..batch.rounds() {
            total += (batch.z[(k, i)] * alpha - batch.t_hat[(k, i)] / 2.0 - d / c_mps).abs();
        }
    }
    total
}

// ---------- estimator output ----------

/// How an estimator's inner solver finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Converged,
    MaxIter,
    /// The solve finished but hit a geometric or algebraic degeneracy
    /// (negative squared quantities, target at a reference node, ...); the
    /// returned values are best-effort.
    Degenerate,
}

impl fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolverStatus::Converged => "converged",
            SolverStatus::MaxIter => "max-iter",
            SolverStatus::Degenerate => "degenerate",
        };
        f.write_str(s)
    }
}

/// What every estimator hands back.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub position: Position,
    /// Estimated clock skew `w`, dimensionless.
    pub skew: f64,
    /// Estimated turn-around waits, seconds; only the full-likelihood
    /// estimator produces these.
    pub turnaround_s: Option<Vec<f64>>,
    /// Solver iterations (meaning is estimator-specific: damped-Newton steps,
    /// bisection steps, or outer convex iterations).
    pub iterations: usize,
    /// L1 range residual of this estimate on the batch it was fit to,
    /// seconds. NaN when the producing step had no batch at hand.
    pub residual_l1_s: f64,
    pub solver_status: SolverStatus,
}

impl EstimateReport {
    /// Inverse skew `alpha = 1 / w`.
    pub fn alpha(&self) -> f64 {
        1.0 / self.skew
    }

    /// Fixed-order CSV header matching [`EstimateReport::to_csv_row`].
    pub fn csv_header() -> &'static str {
        "method,x1,x2,w,status,iterations,residual,seed"
    }

    /// One CSV row: `method,x1,x2,w,status,iterations,residual,seed`.
    pub fn to_csv_row(&self, method: &str, seed: u64) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            method,
            self.position.x,
            self.position.y,
            self.skew,
            self.solver_status,
            self.iterations,
            self.residual_l1_s,
            seed
        )
    }
}
