//! Deterministic batch simulator for TW-TOA scenarios.
//!
//! Everything random comes from a counter-based generator (`ChaCha8Rng`)
//! seeded explicitly, so a `(scenario, config)` pair always produces the
//! same batch, bit for bit. The draw order is part of the contract:
//!
//! 1. round-trip noise, round-major (`k` outer, `i` inner),
//! 2. reported turn-around noise, round-major,
//! 3. NLOS coin flips per entry, round-major, with the bias magnitude drawn
//!    immediately after each successful flip (skipped entries draw nothing).
//!
//! NLOS propagation delays the round trip only: the bias is added to `z`,
//! never to the reported turn-around `t_hat`, which is measured locally at
//! the reference node and does not travel.
//!
//! Reference-node clocks are treated as ideal. The `ref_skews` escape hatch
//! scales the *reported* turn-arounds (`t_hat` mean becomes `w_i * T_i`) to
//! study model mismatch; the physical wait inside `z` is unaffected.

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::model::{MeasurementBatch, NetworkScenario, ScenarioError};

// ---------- configuration ----------

/// Non-line-of-sight contamination: each measurement independently receives
/// a positive round-trip bias with the given probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlosConfig {
    /// Per-measurement contamination probability, in [0, 1].
    pub probability: f64,
    /// Bias is uniform on [0, bias_max_s], seconds.
    pub bias_max_s: f64,
}

impl NlosConfig {
    pub fn new(probability: f64, bias_max_s: f64) -> Result<Self, SimError> {
        let cfg = Self { probability, bias_max_s };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.probability.is_finite() && (0.0..=1.0).contains(&self.probability)) {
            return Err(SimError::InvalidNlos("probability must lie in [0, 1]"));
        }
        if !(self.bias_max_s.is_finite() && self.bias_max_s >= 0.0) {
            return Err(SimError::InvalidNlos("bias_max_s must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Simulation settings independent of the physical scenario.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimConfig {
    pub seed: u64,
    pub nlos: Option<NlosConfig>,
    /// Optional per-reference clock skews applied to the reported
    /// turn-arounds; `None` models ideal reference clocks.
    pub ref_skews: Option<Vec<f64>>,
}

impl SimConfig {
    pub fn from_seed(seed: u64) -> Self {
        Self { seed, nlos: None, ref_skews: None }
    }
}

// ---------- errors ----------

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    Scenario(ScenarioError),
    InvalidNlos(&'static str),
    RefSkewLength { expected: usize, got: usize },
    Csv { line: usize, msg: String },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Scenario(e) => write!(f, "invalid scenario: {e}"),
            SimError::InvalidNlos(msg) => write!(f, "invalid NLOS config: {msg}"),
            SimError::RefSkewLength { expected, got } => {
                write!(f, "ref_skews must have one entry per anchor ({expected}), got {got}")
            }
            SimError::Csv { line, msg } => write!(f, "batch CSV, line {line}: {msg}"),
        }
    }
}

impl std::error::Error for SimError {}

impl From<ScenarioError> for SimError {
    fn from(e: ScenarioError) -> Self {
        SimError::Scenario(e)
    }
}

// ---------- simulation ----------

/// Draw one measurement batch. Deterministic in `(scenario, cfg)`.
pub fn simulate(scenario: &NetworkScenario, cfg: &SimConfig) -> Result<MeasurementBatch, SimError> {
    simulate_with_flags(scenario, cfg).map(|(batch, _)| batch)
}

/// Like [`simulate`], but also reports which entries were NLOS-contaminated
/// (all `false` when `cfg.nlos` is absent).
pub fn simulate_with_flags(
    scenario: &NetworkScenario,
    cfg: &SimConfig,
) -> Result<(MeasurementBatch, DMatrix<bool>), SimError> {
    scenario.validate()?;
    let n = scenario.n_anchors();
    let k = scenario.rounds;
    if let Some(skews) = &cfg.ref_skews {
        if skews.len() != n {
            return Err(SimError::RefSkewLength { expected: n, got: skews.len() });
        }
    }
    if let Some(nlos) = &cfg.nlos {
        nlos.validate()?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let w = scenario.target_clock.skew;
    let distances = scenario.distances_m();

    // Half round trips: the noise n ~ N(0, sigma^2) rides on the full round
    // trip, so z gets n/2 and Var(z) = sigma^2 / 4.
    let mut z = DMatrix::zeros(k, n);
    for row in 0..k {
        for i in 0..n {
            let mean = w * (distances[i] / scenario.c_mps + scenario.turnaround_s[i] / 2.0);
            let noise: f64 = rng.sample(StandardNormal);
            z[(row, i)] = mean + 0.5 * scenario.sigma_s[i] * noise;
        }
    }

    // Reported turn-arounds at full noise scale; the reference clock's skew
    // (ideal unless overridden) multiplies the true wait it timed.
    let mut t_hat = DMatrix::zeros(k, n);
    for row in 0..k {
        for i in 0..n {
            let ref_skew = cfg.ref_skews.as_ref().map_or(1.0, |s| s[i]);
            let noise: f64 = rng.sample(StandardNormal);
            t_hat[(row, i)] = ref_skew * scenario.turnaround_s[i] + scenario.gamma_s[i] * noise;
        }
    }

    let mut batch = MeasurementBatch::new(z, t_hat)?;
    let flags = match &cfg.nlos {
        Some(nlos) => {
            let (contaminated, flags) = contaminate_flagged(&batch, nlos, &mut rng);
            batch = contaminated;
            flags
        }
        None => DMatrix::from_element(k, n, false),
    };
    Ok((batch, flags))
}

/// Apply NLOS contamination to an existing batch, drawing from the caller's
/// generator. Only `z` is biased; `t_hat` is returned unchanged.
pub fn contaminate(
    batch: &MeasurementBatch,
    nlos: &NlosConfig,
    rng: &mut impl Rng,
) -> MeasurementBatch {
    contaminate_flagged(batch, nlos, rng).0
}

/// [`contaminate`] plus the per-entry contamination mask.
pub fn contaminate_flagged(
    batch: &MeasurementBatch,
    nlos: &NlosConfig,
    rng: &mut impl Rng,
) -> (MeasurementBatch, DMatrix<bool>) {
    let (k, n) = batch.z.shape();
    let mut z = batch.z.clone();
    let mut flags = DMatrix::from_element(k, n, false);
    for row in 0..k {
        for i in 0..n {
            if rng.random::<f64>() < nlos.probability {
                // Uniform on [0, bias_max); multiplying avoids an empty
                // sampling range when the bias cap is zero.
                z[(row, i)] += nlos.bias_max_s * rng.random::<f64>();
                flags[(row, i)] = true;
            }
        }
    }
    (MeasurementBatch { z, t_hat: batch.t_hat.clone() }, flags)
}

// ---------- CSV ----------

/// Column layout for batch CSV files.
pub const BATCH_CSV_HEADER: &str = "round,anchor,z_seconds,t_hat_seconds,nlos_flag";

/// Serialize a batch row-major (round outer, anchor inner). Floats use the
/// shortest round-trippable decimal form, so parsing recovers identical bits.
pub fn batch_to_csv(batch: &MeasurementBatch, flags: Option<&DMatrix<bool>>) -> String {
    let mut out = String::from(BATCH_CSV_HEADER);
    out.push('\n');
    for k in 0..batch.rounds() {
        for i in 0..batch.n_anchors() {
            let flag = flags.map_or(false, |f| f[(k, i)]);
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                k,
                i,
                batch.z[(k, i)],
                batch.t_hat[(k, i)],
                u8::from(flag)
            ));
        }
    }
    out
}

/// Parse a batch CSV produced by [`batch_to_csv`] (or by hand, as long as
/// the grid of (round, anchor) indices is complete).
pub fn batch_from_csv(text: &str) -> Result<(MeasurementBatch, DMatrix<bool>), SimError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == BATCH_CSV_HEADER => {}
        Some((_, header)) => {
            return Err(SimError::Csv {
                line: 1,
                msg: format!("expected header `{BATCH_CSV_HEADER}`, got `{}`", header.trim()),
            })
        }
        None => return Err(SimError::Csv { line: 1, msg: "empty file".into() }),
    }

    let mut entries: Vec<(usize, usize, f64, f64, bool)> = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(SimError::Csv {
                line: lineno,
                msg: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let parse_err = |what: &str| SimError::Csv {
            line: lineno,
            msg: format!("could not parse {what}"),
        };
        let k: usize = fields[0].parse().map_err(|_| parse_err("round index"))?;
        let i: usize = fields[1].parse().map_err(|_| parse_err("anchor index"))?;
        let z: f64 = fields[2].parse().map_err(|_| parse_err("z_seconds"))?;
        let t: f64 = fields[3].parse().map_err(|_| parse_err("t_hat_seconds"))?;
        let flag = match fields[4] {
            "0" => false,
            "1" => true,
            _ => return Err(parse_err("nlos_flag (expected 0 or 1)")),
        };
        entries.push((k, i, z, t, flag));
    }
    if entries.is_empty() {
        return Err(SimError::Csv { line: 2, msg: "no data rows".into() });
    }

    let rounds = 1 + entries.iter().map(|e| e.0).max().unwrap();
    let n = 1 + entries.iter().map(|e| e.1).max().unwrap();
    if entries.len() != rounds * n {
        return Err(SimError::Csv {
            line: 2,
            msg: format!(
                "incomplete grid: {} rows for {} rounds x {} anchors",
                entries.len(),
                rounds,
                n
            ),
        });
    }
    let mut z = DMatrix::zeros(rounds, n);
    let mut t_hat = DMatrix::zeros(rounds, n);
    let mut flags = DMatrix::from_element(rounds, n, false);
    let mut seen = vec![false; rounds * n];
    for (k, i, zv, tv, flag) in entries {
        let slot = k * n + i;
        if seen[slot] {
            return Err(SimError::Csv {
                line: 2,
                msg: format!("duplicate entry for round {k}, anchor {i}"),
            });
        }
        seen[slot] = true;
        z[(k, i)] = zv;
        t_hat[(k, i)] = tv;
        flags[(k, i)] = flag;
    }
    let batch = MeasurementBatch::new(z, t_hat)?;
    Ok((batch, flags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{predict_twtoa, Position};
    use approx::assert_relative_eq;

    fn test_scenario(sigma: f64, gamma: f64, rounds: usize) -> NetworkScenario {
        NetworkScenario::uniform(
            vec![
                Position::new(800.0, 800.0),
                Position::new(800.0, -800.0),
                Position::new(-800.0, 800.0),
            ],
            Position::new(120.0, -340.0),
            1.0001,
            1.0e-6,
            sigma,
            gamma,
            3.0e8,
            rounds,
        )
        .unwrap()
    }

    #[test]
    fn identical_config_reproduces_batch_bitwise() {
        let s = test_scenario(3.0e-8, 3.0e-8, 4);
        let cfg = SimConfig {
            seed: 7,
            nlos: Some(NlosConfig::new(0.3, 5.0 / 3.0e8).unwrap()),
            ref_skews: None,
        };
        let (b1, f1) = simulate_with_flags(&s, &cfg).unwrap();
        let (b2, f2) = simulate_with_flags(&s, &cfg).unwrap();
        assert_eq!(b1, b2);
        assert_eq!(f1, f2);

        let other = SimConfig { seed: 8, ..cfg.clone() };
        let b3 = simulate(&s, &other).unwrap();
        assert_ne!(b1, b3);
    }

    #[test]
    fn zero_noise_reproduces_the_model_exactly() {
        let s = test_scenario(0.0, 0.0, 3);
        let batch = simulate(&s, &SimConfig::from_seed(1)).unwrap();
        for i in 0..s.n_anchors() {
            let expected = predict_twtoa(&s, i);
            for k in 0..s.rounds {
                assert_eq!(batch.z[(k, i)], expected);
                assert_eq!(batch.t_hat[(k, i)], s.turnaround_s[i]);
            }
        }
    }

    #[test]
    fn noise_variances_match_the_model() {
        // Var(z) = sigma^2/4 because the noise is halved with the round
        // trip; Var(t_hat) = gamma^2 at full scale.
        let sigma = 4.0e-8;
        let gamma = 2.5e-8;
        let rounds = 60_000;
        let s = test_scenario(sigma, gamma, rounds);
        let batch = simulate(&s, &SimConfig::from_seed(99)).unwrap();

        for i in 0..s.n_anchors() {
            let col_z = batch.z.column(i);
            let mean_z = col_z.iter().sum::<f64>() / rounds as f64;
            let var_z =
                col_z.iter().map(|v| (v - mean_z).powi(2)).sum::<f64>() / (rounds - 1) as f64;
            assert_relative_eq!(var_z, sigma * sigma / 4.0, max_relative = 0.05);

            let col_t = batch.t_hat.column(i);
            let mean_t = col_t.iter().sum::<f64>() / rounds as f64;
            let var_t =
                col_t.iter().map(|v| (v - mean_t).powi(2)).sum::<f64>() / (rounds - 1) as f64;
            assert_relative_eq!(var_t, gamma * gamma, max_relative = 0.05);
            assert_relative_eq!(mean_t, s.turnaround_s[i], max_relative = 0.01);
        }
    }

    #[test]
    fn nlos_biases_z_only_with_uniform_mean() {
        // With p = 1 and bias ~ U[0, 5/c], the average shift of z is 2.5/c.
        let c = 3.0e8;
        let rounds = 40_000;
        let s = test_scenario(0.0, 0.0, rounds);
        let clean = simulate(&s, &SimConfig::from_seed(3)).unwrap();
        let cfg = SimConfig {
            seed: 3,
            nlos: Some(NlosConfig::new(1.0, 5.0 / c).unwrap()),
            ref_skews: None,
        };
        let (dirty, flags) = simulate_with_flags(&s, &cfg).unwrap();

        assert_eq!(clean.t_hat, dirty.t_hat, "NLOS must not touch reported turn-arounds");
        assert!(flags.iter().all(|&f| f));
        let shifts: Vec<f64> =
            dirty.z.iter().zip(clean.z.iter()).map(|(d, c)| d - c).collect();
        assert!(shifts.iter().all(|&v| (0.0..=5.0 / c).contains(&v)));
        let mean_shift = shifts.iter().sum::<f64>() / shifts.len() as f64;
        assert_relative_eq!(mean_shift, 2.5 / c, max_relative = 0.02);
    }

    #[test]
    fn nlos_contamination_rate_matches_probability() {
        let rounds = 40_000;
        let s = test_scenario(1.0e-8, 1.0e-8, rounds);
        let cfg = SimConfig {
            seed: 11,
            nlos: Some(NlosConfig::new(0.2, 5.0 / 3.0e8).unwrap()),
            ref_skews: None,
        };
        let (_, flags) = simulate_with_flags(&s, &cfg).unwrap();
        let rate = flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64;
        assert!((0.19..=0.21).contains(&rate), "contamination rate {rate} far from 0.2");
    }

    #[test]
    fn reference_skew_escape_hatch_scales_reported_waits() {
        let s = test_scenario(0.0, 0.0, 2);
        let cfg = SimConfig {
            seed: 5,
            nlos: None,
            ref_skews: Some(vec![1.01, 1.0, 0.99]),
        };
        let batch = simulate(&s, &cfg).unwrap();
        assert_relative_eq!(batch.t_hat[(0, 0)], 1.01e-6, max_relative = 1e-12);
        assert_relative_eq!(batch.t_hat[(0, 1)], 1.0e-6, max_relative = 1e-12);
        assert_relative_eq!(batch.t_hat[(0, 2)], 0.99e-6, max_relative = 1e-12);
        // z is timed by the target against the *true* wait, not the report.
        assert_eq!(batch.z[(0, 0)], predict_twtoa(&s, 0));

        let bad = SimConfig { ref_skews: Some(vec![1.0; 2]), ..cfg };
        assert!(matches!(
            simulate(&s, &bad),
            Err(SimError::RefSkewLength { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn csv_round_trip_preserves_bits_and_flags() {
        let s = test_scenario(3.0e-8, 3.0e-8, 3);
        let cfg = SimConfig {
            seed: 21,
            nlos: Some(NlosConfig::new(0.5, 2.0e-8).unwrap()),
            ref_skews: None,
        };
        let (batch, flags) = simulate_with_flags(&s, &cfg).unwrap();
        let text = batch_to_csv(&batch, Some(&flags));
        assert!(text.starts_with(BATCH_CSV_HEADER));
        let (parsed, parsed_flags) = batch_from_csv(&text).unwrap();
        assert_eq!(parsed, batch);
        assert_eq!(parsed_flags, flags);
    }

    #[test]
    fn csv_parser_reports_line_and_problem() {
        let err = batch_from_csv("bogus header\n0,0,1,1,0\n").unwrap_err();
        assert!(matches!(err, SimError::Csv { line: 1, .. }));

        let err = batch_from_csv(
            "round,anchor,z_seconds,t_hat_seconds,nlos_flag\n0,0,not-a-number,1,0\n",
        )
        .unwrap_err();
        match err {
            SimError::Csv { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("z_seconds"));
            }
            other => panic!("unexpected error {other:?}"),
        }

        // Missing (0,1) entry: grid incomplete.
        let err = batch_from_csv(
            "round,anchor,z_seconds,t_hat_seconds,nlos_flag\n0,0,1,1,0\n1,1,1,1,0\n",
        )
        .unwrap_err();
        assert!(matches!(err, SimError::Csv { .. }));
    }

    #[test]
    fn nlos_config_validation() {
        assert!(NlosConfig::new(1.2, 1.0e-8).is_err());
        assert!(NlosConfig::new(-0.1, 1.0e-8).is_err());
        assert!(NlosConfig::new(0.5, -1.0e-8).is_err());
        assert!(NlosConfig::new(0.0, 0.0).is_ok());
    }
}
