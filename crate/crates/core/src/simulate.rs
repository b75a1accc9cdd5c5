//! Desk-scale numeric evidence: the high-SNR rate slope of the
//! dominant-user scheme and Monte Carlo robustness of the transforms.

use std::fmt::Write as _;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{generate_channel, AntennaProfile, ChannelRealization};
use crate::numerics::{singular_values, ComplexMatrix, NumericsError, Tolerance};
use crate::transform::{expected_zero_pattern, run_variant, verify_transform, TransformError, TransformOptions, Variant};

/// Lower edge of the window used for slope fits.
pub const HIGH_SNR_MIN_POWER: f64 = 1e4;

/// Five decades, `1e4` through `1e8`.
pub const DEFAULT_POWERS: [f64; 5] = [1e4, 1e5, 1e6, 1e7, 1e8];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulateError {
    #[error("transmit power must be positive and finite, got {0}")]
    InvalidPower(f64),
    #[error("slope fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("power {0} is below the high-SNR window starting at {HIGH_SNR_MIN_POWER}")]
    OutsideWindow(f64),
    #[error("powers must be strictly increasing")]
    PowersNotIncreasing,
    #[error("at least one trial is required")]
    NoTrials,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

/// `log2 det(I + p * H H^H)`, evaluated through the singular values of `H`.
pub fn log_det_rate(h: &ComplexMatrix, power_per_antenna: f64) -> Result<f64, SimulateError> {
    let sv = singular_values(h)?;
    Ok(sv.iter().map(|s| (power_per_antenna * s * s).ln_1p()).sum::<f64>() / std::f64::consts::LN_2)
}

/// Sum rate in bits per channel use when only user 1 transmits, with white
/// input split evenly over its `M_1` antennas and identity noise.
pub fn dominant_scheme_rate(ch: &ChannelRealization, power: f64) -> Result<f64, SimulateError> {
    if !(power > 0.0 && power.is_finite()) {
        return Err(SimulateError::InvalidPower(power));
    }
    let m1 = ch.profile().largest() as f64;
    log_det_rate(ch.block(0, 0), power / m1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    /// `(power, sum rate in bits)`, power on a linear scale.
    pub points: Vec<(f64, f64)>,
    pub scheme: String,
    pub seed: u64,
}

impl RateCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("P,rate_bits\n");
        for (p, r) in &self.points {
            writeln!(s, "{p},{r}").expect("writing to a String");
        }
        s
    }
}

pub fn dominant_rate_curve(ch: &ChannelRealization, powers: &[f64]) -> Result<RateCurve, SimulateError> {
    if powers.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SimulateError::PowersNotIncreasing);
    }
    let points = powers
        .iter()
        .map(|&p| Ok((p, dominant_scheme_rate(ch, p)?)))
        .collect::<Result<Vec<_>, SimulateError>>()?;
    Ok(RateCurve {
        points,
        scheme: "dominant_user".into(),
        seed: ch.seed(),
    })
}

/// Least-squares slope of rate against `log2 P`; a finite-SNR estimate of
/// the DoF.
pub fn estimate_dof_slope(curve: &RateCurve) -> Result<f64, SimulateError> {
    let n = curve.points.len();
    if n < 3 {
        return Err(SimulateError::TooFewPoints(n));
    }
    if let Some(&(p, _)) = curve.points.iter().find(|(p, _)| *p < HIGH_SNR_MIN_POWER) {
        return Err(SimulateError::OutsideWindow(p));
    }
    let xs: Vec<f64> = curve.points.iter().map(|(p, _)| p.log2()).collect();
    let ys: Vec<f64> = curve.points.iter().map(|(_, r)| *r).collect();
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// A null space had the wrong dimension; `step` names the constraint.
    NullSpaceDimension,
    NotInvertible,
    /// The construction ran but the result did not verify.
    Verification,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub channel_seed: u64,
    pub kind: FailureKind,
    pub step: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub profile: AntennaProfile,
    pub variant: Variant,
    pub trials: usize,
    pub seed: u64,
    pub tolerance: Tolerance,
    pub successes: usize,
    pub success_fraction: f64,
    /// Over every trial that produced a transform; `None` if none did.
    pub worst_residual: Option<f64>,
    /// `None` if no transform was produced or one was singular.
    pub worst_condition: Option<f64>,
    pub failures: Vec<TrialFailure>,
}

struct TrialOutcome {
    pass: bool,
    residual: Option<f64>,
    condition: Option<Option<f64>>,
    failure: Option<TrialFailure>,
}

fn run_trial(trial: usize, ch: &ChannelRealization, variant: Variant, tol: &Tolerance) -> TrialOutcome {
    let opts = TransformOptions {
        tol: *tol,
        ..TransformOptions::default()
    };
    let fail = |kind, step: Option<String>, message: String| TrialFailure {
        trial,
        channel_seed: ch.seed(),
        kind,
        step,
        message,
    };
    let verified = run_variant(ch, variant, &opts).and_then(|(pair, out)| {
        let report = verify_transform(ch, &pair, &out.pattern, tol)?;
        Ok(report)
    });
    match verified {
        Ok(report) => {
            let worst_cond = report
                .u_conditions
                .iter()
                .chain(&report.v_conditions)
                .try_fold(0.0f64, |acc, c| c.map(|c| acc.max(c)));
            TrialOutcome {
                pass: report.pass,
                residual: Some(report.max_residual),
                condition: Some(worst_cond),
                failure: (!report.pass).then(|| {
                    fail(
                        FailureKind::Verification,
                        None,
                        format!(
                            "max residual {:.3e}, invertible {}, direct links full rank {}",
                            report.max_residual, report.invertible, report.direct_links_full_rank
                        ),
                    )
                }),
            }
        }
        Err(e) => {
            let (kind, step) = match &e {
                TransformError::NullSpaceDimension { step, .. } => (FailureKind::NullSpaceDimension, Some(step.to_string())),
                TransformError::NotInvertible { matrix, .. } => (FailureKind::NotInvertible, Some(matrix.clone())),
                _ => (FailureKind::Other, None),
            };
            TrialOutcome {
                pass: false,
                residual: None,
                condition: None,
                failure: Some(fail(kind, step, e.to_string())),
            }
        }
    }
}

fn aggregate(
    profile: AntennaProfile,
    variant: Variant,
    seed: u64,
    tol: Tolerance,
    outcomes: Vec<TrialOutcome>,
) -> MonteCarloReport {
    let trials = outcomes.len();
    let successes = outcomes.iter().filter(|o| o.pass).count();
    let worst_residual = outcomes.iter().filter_map(|o| o.residual).reduce(f64::max);
    let conds: Vec<Option<f64>> = outcomes.iter().filter_map(|o| o.condition).collect();
    let worst_condition = if conds.is_empty() {
        None
    } else {
        conds.into_iter().try_fold(0.0f64, |acc, c| c.map(|c| acc.max(c)))
    };
    MonteCarloReport {
        profile,
        variant,
        trials,
        seed,
        tolerance: tol,
        successes,
        success_fraction: successes as f64 / trials as f64,
        worst_residual,
        worst_condition,
        failures: outcomes.into_iter().filter_map(|o| o.failure).collect(),
    }
}

/// Channel seeds for each trial, drawn from one stream keyed by `seed`.
pub fn trial_seeds(seed: u64, trials: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials).map(|_| rng.next_u64()).collect()
}

/// Fraction of independent generic channels whose transform verifies.
/// Trials run in parallel; the report does not depend on scheduling.
pub fn monte_carlo_transform(
    profile: &AntennaProfile,
    variant: Variant,
    trials: usize,
    seed: u64,
    tol: &Tolerance,
) -> Result<MonteCarloReport, SimulateError> {
    if trials == 0 {
        return Err(SimulateError::NoTrials);
    }
    expected_zero_pattern(profile, variant)?;
    let outcomes: Vec<TrialOutcome> = trial_seeds(seed, trials)
        .into_par_iter()
        .enumerate()
        .map(|(t, s)| run_trial(t, &generate_channel(profile, s), variant, tol))
        .collect();
    Ok(aggregate(profile.clone(), variant, seed, *tol, outcomes))
}

/// Same as [`monte_carlo_transform`] over caller-supplied channels, which
/// must all share one profile. `seed` in the report is the first channel's.
pub fn monte_carlo_on_channels(
    channels: &[ChannelRealization],
    variant: Variant,
    tol: &Tolerance,
) -> Result<MonteCarloReport, SimulateError> {
    let Some(first) = channels.first() else {
        return Err(SimulateError::NoTrials);
    };
    expected_zero_pattern(first.profile(), variant)?;
    let outcomes = channels
        .par_iter()
        .enumerate()
        .map(|(t, ch)| run_trial(t, ch, variant, tol))
        .collect();
    Ok(aggregate(first.profile().clone(), variant, first.seed(), *tol, outcomes))
}
