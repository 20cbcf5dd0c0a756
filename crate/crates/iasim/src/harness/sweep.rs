//! The Monte-Carlo sweep engine.
//!
//! Trials are independent work items (rayon); every random draw is keyed by
//! `(seed, trial, snr point, ...)`, and the reduction walks trials in index
//! order with compensated summation, so results are identical no matter how
//! the pool schedules the work.

use num_complex::Complex64;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::channel::{generate_channel_trial, MultiUserChannel};
use crate::csit::make_estimates;
use crate::error::{Error, Result};
use crate::harness::scenario::{CsitConfig, Receiver, Scenario};
use crate::ia3::{conditioning_filter, solve_distributed, solve_perfect, IaSolution};
use crate::metrics::{dof_slope, rate_user, DofEstimate, KahanSum, RatePoint};
use crate::numkit::{inverse, CMatrix};

/// Trial-averaged sweep output.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub points: Vec<RatePoint>,
    /// Standard error of the mean, `[snr][user]`.
    pub stderr: Vec<Vec<f64>>,
    pub dof: DofEstimate,
    /// Fraction of accepted trials whose cascade spectrum was near-degenerate.
    pub degenerate_fraction: Vec<f64>,
    pub scenario_hash: String,
}

pub(crate) enum TrialOutcome {
    Accepted { rates: Vec<f64>, degenerate: bool },
    Filtered,
    Failed(String),
}

pub(crate) fn scenario_digest(s: &Scenario, extra: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(s.canonical_string().as_bytes());
    hasher.update(extra.as_bytes());
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn mmse_filters(
    channel: &MultiUserChannel,
    precoders: &[CMatrix],
    p: f64,
    d: usize,
) -> Result<Vec<CMatrix>> {
    let k = channel.dims.k;
    let pc = Complex64::new(p, 0.0);
    let mut filters = Vec::with_capacity(k);
    for i in 0..k {
        let n = channel.dims.n[i];
        let mut cov = CMatrix::identity(n, n);
        for (j, u) in precoders.iter().enumerate() {
            let hu = &channel.links[i][j] * u;
            cov += &hu * hu.adjoint() * pc;
        }
        let g = inverse(&cov)?.matrix * &channel.links[i][i] * &precoders[i];
        let norm = g.norm();
        if norm == 0.0 || g.ncols() != d {
            return Err(Error::ZeroMatrix);
        }
        filters.push(g / Complex64::new(norm, 0.0));
    }
    Ok(filters)
}

fn select_filters(
    channel: &MultiUserChannel,
    perfect: &IaSolution,
    precoders: &[CMatrix],
    receiver: Receiver,
    p: f64,
    d: usize,
) -> Result<Vec<CMatrix>> {
    match receiver {
        Receiver::PerfectIa => Ok(perfect.filters.clone()),
        Receiver::Mmse => mmse_filters(channel, precoders, p, d),
    }
}

fn run_trial(s: &Scenario, snr_idx: usize, p: f64, trial: u64) -> TrialOutcome {
    let d = s.dims.d[0];
    let channel = generate_channel_trial(&s.dims, s.seed, trial);
    if let Some(eps) = s.filter_eps {
        if !conditioning_filter(&channel, eps) {
            return TrialOutcome::Filtered;
        }
    }
    let outcome = (|| -> Result<(Vec<f64>, bool)> {
        let perfect = solve_perfect(&channel, d)?;
        let (precoders, degenerate) = match &s.csit {
            CsitConfig::Perfect => (perfect.precoders.clone(), perfect.degenerate),
            CsitConfig::Profile(profile) => {
                let ests = make_estimates(
                    &channel,
                    profile,
                    p,
                    s.error_norm,
                    s.seed,
                    trial,
                    snr_idx,
                )?;
                let dist = solve_distributed(&ests, d)?;
                let degenerate = perfect.degenerate
                    || dist.per_tx_solutions.iter().any(|sol| sol.degenerate);
                (dist.used_precoders, degenerate)
            }
        };
        let filters = select_filters(&channel, &perfect, &precoders, s.receiver, p, d)?;
        let rates = (0..s.dims.k)
            .map(|i| rate_user(&channel, &precoders, &filters, p, i))
            .collect();
        Ok((rates, degenerate))
    })();
    match outcome {
        Ok((rates, degenerate)) => TrialOutcome::Accepted { rates, degenerate },
        Err(e) => TrialOutcome::Failed(e.to_string()),
    }
}

/// Reduces per-trial outcomes (in trial order) into a rate point. Aborts if
/// more than 1% of the non-filtered trials failed, or nothing survived.
pub(crate) fn reduce_point(
    snr_db: f64,
    users: usize,
    trials: u64,
    outcomes: Vec<TrialOutcome>,
) -> Result<(RatePoint, Vec<f64>, f64)> {
    let mut sums = vec![KahanSum::default(); users];
    let mut sq_sums = vec![KahanSum::default(); users];
    let mut accepted = 0u64;
    let mut failed = 0u64;
    let mut degenerate = 0u64;
    let mut first_error = String::new();
    for o in outcomes {
        match o {
            TrialOutcome::Accepted { rates, degenerate: dg } => {
                accepted += 1;
                if dg {
                    degenerate += 1;
                }
                for (u, r) in rates.into_iter().enumerate() {
                    sums[u].add(r);
                    sq_sums[u].add(r * r);
                }
            }
            TrialOutcome::Filtered => {}
            TrialOutcome::Failed(e) => {
                failed += 1;
                if first_error.is_empty() {
                    first_error = e;
                }
            }
        }
    }
    if accepted == 0 || failed * 100 > trials {
        return Err(Error::SweepFailed {
            snr_db,
            failed,
            trials,
            first: if first_error.is_empty() {
                "all trials filtered out".into()
            } else {
                first_error
            },
        });
    }
    let n = accepted as f64;
    let mut means = Vec::with_capacity(users);
    let mut stderrs = Vec::with_capacity(users);
    for u in 0..users {
        let mean = sums[u].value() / n;
        let var = (sq_sums[u].value() / n - mean * mean).max(0.0);
        means.push(mean);
        stderrs.push((var / n).sqrt());
    }
    Ok((
        RatePoint {
            p_db: snr_db,
            per_user_rate: means,
        },
        stderrs,
        degenerate as f64 / n,
    ))
}

/// Full sweep: channels, estimates, solves and rates for every
/// `(SNR, trial)` cell, trial-averaged per point, with a DoF fit over the
/// top three points.
pub fn run_sweep(s: &Scenario) -> Result<SweepResult> {
    s.validate()?;
    let users = s.dims.k;
    let mut points = Vec::with_capacity(s.snr_grid_db.len());
    let mut stderr = Vec::new();
    let mut degenerate_fraction = Vec::new();
    for (snr_idx, &snr_db) in s.snr_grid_db.iter().enumerate() {
        let p = db_to_linear(snr_db);
        let outcomes: Vec<TrialOutcome> = (0..s.trials)
            .into_par_iter()
            .map(|trial| run_trial(s, snr_idx, p, trial))
            .collect();
        let (pt, se, dg) = reduce_point(snr_db, users, s.trials, outcomes)?;
        points.push(pt);
        stderr.push(se);
        degenerate_fraction.push(dg);
    }
    let window = 3.min(points.len()).max(2);
    let dof = dof_slope(&points, window)?;
    Ok(SweepResult {
        points,
        stderr,
        dof,
        degenerate_fraction,
        scenario_hash: scenario_digest(s, ""),
    })
}
