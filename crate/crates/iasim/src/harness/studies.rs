//! The experiment suite: injected precoder perturbations, the quantizer
//! distortion curve and the precoder-error scaling law.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{generate_channel_trial, normalize_link, Dims};
use crate::csit::{make_estimates, rvq_quantize, CsitModel, CsitProfile};
use crate::error::{Error, Result};
use crate::harness::scenario::{Receiver, Scenario};
use crate::harness::sweep::{db_to_linear, reduce_point, scenario_digest, SweepResult, TrialOutcome};
use crate::ia3::{conditioning_filter, solve_on_links, solve_perfect};
use crate::metrics::{dof_slope, least_squares_slope, precoder_error, rate_user, KahanSum};
use crate::numkit::CMatrix;
use crate::rng::{complex_gaussian, stream_id, stream_rng, DOMAIN_PROP2, DOMAIN_QUANTIZER};

fn random_unit_frob(rows: usize, cols: usize, seed: u64, stream: u64) -> CMatrix {
    let mut rng = stream_rng(seed, stream);
    let e = CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(&mut rng, 1.0));
    let n = e.norm();
    e / Complex64::new(n, 0.0)
}

/// Sweep where each TX's precoder is the perfect one plus an injected error
/// of power `P^{-beta_j}`, evaluated with the perfect receive filters. This
/// probes the precoder-accuracy-to-DoF relation directly, without any CSIT
/// model in the loop.
pub fn prop2_experiment(beta: &[f64; 3], s: &Scenario) -> Result<SweepResult> {
    s.validate()?;
    if beta.iter().any(|&b| !(0.0..=1.0).contains(&b)) {
        return Err(Error::InvalidScenario(
            "beta exponents must lie in [0, 1]".into(),
        ));
    }
    let d = s.dims.d[0];
    let users = s.dims.k;
    let mut points = Vec::new();
    let mut stderr = Vec::new();
    let mut degenerate_fraction = Vec::new();
    for (snr_idx, &snr_db) in s.snr_grid_db.iter().enumerate() {
        let p = db_to_linear(snr_db);
        let outcomes: Vec<TrialOutcome> = (0..s.trials)
            .into_par_iter()
            .map(|trial| {
                let channel = generate_channel_trial(&s.dims, s.seed, trial);
                if let Some(eps) = s.filter_eps {
                    if !conditioning_filter(&channel, eps) {
                        return TrialOutcome::Filtered;
                    }
                }
                match (|| -> Result<(Vec<f64>, bool)> {
                    let perfect = solve_perfect(&channel, d)?;
                    let mut precoders = Vec::with_capacity(3);
                    for j in 0..3 {
                        let e = random_unit_frob(
                            2 * d,
                            d,
                            s.seed,
                            stream_id(DOMAIN_PROP2, trial, snr_idx as u64, j as u64, 0),
                        );
                        let scale = Complex64::new(p.powf(-beta[j] / 2.0), 0.0);
                        let u = &perfect.precoders[j] + e * scale;
                        let norm = u.norm();
                        precoders.push(u / Complex64::new(norm, 0.0));
                    }
                    let rates = (0..users)
                        .map(|i| rate_user(&channel, &precoders, &perfect.filters, p, i))
                        .collect();
                    Ok((rates, perfect.degenerate))
                })() {
                    Ok((rates, degenerate)) => TrialOutcome::Accepted { rates, degenerate },
                    Err(e) => TrialOutcome::Failed(e.to_string()),
                }
            })
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
        scenario_hash: scenario_digest(s, &format!("prop2 {} {} {}", beta[0], beta[1], beta[2])),
    })
}

#[derive(Debug, Clone)]
pub struct QuantizerRow {
    pub bits: u32,
    pub mean_distortion_sq: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone)]
pub struct QuantizerStudy {
    pub rows: Vec<QuantizerRow>,
    /// Fitted slope of `log2(mean distortion^2)` versus `B`.
    pub exponent: f64,
}

/// Empirical distortion-versus-bits curve for brute-force RVQ of an
/// `N x M` normalized link.
pub fn quantizer_study(
    n: usize,
    m: usize,
    bits: &[u32],
    trials: u64,
    seed: u64,
) -> Result<QuantizerStudy> {
    if bits.is_empty() || trials == 0 {
        return Err(Error::InvalidScenario(
            "quantizer study needs at least one bit level and one trial".into(),
        ));
    }
    let dims = Dims::new(1, vec![m], vec![n], vec![1])?;
    let mut rows = Vec::with_capacity(bits.len());
    for &b in bits {
        let per_trial: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let link = generate_channel_trial(&dims, seed, t).links[0][0].clone();
                let tilde = normalize_link(&link).expect("random link is nonzero");
                let mut rng = stream_rng(seed, stream_id(DOMAIN_QUANTIZER, t, b as u64, 0, 0));
                rvq_quantize(&tilde, b, &mut rng).map(|(_, dist)| dist * dist)
            })
            .collect::<Result<_>>()?;
        let mut sum = KahanSum::default();
        let mut sq = KahanSum::default();
        for &x in &per_trial {
            sum.add(x);
            sq.add(x * x);
        }
        let nf = trials as f64;
        let mean = sum.value() / nf;
        let var = (sq.value() / nf - mean * mean).max(0.0);
        rows.push(QuantizerRow {
            bits: b,
            mean_distortion_sq: mean,
            stderr: (var / nf).sqrt(),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.bits as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean_distortion_sq.log2()).collect();
    let (exponent, _) = least_squares_slope(&xs, &ys);
    Ok(QuantizerStudy { rows, exponent })
}

#[derive(Debug, Clone)]
pub struct ScalingRow {
    pub a_min: f64,
    /// Fitted exponent of `E||dU1||_F^2` versus `P`.
    pub exponent: f64,
    /// `(P, mean squared precoder error)` samples behind the fit.
    pub samples: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct ScalingStudy {
    pub rows: Vec<ScalingRow>,
}

/// Measures how fast TX1's own precoder converges to the perfect one as the
/// SNR grows, for uniform accuracy profiles `A = a_min`. Gaussian CSIT
/// model; the scenario's conditioning filter should be on so the
/// expectation is taken over well-conditioned channels.
pub fn precoder_scaling_study(a_mins: &[f64], s: &Scenario) -> Result<ScalingStudy> {
    s.validate()?;
    let d = s.dims.d[0];
    let mut rows = Vec::with_capacity(a_mins.len());
    // Inherit the error-variance constant from the scenario's profile when
    // it has one. The theorem being probed is asymptotic; a small C keeps
    // sigma in the perturbative regime across the whole P range, so the
    // finite-SNR fit can see the limiting exponent.
    let c = match &s.csit {
        crate::harness::scenario::CsitConfig::Profile(p) => p.c,
        crate::harness::scenario::CsitConfig::Perfect => 1.0,
    };
    for &a_min in a_mins {
        let mut profile = CsitProfile::uniform(s.dims.k, a_min, CsitModel::Gaussian);
        profile.c = c;
        let mut samples = Vec::new();
        for (snr_idx, &snr_db) in s.snr_grid_db.iter().enumerate() {
            let p = db_to_linear(snr_db);
            let errs: Vec<Option<f64>> = (0..s.trials)
                .into_par_iter()
                .map(|trial| {
                    let channel = generate_channel_trial(&s.dims, s.seed, trial);
                    if let Some(eps) = s.filter_eps {
                        if !conditioning_filter(&channel, eps) {
                            return Ok(None);
                        }
                    }
                    let perfect = solve_perfect(&channel, d)?;
                    let ests = make_estimates(
                        &channel,
                        &profile,
                        p,
                        s.error_norm,
                        s.seed,
                        trial,
                        snr_idx,
                    )?;
                    let tx1 = solve_on_links(&ests[0].links, d)?;
                    let (frob_sq, _) =
                        precoder_error(&tx1.precoders[0], &perfect.precoders[0])?;
                    Ok(Some(frob_sq))
                })
                .collect::<Result<_>>()?;
            let mut sum = KahanSum::default();
            let mut n = 0u64;
            for e in errs.into_iter().flatten() {
                sum.add(e);
                n += 1;
            }
            if n == 0 {
                return Err(Error::SweepFailed {
                    snr_db,
                    failed: 0,
                    trials: s.trials,
                    first: "all trials filtered out".into(),
                });
            }
            samples.push((p, sum.value() / n as f64));
        }
        let xs: Vec<f64> = samples.iter().map(|(p, _)| p.log10()).collect();
        let ys: Vec<f64> = samples.iter().map(|(_, e)| e.log10()).collect();
        let (exponent, _) = least_squares_slope(&xs, &ys);
        rows.push(ScalingRow {
            a_min,
            exponent,
            samples,
        });
    }
    Ok(ScalingStudy { rows })
}

/// Default setting for the scaling study: P from 20 to 60 dB, conditioning
/// filter at 0.05, 500 trials, and a small error-variance constant
/// (sigma^2 = 1e-4 * P^-A) so even the slowest profiles stay in the
/// perturbative regime the asymptotic law describes.
pub fn scaling_scenario(trials: u64, eps: f64, seed: u64) -> Scenario {
    let mut s = Scenario::golden();
    s.snr_grid_db = vec![20.0, 30.0, 40.0, 50.0, 60.0];
    s.trials = trials;
    s.filter_eps = Some(eps);
    s.seed = seed;
    s.receiver = Receiver::PerfectIa;
    if let crate::harness::scenario::CsitConfig::Profile(p) = &mut s.csit {
        p.c = 1e-4;
    }
    s
}
