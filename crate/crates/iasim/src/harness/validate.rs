//! The `validate` subcommand: runs every module's invariant suite and
//! prints one pass/fail line per check.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{generate_channel_trial, normalize_link, Dims};
use crate::csit::{
    gaussian_perturb, rvq_quantize, sigma_from_scaling, CsitModel, CsitProfile, ErrorNorm,
};
use crate::harness::scenario::{CsitConfig, Scenario};
use crate::harness::sweep::run_sweep;
use crate::ia3::{
    alignment_residual, compute_cascade, normalized_grid, solve_on_links, solve_perfect,
    span_defect,
};
use crate::metrics::least_squares_slope;
use crate::numkit::{
    chordal_distance, eig_general, inverse, orthonormal_complement, CMatrix,
};
use crate::rng::{complex_gaussian, stream_rng};

type Check = (&'static str, fn() -> Result<(), String>);

fn random_matrix(rows: usize, cols: usize, seed: u64) -> CMatrix {
    let mut rng = stream_rng(seed, 0);
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(&mut rng, 1.0))
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---- numkit ----

fn numkit_eig_reconstruction() -> Result<(), String> {
    for seed in 0..20u64 {
        let a = random_matrix(4, 4, 100 + seed);
        let e = eig_general(&a).map_err(|e| e.to_string())?;
        let mut lam = CMatrix::zeros(4, 4);
        for k in 0..4 {
            lam[(k, k)] = e.values[k];
        }
        let vinv = inverse(&e.vectors).map_err(|e| e.to_string())?.matrix;
        let resid = (&e.vectors * lam * vinv - &a).norm();
        check(resid <= 1e-8 * a.norm(), || {
            format!("reconstruction residual {resid:.3e} at seed {seed}")
        })?;
        let e2 = eig_general(&a).map_err(|e| e.to_string())?;
        check(e.values == e2.values && e.vectors == e2.vectors, || {
            format!("eigendecomposition not bit-identical at seed {seed}")
        })?;
    }
    Ok(())
}

fn numkit_chordal_right_invariance() -> Result<(), String> {
    for seed in 0..20u64 {
        let x = random_matrix(4, 2, 200 + seed);
        let r = random_matrix(2, 2, 300 + seed);
        if inverse(&r).is_err() {
            continue;
        }
        let d = chordal_distance(&x, &(&x * &r)).map_err(|e| e.to_string())?;
        check(d <= 1e-10, || format!("distance {d:.3e} at seed {seed}"))?;
    }
    Ok(())
}

fn numkit_complement_deterministic() -> Result<(), String> {
    for seed in 0..20u64 {
        let a = random_matrix(4, 2, 400 + seed);
        let q1 = orthonormal_complement(&a).map_err(|e| e.to_string())?;
        let q2 = orthonormal_complement(&a).map_err(|e| e.to_string())?;
        check(q1 == q2, || format!("complement not deterministic at seed {seed}"))?;
        let ortho = (q1.adjoint() * &q1 - CMatrix::identity(2, 2)).norm();
        let annih = (q1.adjoint() * &a).norm();
        check(ortho < 1e-10 && annih < 1e-10, || {
            format!("complement residuals {ortho:.2e}/{annih:.2e} at seed {seed}")
        })?;
    }
    Ok(())
}

// ---- channel ----

fn channel_normalization_roundtrip() -> Result<(), String> {
    let dims = Dims::square3(2);
    for t in 0..50u64 {
        let ch = generate_channel_trial(&dims, 500, t);
        let h = &ch.links[(t % 3) as usize][((t + 1) % 3) as usize];
        let nl = normalize_link(h).map_err(|e| e.to_string())?;
        let rot = Complex64::from_polar(nl.norm, -nl.phase);
        let resid = (nl.tilde.clone() * rot - h).norm();
        check(resid <= 1e-12 * nl.norm, || format!("round-trip residual {resid:.3e}"))?;
        let again = normalize_link(&nl.tilde).map_err(|e| e.to_string())?;
        let idem = (again.tilde - &nl.tilde).norm();
        check(idem <= 1e-12, || format!("not idempotent, delta {idem:.3e}"))?;
    }
    Ok(())
}

fn channel_links_never_singular() -> Result<(), String> {
    let dims = Dims::new(1, vec![4], vec![4], vec![1]).map_err(|e| e.to_string())?;
    let bad = (0..100_000u64)
        .into_par_iter()
        .filter(|&t| {
            let h = &generate_channel_trial(&dims, 600, t).links[0][0];
            let svd = h.clone().svd(false, false);
            let smin = svd
                .singular_values
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            !(smin > 0.0)
        })
        .count();
    check(bad == 0, || format!("{bad} of 100000 links were singular"))
}

// ---- csit ----

fn csit_gaussian_scaling_law() -> Result<(), String> {
    let dims = Dims::new(1, vec![2], vec![2], vec![1]).map_err(|e| e.to_string())?;
    let tilde =
        normalize_link(&generate_channel_trial(&dims, 700, 0).links[0][0]).map_err(|e| e.to_string())?;
    for a in [0.5, 1.0] {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (pi, p) in [1e2, 1e3, 1e4, 1e5, 1e6].iter().enumerate() {
            let sigma = sigma_from_scaling(a, *p, 1.0);
            let trials = 400u64;
            let mean: f64 = (0..trials)
                .map(|i| {
                    let mut rng = stream_rng(701, (pi as u64) << 32 | i);
                    (gaussian_perturb(&tilde, sigma, ErrorNorm::Unit, &mut rng) - &tilde.tilde)
                        .norm_squared()
                })
                .sum::<f64>()
                / trials as f64;
            xs.push(p.log10());
            ys.push(mean.log10());
        }
        let (slope, _) = least_squares_slope(&xs, &ys);
        check((slope + a).abs() <= 0.05, || {
            format!("error-decay slope {slope:.3} for A = {a}")
        })?;
    }
    Ok(())
}

fn csit_rvq_monotone_and_canonical() -> Result<(), String> {
    let dims = Dims::new(1, vec![2], vec![2], vec![1]).map_err(|e| e.to_string())?;
    let trials = 1000u64;
    let mut prev = f64::INFINITY;
    for bits in [2u32, 4, 6, 8, 10, 12, 14, 16] {
        let mean: f64 = (0..trials)
            .into_par_iter()
            .map(|t| {
                let tilde =
                    normalize_link(&generate_channel_trial(&dims, 800, t).links[0][0]).unwrap();
                let mut rng = stream_rng(801, (t << 8) | bits as u64);
                let (w, dist) = rvq_quantize(&tilde, bits, &mut rng).unwrap();
                debug_assert!(w[(0, 0)].im == 0.0 && w[(0, 0)].re >= 0.0);
                assert!((w.norm() - 1.0).abs() < 1e-12);
                dist * dist
            })
            .sum::<f64>()
            / trials as f64;
        check(mean < prev, || format!("distortion not decreasing at B = {bits}"))?;
        prev = mean;
    }
    Ok(())
}

// ---- ia3 ----

fn ia3_perfect_alignment_exactness() -> Result<(), String> {
    let dims = Dims::square3(2);
    let worst = (0..1000u64)
        .into_par_iter()
        .map(|t| {
            let ch = generate_channel_trial(&dims, 900, t);
            let sol = solve_perfect(&ch, 2).unwrap();
            // Unnormalized residual: scale invariance carries alignment from
            // the normalized links to the raw channel.
            let mut worst = 0.0f64;
            for i in 0..3 {
                for j in 0..3 {
                    if i == j {
                        continue;
                    }
                    worst = worst.max(
                        (sol.filters[i].adjoint() * &ch.links[i][j] * &sol.precoders[j]).norm(),
                    );
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    check(worst <= 1e-8, || format!("worst residual {worst:.3e}"))
}

fn ia3_fixed_point_property() -> Result<(), String> {
    let dims = Dims::square3(2);
    for t in 0..50u64 {
        let ch = generate_channel_trial(&dims, 901, t);
        let links = normalized_grid(&ch).map_err(|e| e.to_string())?;
        let sol = solve_on_links(&links, 2).map_err(|e| e.to_string())?;
        let y = compute_cascade(&links).map_err(|e| e.to_string())?;
        let mut lam = CMatrix::zeros(2, 2);
        for k in 0..2 {
            lam[(k, k)] = sol.cascade_eigs[k];
        }
        let resid = (&y * &sol.precoders[0] - &sol.precoders[0] * lam).norm();
        check(resid <= 1e-9, || format!("fixed-point residual {resid:.3e} at trial {t}"))?;
        let defect = span_defect(&links, &sol).map_err(|e| e.to_string())?;
        check(defect <= 1e-9, || format!("span defect {defect:.3e} at trial {t}"))?;
    }
    Ok(())
}

fn ia3_scaling_invariance() -> Result<(), String> {
    let dims = Dims::square3(2);
    for t in 0..20u64 {
        let ch = generate_channel_trial(&dims, 902, t);
        let sol = solve_perfect(&ch, 2).map_err(|e| e.to_string())?;
        let mut scaled = ch.clone();
        let c = Complex64::new(0.2 + t as f64 * 0.1, -1.3);
        scaled.links[(t % 3) as usize][((t + 2) % 3) as usize] *= c;
        let sol2 = solve_perfect(&scaled, 2).map_err(|e| e.to_string())?;
        for (a, b) in sol
            .precoders
            .iter()
            .chain(&sol.filters)
            .zip(sol2.precoders.iter().chain(&sol2.filters))
        {
            let delta = (a - b).norm();
            check(delta <= 1e-10, || format!("delta {delta:.3e} at trial {t}"))?;
        }
    }
    Ok(())
}

fn ia3_distributed_consistency() -> Result<(), String> {
    use crate::csit::make_estimates;
    use crate::ia3::solve_distributed;
    let dims = Dims::square3(2);
    let ch = generate_channel_trial(&dims, 903, 0);
    let profile = CsitProfile::uniform(3, f64::INFINITY, CsitModel::Gaussian);
    let ests =
        make_estimates(&ch, &profile, 100.0, ErrorNorm::Unit, 903, 0, 0).map_err(|e| e.to_string())?;
    let dist = solve_distributed(&ests, 2).map_err(|e| e.to_string())?;
    let perfect = solve_perfect(&ch, 2).map_err(|e| e.to_string())?;
    for j in 0..3 {
        check(dist.used_precoders[j] == perfect.precoders[j], || {
            format!("TX {j} precoder differs from the centralized solve")
        })?;
    }
    Ok(())
}

// ---- metrics / harness ----

fn metrics_rate_monotone_under_alignment() -> Result<(), String> {
    use crate::metrics::rate_user;
    let dims = Dims::square3(2);
    for t in 0..10u64 {
        let ch = generate_channel_trial(&dims, 904, t);
        let sol = solve_perfect(&ch, 2).map_err(|e| e.to_string())?;
        let resid = alignment_residual(&normalized_grid(&ch).unwrap(), &sol);
        check(resid <= 1e-9, || format!("leakage {resid:.3e}"))?;
        for i in 0..3 {
            let mut prev = -1.0;
            for db in (0..=60).step_by(10) {
                let p = 10f64.powf(db as f64 / 10.0);
                let r = rate_user(&ch, &sol.precoders, &sol.filters, p, i);
                check(r >= prev, || format!("rate not monotone at {db} dB, user {i}"))?;
                prev = r;
            }
        }
    }
    Ok(())
}

fn harness_determinism_and_dominance() -> Result<(), String> {
    let mut s = Scenario::golden().with_csit(CsitConfig::Perfect);
    s.trials = 100;
    s.snr_grid_db = vec![20.0, 30.0, 40.0];
    let a = run_sweep(&s).map_err(|e| e.to_string())?;
    let b = run_sweep(&s).map_err(|e| e.to_string())?;
    check(a.points == b.points && a.scenario_hash == b.scenario_hash, || {
        "sweep not deterministic".into()
    })?;

    let noisy = run_sweep(
        &s.clone()
            .with_csit(CsitConfig::Profile(CsitProfile::uniform(
                3,
                0.5,
                CsitModel::Gaussian,
            ))),
    )
    .map_err(|e| e.to_string())?;
    for (pi, (pp, np)) in a.points.iter().zip(&noisy.points).enumerate() {
        for u in 0..3 {
            let margin = 2.0 * (a.stderr[pi][u] + noisy.stderr[pi][u]);
            check(pp.per_user_rate[u] >= np.per_user_rate[u] - margin, || {
                format!("dominance violated at {} dB user {u}", pp.p_db)
            })?;
        }
    }
    Ok(())
}

fn harness_trial_count_consistency() -> Result<(), String> {
    let mut s = Scenario::golden().with_csit(CsitConfig::Perfect);
    s.snr_grid_db = vec![20.0, 40.0];
    s.trials = 150;
    let small = run_sweep(&s).map_err(|e| e.to_string())?;
    s.trials = 300;
    let large = run_sweep(&s).map_err(|e| e.to_string())?;
    for (pi, (sp, lp)) in small.points.iter().zip(&large.points).enumerate() {
        for u in 0..3 {
            let delta = (sp.per_user_rate[u] - lp.per_user_rate[u]).abs();
            check(delta <= 3.0 * small.stderr[pi][u], || {
                format!("mean moved by {delta:.3} at {} dB user {u}", sp.p_db)
            })?;
        }
    }
    Ok(())
}

pub const CHECKS: &[Check] = &[
    ("numkit.eig_reconstruction", numkit_eig_reconstruction),
    ("numkit.chordal_right_invariance", numkit_chordal_right_invariance),
    ("numkit.complement_deterministic", numkit_complement_deterministic),
    ("channel.normalization_roundtrip", channel_normalization_roundtrip),
    ("channel.links_never_singular", channel_links_never_singular),
    ("csit.gaussian_scaling_law", csit_gaussian_scaling_law),
    ("csit.rvq_monotone_and_canonical", csit_rvq_monotone_and_canonical),
    ("ia3.perfect_alignment_exactness", ia3_perfect_alignment_exactness),
    ("ia3.fixed_point_property", ia3_fixed_point_property),
    ("ia3.scaling_invariance", ia3_scaling_invariance),
    ("ia3.distributed_consistency", ia3_distributed_consistency),
    ("metrics.rate_monotone_under_alignment", metrics_rate_monotone_under_alignment),
    ("harness.determinism_and_dominance", harness_determinism_and_dominance),
    ("harness.trial_count_consistency", harness_trial_count_consistency),
];

/// Runs every check, printing one line per check; returns the number of
/// failures.
pub fn run_all(mut out: impl std::io::Write) -> usize {
    let mut failures = 0;
    for (name, f) in CHECKS {
        match f() {
            Ok(()) => {
                let _ = writeln!(out, "PASS {name}");
            }
            Err(msg) => {
                failures += 1;
                let _ = writeln!(out, "FAIL {name}: {msg}");
            }
        }
    }
    failures
}
