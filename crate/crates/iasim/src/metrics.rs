//! Rates, leakage, precoder distances and DoF slope fits.

use num_complex::Complex64;

use crate::channel::MultiUserChannel;
use crate::error::{Error, Result};
use crate::numkit::{chordal_distance, CMatrix};

/// Trial-averaged rates at one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub p_db: f64,
    pub per_user_rate: Vec<f64>,
}

/// Least-squares high-SNR slope per user, with the dB window used and the
/// fit quality.
#[derive(Debug, Clone)]
pub struct DofEstimate {
    pub per_user_slope: Vec<f64>,
    pub window: (f64, f64),
    pub r2: Vec<f64>,
}

/// Instantaneous rate of user `i`:
/// `log2 |I + P Rbar^-1 G^H H_ii U_i U_i^H H_ii^H G|` with
/// `Rbar = I + P sum_{l != i} G^H H_il U_l U_l^H H_il^H G`, using the true
/// (unnormalized) channel and unit noise.
pub fn rate_user(
    channel: &MultiUserChannel,
    precoders: &[CMatrix],
    filters: &[CMatrix],
    p: f64,
    i: usize,
) -> f64 {
    let g = &filters[i];
    let d = g.ncols();
    let pc = Complex64::new(p, 0.0);
    let mut rbar = CMatrix::identity(d, d);
    for (l, u) in precoders.iter().enumerate() {
        if l == i {
            continue;
        }
        let eff = g.adjoint() * &channel.links[i][l] * u;
        rbar += &eff * eff.adjoint() * pc;
    }
    let eff = g.adjoint() * &channel.links[i][i] * &precoders[i];
    let signal = &eff * eff.adjoint() * pc;
    let inner = match rbar.clone().lu().solve(&signal) {
        Some(x) => CMatrix::identity(d, d) + x,
        // Rbar = I + PSD is always invertible; this branch is unreachable.
        None => return 0.0,
    };
    let det = inner.determinant();
    det.norm().max(1.0).log2()
}

/// Total residual interference power after filtering:
/// `sum_i sum_{j != i} ||G_i^H H_ij U_j||_F^2`.
pub fn leakage(channel: &MultiUserChannel, precoders: &[CMatrix], filters: &[CMatrix]) -> f64 {
    let k = channel.dims.k;
    let mut total = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            total += (filters[i].adjoint() * &channel.links[i][j] * &precoders[j]).norm_squared();
        }
    }
    total
}

/// Frobenius and chordal distances between a precoder and its perfect-CSI
/// reference. The Frobenius number is meaningful because both pipelines
/// phase-canonicalize their eigenvectors; the chordal number is the
/// basis-free cross-check.
pub fn precoder_error(u: &CMatrix, u_star: &CMatrix) -> Result<(f64, f64)> {
    if u.shape() != u_star.shape() {
        return Err(Error::DimensionMismatch(format!(
            "precoder {}x{} vs reference {}x{}",
            u.nrows(),
            u.ncols(),
            u_star.nrows(),
            u_star.ncols()
        )));
    }
    let frob_sq = (u - u_star).norm_squared();
    let chord = chordal_distance(u, u_star)?;
    Ok((frob_sq, chord * chord))
}

/// Ordinary least squares `y = a + b x`, returning `(b, r2)`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if sxx > 0.0 && syy > 0.0 {
        (sxy * sxy) / (sxx * syy)
    } else if syy == 0.0 {
        1.0
    } else {
        0.0
    };
    (slope, r2)
}

/// Per-user slope of rate versus `log2 P` over the top `window_points`
/// entries of the sweep.
pub fn dof_slope(points: &[RatePoint], window_points: usize) -> Result<DofEstimate> {
    if window_points < 2 || points.len() < window_points {
        return Err(Error::TooFewPoints);
    }
    let window = &points[points.len() - window_points..];
    let users = window[0].per_user_rate.len();
    let xs: Vec<f64> = window
        .iter()
        .map(|pt| pt.p_db / 10.0 * 10f64.log2())
        .collect();
    let mut slopes = Vec::with_capacity(users);
    let mut r2s = Vec::with_capacity(users);
    for u in 0..users {
        let ys: Vec<f64> = window.iter().map(|pt| pt.per_user_rate[u]).collect();
        let (b, r2) = least_squares_slope(&xs, &ys);
        slopes.push(b);
        r2s.push(r2);
    }
    Ok(DofEstimate {
        per_user_slope: slopes,
        window: (window[0].p_db, window[window.len() - 1].p_db),
        r2: r2s,
    })
}

/// Compensated (Kahan) summation; used by the harness so parallel trial
/// reductions stay reproducible.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channel_trial, Dims};
    use crate::ia3::solve_perfect;
    use crate::numkit::from_row_major;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rate_zero_power() {
        let dims = Dims::square3(2);
        let ch = generate_channel_trial(&dims, 50, 0);
        let sol = solve_perfect(&ch, 2).unwrap();
        assert_eq!(rate_user(&ch, &sol.precoders, &sol.filters, 0.0, 0), 0.0);
    }

    #[test]
    fn perfect_ia_rate_reduces_to_interference_free_form() {
        let dims = Dims::square3(2);
        let ch = generate_channel_trial(&dims, 51, 0);
        let sol = solve_perfect(&ch, 2).unwrap();
        let p = 1000.0;
        for i in 0..3 {
            let g = &sol.filters[i];
            let eff = g.adjoint() * &ch.links[i][i] * &sol.precoders[i];
            let direct = (CMatrix::identity(2, 2) + &eff * eff.adjoint() * c(p, 0.0))
                .determinant()
                .norm()
                .log2();
            let full = rate_user(&ch, &sol.precoders, &sol.filters, p, i);
            assert_abs_diff_eq!(full, direct, epsilon = 1e-9);
        }
    }

    // Closed-form scalar oracle: N = M = d = 1, direct gain 1, one
    // interferer with effective gain c -> rate = log2(1 + P/(1 + P|c|^2)).
    #[test]
    fn scalar_rate_matches_closed_form() {
        let dims = Dims::new(2, vec![1, 1], vec![1, 1], vec![1, 1]).unwrap();
        let mut ch = generate_channel_trial(&dims, 52, 0);
        ch.links[0][0] = from_row_major(1, 1, &[c(1.0, 0.0)]).unwrap();
        let cross = c(0.3, -0.4);
        ch.links[0][1] = from_row_major(1, 1, &[cross]).unwrap();
        let ones = from_row_major(1, 1, &[c(1.0, 0.0)]).unwrap();
        let precoders = vec![ones.clone(), ones.clone()];
        let filters = vec![ones.clone(), ones.clone()];
        for p in [0.5, 10.0, 1e4] {
            let expect = (1.0 + p / (1.0 + p * cross.norm_sqr())).log2();
            let got = rate_user(&ch, &precoders, &filters, p, 0);
            assert_abs_diff_eq!(got, expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn rate_nondecreasing_in_power_without_leakage() {
        let dims = Dims::square3(2);
        let ch = generate_channel_trial(&dims, 53, 0);
        let sol = solve_perfect(&ch, 2).unwrap();
        for i in 0..3 {
            let mut prev = -1.0;
            for db in (0..=60).step_by(10) {
                let p = 10f64.powf(db as f64 / 10.0);
                let r = rate_user(&ch, &sol.precoders, &sol.filters, p, i);
                assert!(r >= prev);
                prev = r;
            }
        }
    }

    #[test]
    fn leakage_zero_at_solution_positive_otherwise() {
        let dims = Dims::square3(2);
        let ch = generate_channel_trial(&dims, 54, 0);
        let sol = solve_perfect(&ch, 2).unwrap();
        assert!(leakage(&ch, &sol.precoders, &sol.filters) <= 1e-18);

        let other = generate_channel_trial(&dims, 55, 0);
        let rnd = solve_perfect(&other, 2).unwrap();
        assert!(leakage(&ch, &rnd.precoders, &rnd.filters) > 1e-6);
    }

    #[test]
    fn leakage_scales_with_link_gain() {
        let dims = Dims::square3(2);
        let ch = generate_channel_trial(&dims, 56, 0);
        let other = generate_channel_trial(&dims, 57, 0);
        let sol = solve_perfect(&other, 2).unwrap();
        let base = leakage(&ch, &sol.precoders, &sol.filters);

        let scale = c(0.6, 1.1);
        let mut scaled = ch.clone();
        scaled.links[0][1] *= scale;
        let term_before = (sol.filters[0].adjoint() * &ch.links[0][1] * &sol.precoders[1])
            .norm_squared();
        let expected = base + (scale.norm_sqr() - 1.0) * term_before;
        let got = leakage(&scaled, &sol.precoders, &sol.filters);
        assert_abs_diff_eq!(got, expected, epsilon = 1e-9 * expected.abs().max(1.0));
    }

    #[test]
    fn precoder_error_cases() {
        let dims = Dims::square3(2);
        let ch = generate_channel_trial(&dims, 58, 0);
        let sol = solve_perfect(&ch, 2).unwrap();
        let u = &sol.precoders[0];
        let (f, ch2) = precoder_error(u, u).unwrap();
        assert_eq!((f, ch2), (0.0, 0.0));

        // Same span, different basis: chordal 0, Frobenius positive.
        let rot = from_row_major(
            2,
            2,
            &[c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)],
        )
        .unwrap();
        let (f, ch2) = precoder_error(&(u * rot), u).unwrap();
        assert!(ch2 < 1e-12);
        assert!(f > 0.1);

        assert!(precoder_error(&CMatrix::zeros(2, 2), u).is_err());
    }

    #[test]
    fn chordal_error_never_exceeds_frobenius_error() {
        // The two error measures are consistent, but neither bounds the
        // other by a fixed constant. Precoder columns are eigenvectors of a
        // non-normal cascade, so the basis can be ill-conditioned: a
        // Frobenius change of size e moves the span by at most
        // e / sigma_min(U*) (first order), giving the conditioning-aware
        // bound checked here. The converse fails too, because rotation of
        // the eigenbasis *within* the aligned span (size ~ sigma /
        // eigenvalue gap) moves the Frobenius error without moving the
        // chordal one.
        use crate::csit::{make_estimates, CsitModel, CsitProfile, ErrorNorm};
        use crate::ia3::{conditioning_filter, solve_distributed};
        let dims = Dims::square3(2);
        for t in 0..40 {
            let ch = generate_channel_trial(&dims, 59, t);
            if !conditioning_filter(&ch, 0.05) {
                continue;
            }
            let perfect = solve_perfect(&ch, 2).unwrap();
            let profile = CsitProfile::uniform(3, 1.0, CsitModel::Gaussian);
            let ests = make_estimates(&ch, &profile, 1e6, ErrorNorm::Unit, 59, t, 0).unwrap();
            let dist = solve_distributed(&ests, 2).unwrap();
            for j in 0..3 {
                let (f, c2) =
                    precoder_error(&dist.used_precoders[j], &perfect.precoders[j]).unwrap();
                let smin = perfect.precoders[j]
                    .clone()
                    .svd(false, false)
                    .singular_values
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                assert!(
                    c2 <= 4.0 * f / (smin * smin) + 1e-10,
                    "frob {f} vs chordal {c2} (smin {smin})"
                );
                // Both shrink together with the estimation noise.
                assert!(f < 1e-2 && c2 < 1e-2, "errors did not stay small: {f} {c2}");
            }
        }
    }

    #[test]
    fn dof_slope_synthetic() {
        let grid: Vec<f64> = (0..=6).map(|i| (i * 10) as f64).collect();
        let mk = |f: &dyn Fn(f64) -> f64| -> Vec<RatePoint> {
            grid.iter()
                .map(|&db| RatePoint {
                    p_db: db,
                    per_user_rate: vec![f(10f64.powf(db / 10.0))],
                })
                .collect()
        };
        let d = dof_slope(&mk(&|p| 2.0 * p.log2()), 3).unwrap();
        assert_abs_diff_eq!(d.per_user_slope[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.r2[0], 1.0, epsilon = 1e-12);
        assert_eq!(d.window, (40.0, 60.0));

        let d = dof_slope(&mk(&|_| 3.5), 3).unwrap();
        assert_abs_diff_eq!(d.per_user_slope[0], 0.0, epsilon = 1e-12);

        // log2(1 + sqrt(P)) sampled at 40..60 dB has slope ~0.5.
        let pts: Vec<RatePoint> = [40.0, 45.0, 50.0, 55.0, 60.0]
            .iter()
            .map(|&db| RatePoint {
                p_db: db,
                per_user_rate: vec![(1.0 + 10f64.powf(db / 20.0)).log2()],
            })
            .collect();
        let d = dof_slope(&pts, 5).unwrap();
        assert!((d.per_user_slope[0] - 0.5).abs() < 0.02);

        assert!(dof_slope(&pts, 6).is_err());
        assert!(dof_slope(&pts, 1).is_err());
    }

    #[test]
    fn dof_slope_is_linear_in_traces() {
        let grid = [30.0, 40.0, 50.0, 60.0];
        let a: Vec<RatePoint> = grid
            .iter()
            .map(|&db| RatePoint {
                p_db: db,
                per_user_rate: vec![0.7 * db],
            })
            .collect();
        let b: Vec<RatePoint> = grid
            .iter()
            .map(|&db| RatePoint {
                p_db: db,
                per_user_rate: vec![1.1 * db + 3.0],
            })
            .collect();
        let sum: Vec<RatePoint> = grid
            .iter()
            .enumerate()
            .map(|(i, &db)| RatePoint {
                p_db: db,
                per_user_rate: vec![a[i].per_user_rate[0] + b[i].per_user_rate[0]],
            })
            .collect();
        let sa = dof_slope(&a, 3).unwrap().per_user_slope[0];
        let sb = dof_slope(&b, 3).unwrap().per_user_slope[0];
        let ss = dof_slope(&sum, 3).unwrap().per_user_slope[0];
        assert_abs_diff_eq!(ss, sa + sb, epsilon = 1e-9);
    }
}
