//! Closed-form IA solver for the 3-user tightly-feasible square channel
//! (`M = N = 2d`).
//!
//! The first precoder is built from the dominant eigenvectors of the
//! six-factor cascade of cross links; the other two follow by chaining, and
//! the receive filters are orthonormal complements of the aligned
//! interference subspaces. `solve_distributed` runs the identical pipeline
//! once per TX on that TX's own channel estimate and keeps only the
//! precoder each TX actually transmits with.

use num_complex::Complex64;

use crate::channel::{normalize_link, MultiUserChannel};
use crate::csit::CsitEstimate;
use crate::error::{Error, Result};
use crate::numkit::{
    chordal_distance, eig_general, inverse, orthonormal_complement, CMatrix,
};

/// One complete IA solution: three precoders `U_j` (2d x d), three receive
/// filters `G_i` (2d x d), all unit Frobenius norm.
#[derive(Debug, Clone)]
pub struct IaSolution {
    pub precoders: Vec<CMatrix>,
    pub filters: Vec<CMatrix>,
    pub cascade_eigs: Vec<Complex64>,
    pub min_eig_gap: f64,
    /// Set when the cascade spectrum has a near-tie; the "first d"
    /// eigenvector selection is then ambiguous across TXs.
    pub degenerate: bool,
}

/// The per-TX solutions plus the precoders actually used on air:
/// `used_precoders[j] = per_tx_solutions[j].precoders[j]`.
#[derive(Debug, Clone)]
pub struct DistributedSolution {
    pub used_precoders: Vec<CMatrix>,
    pub per_tx_solutions: Vec<IaSolution>,
}

fn checked_inverse(links: &[Vec<CMatrix>], i: usize, k: usize) -> Result<CMatrix> {
    inverse(&links[i][k])
        .map(|inv| inv.matrix)
        .map_err(|_| Error::SingularLink { i, k })
}

/// The cascade `Y = H31^-1 H32 H12^-1 H13 H23^-1 H21` (0-based indices in
/// the grid).
pub fn compute_cascade(links: &[Vec<CMatrix>]) -> Result<CMatrix> {
    let h31_inv = checked_inverse(links, 2, 0)?;
    let h12_inv = checked_inverse(links, 0, 1)?;
    let h23_inv = checked_inverse(links, 1, 2)?;
    Ok(h31_inv * &links[2][1] * h12_inv * &links[0][2] * h23_inv * &links[1][0])
}

fn normalize_frob(x: CMatrix) -> Result<CMatrix> {
    let n = x.norm();
    if n == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    Ok(x / Complex64::new(n, 0.0))
}

/// Runs the closed-form pipeline on an arbitrary link grid (true normalized
/// links or one TX's estimates, used verbatim).
pub fn solve_on_links(links: &[Vec<CMatrix>], d: usize) -> Result<IaSolution> {
    let cascade = compute_cascade(links)?;
    let eig = eig_general(&cascade)?;

    let n = cascade.nrows();
    if d == 0 || 2 * d != n {
        return Err(Error::DimensionMismatch(format!(
            "cascade is {n}x{n} but d = {d}"
        )));
    }
    let scale = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    let u1 = eig.vectors.columns(0, d).into_owned() * scale;
    let u3 = normalize_frob(checked_inverse(links, 1, 2)? * &links[1][0] * &u1)?;
    let u2 = normalize_frob(checked_inverse(links, 0, 1)? * &links[0][2] * &u3)?;
    let precoders = vec![u1, u2, u3];

    // At RX i both interferers span the same d-dim subspace; the complement
    // of either is the interference-free filter.
    let mut filters = Vec::with_capacity(3);
    for i in 0..3 {
        let j = (i + 1) % 3;
        let aligned = &links[i][j] * &precoders[j];
        let q = orthonormal_complement(&aligned).map_err(|e| match e {
            Error::EmptyComplement => Error::EmptyComplement,
            other => other,
        })?;
        if q.ncols() != d {
            return Err(Error::EmptyComplement);
        }
        filters.push(q * scale);
    }

    Ok(IaSolution {
        precoders,
        filters,
        cascade_eigs: eig.values,
        min_eig_gap: eig.min_gap,
        degenerate: eig.degenerate,
    })
}

/// Perfect-CSI solution: normalizes every link of the true channel and runs
/// the pipeline on the normalized grid.
pub fn solve_perfect(channel: &MultiUserChannel, d: usize) -> Result<IaSolution> {
    if !channel.dims.is_square3() || channel.dims.d[0] != d {
        return Err(Error::DimensionMismatch(format!(
            "closed-form solver needs the 3-user square case with d = {d}"
        )));
    }
    let links = normalized_grid(channel)?;
    solve_on_links(&links, d)
}

pub fn normalized_grid(channel: &MultiUserChannel) -> Result<Vec<Vec<CMatrix>>> {
    channel
        .links
        .iter()
        .map(|row| {
            row.iter()
                .map(|h| normalize_link(h).map(|nl| nl.tilde))
                .collect()
        })
        .collect()
}

/// Each TX solves the whole IA problem on its own estimate; only the TX's
/// own precoder survives.
pub fn solve_distributed(estimates: &[CsitEstimate], d: usize) -> Result<DistributedSolution> {
    if estimates.len() != 3 {
        return Err(Error::DimensionMismatch(format!(
            "need 3 per-TX estimates, got {}",
            estimates.len()
        )));
    }
    let mut per_tx = Vec::with_capacity(3);
    for (j, est) in estimates.iter().enumerate() {
        let sol = solve_on_links(&est.links, d).map_err(|e| Error::TxSolve {
            tx: j,
            source: Box::new(e),
        })?;
        per_tx.push(sol);
    }
    let used = (0..3).map(|j| per_tx[j].precoders[j].clone()).collect();
    Ok(DistributedSolution {
        used_precoders: used,
        per_tx_solutions: per_tx,
    })
}

/// Membership test for the well-conditioned channel set: every normalized
/// link has smallest singular value >= eps and the cascade eigenvalues are
/// pairwise separated by >= eps.
pub fn conditioning_filter(channel: &MultiUserChannel, eps: f64) -> bool {
    let links = match normalized_grid(channel) {
        Ok(l) => l,
        Err(_) => return false,
    };
    for row in &links {
        for l in row {
            let svd = l.clone().svd(false, false);
            let smin = svd
                .singular_values
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            if smin < eps {
                return false;
            }
        }
    }
    let cascade = match compute_cascade(&links) {
        Ok(y) => y,
        Err(_) => return false,
    };
    match eig_general(&cascade) {
        // Gate the pairwise *modulus* gaps. By the reverse triangle
        // inequality this implies the complex-plane gaps are >= eps too
        // (eigenvector conditioning), and it additionally pins down the
        // sort-by-|lambda| column selection, which flips under perturbation
        // exactly when two moduli nearly tie.
        Ok(e) => {
            let n = e.values.len();
            for i in 0..n {
                for j in (i + 1)..n {
                    if (e.values[i].norm() - e.values[j].norm()).abs() < eps {
                        return false;
                    }
                }
            }
            true
        }
        Err(_) => false,
    }
}

/// Total residual interference after filtering against the *normalized*
/// links, the quantity the alignment equations set to zero.
pub fn alignment_residual(links: &[Vec<CMatrix>], sol: &IaSolution) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            if i == j {
                continue;
            }
            let r = (sol.filters[i].adjoint() * &links[i][j] * &sol.precoders[j]).norm();
            worst = worst.max(r);
        }
    }
    worst
}

#[allow(unused)]
pub fn span_defect(links: &[Vec<CMatrix>], sol: &IaSolution) -> Result<f64> {
    // The three span conditions, reported as the worst chordal distance.
    let pairs = [
        ((2usize, 0usize, 0usize), (2usize, 1usize, 1usize)),
        ((0, 1, 1), (0, 2, 2)),
        ((1, 2, 2), (1, 0, 0)),
    ];
    let mut worst = 0.0f64;
    for ((i1, k1, u1), (i2, k2, u2)) in pairs {
        let a = &links[i1][k1] * &sol.precoders[u1];
        let b = &links[i2][k2] * &sol.precoders[u2];
        worst = worst.max(chordal_distance(&a, &b)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channel_trial, Dims};
    use crate::csit::{make_estimates, CsitModel, CsitProfile, ErrorNorm};
    use crate::numkit::from_row_major;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn identity_grid(n: usize) -> Vec<Vec<CMatrix>> {
        vec![vec![CMatrix::identity(n, n); 3]; 3]
    }

    #[test]
    fn cascade_of_identities() {
        let y = compute_cascade(&identity_grid(4)).unwrap();
        assert!((y - CMatrix::identity(4, 4)).norm() < 1e-14);
    }

    #[test]
    fn cascade_of_diagonals_matches_scalar_oracle() {
        // Diagonal links reduce the cascade to entry-wise scalar products.
        let diag = |vals: [f64; 2]| {
            from_row_major(
                2,
                2,
                &[c(vals[0], 0.0), c(0.0, 0.0), c(0.0, 0.0), c(vals[1], 0.0)],
            )
            .unwrap()
        };
        let mut links = identity_grid(2);
        links[2][0] = diag([2.0, 3.0]);
        links[2][1] = diag([4.0, 5.0]);
        links[0][1] = diag([0.5, 0.25]);
        links[0][2] = diag([7.0, 11.0]);
        links[1][2] = diag([1.0, 2.0]);
        links[1][0] = diag([3.0, 1.0]);
        let y = compute_cascade(&links).unwrap();
        for k in 0..2 {
            let expect = (1.0 / links[2][0][(k, k)].re)
                * links[2][1][(k, k)].re
                * (1.0 / links[0][1][(k, k)].re)
                * links[0][2][(k, k)].re
                * (1.0 / links[1][2][(k, k)].re)
                * links[1][0][(k, k)].re;
            assert_abs_diff_eq!(y[(k, k)].re, expect, epsilon = 1e-12);
        }
        assert!(y[(0, 1)].norm() < 1e-14 && y[(1, 0)].norm() < 1e-14);
    }

    // Independent oracle: associate the product right-to-left instead.
    #[test]
    fn cascade_matches_alternative_association() {
        let dims = Dims::square3(2);
        let ch = generate_channel_trial(&dims, 31, 0);
        let links = normalized_grid(&ch).unwrap();
        let y = compute_cascade(&links).unwrap();

        let inv = |i: usize, k: usize| inverse(&links[i][k]).unwrap().matrix;
        let factors = [
            inv(2, 0),
            links[2][1].clone(),
            inv(0, 1),
            links[0][2].clone(),
            inv(1, 2),
            links[1][0].clone(),
        ];
        let mut acc = factors[5].clone();
        for f in factors[..5].iter().rev() {
            acc = f * acc;
        }
        assert!((y - acc).norm() < 1e-10);
    }

    #[test]
    fn cascade_reports_singular_link() {
        let mut links = identity_grid(2);
        links[0][1] = CMatrix::zeros(2, 2);
        match compute_cascade(&links) {
            Err(Error::SingularLink { i: 0, k: 1 }) => {}
            other => panic!("expected SingularLink(0,1), got {other:?}"),
        }
    }

    #[test]
    fn perfect_solution_aligns() {
        let dims = Dims::square3(2);
        for t in 0..20 {
            let ch = generate_channel_trial(&dims, 40, t);
            let sol = solve_perfect(&ch, 2).unwrap();
            let links = normalized_grid(&ch).unwrap();
            assert!(alignment_residual(&links, &sol) <= 1e-9);
            assert!(span_defect(&links, &sol).unwrap() <= 1e-9);
            for m in sol.precoders.iter().chain(&sol.filters) {
                assert_abs_diff_eq!(m.norm(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn u1_columns_are_cascade_eigenvectors() {
        let dims = Dims::square3(2);
        let ch = generate_channel_trial(&dims, 41, 0);
        let sol = solve_perfect(&ch, 2).unwrap();
        let links = normalized_grid(&ch).unwrap();
        let y = compute_cascade(&links).unwrap();
        let mut lam = CMatrix::zeros(2, 2);
        for k in 0..2 {
            lam[(k, k)] = sol.cascade_eigs[k];
        }
        assert!((&y * &sol.precoders[0] - &sol.precoders[0] * lam).norm() <= 1e-9);
    }

    #[test]
    fn scaling_any_link_leaves_solution_unchanged() {
        let dims = Dims::square3(2);
        let ch = generate_channel_trial(&dims, 42, 0);
        let sol = solve_perfect(&ch, 2).unwrap();
        let mut scaled = ch.clone();
        scaled.links[1][2] *= c(-0.3, 1.7);
        let sol2 = solve_perfect(&scaled, 2).unwrap();
        for (a, b) in sol.precoders.iter().zip(&sol2.precoders) {
            assert!((a - b).norm() < 1e-10, "precoder diff {}", (a - b).norm());
        }
        for (a, b) in sol.filters.iter().zip(&sol2.filters) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn zero_error_distributed_equals_perfect() {
        let dims = Dims::square3(2);
        let ch = generate_channel_trial(&dims, 43, 0);
        let profile = CsitProfile::uniform(3, f64::INFINITY, CsitModel::Gaussian);
        let ests = make_estimates(&ch, &profile, 100.0, ErrorNorm::Unit, 43, 0, 0).unwrap();
        let dist = solve_distributed(&ests, 2).unwrap();
        let perfect = solve_perfect(&ch, 2).unwrap();
        for j in 0..3 {
            assert_eq!(dist.used_precoders[j], perfect.precoders[j]);
            assert_eq!(dist.used_precoders[j], dist.per_tx_solutions[j].precoders[j]);
        }
    }

    #[test]
    fn small_common_error_gives_quadratic_precoder_error() {
        let dims = Dims::square3(2);
        let sigma = 1e-6;
        let mut worst_ratio = 0.0f64;
        let mut trials_used = 0;
        // The conditioning filter only accepts roughly a quarter of random
        // channels at eps = 0.05; draw until 100 survive.
        for t in 0..800 {
            if trials_used == 100 {
                break;
            }
            let ch = generate_channel_trial(&dims, 44, t);
            if !conditioning_filter(&ch, 0.05) {
                continue;
            }
            trials_used += 1;
            let perfect = solve_perfect(&ch, 2).unwrap();
            let profile = CsitProfile {
                a: vec![vec![vec![1.0; 3]; 3]; 3],
                model: CsitModel::Gaussian,
                c: sigma * sigma,
            };
            // P = 1 makes sigma_from_scaling return sqrt(C) = sigma exactly.
            let ests = make_estimates(&ch, &profile, 1.0, ErrorNorm::Unit, 44, t, 0).unwrap();
            let dist = solve_distributed(&ests, 2).unwrap();
            for j in 0..3 {
                let err = (&dist.used_precoders[j] - &perfect.precoders[j]).norm_squared();
                worst_ratio = worst_ratio.max(err / (sigma * sigma));
            }
        }
        assert_eq!(trials_used, 100);
        // O(sigma^2): the ratio stays bounded on well-conditioned channels.
        assert!(worst_ratio < 1e6, "worst ratio = {worst_ratio}");
    }

    #[test]
    fn modifying_one_tx_estimate_leaves_others_unchanged() {
        let dims = Dims::square3(2);
        let ch = generate_channel_trial(&dims, 45, 0);
        let profile = CsitProfile::uniform(3, 1.0, CsitModel::Gaussian);
        let ests = make_estimates(&ch, &profile, 100.0, ErrorNorm::Unit, 45, 0, 0).unwrap();
        let mut modified = ests.clone();
        modified[1].links[0][1][(0, 0)] += c(0.05, -0.02);
        let a = solve_distributed(&ests, 2).unwrap();
        let b = solve_distributed(&modified, 2).unwrap();
        assert_eq!(a.used_precoders[0], b.used_precoders[0]);
        assert_eq!(a.used_precoders[2], b.used_precoders[2]);
        assert_ne!(a.used_precoders[1], b.used_precoders[1]);
    }

    #[test]
    fn conditioning_filter_cases() {
        let dims = Dims::square3(2);
        let ch = generate_channel_trial(&dims, 46, 0);
        assert!(conditioning_filter(&ch, 0.0));

        // All links identity except one diagonal with repeated entries:
        // the cascade has a repeated eigenvalue.
        let mut degenerate = ch.clone();
        for i in 0..3 {
            for k in 0..3 {
                degenerate.links[i][k] = CMatrix::identity(4, 4);
            }
        }
        assert!(!conditioning_filter(&degenerate, 1e-6));
        assert!(conditioning_filter(&degenerate, 0.0));
    }

    #[test]
    fn rejection_fraction_monotone_in_eps() {
        let dims = Dims::square3(2);
        let channels: Vec<_> = (0..200)
            .map(|t| generate_channel_trial(&dims, 47, t))
            .collect();
        let mut prev_rejected = 0usize;
        for eps in [0.0, 0.02, 0.05, 0.1, 0.2] {
            let rejected = channels
                .iter()
                .filter(|ch| !conditioning_filter(ch, eps))
                .count();
            assert!(rejected >= prev_rejected, "not monotone at eps = {eps}");
            prev_rejected = rejected;
        }
    }
}
