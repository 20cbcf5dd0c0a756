//! Per-transmitter CSI models.
//!
//! Each TX `j` holds its own estimate of every normalized link `(i,k)`.
//! Accuracy is controlled by the scaling exponents `A[i][k][j]`: the
//! estimation error variance decays as `sigma^2 = C * P^{-A}`. Two error
//! models are provided: explicit random vector quantization against an
//! isotropic codebook, and the additive Gaussian surrogate that the scaling
//! law composes to.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{normalize_link, MultiUserChannel, NormalizedLink};
use crate::error::{Error, Result};
use crate::numkit::CMatrix;
use crate::rng::{complex_gaussian, stream_id, stream_rng, DOMAIN_CSIT};

/// Largest codebook exponent the brute-force RVQ search accepts.
pub const RVQ_MAX_BITS: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsitModel {
    Rvq,
    Gaussian,
}

/// How the additive error matrix is scaled.
///
/// `Unit` draws entries with variance `1/(N*M)` so that `E||N||_F^2 = 1` and
/// `sigma^2` is exactly the expected squared error. `PerEntry` draws CN(0,1)
/// entries, making the error energy `N*M` times larger.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorNorm {
    Unit,
    PerEntry,
}

/// CSIT scaling exponents: `a[i][k][j]` is the accuracy with which TX `j`
/// knows the link from TX `k` to RX `i`. `f64::INFINITY` means perfect
/// knowledge of that link.
#[derive(Debug, Clone)]
pub struct CsitProfile {
    pub a: Vec<Vec<Vec<f64>>>,
    pub model: CsitModel,
    /// Distortion constant in `sigma^2 = C * P^{-A}`.
    pub c: f64,
}

impl CsitProfile {
    pub fn uniform(k: usize, a: f64, model: CsitModel) -> Self {
        Self {
            a: vec![vec![vec![a; k]; k]; k],
            model,
            c: 1.0,
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.a.len() != k
            || self.a.iter().any(|r| r.len() != k)
            || self.a.iter().flatten().any(|v| v.len() != k)
        {
            return Err(Error::InvalidScenario(format!(
                "CSIT grid must be {k}x{k}x{k}"
            )));
        }
        if self.a.iter().flatten().flatten().any(|&v| v < 0.0 || v.is_nan()) {
            return Err(Error::InvalidScenario(
                "CSIT scaling coefficients must be nonnegative".into(),
            ));
        }
        if !(self.c > 0.0) {
            return Err(Error::InvalidScenario("C must be positive".into()));
        }
        Ok(())
    }
}

/// The multi-user channel as seen by one TX.
#[derive(Debug, Clone)]
pub struct CsitEstimate {
    pub owner: usize,
    pub links: Vec<Vec<CMatrix>>,
    pub sigmas: Vec<Vec<f64>>,
}

/// Quantization error std from a bit budget: `sigma^2 = C * 2^{-B/(NM-1)}`.
pub fn sigma_from_bits(bits: u32, n: usize, m: usize, c: f64) -> f64 {
    let dof = (n * m - 1) as f64;
    (c * 2f64.powf(-(bits as f64) / dof)).sqrt()
}

/// Bit budget realizing accuracy `a` at SNR `p`: `B = round(a*(NM-1)*log2 P)`.
pub fn bits_from_scaling(a: f64, p: f64, n: usize, m: usize) -> u64 {
    if a == 0.0 {
        return 0;
    }
    let b = a * ((n * m - 1) as f64) * p.log2();
    if !b.is_finite() {
        return u64::MAX;
    }
    b.round().max(0.0) as u64
}

/// The composed law, bypassing bit rounding: `sigma^2 = C * P^{-A}`.
pub fn sigma_from_scaling(a: f64, p: f64, c: f64) -> f64 {
    if a.is_infinite() {
        return 0.0;
    }
    (c * p.powf(-a)).sqrt()
}

/// Draws one isotropic unit-norm codeword into `buf`, rotated so its first
/// element is real and nonnegative.
fn draw_codeword<R: Rng>(rng: &mut R, buf: &mut [Complex64]) {
    let mut norm_sq = 0.0;
    for e in buf.iter_mut() {
        *e = complex_gaussian(rng, 1.0);
        norm_sq += e.norm_sqr();
    }
    let norm = norm_sq.sqrt();
    let first = buf[0];
    let rot = if first.norm() > 0.0 {
        first.conj() / first.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    for e in buf.iter_mut() {
        *e = *e * rot / norm;
    }
    buf[0] = Complex64::new(buf[0].norm(), 0.0);
}

/// Brute-force nearest-codeword search over a streamed random codebook of
/// `2^bits` words. Returns the chosen word (reshaped to the link's shape)
/// and the achieved distortion `||tilde - W||_F`.
pub fn rvq_quantize<R: Rng>(
    tilde: &NormalizedLink,
    bits: u32,
    rng: &mut R,
) -> Result<(CMatrix, f64)> {
    if bits > RVQ_MAX_BITS {
        return Err(Error::CodebookTooLarge {
            bits,
            max: RVQ_MAX_BITS,
        });
    }
    let (n, m) = tilde.tilde.shape();
    // Column-stacked target, matching the codeword layout.
    let target: Vec<Complex64> = tilde.tilde.iter().cloned().collect();
    let len = n * m;
    let mut word = vec![Complex64::new(0.0, 0.0); len];
    let mut best = vec![Complex64::new(0.0, 0.0); len];
    let mut best_score = f64::NEG_INFINITY;
    for _ in 0..(1u64 << bits) {
        draw_codeword(rng, &mut word);
        // ||t - w||^2 = 2 - 2 Re<w, t> for unit-norm t, w.
        let score: f64 = word
            .iter()
            .zip(&target)
            .map(|(w, t)| (w.conj() * t).re)
            .sum();
        if score > best_score {
            best_score = score;
            best.copy_from_slice(&word);
        }
    }
    let chosen = CMatrix::from_vec(n, m, best);
    let distortion = (&chosen - &tilde.tilde).norm();
    Ok((chosen, distortion))
}

/// Additive Gaussian error: `tilde + sigma * N`, not re-normalized.
pub fn gaussian_perturb<R: Rng>(
    tilde: &NormalizedLink,
    sigma: f64,
    error_norm: ErrorNorm,
    rng: &mut R,
) -> CMatrix {
    let (n, m) = tilde.tilde.shape();
    let var = match error_norm {
        ErrorNorm::Unit => 1.0 / (n * m) as f64,
        ErrorNorm::PerEntry => 1.0,
    };
    let noise = CMatrix::from_fn(n, m, |_, _| complex_gaussian(rng, var));
    &tilde.tilde + noise * Complex64::new(sigma, 0.0)
}

/// Produces the K per-TX channel estimates for one `(seed, trial, snr_idx)`
/// cell. Each `(j, i, k)` error draw has its own stream, so the estimates at
/// different TXs are independent by construction.
#[allow(clippy::too_many_arguments)]
pub fn make_estimates(
    channel: &MultiUserChannel,
    profile: &CsitProfile,
    p: f64,
    error_norm: ErrorNorm,
    seed: u64,
    trial: u64,
    snr_idx: usize,
) -> Result<Vec<CsitEstimate>> {
    let k_users = channel.dims.k;
    profile.validate(k_users)?;
    let mut out = Vec::with_capacity(k_users);
    for j in 0..k_users {
        let mut links = Vec::with_capacity(k_users);
        let mut sigmas = Vec::with_capacity(k_users);
        for i in 0..k_users {
            let mut row = Vec::with_capacity(k_users);
            let mut srow = Vec::with_capacity(k_users);
            for k in 0..k_users {
                let nl = normalize_link(&channel.links[i][k])?;
                let a = profile.a[i][k][j];
                let sigma = sigma_from_scaling(a, p, profile.c);
                let mut rng = stream_rng(
                    seed,
                    stream_id(
                        DOMAIN_CSIT,
                        trial,
                        snr_idx as u64,
                        j as u64,
                        ((i as u64) << 4) | k as u64,
                    ),
                );
                let est = if a.is_infinite() {
                    nl.tilde.clone()
                } else {
                    match profile.model {
                        CsitModel::Gaussian => gaussian_perturb(&nl, sigma, error_norm, &mut rng),
                        CsitModel::Rvq => {
                            let (nn, mm) = nl.tilde.shape();
                            let bits = bits_from_scaling(a, p, nn, mm);
                            if bits > RVQ_MAX_BITS as u64 {
                                return Err(Error::CodebookTooLarge {
                                    bits: bits.min(u32::MAX as u64) as u32,
                                    max: RVQ_MAX_BITS,
                                });
                            }
                            rvq_quantize(&nl, bits as u32, &mut rng)?.0
                        }
                    }
                };
                row.push(est);
                srow.push(sigma);
            }
            links.push(row);
            sigmas.push(srow);
        }
        out.push(CsitEstimate {
            owner: j,
            links,
            sigmas,
        });
    }
    Ok(out)
}
