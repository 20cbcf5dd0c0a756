//! Multi-user MIMO interference channel: Rayleigh generation and the
//! scale/phase normalization that makes alignment solutions comparable
//! across transmitters.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numkit::{frob_norm, CMatrix};
use crate::rng::{complex_gaussian, stream_id, stream_rng, DOMAIN_CHANNEL};

/// Antenna/stream configuration of a K-user interference channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dims {
    pub k: usize,
    /// TX antennas per user.
    pub m: Vec<usize>,
    /// RX antennas per user.
    pub n: Vec<usize>,
    /// Streams per user.
    pub d: Vec<usize>,
}

impl Dims {
    pub fn new(k: usize, m: Vec<usize>, n: Vec<usize>, d: Vec<usize>) -> Result<Self> {
        if k == 0 || m.len() != k || n.len() != k || d.len() != k {
            return Err(Error::InvalidScenario(format!(
                "dims lists must all have length K = {k}"
            )));
        }
        if m.iter().chain(&n).chain(&d).any(|&x| x == 0) {
            return Err(Error::InvalidScenario(
                "antenna and stream counts must be positive".into(),
            ));
        }
        Ok(Self { k, m, n, d })
    }

    /// Tightly-feasible 3-user square case: `M = N = 2d` for every user.
    pub fn square3(d: usize) -> Self {
        Self {
            k: 3,
            m: vec![2 * d; 3],
            n: vec![2 * d; 3],
            d: vec![d; 3],
        }
    }

    /// True when the closed-form 3-user solver applies.
    pub fn is_square3(&self) -> bool {
        self.k == 3
            && self.d.windows(2).all(|w| w[0] == w[1])
            && self
                .m
                .iter()
                .zip(&self.n)
                .zip(&self.d)
                .all(|((&m, &n), &d)| m == 2 * d && n == 2 * d)
    }
}

/// The K x K grid of channel matrices; `links[i][k]` is the `N_i x M_k`
/// channel from TX `k` to RX `i`.
#[derive(Debug, Clone)]
pub struct MultiUserChannel {
    pub dims: Dims,
    pub links: Vec<Vec<CMatrix>>,
}

/// Unit-Frobenius-norm, phase-canonical form of one link:
/// `tilde = e^{j phase} * h / norm` with the first element of the
/// column-stacked `tilde` real and nonnegative.
#[derive(Debug, Clone)]
pub struct NormalizedLink {
    pub tilde: CMatrix,
    pub phase: f64,
    pub norm: f64,
}

fn draw_link<R: rand::Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng, 1.0))
}

/// Draws a channel for `(seed, trial)`: every entry i.i.d. CN(0,1), each link
/// from its own stream so generation order never matters. The measure-zero
/// rank-deficient draws are rejected and redrawn.
pub fn generate_channel_trial(dims: &Dims, seed: u64, trial: u64) -> MultiUserChannel {
    let mut links = Vec::with_capacity(dims.k);
    for i in 0..dims.k {
        let mut row = Vec::with_capacity(dims.k);
        for k in 0..dims.k {
            let mut redraw = 0u64;
            let link = loop {
                let mut rng = stream_rng(
                    seed,
                    stream_id(DOMAIN_CHANNEL, trial, redraw, i as u64, k as u64),
                );
                let h = draw_link(&mut rng, dims.n[i], dims.m[k]);
                let svd = h.clone().svd(false, false);
                let smin = svd
                    .singular_values
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                if smin > 1e-12 {
                    break h;
                }
                redraw += 1;
            };
            row.push(link);
        }
        links.push(row);
    }
    MultiUserChannel {
        dims: dims.clone(),
        links,
    }
}

pub fn generate_channel(dims: &Dims, seed: u64) -> MultiUserChannel {
    generate_channel_trial(dims, seed, 0)
}

/// First element of the column-stacked matrix, i.e. entry (0,0).
fn vec_first(h: &CMatrix) -> Complex64 {
    h[(0, 0)]
}

/// Scale to unit Frobenius norm and rotate the global phase so the first
/// stacked element is real and nonnegative.
pub fn normalize_link(h: &CMatrix) -> Result<NormalizedLink> {
    let norm = frob_norm(h);
    if norm == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let scaled = h / Complex64::new(norm, 0.0);
    let first = vec_first(&scaled);
    let phase = if first.norm() > 0.0 { -first.arg() } else { 0.0 };
    let rot = Complex64::from_polar(1.0, phase);
    let mut tilde = scaled * rot;
    // Snap the canonical element onto the real axis exactly; this is what
    // makes normalization idempotent.
    let f = vec_first(&tilde);
    tilde[(0, 0)] = Complex64::new(f.norm(), 0.0);
    Ok(NormalizedLink { tilde, phase, norm })
}
