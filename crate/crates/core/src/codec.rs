//! Random codebooks, framed transmission and nearest-neighbour decoding.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::estimator::{DataChannels, PilotSchedule};
use crate::fading::FadingPath;
use crate::rng::{self, complex_normal, Domain};

/// Input distribution of the codebook symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputLaw {
    /// i.i.d. `CN(0, 1)` components.
    Gaussian,
    /// `CN(0, I)` conditioned on every component lying in the unit disc.
    TruncatedGaussian,
}

impl std::str::FromStr for InputLaw {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "truncated-gaussian" | "truncated_gaussian" => Ok(Self::TruncatedGaussian),
            other => Err(format!("unknown input law `{other}`")),
        }
    }
}

impl InputLaw {
    /// `K̂`, the probability mass the Gaussian places on the truncation region.
    pub fn k_hat(self, n_t: usize) -> f64 {
        match self {
            Self::Gaussian => 1.0,
            Self::TruncatedGaussian => (1.0 - (-1.0f64).exp()).powi(n_t as i32),
        }
    }

    /// Density ceiling constant `K = 1/K̂`: `p_X(x) ≤ K π^{−n_t} e^{−‖x‖²}`.
    pub fn density_constant(self, n_t: usize) -> f64 {
        1.0 / self.k_hat(n_t)
    }

    /// `E‖X‖²`.
    pub fn mean_energy(self, n_t: usize) -> f64 {
        let per = match self {
            Self::Gaussian => 1.0,
            Self::TruncatedGaussian => {
                let e = (-1.0f64).exp();
                (1.0 - 2.0 * e) / (1.0 - e)
            }
        };
        per * n_t as f64
    }

    fn draw<R: Rng + ?Sized>(self, rng: &mut R, out: &mut [Complex64]) {
        match self {
            Self::Gaussian => out.iter_mut().for_each(|x| *x = complex_normal(rng, 1.0)),
            Self::TruncatedGaussian => loop {
                out.iter_mut().for_each(|x| *x = complex_normal(rng, 1.0));
                if out.iter().all(|x| x.norm_sqr() <= 1.0) {
                    break;
                }
            },
        }
    }
}

/// `M` codewords of `n` symbols in `C^{n_t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    m: usize,
    n: usize,
    n_t: usize,
    law: InputLaw,
    seed: u64,
    symbols: Vec<Complex64>,
}

impl Codebook {
    pub fn generate(m: usize, n: usize, n_t: usize, law: InputLaw, seed: u64) -> Result<Self> {
        if m == 0 || n == 0 || n_t == 0 {
            return domain(format!("codebook dimensions (M={m}, n={n}, n_t={n_t}) must be positive"));
        }
        let words: Vec<Vec<Complex64>> = (0..m)
            .into_par_iter()
            .map(|msg| {
                let mut rng = rng::stream(seed, Domain::Codebook, msg as u64);
                let mut w = vec![Complex64::new(0.0, 0.0); n * n_t];
                for sym in w.chunks_mut(n_t) {
                    law.draw(&mut rng, sym);
                }
                w
            })
            .collect();
        Ok(Self {
            m,
            n,
            n_t,
            law,
            seed,
            symbols: words.concat(),
        })
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn law(&self) -> InputLaw {
        self.law
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Rate `ln M / n` in nats per data symbol.
    pub fn rate(&self) -> f64 {
        (self.m as f64).ln() / self.n as f64
    }

    /// Codeword `msg` (zero-based), symbol-major: `[i·n_t + t]`.
    pub fn codeword(&self, msg: usize) -> &[Complex64] {
        let s = self.n * self.n_t;
        &self.symbols[msg * s..(msg + 1) * s]
    }
}

/// Convenience wrapper for [`Codebook::generate`].
pub fn generate_codebook(
    m: usize,
    n: usize,
    n_t: usize,
    law: InputLaw,
    seed: u64,
) -> Result<Codebook> {
    Codebook::generate(m, n, n_t, law, seed)
}

/// Channel inputs `x_k` for a whole frame, laid out `[k·n_t + t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    n_t: usize,
    inputs: Vec<Complex64>,
}

impl Frame {
    pub fn len(&self) -> usize {
        self.inputs.len() / self.n_t
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn input(&self, k: usize) -> &[Complex64] {
        &self.inputs[k * self.n_t..(k + 1) * self.n_t]
    }
}

/// Places pilots, codeword symbols and silent guards into a frame of length `n'`.
pub fn transmit_frame(codeword: &[Complex64], schedule: &PilotSchedule) -> Result<Frame> {
    let n_t = schedule.n_t();
    if codeword.len() != schedule.n() * n_t {
        return Err(Error::LengthMismatch {
            what: "codeword symbols",
            expected: schedule.n() * n_t,
            actual: codeword.len(),
        });
    }
    let mut inputs = vec![Complex64::new(0.0, 0.0); schedule.total_len() * n_t];
    for k in schedule.pilot_indices() {
        let t0 = schedule.pilot_antenna(k).expect("pilot use");
        inputs[k * n_t + t0] = Complex64::new(1.0, 0.0);
    }
    for (i, k) in schedule.data_indices().into_iter().enumerate() {
        inputs[k * n_t..(k + 1) * n_t].copy_from_slice(&codeword[i * n_t..(i + 1) * n_t]);
    }
    Ok(Frame { n_t, inputs })
}

/// Channel outputs `Y_k`, laid out `[k·n_r + r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Received {
    n_r: usize,
    samples: Vec<Complex64>,
}

impl Received {
    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.n_r
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn output(&self, k: usize) -> &[Complex64] {
        &self.samples[k * self.n_r..(k + 1) * self.n_r]
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }
}

fn apply(
    frame: &Frame,
    fading: &FadingPath,
    amplitude: f64,
    mut noise: Option<&mut rand_chacha::ChaCha8Rng>,
) -> Result<Received> {
    let (n_r, n_t) = fading.dims();
    if n_t != frame.n_t {
        return Err(Error::LengthMismatch {
            what: "transmit antennas",
            expected: n_t,
            actual: frame.n_t,
        });
    }
    if fading.len() < frame.len() {
        return Err(Error::LengthMismatch {
            what: "fading path length",
            expected: frame.len(),
            actual: fading.len(),
        });
    }
    let mut samples = Vec::with_capacity(frame.len() * n_r);
    for k in 0..frame.len() {
        let x = frame.input(k);
        for r in 0..n_r {
            let mut y = Complex64::new(0.0, 0.0);
            for (t, xt) in x.iter().enumerate() {
                if xt.re != 0.0 || xt.im != 0.0 {
                    y += fading.at(k, r, t) * xt;
                }
            }
            let z = match noise.as_deref_mut() {
                Some(rng) => complex_normal(rng, 1.0),
                None => Complex64::new(0.0, 0.0),
            };
            samples.push(amplitude * y + z);
        }
    }
    Ok(Received { n_r, samples })
}

/// `Y_k = amplitude · H_k x_k + Z_k` with `Z_k ~ CN(0, I)` from the noise
/// stream of `noise_seed`.
pub fn channel_apply_with_amplitude(
    frame: &Frame,
    fading: &FadingPath,
    amplitude: f64,
    noise_seed: u64,
) -> Result<Received> {
    let mut rng = rng::stream(noise_seed, Domain::Noise, 0);
    apply(frame, fading, amplitude, Some(&mut rng))
}

/// `Y_k = amplitude · H_k x_k` without noise.
pub fn channel_apply_noiseless(frame: &Frame, fading: &FadingPath, amplitude: f64) -> Result<Received> {
    apply(frame, fading, amplitude, None)
}

/// The point-to-point channel `Y_k = sqrt(SNR/n_t)·H_k x_k + Z_k`.
pub fn channel_apply(
    frame: &Frame,
    fading: &FadingPath,
    snr: f64,
    noise_seed: u64,
) -> Result<Received> {
    if !(snr >= 0.0 && snr.is_finite()) {
        return domain(format!("SNR {snr} must be finite and non-negative"));
    }
    channel_apply_with_amplitude(frame, fading, (snr / frame.n_t as f64).sqrt(), noise_seed)
}

/// Outcome of nearest-neighbour decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Zero-based decided message.
    pub decided: usize,
    /// `D(m)` for every message.
    pub metrics: Vec<f64>,
    /// Whether another message attained the same minimum.
    pub tie: bool,
}

pub(crate) fn symbol_metric(y: &[Complex64], h: &[Complex64], x: &[Complex64], amp: f64) -> f64 {
    let n_t = x.len();
    y.iter()
        .enumerate()
        .map(|(r, yr)| {
            let hx: Complex64 = h[r * n_t..(r + 1) * n_t]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum();
            (yr - amp * hx).norm_sqr()
        })
        .sum()
}

/// Per-data-symbol terms `‖Y_k − a·Ĥ_k x_k(m)‖²` of the decoding metric.
pub fn slot_metrics(
    received: &Received,
    estimates: &DataChannels,
    codebook: &Codebook,
    msg: usize,
    amplitude: f64,
) -> Vec<f64> {
    let n_t = codebook.n_t();
    let word = codebook.codeword(msg);
    (0..estimates.len())
        .map(|i| {
            symbol_metric(
                received.output(estimates.use_index(i)),
                estimates.matrix(i),
                &word[i * n_t..(i + 1) * n_t],
                amplitude,
            )
        })
        .collect()
}

/// Decodes with metric `D(m) = Σ_{k∈𝒟} ‖Y_k − a·Ĥ_k x_k(m)‖²` for an
/// arbitrary input amplitude `a`.
pub fn nn_decode_with_amplitude(
    received: &Received,
    estimates: &DataChannels,
    codebook: &Codebook,
    amplitude: f64,
) -> Result<DecodeResult> {
    let (n_r, n_t) = estimates.dims();
    if n_t != codebook.n_t() || estimates.len() != codebook.len() {
        return Err(Error::LengthMismatch {
            what: "data symbols with channel estimates",
            expected: codebook.len(),
            actual: estimates.len(),
        });
    }
    if n_r != received.n_r() {
        return Err(Error::LengthMismatch {
            what: "receive antennas",
            expected: n_r,
            actual: received.n_r(),
        });
    }
    if let Some(last) = (0..estimates.len()).map(|i| estimates.use_index(i)).max() {
        if last >= received.len() {
            return Err(Error::LengthMismatch {
                what: "received uses",
                expected: last + 1,
                actual: received.len(),
            });
        }
    }
    let metrics: Vec<f64> = (0..codebook.size())
        .into_par_iter()
        .map(|m| {
            slot_metrics(received, estimates, codebook, m, amplitude)
                .iter()
                .sum()
        })
        .collect();
    let mut decided = 0;
    for (m, &d) in metrics.iter().enumerate() {
        if d < metrics[decided] {
            decided = m;
        }
    }
    let tie = metrics
        .iter()
        .enumerate()
        .any(|(m, &d)| m != decided && d == metrics[decided]);
    Ok(DecodeResult {
        decided,
        metrics,
        tie,
    })
}

/// Nearest-neighbour decoding for the point-to-point channel.
pub fn nn_decode(
    received: &Received,
    estimates: &DataChannels,
    codebook: &Codebook,
    snr: f64,
) -> Result<DecodeResult> {
    nn_decode_with_amplitude(
        received,
        estimates,
        codebook,
        (snr / codebook.n_t() as f64).sqrt(),
    )
}

/// `K̂` by radial quadrature of the Gaussian mass inside the unit disc, raised to `n_t`.
pub fn truncation_mass_quadrature(n_t: usize) -> f64 {
    // ∫_0^1 2r e^{−r²} dr; the angular integral contributes 2π/π
    let disc = crate::quadrature::integrate(|r| 2.0 * r * (-r * r).exp(), 0.0, 1.0, &[], 256);
    disc.powi(n_t as i32)
}

/// Gaussian reference density `π^{−n_t} e^{−‖x‖²}`.
pub fn gaussian_density(x: &[Complex64]) -> f64 {
    let e: f64 = x.iter().map(|v| v.norm_sqr()).sum();
    (-e).exp() / PI.powi(x.len() as i32)
}
