//! Monte Carlo link simulations.
//!
//! Frames are processed in fixed-size chunks; every frame draws its fading,
//! data and noise from streams keyed by the frame index, and chunk results
//! are merged in index order. Results are therefore identical for any
//! number of worker threads.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::codec::{
    channel_apply, nn_decode, transmit_frame, Codebook, InputLaw,
};
use crate::error::{domain, Result};
use crate::estimator::{
    estimate_path, solve_weights, DataChannels, EmpiricalProfile, ErrorAccumulator,
    EstimationProfile, Estimate, PilotSchedule,
};
use crate::fading::FadingSynthesizer;
use crate::rng::{self, child_seed, complex_normal, Domain};
use crate::spectrum::PsdModel;

const CHUNK: usize = 64;

/// Link parameters shared by the simulations.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSetup {
    pub psd: PsdModel,
    pub schedule: PilotSchedule,
    pub n_r: usize,
    pub snr: f64,
}

impl LinkSetup {
    fn check(&self) -> Result<()> {
        if self.n_r == 0 {
            return domain("n_r must be at least 1");
        }
        if !(self.snr >= 0.0 && self.snr.is_finite()) {
            return domain(format!("SNR {} must be finite and non-negative", self.snr));
        }
        Ok(())
    }
}

/// Result of [`simulate_estimation`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationRun {
    pub frames: usize,
    pub predicted: EstimationProfile,
    pub empirical: EmpiricalProfile,
    /// Real and imaginary parts of the mean of `Z_kᴴ Ĥ_k x_k` over data uses.
    pub noise_corr_re: Estimate,
    pub noise_corr_im: Estimate,
}

#[derive(Debug, Clone, Default)]
struct Scalar {
    n: u64,
    sum: f64,
    sumsq: f64,
}

impl Scalar {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sumsq += x * x;
    }

    fn merge(&mut self, o: &Scalar) {
        self.n += o.n;
        self.sum += o.sum;
        self.sumsq += o.sumsq;
    }

    fn estimate(&self) -> Estimate {
        let n = self.n as f64;
        let mean = self.sum / n;
        let se = ((self.sumsq - n * mean * mean).max(0.0) / (n - 1.0).max(1.0) / n).sqrt();
        Estimate {
            mean,
            se,
            count: self.n,
        }
    }
}

/// Pilot-aided estimation over `frames` independent frames with Gaussian data.
pub fn simulate_estimation(setup: &LinkSetup, frames: usize, seed: u64) -> Result<EstimationRun> {
    setup.check()?;
    if frames < 2 {
        return domain("at least two frames are needed for standard errors");
    }
    let s = &setup.schedule;
    let n_t = s.n_t();
    let weights = solve_weights(s, &setup.psd, setup.snr)?;
    let synth = FadingSynthesizer::new(&setup.psd, s.total_len())?;
    let amp = (setup.snr / n_t as f64).sqrt();
    let data_idx = s.data_indices();

    let chunks: Vec<(ErrorAccumulator, Scalar, Scalar)> = (0..frames.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| -> Result<_> {
            let mut acc = ErrorAccumulator::new(s);
            let (mut zre, mut zim) = (Scalar::default(), Scalar::default());
            for f in c * CHUNK..((c + 1) * CHUNK).min(frames) {
                let fs = child_seed(seed, f as u64);
                let path = synth.path(setup.n_r, n_t, fs)?;
                let mut drng = rng::stream(fs, Domain::Frame, 0);
                let word: Vec<Complex64> =
                    (0..s.n() * n_t).map(|_| complex_normal(&mut drng, 1.0)).collect();
                let frame = transmit_frame(&word, s)?;
                let y = channel_apply(&frame, &path, setup.snr, fs)?;
                let est = estimate_path(&weights, s, y.samples(), setup.n_r)?;
                let truth = DataChannels::from_path(&path, s)?;
                acc.add_frame(&est, &truth)?;

                // Z_k = Y_k − a H_k x_k, correlated against Ĥ_k x_k
                let mut corr = Complex64::new(0.0, 0.0);
                for (i, &k) in data_idx.iter().enumerate() {
                    let x = frame.input(k);
                    for r in 0..setup.n_r {
                        let mut hx = Complex64::new(0.0, 0.0);
                        let mut hhx = Complex64::new(0.0, 0.0);
                        for (t, &xt) in x.iter().enumerate().take(n_t) {
                            hx += truth.at(i, r, t) * xt;
                            hhx += est.at(i, r, t) * xt;
                        }
                        let z = y.output(k)[r] - amp * hx;
                        corr += z.conj() * hhx;
                    }
                }
                corr /= data_idx.len() as f64;
                zre.push(corr.re);
                zim.push(corr.im);
            }
            Ok((acc, zre, zim))
        })
        .collect::<Result<_>>()?;

    let mut acc = ErrorAccumulator::new(s);
    let (mut zre, mut zim) = (Scalar::default(), Scalar::default());
    for (a, re, im) in &chunks {
        acc.merge(a)?;
        zre.merge(re);
        zim.merge(im);
    }
    Ok(EstimationRun {
        frames,
        predicted: EstimationProfile::from_weights(&weights),
        empirical: acc.finish(),
        noise_corr_re: zre.estimate(),
        noise_corr_im: zim.estimate(),
    })
}

/// Block-error statistics of nearest-neighbour decoding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodeStats {
    pub n: usize,
    pub m: usize,
    pub frames: usize,
    pub block_errors: usize,
    pub ties: usize,
    /// Block-error rate.
    pub rate: f64,
    /// Binomial standard error of `rate`.
    pub se: f64,
}

/// Sends uniformly chosen messages of a fixed seeded codebook over
/// independent frames and decodes with the interpolated channel estimates.
pub fn simulate_decoding(
    setup: &LinkSetup,
    messages: usize,
    law: InputLaw,
    frames: usize,
    seed: u64,
) -> Result<DecodeStats> {
    setup.check()?;
    if frames == 0 {
        return domain("frames must be at least 1");
    }
    let s = &setup.schedule;
    let n_t = s.n_t();
    let book = Codebook::generate(messages, s.n(), n_t, law, seed)?;
    let weights = solve_weights(s, &setup.psd, setup.snr)?;
    let synth = FadingSynthesizer::new(&setup.psd, s.total_len())?;

    let per_chunk: Vec<(usize, usize)> = (0..frames.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| -> Result<_> {
            let (mut errors, mut ties) = (0, 0);
            for f in c * CHUNK..((c + 1) * CHUNK).min(frames) {
                let fs = child_seed(seed, f as u64);
                let sent = rng::stream(fs, Domain::Frame, 0).random_range(0..messages);
                let path = synth.path(setup.n_r, n_t, fs)?;
                let frame = transmit_frame(book.codeword(sent), s)?;
                let y = channel_apply(&frame, &path, setup.snr, fs)?;
                let est = estimate_path(&weights, s, y.samples(), setup.n_r)?;
                let res = nn_decode(&y, &est, &book, setup.snr)?;
                errors += usize::from(res.decided != sent);
                ties += usize::from(res.tie);
            }
            Ok((errors, ties))
        })
        .collect::<Result<_>>()?;
    let block_errors = per_chunk.iter().map(|c| c.0).sum();
    let ties = per_chunk.iter().map(|c| c.1).sum();
    let rate = block_errors as f64 / frames as f64;
    Ok(DecodeStats {
        n: s.n(),
        m: messages,
        frames,
        block_errors,
        ties,
        rate,
        se: (rate * (1.0 - rate) / frames as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::build_schedule;

    fn setup(n_t: usize, n_r: usize, window: usize, n: usize, snr: f64) -> LinkSetup {
        LinkSetup {
            psd: PsdModel::rectangular(0.125).unwrap(),
            schedule: build_schedule(4, n_t, window, n).unwrap(),
            n_r,
            snr,
        }
    }

    #[test]
    fn empirical_mse_matches_prediction() {
        let run = simulate_estimation(&setup(2, 2, 4, 4, 100.0), 3000, 11).unwrap();
        for e in &run.empirical.entries {
            let p = run.predicted.variance(e.slot, e.antenna).unwrap();
            assert!((e.mse.mean - p).abs() <= 3.0 * e.mse.se, "{e:?} vs {p}");
            // orthogonality of estimate and error
            assert!(e.corr_re.mean.abs() <= 3.0 * e.corr_re.se);
            assert!(e.corr_im.mean.abs() <= 3.0 * e.corr_im.se);
            // cyclo-stationarity: every data period sees the same variance
            for pp in &e.per_period {
                assert!((pp.mean - p).abs() <= 3.0 * pp.se);
            }
        }
        assert!(run.noise_corr_re.mean.abs() <= 3.0 * run.noise_corr_re.se);
        assert!(run.noise_corr_im.mean.abs() <= 3.0 * run.noise_corr_im.se);
    }

    #[test]
    fn estimation_is_thread_count_independent() {
        let s = setup(1, 1, 2, 6, 50.0);
        let a = simulate_estimation(&s, 130, 3).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| simulate_estimation(&s, 130, 3).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn decoding_improves_with_snr() {
        let lo = simulate_decoding(&setup(1, 1, 4, 24, 1.0), 16, InputLaw::Gaussian, 200, 5).unwrap();
        let hi = simulate_decoding(&setup(1, 1, 4, 24, 1000.0), 16, InputLaw::Gaussian, 200, 5).unwrap();
        assert!(hi.block_errors < lo.block_errors, "{hi:?} {lo:?}");
        assert_eq!(hi.frames, 200);
    }
}
