//! Synthesis of stationary complex-Gaussian fading with a bandlimited PSD.
//!
//! Paths are generated by circulant embedding: the target autocovariance is
//! laid out on a circle of `N ≥ 4·length` points, its DFT gives the
//! eigenvalues of the circulant covariance, and a white Gaussian vector is
//! coloured by their square roots. The first `length` samples are kept; the
//! remaining three quarters of the circle absorb the wrap-around.
//!
//! Lags beyond `length` are never observed, so the autocovariance is tapered
//! smoothly to zero between `length` and `N/2`; this keeps the visible lags
//! exact while suppressing the ripple of the truncated sinc. Whatever small
//! negative eigenvalues remain are clamped to zero.
//! [`FadingSynthesizer::embedding_error`] reports the resulting covariance
//! error over the retained lags.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate, PANEL_ORDER};
use crate::rng::{self, complex_normal, Domain};
use crate::spectrum::PsdModel;

/// Magic bytes opening a binary fading dump.
pub const DUMP_MAGIC: [u8; 8] = *b"NNPFADE1";
/// Size of the binary dump header in bytes.
pub const DUMP_HEADER_LEN: usize = 32;

const MIN_BUFFER: usize = 1024;

/// `R(m) = ∫ e^{i2πmλ} f_H(λ) dλ` by quadrature.
pub fn autocovariance(psd: &PsdModel, lag: i64) -> Complex64 {
    let bw = psd.bandwidth();
    // keep at least ~32 panels per oscillation across the band
    let cycles = (2.0 * bw * lag.unsigned_abs() as f64).ceil() as usize;
    let points = psd.grid_points().max(32 * PANEL_ORDER * cycles);
    let w = 2.0 * PI * lag as f64;
    let re = integrate(|l| psd.density(l) * (w * l).cos(), -bw, bw, &[0.0], points);
    let im = integrate(|l| psd.density(l) * (w * l).sin(), -bw, bw, &[0.0], points);
    Complex64::new(re, im)
}

/// Precomputed circulant embedding for paths of a fixed length.
#[derive(Clone)]
pub struct FadingSynthesizer {
    psd: PsdModel,
    length: usize,
    scale: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    clamped: f64,
}

impl std::fmt::Debug for FadingSynthesizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FadingSynthesizer")
            .field("psd", &self.psd)
            .field("length", &self.length)
            .field("buffer", &self.scale.len())
            .finish()
    }
}

impl FadingSynthesizer {
    pub fn new(psd: &PsdModel, length: usize) -> Result<Self> {
        if length == 0 {
            return domain("path length must be at least 1");
        }
        let n = (4 * length).next_power_of_two().max(MIN_BUFFER);
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        let half = n / 2;
        for j in 0..=half {
            // Lags the path can see are kept exact; beyond them the
            // autocovariance rolls off smoothly to tame the sinc ripple.
            let taper = if j < length {
                1.0
            } else {
                let x = (j - length) as f64 / (half - length) as f64;
                0.5 * (1.0 + (PI * x).cos())
            };
            let r = taper * psd.autocovariance_analytic(j as i64);
            c[j] = Complex64::new(r, 0.0);
            if j > 0 && j < half {
                c[n - j] = Complex64::new(r, 0.0);
            }
        }
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(n).process(&mut c);
        let mut clamped = 0.0;
        let scale = c
            .iter()
            .map(|g| {
                if g.re < 0.0 {
                    clamped -= g.re;
                }
                (g.re.max(0.0) / n as f64).sqrt()
            })
            .collect();
        Ok(Self {
            psd: *psd,
            length,
            scale,
            fft: planner.plan_fft_inverse(n),
            clamped: clamped / n as f64,
        })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn buffer_len(&self) -> usize {
        self.scale.len()
    }

    pub fn psd(&self) -> &PsdModel {
        &self.psd
    }

    /// Eigenvalue mass removed by clamping, as a fraction of the total power.
    pub fn clamped_mass(&self) -> f64 {
        self.clamped
    }

    /// `max_{m < length} |R̃(m) − R(m)|`, where `R̃` is the covariance
    /// actually realized by the (clamped) embedding.
    pub fn embedding_error(&self) -> f64 {
        let mut c: Vec<Complex64> = self
            .scale
            .iter()
            .map(|s| Complex64::new(s * s, 0.0))
            .collect();
        self.fft.process(&mut c);
        (0..self.length)
            .map(|m| (c[m] - self.psd.autocovariance_analytic(m as i64)).norm())
            .fold(0.0, f64::max)
    }

    /// One path drawn from `rng`.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = self
            .scale
            .iter()
            .map(|&s| s * complex_normal(rng, 1.0))
            .collect();
        self.fft.process(&mut buf);
        buf.truncate(self.length);
        buf
    }

    /// Independent paths for every `(r, t)` pair, stream `r·n_t + t` of `seed`.
    pub fn path(&self, n_r: usize, n_t: usize, seed: u64) -> Result<FadingPath> {
        if n_r == 0 || n_t == 0 {
            return domain(format!("antenna dimensions ({n_r}, {n_t}) must be positive"));
        }
        let streams: Vec<Vec<Complex64>> = (0..n_r * n_t)
            .into_par_iter()
            .map(|idx| self.sample(&mut rng::stream(seed, Domain::Fading, idx as u64)))
            .collect();
        Ok(FadingPath {
            n_r,
            n_t,
            length: self.length,
            seed,
            psd: Some(self.psd),
            samples: streams.concat(),
        })
    }
}

/// Synthesizes an `n_r × n_t` fading path of `length` samples.
pub fn synthesize(
    psd: &PsdModel,
    length: usize,
    dims: (usize, usize),
    seed: u64,
) -> Result<FadingPath> {
    FadingSynthesizer::new(psd, length)?.path(dims.0, dims.1, seed)
}

/// Fading sample paths `H_k(r, t)`, stored stream by stream.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingPath {
    n_r: usize,
    n_t: usize,
    length: usize,
    seed: u64,
    psd: Option<PsdModel>,
    samples: Vec<Complex64>,
}

impl FadingPath {
    /// Wraps externally produced samples laid out as `[(r·n_t + t)·length + k]`.
    pub fn from_samples(
        n_r: usize,
        n_t: usize,
        length: usize,
        seed: u64,
        samples: Vec<Complex64>,
    ) -> Result<Self> {
        if samples.len() != n_r * n_t * length {
            return Err(Error::LengthMismatch {
                what: "fading samples",
                expected: n_r * n_t * length,
                actual: samples.len(),
            });
        }
        Ok(Self {
            n_r,
            n_t,
            length,
            seed,
            psd: None,
            samples,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_r, self.n_t)
    }

    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn psd(&self) -> Option<&PsdModel> {
        self.psd.as_ref()
    }

    /// The sequence `H_·(r, t)`, zero-based indices.
    pub fn stream(&self, r: usize, t: usize) -> &[Complex64] {
        let start = (r * self.n_t + t) * self.length;
        &self.samples[start..start + self.length]
    }

    #[inline]
    pub fn at(&self, k: usize, r: usize, t: usize) -> Complex64 {
        self.samples[(r * self.n_t + t) * self.length + k]
    }

    /// Writes the 32-byte header (magic, n_r u32, n_t u32, length u64, seed u64)
    /// followed by little-endian `f32` real/imaginary pairs, stream by stream.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = [0u8; DUMP_HEADER_LEN];
        header[..8].copy_from_slice(&DUMP_MAGIC);
        header[8..12].copy_from_slice(&(self.n_r as u32).to_le_bytes());
        header[12..16].copy_from_slice(&(self.n_t as u32).to_le_bytes());
        header[16..24].copy_from_slice(&(self.length as u64).to_le_bytes());
        header[24..32].copy_from_slice(&self.seed.to_le_bytes());
        w.write_all(&header)?;
        let mut body = Vec::with_capacity(self.samples.len() * 8);
        for h in &self.samples {
            body.extend_from_slice(&(h.re as f32).to_le_bytes());
            body.extend_from_slice(&(h.im as f32).to_le_bytes());
        }
        w.write_all(&body)?;
        w.flush()
    }

    /// Reads a dump produced by [`FadingPath::write_dump`]. Samples come back
    /// at `f32` precision and without PSD metadata.
    pub fn read_dump<R: Read>(mut r: R) -> Result<Self> {
        let io = |e: std::io::Error| Error::Format(e.to_string());
        let mut header = [0u8; DUMP_HEADER_LEN];
        r.read_exact(&mut header).map_err(io)?;
        if header[..8] != DUMP_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
        let u64_at = |i: usize| u64::from_le_bytes(header[i..i + 8].try_into().unwrap());
        let (n_r, n_t, length, seed) = (u32_at(8), u32_at(12), u64_at(16) as usize, u64_at(24));
        let count = n_r
            .checked_mul(n_t)
            .and_then(|x| x.checked_mul(length))
            .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
        let mut body = Vec::new();
        r.read_to_end(&mut body).map_err(io)?;
        if body.len() != count * 8 {
            return Err(Error::Format(format!(
                "expected {} payload bytes, found {}",
                count * 8,
                body.len()
            )));
        }
        let samples = body
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes(c[..4].try_into().unwrap());
                let im = f32::from_le_bytes(c[4..].try_into().unwrap());
                Complex64::new(re as f64, im as f64)
            })
            .collect();
        Self::from_samples(n_r, n_t, length, seed, samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn rect(bw: f64) -> PsdModel {
        PsdModel::rectangular(bw).unwrap()
    }

    #[test]
    fn autocovariance_examples() {
        assert_relative_eq!(autocovariance(&rect(0.3), 0).re, 1.0, epsilon = 1e-12);
        assert!(autocovariance(&rect(0.25), 2).norm() < 1e-12);
        assert!(autocovariance(&rect(0.125), 4).norm() < 1e-12);
        let psd = PsdModel::raised_cosine(0.1).unwrap();
        for m in [-7i64, -1, 3, 25] {
            assert_eq!(autocovariance(&psd, -m), autocovariance(&psd, m).conj());
            assert_relative_eq!(
                autocovariance(&psd, m).re,
                psd.autocovariance_analytic(m),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn toeplitz_is_positive_semidefinite() {
        for psd in [rect(0.125), rect(0.01), PsdModel::raised_cosine(0.2).unwrap()] {
            let k = 33;
            let m = DMatrix::from_fn(k, k, |i, j| {
                autocovariance(&psd, j as i64 - i as i64).re
            });
            let min = m.symmetric_eigenvalues().min();
            assert!(min >= -1e-9, "{min}");
        }
    }

    #[test]
    fn embedding_leakage_is_small() {
        for psd in [rect(0.125), rect(0.05), PsdModel::raised_cosine(0.125).unwrap()] {
            for len in [30, 500, 4000] {
                let s = FadingSynthesizer::new(&psd, len).unwrap();
                assert!(s.buffer_len() >= 4 * len);
                assert!(s.embedding_error() < 1e-3, "{psd:?} {len}");
            }
        }
    }

    #[test]
    fn paths_are_reproducible() {
        let a = synthesize(&rect(0.1), 64, (2, 2), 9).unwrap();
        let b = synthesize(&rect(0.1), 64, (2, 2), 9).unwrap();
        let c = synthesize(&rect(0.1), 64, (2, 2), 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a.stream(0, 0), a.stream(0, 1));
    }

    #[test]
    fn empirical_autocovariance_matches_quadrature() {
        // 20 independent paths of 1e4 samples; SE from the spread across paths
        let psd = rect(0.125);
        let synth = FadingSynthesizer::new(&psd, 10_000).unwrap();
        let paths: Vec<_> = (0..20).map(|i| synth.path(1, 1, 100 + i).unwrap()).collect();
        for lag in 0..=10usize {
            let per_path: Vec<Complex64> = paths
                .iter()
                .map(|p| {
                    let h = p.stream(0, 0);
                    let n = h.len() - lag;
                    (0..n).map(|k| h[k + lag] * h[k].conj()).sum::<Complex64>() / n as f64
                })
                .collect();
            let n = per_path.len() as f64;
            let mean = per_path.iter().sum::<Complex64>() / n;
            let var = per_path.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
            let se = (var / n).sqrt();
            let target = autocovariance(&psd, lag as i64);
            assert!(
                (mean - target).norm() <= 3.0 * se.max(1e-3),
                "lag {lag}: {mean} vs {target} (se {se})"
            );
        }
    }

    #[test]
    fn moments_and_cross_independence() {
        let path = synthesize(&rect(0.25), 100_000, (1, 2), 5).unwrap();
        let (a, b) = (path.stream(0, 0), path.stream(0, 1));
        let n = a.len() as f64;
        let mean = a.iter().sum::<Complex64>() / n;
        let p2 = a.iter().map(|h| h.norm_sqr()).sum::<f64>() / n;
        let p4 = a.iter().map(|h| h.norm_sqr().powi(2)).sum::<f64>() / n;
        assert!(mean.norm() < 0.05);
        assert!((p2 - 1.0).abs() < 0.05);
        assert!((p4 / (p2 * p2) - 2.0).abs() <= 0.1);
        // lag-0 cross-covariance in blocks of 1000 (≫ correlation length)
        let blocks: Vec<Complex64> = a
            .chunks(1000)
            .zip(b.chunks(1000))
            .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u * v.conj()).sum::<Complex64>() / 1000.0)
            .collect();
        let m = blocks.len() as f64;
        let cm = blocks.iter().sum::<Complex64>() / m;
        let se = (blocks.iter().map(|v| (v - cm).norm_sqr()).sum::<f64>() / (m - 1.0) / m).sqrt();
        assert!(cm.norm() <= 3.0 * se, "{cm} vs se {se}");
    }

    #[test]
    fn dump_roundtrip() {
        let path = synthesize(&rect(0.1), 17, (2, 3), 42).unwrap();
        let mut buf = Vec::new();
        path.write_dump(&mut buf).unwrap();
        assert_eq!(buf.len(), DUMP_HEADER_LEN + 2 * 3 * 17 * 8);
        assert_eq!(&buf[..8], b"NNPFADE1");
        let back = FadingPath::read_dump(buf.as_slice()).unwrap();
        assert_eq!(back.dims(), (2, 3));
        assert_eq!(back.seed(), 42);
        for r in 0..2 {
            for t in 0..3 {
                for (x, y) in back.stream(r, t).iter().zip(path.stream(r, t)) {
                    assert!((x - y).norm() < 1e-6);
                }
            }
        }
        buf[0] = b'X';
        assert!(matches!(FadingPath::read_dump(buf.as_slice()), Err(Error::Format(_))));
        assert!(FadingPath::read_dump(&buf[..20]).is_err());
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(synthesize(&rect(0.1), 0, (1, 1), 0).is_err());
        assert!(synthesize(&rect(0.1), 4, (0, 1), 0).is_err());
    }
}
