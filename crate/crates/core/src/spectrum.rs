//! Bandlimited fading spectra and the spectral integrals built on them.
//!
//! A [`PsdModel`] describes a unit-power spectral density `f_H` supported on
//! `[-λ_D, λ_D]`. Observing the fading every `L` samples yields the
//! undersampled spectra `f_{L,ℓ}`; the interpolation-error variances of the
//! pilot-aided estimator are integrals over those.
//!
//! Variances are evaluated in a cancellation-free form: instead of
//! `1 - ∫ SNR |f_{L,ℓ'}|² / (SNR f_{L,0} + n_t)` we integrate
//!
//! ```text
//! ∫ n_t f_{L,0} / (SNR f_{L,0} + n_t) + ∫ SNR (f_{L,0}² - |f_{L,ℓ'}|²) / (SNR f_{L,0} + n_t)
//! ```
//!
//! where the bracket is expanded as a sum of non-negative pair terms. The two
//! forms agree whenever `∫ f_{L,0} = 1`, which holds to quadrature precision.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, precondition, Result};
use crate::quadrature::integrate;

/// Default number of quadrature points over `[-1/2, 1/2]`.
pub const DEFAULT_GRID_POINTS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsdShape {
    /// Flat in-band density `1/(2λ_D)`.
    Rectangular,
    /// `(1 + cos(πλ/λ_D)) / (2λ_D)` in band.
    RaisedCosine,
}

impl std::str::FromStr for PsdShape {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "rectangular" => Ok(Self::Rectangular),
            "raised-cosine" | "raised_cosine" => Ok(Self::RaisedCosine),
            other => Err(format!("unknown PSD shape `{other}`")),
        }
    }
}

/// Unit-variance bandlimited power spectral density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdModel {
    shape: PsdShape,
    bandwidth: f64,
    grid_points: usize,
}

impl PsdModel {
    pub fn new(shape: PsdShape, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth < 0.5) {
            return domain(format!("bandwidth {bandwidth} must lie in (0, 1/2)"));
        }
        Ok(Self {
            shape,
            bandwidth,
            grid_points: DEFAULT_GRID_POINTS,
        })
    }

    pub fn rectangular(bandwidth: f64) -> Result<Self> {
        Self::new(PsdShape::Rectangular, bandwidth)
    }

    pub fn raised_cosine(bandwidth: f64) -> Result<Self> {
        Self::new(PsdShape::RaisedCosine, bandwidth)
    }

    pub fn with_grid_points(mut self, points: usize) -> Result<Self> {
        if points < crate::quadrature::PANEL_ORDER {
            return domain(format!(
                "grid resolution {points} below one quadrature panel"
            ));
        }
        self.grid_points = points;
        Ok(self)
    }

    pub fn shape(&self) -> PsdShape {
        self.shape
    }

    /// Bandwidth `λ_D` in cycles per sample.
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points
    }

    /// `f_H(λ)` for `λ ∈ [-1/2, 1/2]`.
    pub fn eval(&self, lambda: f64) -> Result<f64> {
        if !(-0.5..=0.5).contains(&lambda) {
            return domain(format!("frequency {lambda} outside [-1/2, 1/2]"));
        }
        Ok(self.density(lambda))
    }

    /// Unchecked density; zero outside the band.
    #[inline]
    pub(crate) fn density(&self, lambda: f64) -> f64 {
        let bw = self.bandwidth;
        if lambda.abs() > bw {
            return 0.0;
        }
        match self.shape {
            PsdShape::Rectangular => 1.0 / (2.0 * bw),
            PsdShape::RaisedCosine => (1.0 + (PI * lambda / bw).cos()) / (2.0 * bw),
        }
    }

    /// Period-1 continuation `f̄_H`.
    #[inline]
    pub fn periodic(&self, lambda: f64) -> f64 {
        self.density(wrap_frequency(lambda))
    }

    pub fn band_edges(&self) -> [f64; 2] {
        [-self.bandwidth, self.bandwidth]
    }

    /// `L* = floor(1/(2λ_D))`, the largest pilot period without aliasing.
    pub fn critical_period(&self) -> usize {
        // Guard against 1/(2·0.125) evaluating to 3.9999…
        (1.0 / (2.0 * self.bandwidth) + 1e-9).floor() as usize
    }

    pub fn is_alias_free(&self, period: usize) -> bool {
        period >= 1 && period <= self.critical_period()
    }

    /// `∫ f_H` by quadrature; equals one for every valid model.
    pub fn total_power(&self) -> f64 {
        let bw = self.bandwidth;
        integrate(|l| self.density(l), -bw, bw, &[], self.grid_points)
    }

    /// Closed-form autocovariance `∫ e^{i2πmλ} f_H(λ) dλ` (real: the PSDs are even).
    pub fn autocovariance_analytic(&self, lag: i64) -> f64 {
        if lag == 0 {
            return 1.0;
        }
        let bw = self.bandwidth;
        let a = 2.0 * PI * lag as f64;
        match self.shape {
            PsdShape::Rectangular => (a * bw).sin() / (a * bw),
            PsdShape::RaisedCosine => {
                let b = PI / bw;
                if ((a.abs() - b) / b).abs() < 1e-12 {
                    return 0.5;
                }
                (a * bw).sin() * b * b / (bw * a * (b * b - a * a))
            }
        }
    }
}

/// Maps `λ` into `[-1/2, 1/2)`.
#[inline]
pub fn wrap_frequency(lambda: f64) -> f64 {
    lambda - (lambda + 0.5).floor()
}

/// The spectrum of the fading observed every `period` samples with phase
/// offset `phase`.
#[derive(Debug, Clone, Copy)]
pub struct UndersampledSpectrum<'a> {
    psd: &'a PsdModel,
    period: usize,
    phase: usize,
}

impl<'a> UndersampledSpectrum<'a> {
    pub fn new(psd: &'a PsdModel, period: usize, phase: usize) -> Result<Self> {
        if period == 0 {
            return domain("period must be at least 1");
        }
        if phase >= period {
            return domain(format!("phase {phase} must be below period {period}"));
        }
        Ok(Self { psd, period, phase })
    }

    /// `f_{L,ℓ}(λ)` for `λ ∈ [-1/2, 1/2]`.
    pub fn eval(&self, lambda: f64) -> Result<Complex64> {
        if !(-0.5..=0.5).contains(&lambda) {
            return domain(format!("frequency {lambda} outside [-1/2, 1/2]"));
        }
        let l = self.period as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for nu in 0..self.period {
            let x = (lambda - nu as f64) / l;
            let amp = self.psd.periodic(x);
            if amp != 0.0 {
                acc += Complex64::from_polar(amp, 2.0 * PI * self.phase as f64 * x);
            }
        }
        Ok(acc / l)
    }

    /// Frequencies in `[-1/2, 1/2]` where some aliased copy has a band edge.
    pub fn breakpoints(&self) -> Vec<f64> {
        alias_breakpoints(self.psd, self.period)
    }
}

fn alias_breakpoints(psd: &PsdModel, period: usize) -> Vec<f64> {
    let l = period as f64;
    let mut pts = Vec::new();
    for nu in 0..period {
        for edge in psd.band_edges() {
            // (λ - ν)/L = edge + k  ⇒  λ = ν + L (edge + k)
            let base = nu as f64 + l * edge;
            let k_lo = ((-0.5 - base) / l).ceil() as i64;
            let k_hi = ((0.5 - base) / l).floor() as i64;
            for k in k_lo..=k_hi {
                let lam = base + l * k as f64;
                if (-0.5..=0.5).contains(&lam) {
                    pts.push(lam);
                }
            }
        }
    }
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    pts
}

/// `f_{L,ℓ}(λ)`, see [`UndersampledSpectrum`].
pub fn undersampled_spectrum(
    psd: &PsdModel,
    period: usize,
    phase: usize,
    lambda: f64,
) -> Result<Complex64> {
    UndersampledSpectrum::new(psd, period, phase)?.eval(lambda)
}

fn check_snr(snr: f64) -> Result<()> {
    if !(snr >= 0.0 && snr.is_finite()) {
        return domain(format!("SNR {snr} must be finite and non-negative"));
    }
    Ok(())
}

/// Interpolation-error variance for an alias-free pilot period,
/// `1 - ∫ SNR f_H² / (SNR f_H + L n_t)`.
pub fn error_variance_no_alias(
    psd: &PsdModel,
    period: usize,
    n_t: usize,
    snr: f64,
) -> Result<f64> {
    check_snr(snr)?;
    if n_t == 0 {
        return domain("n_t must be at least 1");
    }
    if !psd.is_alias_free(period) {
        return precondition(format!(
            "pilot period {period} exceeds 1/(2λ_D) = {}; use error_variance_general",
            1.0 / (2.0 * psd.bandwidth())
        ));
    }
    if snr == 0.0 {
        return Ok(1.0);
    }
    let c = (period * n_t) as f64;
    let bw = psd.bandwidth();
    let v = integrate(
        |l| {
            let f = psd.density(l);
            c * f / (snr * f + c)
        },
        -bw,
        bw,
        &[],
        psd.grid_points(),
    );
    Ok(v.clamp(0.0, 1.0))
}

fn check_indices(period: usize, n_t: usize, slot: usize, antenna: usize) -> Result<()> {
    if n_t == 0 || period <= n_t {
        return domain(format!("pilot period {period} must exceed n_t = {n_t}"));
    }
    if !(n_t..period).contains(&slot) {
        return domain(format!("slot {slot} must lie in [{n_t}, {}]", period - 1));
    }
    if !(1..=n_t).contains(&antenna) {
        return domain(format!("antenna {antenna} must lie in [1, {n_t}]"));
    }
    Ok(())
}

/// `T → ∞` interpolation-error variance for data slot `slot` (ℓ) and
/// transmit antenna `antenna` (t, 1-based), valid with or without aliasing.
pub fn error_variance_general(
    psd: &PsdModel,
    period: usize,
    n_t: usize,
    slot: usize,
    antenna: usize,
    snr: f64,
) -> Result<f64> {
    check_snr(snr)?;
    check_indices(period, n_t, slot, antenna)?;
    if snr == 0.0 {
        return Ok(1.0);
    }
    let shift = (slot + 1 - antenna) % period;
    let l = period as f64;
    let nt = n_t as f64;
    let cosines: Vec<f64> = (0..period)
        .map(|d| 1.0 - (2.0 * PI * (shift * d) as f64 / l).cos())
        .collect();
    let mut amps = vec![0.0; period];
    let integrand = |lambda: f64| {
        for (nu, a) in amps.iter_mut().enumerate() {
            *a = psd.periodic((lambda - nu as f64) / l);
        }
        let f0 = amps.iter().sum::<f64>() / l;
        if f0 == 0.0 {
            return 0.0;
        }
        let mut gap = 0.0;
        for i in 0..period {
            if amps[i] == 0.0 {
                continue;
            }
            for j in i + 1..period {
                gap += amps[i] * amps[j] * cosines[j - i];
            }
        }
        gap *= 2.0 / (l * l);
        (nt * f0 + snr * gap) / (snr * f0 + nt)
    };
    let v = integrate(
        integrand,
        -0.5,
        0.5,
        &alias_breakpoints(psd, period),
        psd.grid_points(),
    );
    Ok(v.clamp(0.0, 1.0))
}

/// High-SNR lower bound on the aliased interpolation-error variance, obtained
/// from the overlap of the first two aliased copies `f̄_H(λ/L)` and
/// `f̄_H((λ-1)/L)`.
pub fn aliased_error_lower_bound(
    psd: &PsdModel,
    period: usize,
    slot: usize,
    antenna: usize,
) -> Result<f64> {
    if psd.is_alias_free(period) {
        return precondition(format!(
            "pilot period {period} does not alias (1/(2λ_D) = {}); bound is vacuous",
            1.0 / (2.0 * psd.bandwidth())
        ));
    }
    if slot >= period {
        return domain(format!("slot {slot} must be below period {period}"));
    }
    if antenna == 0 || antenna > slot + 1 {
        return domain(format!("antenna {antenna} must lie in [1, {}]", slot + 1));
    }
    let l = period as f64;
    let shift = (slot + 1 - antenna) % period;
    let factor = 2.0 * (1.0 - (2.0 * PI * shift as f64 / l).cos()) / (l * l);
    if shift == 0 {
        return Ok(0.0);
    }
    let overlap = integrate(
        |lambda| {
            let a = psd.periodic(lambda / l);
            let b = psd.periodic((lambda - 1.0) / l);
            if a == 0.0 || b == 0.0 {
                return 0.0;
            }
            let f0 = (0..period)
                .map(|nu| psd.periodic((lambda - nu as f64) / l))
                .sum::<f64>()
                / l;
            a * b / f0
        },
        -0.5,
        0.5,
        &alias_breakpoints(psd, period),
        psd.grid_points(),
    );
    Ok(factor * overlap)
}
