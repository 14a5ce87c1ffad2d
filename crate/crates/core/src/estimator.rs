//! Pilot framing and finite-window LMMSE interpolation of the fading.
//!
//! Time is divided into periods of `L` channel uses. The first `n_t` uses of
//! every period carry one-hot pilot vectors (`p_t` in slot `t − 1`); the
//! remaining `L − n_t` uses carry data inside the codeword span and stay
//! silent in the `T − 1` guard periods on either side. A data symbol in
//! period `j` is estimated from the `2T` pilots of the same antenna in
//! periods `j − T + 1 ..= j + T`.
//!
//! All indices in this module are zero-based except the transmit antenna
//! `t`, which follows the usual `1..=n_t` convention wherever it appears as
//! a parameter.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, precondition, Error, Result};
use crate::fading::FadingPath;
use crate::spectrum::{error_variance_general, PsdModel};

/// Frame layout: pilots, data and guard uses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PilotSchedule {
    period: usize,
    n_t: usize,
    window: usize,
    n: usize,
}

impl PilotSchedule {
    pub fn new(period: usize, n_t: usize, window: usize, n: usize) -> Result<Self> {
        if n_t == 0 || period <= n_t {
            return domain(format!("pilot period {period} must exceed n_t = {n_t} ≥ 1"));
        }
        if window == 0 {
            return domain("window T must be at least 1");
        }
        if n == 0 || !n.is_multiple_of(period - n_t) {
            return domain(format!(
                "data length {n} must be a positive multiple of L − n_t = {}",
                period - n_t
            ));
        }
        Ok(Self {
            period,
            n_t,
            window,
            n,
        })
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Data symbols per codeword.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of periods carrying data.
    pub fn blocks(&self) -> usize {
        self.n / (self.period - self.n_t)
    }

    /// Pilot uses, `(n/(L−n_t) + 1 + 2(T−1))·n_t`.
    pub fn n_p(&self) -> usize {
        (self.blocks() + 1 + 2 * (self.window - 1)) * self.n_t
    }

    /// Silent guard uses, `2(L−n_t)(T−1)`.
    pub fn n_g(&self) -> usize {
        2 * (self.period - self.n_t) * (self.window - 1)
    }

    /// Total frame length `n' = n_p + n + n_g`.
    pub fn total_len(&self) -> usize {
        self.n_p() + self.n + self.n_g()
    }

    /// Fraction of uses spent on pilots and guards.
    pub fn overhead(&self) -> f64 {
        1.0 - self.n as f64 / self.total_len() as f64
    }

    fn data_periods(&self) -> std::ops::Range<usize> {
        self.window - 1..self.window - 1 + self.blocks()
    }

    /// Zero-based transmit antenna whose pilot occupies use `k`, if any.
    pub fn pilot_antenna(&self, k: usize) -> Option<usize> {
        (k < self.total_len() && k % self.period < self.n_t).then_some(k % self.period)
    }

    pub fn is_pilot(&self, k: usize) -> bool {
        self.pilot_antenna(k).is_some()
    }

    /// Whether use `k` carries a data symbol.
    pub fn is_data(&self, k: usize) -> bool {
        k < self.total_len()
            && k % self.period >= self.n_t
            && self.data_periods().contains(&(k / self.period))
    }

    /// Pilot uses in increasing order.
    pub fn pilot_indices(&self) -> Vec<usize> {
        (0..self.total_len()).filter(|&k| self.is_pilot(k)).collect()
    }

    /// Data uses in increasing order; the `i`-th codeword symbol goes to the `i`-th entry.
    pub fn data_indices(&self) -> Vec<usize> {
        self.data_periods()
            .flat_map(|j| (self.n_t..self.period).map(move |l| j * self.period + l))
            .collect()
    }

    /// Pilot uses feeding the estimate at data use `k` for zero-based
    /// antenna `t0`, ordered by `τ = −T..T−1` (i.e. periods `j+T` down to `j−T+1`).
    pub fn window_indices(&self, k: usize, t0: usize) -> Result<Vec<usize>> {
        if !self.is_data(k) {
            return domain(format!("use {k} is not a data use"));
        }
        if t0 >= self.n_t {
            return domain(format!("antenna index {t0} out of range"));
        }
        let j = (k / self.period) as isize;
        let t = self.window as isize;
        Ok((-t..t)
            .map(|tau| ((j - tau) * self.period as isize) as usize + t0)
            .collect())
    }
}

/// Convenience wrapper for [`PilotSchedule::new`].
pub fn build_schedule(period: usize, n_t: usize, window: usize, n: usize) -> Result<PilotSchedule> {
    PilotSchedule::new(period, n_t, window, n)
}

fn entry_index(period: usize, n_t: usize, slot: usize, antenna: usize) -> Result<usize> {
    if !(n_t..period).contains(&slot) || !(1..=n_t).contains(&antenna) {
        return domain(format!(
            "(ℓ, t) = ({slot}, {antenna}) outside [{n_t}, {}] × [1, {n_t}]",
            period - 1
        ));
    }
    Ok((slot - n_t) * n_t + antenna - 1)
}

/// LMMSE interpolation weights for every (slot, antenna) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatorWeights {
    period: usize,
    n_t: usize,
    window: usize,
    snr: f64,
    weights: Vec<Vec<Complex64>>,
    mse: Vec<f64>,
}

impl InterpolatorWeights {
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    /// Coefficients `a_τ`, `τ = −T..T−1`, applied as `Ĥ = Σ a_τ Y_{q_τ}`.
    pub fn weights(&self, slot: usize, antenna: usize) -> Result<&[Complex64]> {
        Ok(&self.weights[entry_index(self.period, self.n_t, slot, antenna)?])
    }

    /// Predicted `ε²_{ℓ,T}(t)`.
    pub fn predicted_mse(&self, slot: usize, antenna: usize) -> Result<f64> {
        Ok(self.mse[entry_index(self.period, self.n_t, slot, antenna)?])
    }

    /// `ε²_{*,T}`, the largest predicted error variance.
    pub fn max_mse(&self) -> f64 {
        self.mse.iter().copied().fold(0.0, f64::max)
    }
}

/// Normal equations `A w = c` for one (slot, antenna) pair, with pilot amplitude `amp`.
pub(crate) fn normal_equations(
    psd: &PsdModel,
    period: usize,
    window: usize,
    offset: usize,
    amp: f64,
) -> (DMatrix<Complex64>, DVector<Complex64>) {
    let size = 2 * window;
    let t = window as i64;
    let l = period as i64;
    let r = |m: i64| Complex64::new(psd.autocovariance_analytic(m), 0.0);
    let a = DMatrix::from_fn(size, size, |i, k| {
        let (ti, tk) = (i as i64 - t, k as i64 - t);
        let mut v = r((tk - ti) * l) * (amp * amp);
        if i == k {
            v += 1.0;
        }
        v
    });
    // q_τ − k = −τL − (ℓ − t + 1)
    let c = DVector::from_fn(size, |i, _| r(-(i as i64 - t) * l - offset as i64) * amp);
    (a, c)
}

/// Solves the LMMSE normal equations for every `(ℓ, t)`.
pub fn solve_weights(
    schedule: &PilotSchedule,
    psd: &PsdModel,
    snr: f64,
) -> Result<InterpolatorWeights> {
    if !(snr >= 0.0 && snr.is_finite()) {
        return domain(format!("SNR {snr} must be finite and non-negative"));
    }
    let (period, n_t, window) = (schedule.period(), schedule.n_t(), schedule.window());
    let amp = (snr / n_t as f64).sqrt();
    let pairs: Vec<(usize, usize)> = (n_t..period)
        .flat_map(|l| (1..=n_t).map(move |t| (l, t)))
        .collect();
    let solved: Vec<(Vec<Complex64>, f64)> = pairs
        .par_iter()
        .map(|&(l, t)| {
            let (a, c) = normal_equations(psd, period, window, l + 1 - t, amp);
            let chol = a.cholesky().ok_or_else(|| {
                Error::Numerical("pilot covariance is not positive definite".into())
            })?;
            let w = chol.solve(&c);
            let mse = (1.0 - c.dotc(&w).re).clamp(0.0, 1.0);
            Ok((w.iter().map(|x| x.conj()).collect(), mse))
        })
        .collect::<Result<_>>()?;
    let (weights, mse) = solved.into_iter().unzip();
    Ok(InterpolatorWeights {
        period,
        n_t,
        window,
        snr,
        weights,
        mse,
    })
}

/// Per-data-symbol `n_r × n_t` channel matrices (estimates or truth).
#[derive(Debug, Clone, PartialEq)]
pub struct DataChannels {
    n_r: usize,
    n_t: usize,
    indices: Vec<usize>,
    values: Vec<Complex64>,
}

impl DataChannels {
    pub fn dims(&self) -> (usize, usize) {
        (self.n_r, self.n_t)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Channel-use index of the `i`-th data symbol.
    pub fn use_index(&self, i: usize) -> usize {
        self.indices[i]
    }

    /// Row-major `n_r × n_t` matrix for the `i`-th data symbol.
    pub fn matrix(&self, i: usize) -> &[Complex64] {
        let s = self.n_r * self.n_t;
        &self.values[i * s..(i + 1) * s]
    }

    #[inline]
    pub fn at(&self, i: usize, r: usize, t0: usize) -> Complex64 {
        self.values[(i * self.n_r + r) * self.n_t + t0]
    }

    /// The true fading at the data uses of `schedule`.
    pub fn from_path(path: &FadingPath, schedule: &PilotSchedule) -> Result<Self> {
        let (n_r, n_t) = path.dims();
        if n_t != schedule.n_t() {
            return Err(Error::LengthMismatch {
                what: "transmit antennas",
                expected: schedule.n_t(),
                actual: n_t,
            });
        }
        if path.len() < schedule.total_len() {
            return Err(Error::LengthMismatch {
                what: "fading path length",
                expected: schedule.total_len(),
                actual: path.len(),
            });
        }
        let indices = schedule.data_indices();
        let mut values = Vec::with_capacity(indices.len() * n_r * n_t);
        for &k in &indices {
            for r in 0..n_r {
                for t in 0..n_t {
                    values.push(path.at(k, r, t));
                }
            }
        }
        Ok(Self {
            n_r,
            n_t,
            indices,
            values,
        })
    }
}

/// Interpolates the fading at every data use from received pilot
/// observations laid out as `observations[k·n_r + r]`.
pub fn estimate_path(
    weights: &InterpolatorWeights,
    schedule: &PilotSchedule,
    observations: &[Complex64],
    n_r: usize,
) -> Result<DataChannels> {
    if weights.period != schedule.period()
        || weights.n_t != schedule.n_t()
        || weights.window != schedule.window()
    {
        return precondition("weights were solved for a different schedule");
    }
    if n_r == 0 {
        return domain("n_r must be at least 1");
    }
    let need = schedule.total_len() * n_r;
    if observations.len() < need {
        return precondition(format!(
            "observations cover {} uses, the estimation windows need {}",
            observations.len() / n_r,
            schedule.total_len()
        ));
    }
    let n_t = schedule.n_t();
    let period = schedule.period();
    let indices = schedule.data_indices();
    let mut values = Vec::with_capacity(indices.len() * n_r * n_t);
    let t_win = schedule.window() as isize;
    for &k in &indices {
        let j = (k / period) as isize;
        let slot = k % period;
        for r in 0..n_r {
            for t0 in 0..n_t {
                let a = &weights.weights[(slot - n_t) * n_t + t0];
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, tau) in (-t_win..t_win).enumerate() {
                    let q = ((j - tau) * period as isize) as usize + t0;
                    acc += a[i] * observations[q * n_r + r];
                }
                values.push(acc);
            }
        }
    }
    Ok(DataChannels {
        n_r,
        n_t,
        indices,
        values,
    })
}

/// Interpolation-error variances for every `(ℓ, t)` at a fixed SNR.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationProfile {
    period: usize,
    n_t: usize,
    /// `None` for the `T → ∞` limit.
    window: Option<usize>,
    snr: f64,
    variances: Vec<f64>,
}

impl EstimationProfile {
    /// Finite-window profile from the solved normal equations.
    pub fn finite(schedule: &PilotSchedule, psd: &PsdModel, snr: f64) -> Result<Self> {
        let w = solve_weights(schedule, psd, snr)?;
        Ok(Self::from_weights(&w))
    }

    pub fn from_weights(w: &InterpolatorWeights) -> Self {
        Self {
            period: w.period,
            n_t: w.n_t,
            window: Some(w.window),
            snr: w.snr,
            variances: w.mse.clone(),
        }
    }

    /// `T → ∞` profile from the spectral integrals; valid with aliasing.
    pub fn asymptotic(psd: &PsdModel, period: usize, n_t: usize, snr: f64) -> Result<Self> {
        if n_t == 0 || period <= n_t {
            return domain(format!("pilot period {period} must exceed n_t = {n_t} ≥ 1"));
        }
        let pairs: Vec<(usize, usize)> = (n_t..period)
            .flat_map(|l| (1..=n_t).map(move |t| (l, t)))
            .collect();
        // ε² depends on (ℓ, t) only through ℓ − t + 1
        let mut by_shift = vec![None; period];
        let mut variances = Vec::with_capacity(pairs.len());
        for (l, t) in pairs {
            let d = l + 1 - t;
            let v = match by_shift[d] {
                Some(v) => v,
                None => {
                    let v = error_variance_general(psd, period, n_t, l, t, snr)?;
                    by_shift[d] = Some(v);
                    v
                }
            };
            variances.push(v);
        }
        Ok(Self {
            period,
            n_t,
            window: None,
            snr,
            variances,
        })
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn window(&self) -> Option<usize> {
        self.window
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    pub fn variance(&self, slot: usize, antenna: usize) -> Result<f64> {
        Ok(self.variances[entry_index(self.period, self.n_t, slot, antenna)?])
    }

    /// `ε²_*`, the maximum over all `(ℓ, t)`.
    pub fn max(&self) -> f64 {
        self.variances.iter().copied().fold(0.0, f64::max)
    }

    /// `Σ_ℓ Σ_t ε²_ℓ(t)`.
    pub fn total(&self) -> f64 {
        self.variances.iter().sum()
    }

    /// `(ℓ, t, ε²)` triples, `t` one-based.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.variances
            .iter()
            .enumerate()
            .map(move |(i, &v)| (self.n_t + i / self.n_t, i % self.n_t + 1, v))
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    sum: f64,
    sumsq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sumsq += x * x;
    }

    fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.sum += o.sum;
        self.sumsq += o.sumsq;
    }

    fn estimate(&self) -> Estimate {
        let n = self.n as f64;
        if self.n == 0 {
            return Estimate {
                mean: f64::NAN,
                se: f64::NAN,
                count: 0,
            };
        }
        let mean = self.sum / n;
        let se = if self.n > 1 {
            ((self.sumsq - n * mean * mean).max(0.0) / (n - 1.0) / n).sqrt()
        } else {
            f64::NAN
        };
        Estimate {
            mean,
            se,
            count: self.n,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct EntryAcc {
    mse: Moments,
    corr_re: Moments,
    corr_im: Moments,
    per_period: Vec<Moments>,
}

/// Empirical error statistics per `(ℓ, t)`.
///
/// Every call to [`ErrorAccumulator::add_frame`] contributes one observation
/// per statistic: the frame average over receive antennas (and periods), so
/// standard errors are across independent frames.
#[derive(Debug, Clone)]
pub struct ErrorAccumulator {
    period: usize,
    n_t: usize,
    blocks: usize,
    entries: Vec<EntryAcc>,
}

impl ErrorAccumulator {
    pub fn new(schedule: &PilotSchedule) -> Self {
        let (period, n_t, blocks) = (schedule.period(), schedule.n_t(), schedule.blocks());
        let entry = EntryAcc {
            per_period: vec![Moments::default(); blocks],
            ..Default::default()
        };
        Self {
            period,
            n_t,
            blocks,
            entries: vec![entry; (period - n_t) * n_t],
        }
    }

    pub fn add_frame(&mut self, estimates: &DataChannels, truth: &DataChannels) -> Result<()> {
        if estimates.dims() != truth.dims() || estimates.indices != truth.indices {
            return Err(Error::LengthMismatch {
                what: "estimate/truth data uses",
                expected: truth.len(),
                actual: estimates.len(),
            });
        }
        let (n_r, n_t) = truth.dims();
        if n_t != self.n_t || truth.len() != self.blocks * (self.period - n_t) {
            return Err(Error::LengthMismatch {
                what: "data symbols per frame",
                expected: self.blocks * (self.period - self.n_t),
                actual: truth.len(),
            });
        }
        let first_period = truth.indices[0] / self.period;
        let stride = self.period - n_t;
        let mut sums = vec![(0.0, Complex64::new(0.0, 0.0)); self.entries.len()];
        let mut period_sums = vec![0.0; self.entries.len() * self.blocks];
        for i in 0..truth.len() {
            let k = truth.indices[i];
            let slot = k % self.period;
            let b = k / self.period - first_period;
            for r in 0..n_r {
                for t0 in 0..n_t {
                    let h_hat = estimates.at(i, r, t0);
                    let e = truth.at(i, r, t0) - h_hat;
                    let idx = (slot - n_t) * n_t + t0;
                    sums[idx].0 += e.norm_sqr();
                    sums[idx].1 += h_hat * e.conj();
                    period_sums[idx * self.blocks + b] += e.norm_sqr();
                }
            }
        }
        debug_assert_eq!(truth.len(), self.blocks * stride);
        let per_entry = (n_r * self.blocks) as f64;
        for (idx, acc) in self.entries.iter_mut().enumerate() {
            acc.mse.push(sums[idx].0 / per_entry);
            acc.corr_re.push(sums[idx].1.re / per_entry);
            acc.corr_im.push(sums[idx].1.im / per_entry);
            for b in 0..self.blocks {
                acc.per_period[b].push(period_sums[idx * self.blocks + b] / n_r as f64);
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ErrorAccumulator) -> Result<()> {
        if other.entries.len() != self.entries.len() || other.blocks != self.blocks {
            return precondition("accumulators belong to different schedules");
        }
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            a.mse.merge(&b.mse);
            a.corr_re.merge(&b.corr_re);
            a.corr_im.merge(&b.corr_im);
            for (x, y) in a.per_period.iter_mut().zip(&b.per_period) {
                x.merge(y);
            }
        }
        Ok(())
    }

    pub fn finish(&self) -> EmpiricalProfile {
        let entries = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, acc)| EmpiricalEntry {
                slot: self.n_t + i / self.n_t,
                antenna: i % self.n_t + 1,
                mse: acc.mse.estimate(),
                corr_re: acc.corr_re.estimate(),
                corr_im: acc.corr_im.estimate(),
                per_period: acc.per_period.iter().map(Moments::estimate).collect(),
            })
            .collect();
        EmpiricalProfile {
            period: self.period,
            n_t: self.n_t,
            entries,
        }
    }
}

/// Empirical statistics for one `(ℓ, t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalEntry {
    pub slot: usize,
    pub antenna: usize,
    /// Mean of `|E|²`.
    pub mse: Estimate,
    /// Real and imaginary parts of the mean of `Ĥ·conj(E)`.
    pub corr_re: Estimate,
    pub corr_im: Estimate,
    /// `|E|²` separately for each data period of the frame.
    pub per_period: Vec<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalProfile {
    pub period: usize,
    pub n_t: usize,
    pub entries: Vec<EmpiricalEntry>,
}

impl EmpiricalProfile {
    pub fn entry(&self, slot: usize, antenna: usize) -> Result<&EmpiricalEntry> {
        Ok(&self.entries[entry_index(self.period, self.n_t, slot, antenna)?])
    }
}

/// Empirical statistics of a single frame; standard errors are `NaN`.
pub fn empirical_error_stats(
    schedule: &PilotSchedule,
    estimates: &DataChannels,
    truth: &DataChannels,
) -> Result<EmpiricalProfile> {
    let mut acc = ErrorAccumulator::new(schedule);
    acc.add_frame(estimates, truth)?;
    Ok(acc.finish())
}

/// One line of the estimation-profile CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub slot: usize,
    pub antenna: usize,
    /// Window `T`, or `inf` for the limit.
    pub window: String,
    pub snr: f64,
    pub analytic: f64,
    pub empirical: Option<f64>,
    pub se: Option<f64>,
}

/// Joins an analytic profile with optional empirical statistics.
pub fn profile_rows(
    analytic: &EstimationProfile,
    empirical: Option<&EmpiricalProfile>,
) -> Vec<ProfileRow> {
    analytic
        .entries()
        .map(|(slot, antenna, v)| {
            let emp = empirical.and_then(|e| e.entry(slot, antenna).ok());
            ProfileRow {
                slot,
                antenna,
                window: analytic
                    .window
                    .map_or_else(|| "inf".to_string(), |t| t.to_string()),
                snr: analytic.snr,
                analytic: v,
                empirical: emp.map(|e| e.mse.mean),
                se: emp.map(|e| e.mse.se),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::error_variance_no_alias;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rect(bw: f64) -> PsdModel {
        PsdModel::rectangular(bw).unwrap()
    }

    #[test]
    fn schedule_counts() {
        let s = build_schedule(7, 2, 2, 10).unwrap();
        assert_eq!((s.n_p(), s.n_g(), s.total_len()), (10, 10, 30));
        assert_eq!(s.pilot_indices(), vec![0, 1, 7, 8, 14, 15, 21, 22, 28, 29]);
        assert_eq!(s.data_indices(), vec![9, 10, 11, 12, 13, 16, 17, 18, 19, 20]);
        assert_eq!(s.pilot_antenna(8), Some(1));
        assert_eq!(build_schedule(7, 2, 1, 10).unwrap().n_g(), 0);
        assert!(build_schedule(7, 2, 2, 11).is_err());
        assert!(build_schedule(2, 2, 2, 10).is_err());
        assert!(build_schedule(4, 1, 0, 3).is_err());
    }

    #[test]
    fn guard_uses_are_silent() {
        let s = build_schedule(7, 2, 2, 10).unwrap();
        let silent: Vec<usize> = (0..s.total_len())
            .filter(|&k| !s.is_pilot(k) && !s.is_data(k))
            .collect();
        assert_eq!(silent, vec![2, 3, 4, 5, 6, 23, 24, 25, 26, 27]);
    }

    #[test]
    fn windows_stay_inside_frame() {
        let s = build_schedule(5, 2, 3, 9).unwrap();
        for k in s.data_indices() {
            for t0 in 0..2 {
                let w = s.window_indices(k, t0).unwrap();
                assert_eq!(w.len(), 6);
                assert!(w.iter().all(|&q| s.pilot_antenna(q) == Some(t0)));
            }
        }
    }

    #[test]
    fn zero_snr_weights_vanish() {
        let s = build_schedule(4, 1, 3, 3).unwrap();
        let w = solve_weights(&s, &rect(0.125), 0.0).unwrap();
        assert!(w.weights(2, 1).unwrap().iter().all(|a| a.norm() == 0.0));
        assert_eq!(w.predicted_mse(3, 1).unwrap(), 1.0);
    }

    #[test]
    fn normal_equation_residual() {
        let psd = PsdModel::raised_cosine(0.1).unwrap();
        let s = build_schedule(5, 2, 6, 3).unwrap();
        let w = solve_weights(&s, &psd, 200.0).unwrap();
        let amp = (200.0f64 / 2.0).sqrt();
        for l in 2..5 {
            for t in 1..=2 {
                let (a, c) = normal_equations(&psd, 5, 6, l + 1 - t, amp);
                let x = DVector::from_iterator(
                    12,
                    w.weights(l, t).unwrap().iter().map(|v| v.conj()),
                );
                assert!((a * x - &c).norm() <= 1e-10 * c.norm());
            }
        }
    }

    #[test]
    fn finite_window_is_no_better_than_limit() {
        let psd = rect(0.1);
        for t_win in [1, 2, 4, 8, 16] {
            let s = build_schedule(4, 2, t_win, 2).unwrap();
            let w = solve_weights(&s, &psd, 50.0).unwrap();
            for l in 2..4 {
                for t in 1..=2 {
                    let lim = error_variance_general(&psd, 4, 2, l, t, 50.0).unwrap();
                    assert!(w.predicted_mse(l, t).unwrap() >= lim - 1e-12);
                }
            }
        }
    }

    #[test]
    fn converges_in_window_for_smooth_spectrum() {
        let psd = PsdModel::raised_cosine(0.125).unwrap();
        let lim = error_variance_no_alias(&psd, 4, 1, 100.0).unwrap();
        let mut prev = f64::INFINITY;
        for t_win in 1..=32 {
            let s = build_schedule(4, 1, t_win, 3).unwrap();
            let v = solve_weights(&s, &psd, 100.0).unwrap().max_mse();
            assert!(v <= prev + 1e-14);
            prev = v;
        }
        assert!((prev - lim) / lim < 0.02, "{prev} vs {lim}");
    }

    #[test]
    fn rectangular_spectrum_converges_like_one_over_window() {
        // The band edges make the gap to the limit decay only as 1/T:
        // doubling T roughly halves it.
        let psd = rect(0.125);
        let lim = error_variance_no_alias(&psd, 4, 1, 100.0).unwrap();
        let gap = |t_win| {
            let s = build_schedule(4, 1, t_win, 3).unwrap();
            solve_weights(&s, &psd, 100.0).unwrap().max_mse() - lim
        };
        let mut prev = gap(8);
        for t_win in [16, 32, 64] {
            let g = gap(t_win);
            assert!(g > 0.0 && (g / prev - 0.5).abs() < 0.1, "T = {t_win}: {g} after {prev}");
            prev = g;
        }
    }

    #[test]
    fn antenna_asymmetry() {
        let s = build_schedule(5, 2, 4, 3).unwrap();
        let w = solve_weights(&s, &rect(0.08), 100.0).unwrap();
        assert_ne!(w.weights(3, 1).unwrap(), w.weights(3, 2).unwrap());
        // depends on ℓ − t + 1 only
        assert_eq!(w.weights(3, 2).unwrap(), w.weights(2, 1).unwrap());
    }

    #[test]
    fn estimates_are_linear() {
        let s = build_schedule(4, 1, 2, 6).unwrap();
        let w = solve_weights(&s, &rect(0.1), 30.0).unwrap();
        let n_r = 2;
        let zero = vec![Complex64::new(0.0, 0.0); s.total_len() * n_r];
        let est = estimate_path(&w, &s, &zero, n_r).unwrap();
        assert!(est.values.iter().all(|v| v.norm() == 0.0));

        let obs: Vec<Complex64> = (0..s.total_len() * n_r)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.7).cos()))
            .collect();
        let conj: Vec<Complex64> = obs.iter().map(|v| v.conj()).collect();
        let a = estimate_path(&w, &s, &obs, n_r).unwrap();
        let b = estimate_path(&w, &s, &conj, n_r).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_relative_eq!(x.re, y.re, epsilon = 1e-12);
            assert_relative_eq!(x.im, -y.im, epsilon = 1e-12);
        }
        assert!(matches!(
            estimate_path(&w, &s, &obs[..obs.len() - 1], n_r),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn perfect_estimates_have_zero_error() {
        let s = build_schedule(4, 2, 2, 4).unwrap();
        let path = crate::fading::synthesize(&rect(0.1), s.total_len(), (2, 2), 3).unwrap();
        let truth = DataChannels::from_path(&path, &s).unwrap();
        let p = empirical_error_stats(&s, &truth, &truth).unwrap();
        assert!(p.entries.iter().all(|e| e.mse.mean == 0.0));
    }

    #[test]
    fn profile_rows_mark_infinite_window() {
        let a = EstimationProfile::asymptotic(&rect(0.125), 4, 1, 100.0).unwrap();
        let rows = profile_rows(&a, None);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].window, "inf");
        assert_eq!(a.max(), rows.iter().map(|r| r.analytic).fold(0.0, f64::max));
    }

    proptest! {
        #[test]
        fn schedule_invariants(l in 2usize..12, nt_frac in 0.0f64..1.0, t in 1usize..5, b in 1usize..6) {
            let n_t = 1 + ((l - 2) as f64 * nt_frac) as usize;
            let n = b * (l - n_t);
            let s = build_schedule(l, n_t, t, n).unwrap();
            prop_assert_eq!(s.total_len(), s.n_p() + n + s.n_g());
            prop_assert_eq!(s.pilot_indices().len(), s.n_p());
            prop_assert_eq!(s.data_indices().len(), n);
            prop_assert!(s.data_indices().iter().all(|&k| !s.is_pilot(k)));
            prop_assert_eq!(s.pilot_antenna(0), Some(0));
        }

        #[test]
        fn window_growth_never_hurts(bw in 0.02f64..0.24, t in 1usize..10) {
            let psd = PsdModel::rectangular(bw).unwrap();
            let a = build_schedule(3, 1, t, 2).unwrap();
            let b = build_schedule(3, 1, t + 1, 2).unwrap();
            let va = solve_weights(&a, &psd, 80.0).unwrap();
            let vb = solve_weights(&b, &psd, 80.0).unwrap();
            for l in 1..3 {
                prop_assert!(vb.predicted_mse(l, 1).unwrap() <= va.predicted_mse(l, 1).unwrap() + 1e-12);
            }
            prop_assert!(va.max_mse() >= va.predicted_mse(1, 1).unwrap());
        }
    }
}
