//! Lower bounds on the generalized mutual information of nearest-neighbour
//! decoding with interpolated channel estimates, and pre-log fitting.
//!
//! All rates are in nats per channel use. Expectations over the estimated
//! channel `Ĥ_ℓ` are Monte Carlo averages; each slot `ℓ` has its own
//! counter-based stream so results do not depend on thread scheduling, and
//! the same seed reuses the same underlying Gaussians across SNR points
//! (common random numbers), which keeps fitted slopes smooth.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::digamma;

use crate::error::{domain, precondition, Result};
use crate::estimator::EstimationProfile;
use crate::rng::{self, complex_normal, Domain};
use crate::spectrum::{error_variance_no_alias, PsdModel};

const MC_CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GmiVariant {
    /// Fixed-θ bound with the Monte Carlo log-det over `Ĥ_ℓ`.
    FiniteT,
    /// `T → ∞` bound with `log det(I + A) ≥ log det A`, Monte Carlo log-det.
    Asymptotic,
    /// `T → ∞` bound with the log-det expectation in closed form.
    Digamma,
    /// `T → ∞` bound for inputs with a bounded density.
    GeneralInput,
    /// Fixed-T bound with θ optimized by golden-section search.
    Refined,
}

impl GmiVariant {
    pub fn name(self) -> &'static str {
        match self {
            Self::FiniteT => "finite-t",
            Self::Asymptotic => "asymptotic",
            Self::Digamma => "digamma",
            Self::GeneralInput => "general-input",
            Self::Refined => "refined",
        }
    }
}

/// A GMI lower bound in nats per channel use.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GmiEstimate {
    pub variant: GmiVariant,
    pub value: f64,
    /// Monte Carlo standard error (0 for closed forms).
    pub se: f64,
    pub theta: f64,
    pub snr: f64,
    /// Estimator window; `None` for `T → ∞`.
    pub window: Option<usize>,
    pub mc_samples: usize,
}

/// `F(SNR) = n_r + SNR/((L−n_t) n_t) · Σ_ℓ E‖𝔼_ℓ‖²_F` with `E‖𝔼_ℓ‖²_F = n_r Σ_t ε²_ℓ(t)`.
pub fn f_snr(profile: &EstimationProfile, snr: f64, n_r: usize) -> f64 {
    let (l, n_t) = (profile.period(), profile.n_t());
    n_r as f64 + snr * n_r as f64 * profile.total() / ((l - n_t) * n_t) as f64
}

/// `θ = −1/(n_r + SNR·n_r·ε²_*)`.
pub fn theta_choice(profile: &EstimationProfile, snr: f64, n_r: usize) -> f64 {
    -1.0 / (n_r as f64 * (1.0 + snr * profile.max()))
}

/// Eigenvalues of the smaller Gram matrix of `n_r × cols` matrices whose
/// column `t` has i.i.d. `CN(0, vars[t])` entries; one row of `min(n_r, cols)`
/// values per sample.
fn gram_eigenvalues(vars: &[f64], n_r: usize, samples: usize, seed: u64, slot: u64) -> Vec<f64> {
    let cols = vars.len();
    let k = n_r.min(cols);
    let scales: Vec<f64> = vars.iter().map(|v| v.max(0.0).sqrt()).collect();
    let chunks: Vec<Vec<f64>> = (0..samples.div_ceil(MC_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = rng::stream(seed, Domain::LogDet, (slot << 32) | c as u64);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut out = Vec::with_capacity(count * k);
            for _ in 0..count {
                let h = DMatrix::from_fn(n_r, cols, |_, t| complex_normal(&mut rng, 1.0) * scales[t]);
                let g = if cols <= n_r { h.adjoint() * &h } else { &h * h.adjoint() };
                let mut ev: Vec<f64> = g.symmetric_eigenvalues().iter().map(|v| v.max(0.0)).collect();
                ev.sort_by(|a, b| a.total_cmp(b));
                out.extend(ev);
            }
            out
        })
        .collect();
    chunks.concat()
}

fn mean_se(values: impl ExactSizeIterator<Item = f64>) -> (f64, f64) {
    let n = values.len() as f64;
    let (mut s, mut ss) = (0.0, 0.0);
    for v in values {
        s += v;
        ss += v * v;
    }
    let mean = s / n;
    let var = if n > 1.0 {
        (ss - n * mean * mean).max(0.0) / (n - 1.0)
    } else {
        0.0
    };
    (mean, (var / n).sqrt())
}

/// Monte Carlo `E log det(I + gain·Ĥ Ĥᴴ)` for every slot, from stored eigenvalues.
struct SlotSamples {
    k: usize,
    eig: Vec<Vec<f64>>,
}

impl SlotSamples {
    fn draw(column_vars: &[Vec<f64>], n_r: usize, samples: usize, seed: u64) -> Self {
        let k = n_r.min(column_vars[0].len());
        let eig = column_vars
            .iter()
            .enumerate()
            .map(|(i, v)| gram_eigenvalues(v, n_r, samples, seed, i as u64))
            .collect();
        Self { k, eig }
    }

    /// `(E log det(I + gain ĤĤᴴ), SE)` for slot `i`.
    fn log_det(&self, i: usize, gain: f64) -> (f64, f64) {
        mean_se(
            self.eig[i]
                .chunks(self.k)
                .map(|ev| ev.iter().map(|m| (gain * m).ln_1p()).sum::<f64>()),
        )
    }

    /// `(1/L) Σ_ℓ {E log det(I + gain ĤĤᴴ) − 1}` with its standard error.
    fn bound(&self, period: usize, gain: f64) -> (f64, f64) {
        let l = period as f64;
        let (mut v, mut var) = (0.0, 0.0);
        for i in 0..self.eig.len() {
            let (m, se) = self.log_det(i, gain);
            v += m - 1.0;
            var += se * se;
        }
        (v / l, var.sqrt() / l)
    }
}

fn check_mc(snr: f64, samples: usize) -> Result<()> {
    if !(snr >= 0.0 && snr.is_finite()) {
        return domain(format!("SNR {snr} must be finite and non-negative"));
    }
    if samples < 2 {
        return domain("at least two Monte Carlo samples are required");
    }
    Ok(())
}

/// Per-slot column variances `1 − ε²_ℓ(t)` for columns `cols` (zero-based antennas).
pub(crate) fn column_variances(
    profile: &EstimationProfile,
    cols: std::ops::Range<usize>,
) -> Vec<Vec<f64>> {
    (profile.n_t()..profile.period())
        .map(|l| {
            cols.clone()
                .map(|t0| 1.0 - profile.variance(l, t0 + 1).expect("profile entry"))
                .collect()
        })
        .collect()
}

/// `(1/L) Σ_ℓ {E log det(I + gain·Ĥ_ℓ Ĥ_ℓᴴ) − 1}` where `Ĥ_ℓ` is `n_r × |cols|`
/// with column variances taken from `profile`.
pub(crate) fn slot_log_det_bound(
    profile: &EstimationProfile,
    cols: std::ops::Range<usize>,
    n_r: usize,
    gain: f64,
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    let vars = column_variances(profile, cols);
    SlotSamples::draw(&vars, n_r, samples, seed).bound(profile.period(), gain)
}

/// Fixed-θ lower bound
/// `(1/L) Σ_{ℓ=n_t}^{L−1} {E log det(I + SNR/(n_t n_r (1 + SNR ε²_*)) Ĥ_ℓ Ĥ_ℓᴴ) − 1}`.
///
/// Works with finite-window profiles and with `T → ∞` profiles (including
/// aliased pilot periods). Requires `n_t = n_r`.
pub fn gmi_lb_finite_t(
    profile: &EstimationProfile,
    snr: f64,
    n_r: usize,
    samples: usize,
    seed: u64,
) -> Result<GmiEstimate> {
    check_mc(snr, samples)?;
    let n_t = profile.n_t();
    if n_t != n_r {
        return precondition(format!(
            "this bound is derived for n_t = n_r (got n_t = {n_t}, n_r = {n_r})"
        ));
    }
    let gain = snr / ((n_t * n_r) as f64 * (1.0 + snr * profile.max()));
    let (value, se) = slot_log_det_bound(profile, 0..n_t, n_r, gain, samples, seed);
    Ok(GmiEstimate {
        variant: GmiVariant::FiniteT,
        value,
        se,
        theta: theta_choice(profile, snr, n_r),
        snr,
        window: profile.window(),
        mc_samples: samples,
    })
}

/// Like [`gmi_lb_finite_t`] but maximizes the θ-dependent bound
/// `(1/L) Σ_ℓ [θ F_ℓ + E log det(I − θ (SNR/n_t) Ĥ_ℓ Ĥ_ℓᴴ)]` over θ < 0 (with
/// the same non-negative term dropped). Never returns less than the fixed-θ value.
pub fn gmi_lb_refined(
    profile: &EstimationProfile,
    snr: f64,
    n_r: usize,
    samples: usize,
    seed: u64,
) -> Result<GmiEstimate> {
    let base = gmi_lb_finite_t(profile, snr, n_r, samples, seed)?;
    if snr == 0.0 {
        return Ok(GmiEstimate {
            variant: GmiVariant::Refined,
            ..base
        });
    }
    let n_t = profile.n_t();
    let l = profile.period() as f64;
    let vars = column_variances(profile, 0..n_t);
    let draws = SlotSamples::draw(&vars, n_r, samples, seed);
    let f_l: Vec<f64> = (n_t..profile.period())
        .map(|ll| {
            let s: f64 = (1..=n_t).map(|t| profile.variance(ll, t).unwrap()).sum();
            n_r as f64 * (1.0 + snr * s / n_t as f64)
        })
        .collect();
    let c = snr / n_t as f64;
    let objective = |u: f64| -> (f64, f64) {
        let s = u.exp();
        let (mut v, mut var) = (0.0, 0.0);
        for (i, f) in f_l.iter().enumerate() {
            let (m, se) = draws.log_det(i, s * c);
            v += m - s * f;
            var += se * se;
        }
        (v / l, var.sqrt() / l)
    };
    // concave in s = −θ, hence unimodal in ln s
    let u0 = (-base.theta).ln();
    let (mut a, mut b) = (u0 - 15.0, u0 + 15.0);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (objective(x1).0, objective(x2).0);
    for _ in 0..120 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = objective(x2).0;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = objective(x1).0;
        }
    }
    let u = 0.5 * (a + b);
    let (value, se) = objective(u);
    let (value, se, theta) = if value >= base.value {
        (value, se, -u.exp())
    } else {
        (base.value, base.se, base.theta)
    };
    Ok(GmiEstimate {
        variant: GmiVariant::Refined,
        value,
        se,
        theta,
        ..base
    })
}

/// Monte Carlo `E log det(G)` for the smaller Gram matrix `G` of an
/// `n_r × n_t` matrix with i.i.d. `CN(0, variance)` entries.
pub fn mc_log_det_gram(
    n_t: usize,
    n_r: usize,
    variance: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_t == 0 || n_r == 0 || samples < 2 || variance <= 0.0 {
        return domain("invalid Monte Carlo log-det parameters");
    }
    let k = n_t.min(n_r);
    let ev = gram_eigenvalues(&vec![variance; n_t], n_r, samples, seed, 0);
    Ok(mean_se(ev.chunks(k).map(|e| e.iter().map(|m| m.ln()).sum::<f64>())))
}

/// `E log det(H̄ H̄ᴴ) − 1` in closed form for square `n_t × n_t` matrices with
/// i.i.d. `CN(0, 1 − ε²)` entries: `n_t ln(1 − ε²) + Σ_{b<n_t} ψ(n_t − b) − 1`.
pub fn digamma_closed_form(n_t: usize, eps2: f64) -> Result<f64> {
    if n_t == 0 {
        return domain("n_t must be at least 1");
    }
    if !(0.0..1.0).contains(&eps2) {
        return domain(format!("error variance {eps2} must lie in [0, 1)"));
    }
    let psi: f64 = (0..n_t).map(|b| digamma((n_t - b) as f64)).sum();
    Ok(n_t as f64 * (1.0 - eps2).ln() + psi - 1.0)
}

/// `n_t ln SNR − n_t ln(n_t² + n_t² SNR ε² E‖X‖²)`.
fn asymptotic_prefix(n_t: usize, snr: f64, eps2_energy: f64) -> f64 {
    let nt = n_t as f64;
    nt * snr.ln() - nt * (nt * nt * (1.0 + snr * eps2_energy)).ln()
}

fn check_asymptotic(psd: &PsdModel, period: usize, n_t: usize, snr: f64) -> Result<f64> {
    if !(snr > 0.0 && snr.is_finite()) {
        return domain(format!("SNR {snr} must be positive and finite"));
    }
    if n_t == 0 || period <= n_t {
        return domain(format!("pilot period {period} must exceed n_t = {n_t}"));
    }
    error_variance_no_alias(psd, period, n_t, snr)
}

/// `T → ∞` bound
/// `((L−n_t)/L)(n_t ln SNR − n_t ln(n_t² + n_t² SNR ε²) + E log det H̄H̄ᴴ − 1)`
/// with `n_t = n_r` and alias-free `L`.
pub fn gmi_lb_asymptotic(
    psd: &PsdModel,
    period: usize,
    n_t: usize,
    snr: f64,
    samples: usize,
    seed: u64,
) -> Result<GmiEstimate> {
    let eps2 = check_asymptotic(psd, period, n_t, snr)?;
    check_mc(snr, samples)?;
    let (ld, se) = mc_log_det_gram(n_t, n_t, 1.0 - eps2, samples, seed)?;
    let frac = (period - n_t) as f64 / period as f64;
    Ok(GmiEstimate {
        variant: GmiVariant::Asymptotic,
        value: frac * (asymptotic_prefix(n_t, snr, eps2) + ld - 1.0),
        se: frac * se,
        theta: -1.0 / (n_t as f64 * (1.0 + snr * eps2)),
        snr,
        window: None,
        mc_samples: samples,
    })
}

/// [`gmi_lb_asymptotic`] with the log-det expectation replaced by [`digamma_closed_form`].
pub fn asymptotic_closed_form(
    psd: &PsdModel,
    period: usize,
    n_t: usize,
    snr: f64,
) -> Result<GmiEstimate> {
    let eps2 = check_asymptotic(psd, period, n_t, snr)?;
    let frac = (period - n_t) as f64 / period as f64;
    Ok(GmiEstimate {
        variant: GmiVariant::Digamma,
        value: frac * (asymptotic_prefix(n_t, snr, eps2) + digamma_closed_form(n_t, eps2)?),
        se: 0.0,
        theta: -1.0 / (n_t as f64 * (1.0 + snr * eps2)),
        snr,
        window: None,
        mc_samples: 0,
    })
}

/// `T → ∞` bound for inputs whose density is at most `K π^{−n_t} e^{−‖x‖²}`
/// and whose energy is `E‖X‖² = e_norm_sq`.
#[allow(clippy::too_many_arguments)]
pub fn gmi_lb_general_input(
    psd: &PsdModel,
    period: usize,
    n_t: usize,
    snr: f64,
    k: f64,
    e_norm_sq: f64,
    samples: usize,
    seed: u64,
) -> Result<GmiEstimate> {
    let eps2 = check_asymptotic(psd, period, n_t, snr)?;
    check_mc(snr, samples)?;
    if !(k >= 1.0 && k.is_finite()) {
        return domain(format!("density constant K = {k} must be at least 1"));
    }
    if !(e_norm_sq > 0.0 && e_norm_sq <= n_t as f64) {
        return domain(format!("E‖X‖² = {e_norm_sq} must lie in (0, n_t]"));
    }
    let (ld, se) = mc_log_det_gram(n_t, n_t, 1.0 - eps2, samples, seed)?;
    let frac = (period - n_t) as f64 / period as f64;
    Ok(GmiEstimate {
        variant: GmiVariant::GeneralInput,
        value: frac * (asymptotic_prefix(n_t, snr, eps2 * e_norm_sq) + ld - 1.0 - k.ln()),
        se: frac * se,
        theta: -1.0 / (n_t as f64 * (1.0 + snr * eps2 * e_norm_sq)),
        snr,
        window: None,
        mc_samples: samples,
    })
}

/// Least-squares slope of a rate curve against `ln SNR`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreLogFit {
    pub snr_db: Vec<f64>,
    pub values: Vec<f64>,
    /// Nats per unit of `ln SNR`; dimensionless pre-log.
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the linear fit.
    pub residual: f64,
}

/// Fits `value ≈ slope·ln SNR + intercept` over `(snr_db, value)` points.
pub fn prelog_fit(points: &[(f64, f64)]) -> Result<PreLogFit> {
    if points.len() < 4 {
        return domain(format!("need at least 4 grid points, got {}", points.len()));
    }
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return domain("SNR grid must be strictly increasing");
    }
    let span = points[points.len() - 1].0 - points[0].0;
    if span < 20.0 {
        return domain(format!("SNR grid spans {span} dB; at least 20 dB required"));
    }
    if points.iter().any(|p| !p.1.is_finite()) {
        return domain("rate values must be finite");
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0 * std::f64::consts::LN_10 / 10.0).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(points).map(|(x, p)| (x - mx) * (p.1 - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(points)
        .map(|(x, p)| (p.1 - slope * x - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(PreLogFit {
        snr_db: points.iter().map(|p| p.0).collect(),
        values: points.iter().map(|p| p.1).collect(),
        slope,
        intercept,
        residual,
    })
}

/// `10^{db/10}`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Nats to bits.
pub fn nats_to_bits(x: f64) -> f64 {
    x / std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::build_schedule;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const EULER: f64 = 0.577_215_664_901_532_9;

    fn rect() -> PsdModel {
        PsdModel::rectangular(0.125).unwrap()
    }

    fn profile_inf(l: usize, n_t: usize, snr: f64) -> EstimationProfile {
        EstimationProfile::asymptotic(&rect(), l, n_t, snr).unwrap()
    }

    #[test]
    fn f_snr_examples() {
        let p = profile_inf(4, 2, 100.0);
        assert_relative_eq!(p.max(), 0.019_608, epsilon = 1e-6);
        // 2 + 100·(2 slots · 4 entries · ε²)/(2·2)
        assert_relative_eq!(f_snr(&p, 100.0, 2), 2.0 + 100.0 * 8.0 * p.max() / 4.0, epsilon = 1e-12);
        assert_relative_eq!(f_snr(&p, 100.0, 2), 5.9216, epsilon = 1e-4);
        let p0 = profile_inf(4, 2, 0.0);
        assert_eq!(f_snr(&p0, 0.0, 2), 2.0);
    }

    #[test]
    fn theta_examples() {
        let p0 = profile_inf(4, 2, 0.0);
        assert_eq!(theta_choice(&p0, 0.0, 2), -0.5);
    }

    #[test]
    fn zero_snr_bound() {
        let p = profile_inf(4, 2, 0.0);
        let g = gmi_lb_finite_t(&p, 0.0, 2, 100, 1).unwrap();
        assert_relative_eq!(g.value, -0.5, epsilon = 1e-15);
        assert!(gmi_lb_finite_t(&p, 1.0, 3, 100, 1).is_err());
    }

    #[test]
    fn digamma_examples() {
        assert_relative_eq!(digamma_closed_form(1, 0.0).unwrap(), -EULER - 1.0, epsilon = 1e-12);
        assert_relative_eq!(digamma_closed_form(2, 0.0).unwrap(), -2.0 * EULER, epsilon = 1e-12);
        assert!(digamma_closed_form(1, 1.0 - 1e-9).unwrap() < -20.0);
        assert!(digamma_closed_form(1, 1.0).is_err());
    }

    #[test]
    fn digamma_matches_monte_carlo() {
        for n_t in 1..=3 {
            let (m, se) = mc_log_det_gram(n_t, n_t, 0.7, 40_000, 17).unwrap();
            let cf = digamma_closed_form(n_t, 0.3).unwrap() + 1.0;
            assert!((m - cf).abs() <= 3.0 * se, "n_t = {n_t}: {m} ± {se} vs {cf}");
        }
    }

    #[test]
    fn asymptotic_matches_closed_form_substitution() {
        let mc = gmi_lb_asymptotic(&rect(), 4, 2, 1e4, 40_000, 3).unwrap();
        let cf = asymptotic_closed_form(&rect(), 4, 2, 1e4).unwrap();
        assert!((mc.value - cf.value).abs() <= 3.0 * mc.se);
        assert_eq!(mc.theta, cf.theta);
        assert!(gmi_lb_asymptotic(&rect(), 5, 2, 1e4, 100, 3).is_err());
        assert!(gmi_lb_asymptotic(&rect(), 4, 2, 1e6, 1000, 3).unwrap().value > 0.0);
        assert!(asymptotic_closed_form(&rect(), 4, 2, 1.0).unwrap().value < 0.0);
    }

    #[test]
    fn high_snr_reduction() {
        // ε² → 0 at large SNR: ((L−n_t)/L)(n_t ln SNR − n_t ln(n_t n_r) + E log det GGᴴ − 1)
        let snr = 1e6;
        let p = EstimationProfile::asymptotic(&PsdModel::raised_cosine(0.01).unwrap(), 20, 2, 1e12).unwrap();
        let g = gmi_lb_finite_t(&p, snr, 2, 20_000, 9).unwrap();
        let approx = 18.0 / 20.0 * (2.0 * snr.ln() - 2.0 * 4f64.ln() + digamma_closed_form(2, 0.0).unwrap());
        // log det(I + A) − log det A ≈ tr A^{-1} is O(1/SNR)
        assert!((g.value - approx).abs() < 0.01, "{} vs {approx}", g.value);
    }

    #[test]
    fn general_input_matches_asymptotic_for_single_antenna() {
        let a = gmi_lb_asymptotic(&rect(), 4, 1, 1e5, 5000, 2).unwrap();
        let b = gmi_lb_general_input(&rect(), 4, 1, 1e5, 1.0, 1.0, 5000, 2).unwrap();
        assert_relative_eq!(a.value, b.value, epsilon = 1e-12);
        let k = crate::codec::InputLaw::TruncatedGaussian.density_constant(1);
        let e = crate::codec::InputLaw::TruncatedGaussian.mean_energy(1);
        let c = gmi_lb_general_input(&rect(), 4, 1, 1e5, k, e, 5000, 2).unwrap();
        assert!(c.value < b.value + 1.0);
        for db in [20.0, 60.0, 100.0] {
            assert!(k.ln() / db_to_linear(db).ln() < 0.11);
        }
    }

    #[test]
    fn mc_self_consistency() {
        let p = profile_inf(4, 2, 1e3);
        let a = gmi_lb_finite_t(&p, 1e3, 2, 4_000, 1).unwrap();
        let b = gmi_lb_finite_t(&p, 1e3, 2, 40_000, 2).unwrap();
        assert!((a.value - b.value).abs() <= 3.0 * (a.se.powi(2) + b.se.powi(2)).sqrt());
    }

    #[test]
    fn refined_never_below_fixed_theta() {
        for snr in [1.0, 100.0, 1e5] {
            let s = build_schedule(4, 2, 3, 2).unwrap();
            let p = EstimationProfile::finite(&s, &rect(), snr).unwrap();
            let base = gmi_lb_finite_t(&p, snr, 2, 2000, 4).unwrap();
            let r = gmi_lb_refined(&p, snr, 2, 2000, 4).unwrap();
            assert!(r.value >= base.value);
            assert!(r.theta < 0.0);
        }
    }

    #[test]
    fn window_ordering() {
        let snr = 1e4;
        let mut prev: Option<GmiEstimate> = None;
        for t in [1, 2, 4, 8] {
            let s = build_schedule(4, 2, t, 2).unwrap();
            let p = EstimationProfile::finite(&s, &rect(), snr).unwrap();
            let g = gmi_lb_finite_t(&p, snr, 2, 5000, 8).unwrap();
            if let Some(q) = prev {
                assert!(q.value <= g.value + 3.0 * (q.se.powi(2) + g.se.powi(2)).sqrt());
            }
            prev = Some(g);
        }
    }

    #[test]
    fn fit_examples() {
        let pts: Vec<(f64, f64)> = (0..6).map(|i| {
            let db = 40.0 + 8.0 * i as f64;
            (db, 2.0 * db_to_linear(db).ln() + 0.3)
        }).collect();
        let f = prelog_fit(&pts).unwrap();
        assert_relative_eq!(f.slope, 2.0, epsilon = 1e-12);
        assert!(prelog_fit(&pts[..3]).is_err());
        assert!(prelog_fit(&[(0.0, 1.0), (5.0, 1.0), (10.0, 1.0), (15.0, 1.0)]).is_err());
        assert!(prelog_fit(&[(0.0, 1.0), (0.0, 1.0), (10.0, 1.0), (25.0, 1.0)]).is_err());
    }

    #[test]
    fn slope_is_half_at_critical_period() {
        let pts: Vec<(f64, f64)> = [40.0, 50.0, 60.0, 70.0, 80.0]
            .iter()
            .map(|&db| (db, gmi_lb_asymptotic(&rect(), 4, 2, db_to_linear(db), 4000, 5).unwrap().value))
            .collect();
        let f = prelog_fit(&pts).unwrap();
        assert!((f.slope - 1.0).abs() < 0.1, "{}", f.slope);
    }

    proptest! {
        #[test]
        fn theta_sandwich(db in -10.0f64..80.0, n_t in 1usize..3) {
            let snr = db_to_linear(db);
            let p = profile_inf(4, n_t, snr);
            let th = theta_choice(&p, snr, n_t);
            let nr = n_t as f64;
            prop_assert!(th < 0.0);
            prop_assert!(-th <= 1.0 / nr && -th >= 1.0 / (nr * (1.0 + (4 * n_t) as f64)));
        }
    }
}
