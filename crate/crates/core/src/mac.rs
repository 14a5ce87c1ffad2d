//! Two-user MIMO MAC with time-orthogonal pilots and jointly decoded data.
//!
//! The MAC input-output relation `Y = √SNR (H₁x₁ + H₂x₂) + Z` has no `1/n_t`
//! scaling, so the stacked channel `[H₁, H₂]` is the point-to-point channel
//! with `N = n_t1 + n_t2` antennas at `SNR_p2p = N·SNR`. Schedules, estimators
//! and profiles are reused from the point-to-point code under that mapping.

use std::cmp::Ordering;
use std::fmt;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::codec::{symbol_metric, Codebook, Received};
use crate::error::{domain, precondition, Error, Result};
use crate::estimator::{DataChannels, EstimationProfile, PilotSchedule};
use crate::gmi::{slot_log_det_bound, GmiEstimate, GmiVariant};
use crate::spectrum::PsdModel;

pub type Rational = Ratio<i64>;

/// Antenna counts, framing and SNR of the two-user MAC.
#[derive(Debug, Clone, PartialEq)]
pub struct MacConfig {
    pub n_t1: usize,
    pub n_t2: usize,
    pub n_r: usize,
    pub period: usize,
    pub window: usize,
    pub n: usize,
    /// Per-antenna SNR, linear.
    pub snr: f64,
    /// TDMA time share of user 1.
    pub beta: f64,
}

impl MacConfig {
    pub fn n_total(&self) -> usize {
        self.n_t1 + self.n_t2
    }

    /// SNR of the equivalent point-to-point channel.
    pub fn snr_p2p(&self) -> f64 {
        self.snr * self.n_total() as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_t1 == 0 || self.n_t2 == 0 || self.n_r == 0 {
            return domain("antenna counts must be positive");
        }
        if !(self.snr >= 0.0 && self.snr.is_finite()) {
            return domain(format!("SNR {} must be finite and non-negative", self.snr));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return domain(format!("time share β = {} must lie in [0, 1]", self.beta));
        }
        if self.period <= self.n_total() {
            return domain(format!(
                "pilot period {} must exceed n_t1 + n_t2 = {}",
                self.period,
                self.n_total()
            ));
        }
        Ok(())
    }
}

/// User-1 pilots in slots `0..n_t1`, user-2 pilots in `n_t1..N`, shared data slots.
pub fn mac_schedule(cfg: &MacConfig) -> Result<PilotSchedule> {
    cfg.validate()?;
    PilotSchedule::new(cfg.period, cfg.n_total(), cfg.window, cfg.n)
}

/// Which user transmits a pilot at use `k`, with its zero-based antenna.
pub fn mac_pilot_owner(cfg: &MacConfig, schedule: &PilotSchedule, k: usize) -> Option<(usize, usize)> {
    schedule.pilot_antenna(k).map(|t| {
        if t < cfg.n_t1 {
            (1, t)
        } else {
            (2, t - cfg.n_t1)
        }
    })
}

/// Finite-window interpolation errors of both users.
pub fn mac_profile_finite(cfg: &MacConfig, psd: &PsdModel) -> Result<EstimationProfile> {
    let s = mac_schedule(cfg)?;
    EstimationProfile::finite(&s, psd, cfg.snr_p2p())
}

/// `T → ∞` interpolation errors; rejects aliased pilot periods.
pub fn mac_profile_asymptotic(cfg: &MacConfig, psd: &PsdModel) -> Result<EstimationProfile> {
    cfg.validate()?;
    if !psd.is_alias_free(cfg.period) {
        return precondition(format!(
            "pilot period {} exceeds the critical period {}",
            cfg.period,
            psd.critical_period()
        ));
    }
    EstimationProfile::asymptotic(psd, cfg.period, cfg.n_total(), cfg.snr_p2p())
}

fn mac_gmi(
    cfg: &MacConfig,
    profile: &EstimationProfile,
    cols: std::ops::Range<usize>,
    samples: usize,
    seed: u64,
) -> Result<GmiEstimate> {
    cfg.validate()?;
    if profile.n_t() != cfg.n_total() || profile.period() != cfg.period {
        return Err(Error::LengthMismatch {
            what: "profile transmit antennas",
            expected: cfg.n_total(),
            actual: profile.n_t(),
        });
    }
    if samples < 2 {
        return domain("at least two Monte Carlo samples are required");
    }
    let n_r = cfg.n_r as f64;
    let denom = n_r * (1.0 + cfg.n_total() as f64 * cfg.snr * profile.max());
    let (value, se) = slot_log_det_bound(profile, cols, cfg.n_r, cfg.snr / denom, samples, seed);
    Ok(GmiEstimate {
        variant: GmiVariant::FiniteT,
        value,
        se,
        theta: -1.0 / denom,
        snr: cfg.snr,
        window: profile.window(),
        mc_samples: samples,
    })
}

/// Bound for the event where only user 1's message is in error:
/// `(1/L) Σ_ℓ E[log det(I + SNR Ĥ₁Ĥ₁ᴴ/(n_r + n_r N SNR ε²_*)) − 1]`.
pub fn mac_gmi_user1(cfg: &MacConfig, profile: &EstimationProfile, samples: usize, seed: u64) -> Result<GmiEstimate> {
    mac_gmi(cfg, profile, 0..cfg.n_t1, samples, seed)
}

/// [`mac_gmi_user1`] with the users swapped.
pub fn mac_gmi_user2(cfg: &MacConfig, profile: &EstimationProfile, samples: usize, seed: u64) -> Result<GmiEstimate> {
    mac_gmi(cfg, profile, cfg.n_t1..cfg.n_total(), samples, seed)
}

/// Bound for the event where both messages are in error (stacked `[Ĥ₁, Ĥ₂]`).
pub fn mac_gmi_sum(cfg: &MacConfig, profile: &EstimationProfile, samples: usize, seed: u64) -> Result<GmiEstimate> {
    mac_gmi(cfg, profile, 0..cfg.n_total(), samples, seed)
}

/// Outcome of joint nearest-neighbour decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct MacDecodeResult {
    /// Zero-based decided pair.
    pub decided: (usize, usize),
    pub metric: f64,
    pub tie: bool,
}

/// Exhaustive argmin over message pairs of
/// `Σ_k ‖Y_k − √SNR (Ĥ₁_k x₁_k(m₁) + Ĥ₂_k x₂_k(m₂))‖²`.
///
/// `estimates` holds the stacked `n_r × (n_t1 + n_t2)` estimates per data use.
pub fn mac_nn_decode(
    received: &Received,
    estimates: &DataChannels,
    book1: &Codebook,
    book2: &Codebook,
    snr: f64,
) -> Result<MacDecodeResult> {
    let (n_r, cols) = estimates.dims();
    let (n1, n2) = (book1.n_t(), book2.n_t());
    if cols != n1 + n2 {
        return Err(Error::LengthMismatch {
            what: "stacked estimate columns",
            expected: n1 + n2,
            actual: cols,
        });
    }
    for book in [book1, book2] {
        if book.len() != estimates.len() {
            return Err(Error::LengthMismatch {
                what: "data symbols with channel estimates",
                expected: book.len(),
                actual: estimates.len(),
            });
        }
    }
    if n_r != received.n_r() {
        return Err(Error::LengthMismatch {
            what: "receive antennas",
            expected: n_r,
            actual: received.n_r(),
        });
    }
    if !(snr >= 0.0 && snr.is_finite()) {
        return domain(format!("SNR {snr} must be finite and non-negative"));
    }
    let amp = snr.sqrt();
    let m2 = book2.size();
    let metrics: Vec<f64> = (0..book1.size() * m2)
        .into_par_iter()
        .map(|p| {
            let (w1, w2) = (book1.codeword(p / m2), book2.codeword(p % m2));
            let mut x = vec![Default::default(); cols];
            (0..estimates.len())
                .map(|i| {
                    x[..n1].copy_from_slice(&w1[i * n1..(i + 1) * n1]);
                    x[n1..].copy_from_slice(&w2[i * n2..(i + 1) * n2]);
                    symbol_metric(received.output(estimates.use_index(i)), estimates.matrix(i), &x, amp)
                })
                .sum()
        })
        .collect();
    let mut best = 0;
    for (p, &d) in metrics.iter().enumerate() {
        if d < metrics[best] {
            best = p;
        }
    }
    let tie = metrics.iter().enumerate().any(|(p, &d)| p != best && d == metrics[best]);
    Ok(MacDecodeResult {
        decided: (best / m2, best % m2),
        metric: metrics[best],
        tie,
    })
}

/// Half-plane `a·Π₁ + b·Π₂ ≤ c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub label: &'static str,
    pub a: Rational,
    pub b: Rational,
    pub c: Rational,
}

impl Constraint {
    fn new(label: &'static str, a: Rational, b: Rational, c: Rational) -> Self {
        Self { label, a, b, c }
    }

    pub fn holds(&self, p: (Rational, Rational)) -> bool {
        self.a * p.0 + self.b * p.1 <= self.c
    }
}

/// Convex polygon in the `(Π₁, Π₂)` plane, given exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreLogRegion {
    pub name: &'static str,
    /// Non-negativity is included as `−Π ≤ 0` rows.
    pub constraints: Vec<Constraint>,
    /// Counter-clockwise from the origin.
    pub vertices: Vec<(Rational, Rational)>,
}

impl PreLogRegion {
    fn from_constraints(name: &'static str, mut constraints: Vec<Constraint>) -> Self {
        let (zero, one) = (Rational::from(0), Rational::from(1));
        constraints.push(Constraint::new("pi1>=0", -one, zero, zero));
        constraints.push(Constraint::new("pi2>=0", zero, -one, zero));
        let mut vertices: Vec<(Rational, Rational)> = Vec::new();
        for (i, p) in constraints.iter().enumerate() {
            for q in &constraints[i + 1..] {
                let det = p.a * q.b - p.b * q.a;
                if det == zero {
                    continue;
                }
                let v = ((p.c * q.b - p.b * q.c) / det, (p.a * q.c - p.c * q.a) / det);
                if constraints.iter().all(|c| c.holds(v)) && !vertices.contains(&v) {
                    vertices.push(v);
                }
            }
        }
        vertices.sort_by(|p, q| {
            if *p == (zero, zero) {
                return Ordering::Less;
            }
            if *q == (zero, zero) {
                return Ordering::Greater;
            }
            // angle order about the origin; all points lie in the first quadrant
            (q.0 * p.1).cmp(&(p.0 * q.1))
        });
        Self {
            name,
            constraints,
            vertices,
        }
    }

    pub fn contains(&self, p: (Rational, Rational)) -> bool {
        self.constraints.iter().all(|c| c.holds(p))
    }

    /// Largest `Π₁ + Π₂` over the region.
    pub fn max_sum(&self) -> Rational {
        self.vertices
            .iter()
            .map(|v| v.0 + v.1)
            .max()
            .unwrap_or_else(|| Rational::from(0))
    }
}

fn r(x: usize) -> Rational {
    Rational::from(x as i64)
}

fn check_antennas(n_t1: usize, n_t2: usize, n_r: usize) -> Result<()> {
    if n_t1 == 0 || n_t2 == 0 || n_r == 0 {
        return domain("antenna counts must be positive");
    }
    Ok(())
}

/// Pre-log region of joint transmission with nearest-neighbour decoding.
pub fn jt_region(n_t1: usize, n_t2: usize, n_r: usize, l_star: usize) -> Result<PreLogRegion> {
    check_antennas(n_t1, n_t2, n_r)?;
    let nn = n_t1 + n_t2;
    if l_star < nn {
        return precondition(format!("L* = {l_star} must be at least n_t1 + n_t2 = {nn}"));
    }
    let f = Rational::from(1) - Rational::new(nn as i64, l_star as i64);
    let (zero, one) = (Rational::from(0), Rational::from(1));
    Ok(PreLogRegion::from_constraints(
        "jt",
        vec![
            Constraint::new("pi1", one, zero, r(n_r.min(n_t1)) * f),
            Constraint::new("pi2", zero, one, r(n_r.min(n_t2)) * f),
            Constraint::new("sum", one, one, r(n_r.min(nn)) * f),
        ],
    ))
}

/// Coherent (perfect-CSI) capacity pre-log region.
pub fn coherent_region(n_t1: usize, n_t2: usize, n_r: usize) -> Result<PreLogRegion> {
    check_antennas(n_t1, n_t2, n_r)?;
    let (zero, one) = (Rational::from(0), Rational::from(1));
    Ok(PreLogRegion::from_constraints(
        "coherent",
        vec![
            Constraint::new("pi1", one, zero, r(n_r.min(n_t1))),
            Constraint::new("pi2", zero, one, r(n_r.min(n_t2))),
            Constraint::new("sum", one, one, r(n_r.min(n_t1 + n_t2))),
        ],
    ))
}

fn triangle(name: &'static str, a: Rational, b: Rational) -> PreLogRegion {
    PreLogRegion::from_constraints(name, vec![Constraint::new("tdma", b, a, a * b)])
}

/// TDMA legs `(A, B)` with nearest-neighbour decoding.
pub fn tdma_legs(n_t1: usize, n_t2: usize, n_r: usize, l_star: usize) -> Result<(Rational, Rational)> {
    check_antennas(n_t1, n_t2, n_r)?;
    if l_star <= n_t1.max(n_t2) {
        return precondition(format!(
            "L* = {l_star} must exceed max(n_t1, n_t2) = {}",
            n_t1.max(n_t2)
        ));
    }
    let leg = |n_t: usize| r(n_r.min(n_t)) * (Rational::from(1) - Rational::new(n_t as i64, l_star as i64));
    Ok((leg(n_t1), leg(n_t2)))
}

/// TDMA pre-log region: the triangle with legs `A` and `B`.
pub fn tdma_region(n_t1: usize, n_t2: usize, n_r: usize, l_star: usize) -> Result<PreLogRegion> {
    let (a, b) = tdma_legs(n_t1, n_t2, n_r, l_star)?;
    Ok(triangle("tdma", a, b))
}

/// TDMA point at time share `β`: `(β·A, (1−β)·B)`.
pub fn tdma_point(legs: (Rational, Rational), beta: Rational) -> (Rational, Rational) {
    (beta * legs.0, (Rational::from(1) - beta) * legs.1)
}

/// Coherent TDMA triangle with legs `min(n_r, n_t1)` and `min(n_r, n_t2)`.
pub fn coherent_tdma_region(n_t1: usize, n_t2: usize, n_r: usize) -> Result<PreLogRegion> {
    check_antennas(n_t1, n_t2, n_r)?;
    Ok(triangle("coherent-tdma", r(n_r.min(n_t1)), r(n_r.min(n_t2))))
}

/// A threshold on `L*`, possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threshold {
    Finite(Rational),
    Infinite,
}

impl Threshold {
    fn ratio(num: i64, den: i64) -> Self {
        if den == 0 {
            Self::Infinite
        } else {
            Self::Finite(Rational::new(num, den))
        }
    }

    /// `l < self`.
    pub fn exceeds(&self, l: usize) -> bool {
        match self {
            Self::Infinite => true,
            Self::Finite(t) => r(l) < *t,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Self::Infinite => f64::INFINITY,
            Self::Finite(t) => *t.numer() as f64 / *t.denom() as f64,
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Infinite => f.write_str("inf"),
            Self::Finite(t) => write!(f, "{t}"),
        }
    }
}

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    JtSuperior,
    TdmaSuperior,
    Indeterminate,
}

/// Sum-rate comparison of joint transmission against the best TDMA scheme.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerdictReport {
    pub n_t1: usize,
    pub n_t2: usize,
    pub n_r: usize,
    pub l_star: usize,
    /// Joint transmission wins for `L*` above this.
    pub jt_threshold: Threshold,
    /// TDMA wins for `L*` below this.
    pub tdma_threshold: Threshold,
    pub verdict: Verdict,
}

/// Both thresholds on `L*`.
pub fn corollary1_thresholds(n_t1: usize, n_t2: usize, n_r: usize) -> Result<(Threshold, Threshold)> {
    check_antennas(n_t1, n_t2, n_r)?;
    let (n1, n2, nr) = (n_t1 as i64, n_t2 as i64, n_r as i64);
    let nn = n1 + n2;
    let c = nr.min(nn);
    let jt = Threshold::ratio(c * nn, c - nr.min(n1.max(n2)));
    let m = (n1 * nr).min(n1 * n1).min(n2 * nr).min(n2 * n2);
    let tdma = Threshold::ratio(c * nn - m, c - nr.min(n1).min(n2));
    Ok((jt, tdma))
}

/// Joint transmission is checked first; the two tests cannot both hold.
pub fn corollary1_verdict(n_t1: usize, n_t2: usize, n_r: usize, l_star: usize) -> Result<VerdictReport> {
    let (jt, tdma) = corollary1_thresholds(n_t1, n_t2, n_r)?;
    let verdict = match jt {
        Threshold::Finite(t) if r(l_star) > t => Verdict::JtSuperior,
        _ if tdma.exceeds(l_star) => Verdict::TdmaSuperior,
        _ => Verdict::Indeterminate,
    };
    Ok(VerdictReport {
        n_t1,
        n_t2,
        n_r,
        l_star,
        jt_threshold: jt,
        tdma_threshold: tdma,
        verdict,
    })
}
