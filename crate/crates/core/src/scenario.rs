//! Normalized Doppler bandwidth and critical pilot period of physical
//! propagation environments.

use serde::Serialize;

use crate::error::{domain, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 3e8;

/// A propagation environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Environment {
    /// Delay spread `σ_τ` in seconds.
    pub delay_spread: f64,
    /// Terminal speed in m/s.
    pub speed: f64,
    /// Carrier frequency in Hz.
    pub carrier: f64,
}

impl Environment {
    pub fn new(delay_spread: f64, speed: f64, carrier: f64) -> Result<Self> {
        for (name, v) in [("delay_spread", delay_spread), ("speed", speed), ("carrier", carrier)] {
            if !(v > 0.0 && v.is_finite()) {
                return domain(format!("{name} = {v} must be positive and finite"));
            }
        }
        Ok(Self {
            delay_spread,
            speed,
            carrier,
        })
    }

    /// Maximum Doppler shift `f_m = v f_c / c`.
    pub fn doppler(&self) -> f64 {
        self.speed * self.carrier / SPEED_OF_LIGHT
    }

    /// Coherence bandwidth `W_c = 1/(5 σ_τ)`.
    pub fn coherence_bandwidth(&self) -> f64 {
        1.0 / (5.0 * self.delay_spread)
    }
}

/// `(λ_D, L*)` with `λ_D = f_m/W_c = 5 σ_τ (v/c) f_c` and `L* = ⌊1/(2λ_D)⌋`.
pub fn lambda_from_env(env: &Environment) -> Result<(f64, u64)> {
    let env = Environment::new(env.delay_spread, env.speed, env.carrier)?;
    let lambda = env.doppler() / env.coherence_bandwidth();
    if lambda >= 0.5 {
        return domain(format!(
            "normalized Doppler bandwidth {lambda} is not below 1/2"
        ));
    }
    // exact integers such as 43200 must not floor to 43199
    let l_star = (1.0 / (2.0 * lambda) * (1.0 + 1e-12)).floor();
    Ok((lambda, l_star as u64))
}

pub fn kmh(v: f64) -> f64 {
    v / 3.6
}

/// A row of typical environment parameters with their printed ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvironmentRow {
    pub name: &'static str,
    /// Delay spread range in seconds.
    pub delay_spread: (f64, f64),
    /// Speed in km/h.
    pub speed_kmh: f64,
    pub lambda: (f64, f64),
    pub l_star: (f64, f64),
}

/// Carrier range in Hz over which the typical rows are quoted.
pub const CARRIER_RANGE: (f64, f64) = (800e6, 5e9);

pub const TYPICAL_ENVIRONMENTS: [EnvironmentRow; 4] = [
    EnvironmentRow {
        name: "indoor",
        delay_spread: (10e-9, 100e-9),
        speed_kmh: 5.0,
        lambda: (2e-7, 1e-5),
        l_star: (5e4, 2.5e6),
    },
    EnvironmentRow {
        name: "urban-pedestrian",
        delay_spread: (1e-6, 2e-6),
        speed_kmh: 5.0,
        lambda: (2e-5, 2e-4),
        l_star: (2.5e3, 2.5e4),
    },
    EnvironmentRow {
        name: "urban-vehicular",
        delay_spread: (1e-6, 2e-6),
        speed_kmh: 75.0,
        lambda: (2e-4, 4e-3),
        l_star: (125.0, 2.5e3),
    },
    EnvironmentRow {
        name: "hilly",
        delay_spread: (3e-6, 10e-6),
        speed_kmh: 200.0,
        lambda: (2e-3, 5e-2),
        l_star: (10.0, 250.0),
    },
];

impl EnvironmentRow {
    /// The four extreme environments of the row (delay spread × carrier).
    pub fn corners(&self) -> [Environment; 4] {
        let v = kmh(self.speed_kmh);
        let (d, c) = (self.delay_spread, CARRIER_RANGE);
        [
            Environment { delay_spread: d.0, speed: v, carrier: c.0 },
            Environment { delay_spread: d.0, speed: v, carrier: c.1 },
            Environment { delay_spread: d.1, speed: v, carrier: c.0 },
            Environment { delay_spread: d.1, speed: v, carrier: c.1 },
        ]
    }
}

/// `lo/slack ≤ x ≤ hi·slack`.
pub fn within(x: f64, range: (f64, f64), slack: f64) -> bool {
    x >= range.0 / slack && x <= range.1 * slack
}
