//! Flat TOML run configuration and its validation.

use std::fmt;
use std::path::Path;

use nnpilot_core::codec::InputLaw;
use nnpilot_core::{PsdModel, PsdShape};
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

/// GMI bound variants accepted in `variants`.
pub const VARIANTS: [&str; 6] = [
    "finite-t",
    "finite-t-limit",
    "refined",
    "asymptotic",
    "digamma",
    "general-input",
];

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: Option<u64>,

    pub psd: PsdShape,
    /// Normalized Doppler bandwidth.
    pub lambda_d: f64,

    /// Pilot period `L`.
    pub period: usize,
    /// Estimator window `T`.
    pub window: usize,
    /// Windows swept by `interp-error`; defaults to `[window]`.
    pub windows: Vec<usize>,
    /// Data symbols per codeword.
    pub n: usize,
    pub n_t: usize,
    pub n_r: usize,

    pub snr_db: Vec<f64>,
    pub frames: usize,
    pub mc_samples: usize,

    pub input: InputLaw,
    pub code_lengths: Vec<usize>,
    pub code_sizes: Vec<usize>,

    pub variants: Vec<String>,

    pub n_t1: usize,
    pub n_t2: usize,
    /// Critical pilot period; defaults to the one of the PSD.
    pub l_star: Option<usize>,
    /// TDMA sweep resolution: β = 0, 1/beta_steps, …, 1.
    pub beta_steps: usize,

    /// Path length of `dump-fading`.
    pub length: usize,

    pub delay_spread_s: Option<f64>,
    pub speed_kmh: Option<f64>,
    pub carrier_hz: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: None,
            psd: PsdShape::Rectangular,
            lambda_d: 0.125,
            period: 4,
            window: 16,
            windows: Vec::new(),
            n: 24,
            n_t: 1,
            n_r: 1,
            snr_db: vec![20.0],
            frames: 1000,
            mc_samples: 20_000,
            input: InputLaw::Gaussian,
            code_lengths: vec![24],
            code_sizes: vec![16],
            variants: vec!["finite-t".into()],
            n_t1: 1,
            n_t2: 1,
            l_star: None,
            beta_steps: 100,
            length: 1024,
            delay_spread_s: None,
            speed_kmh: None,
            carrier_hz: None,
        }
    }
}

/// A validation failure at a config field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config.{}: {}", self.path, self.message)
    }
}

#[derive(Debug)]
pub struct ConfigErrors(pub Vec<FieldError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration:")?;
        for e in &self.0 {
            writeln!(f, "  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

fn err(path: impl Into<String>, message: impl Into<String>) -> FieldError {
    FieldError {
        path: path.into(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| anyhow::anyhow!("config: {e}"))?;
        match table.get("schema_version") {
            None => return Err(ConfigErrors(vec![err("schema_version", "missing")]).into()),
            Some(toml::Value::Integer(v)) if *v == SCHEMA_VERSION as i64 => {}
            Some(v) => {
                return Err(ConfigErrors(vec![err(
                    "schema_version",
                    format!("unsupported value {v}; expected {SCHEMA_VERSION}"),
                )])
                .into())
            }
        }
        for (key, value) in &table {
            if matches!(value, toml::Value::Table(_)) {
                return Err(ConfigErrors(vec![err(key.clone(), "nested tables are not allowed")]).into());
            }
        }
        toml::Table::try_into(table).map_err(|e| anyhow::anyhow!("config: {}", e.message()))
    }

    pub fn psd_model(&self) -> PsdModel {
        PsdModel::new(self.psd, self.lambda_d).expect("validated bandwidth")
    }

    pub fn windows(&self) -> Vec<usize> {
        if self.windows.is_empty() {
            vec![self.window]
        } else {
            self.windows.clone()
        }
    }

    pub fn l_star(&self) -> usize {
        self.l_star.unwrap_or_else(|| self.psd_model().critical_period())
    }

    fn check_psd(&self, out: &mut Vec<FieldError>) -> bool {
        if !(self.lambda_d > 0.0 && self.lambda_d < 0.5) {
            out.push(err("lambda_d", format!("{} must lie in (0, 1/2)", self.lambda_d)));
            return false;
        }
        true
    }

    fn check_link(&self, out: &mut Vec<FieldError>, data_len: Option<(&str, &[usize])>) {
        if self.n_t == 0 {
            out.push(err("n_t", "must be at least 1"));
        }
        if self.n_r == 0 {
            out.push(err("n_r", "must be at least 1"));
        }
        if self.period <= self.n_t {
            out.push(err("period", format!("{} must exceed n_t = {}", self.period, self.n_t)));
            return;
        }
        if let Some((name, lens)) = data_len {
            let d = self.period - self.n_t;
            for (i, &n) in lens.iter().enumerate() {
                if n == 0 || n % d != 0 {
                    let path = if name == "n" { name.to_string() } else { format!("{name}[{i}]") };
                    out.push(err(path, format!("{n} must be a positive multiple of period − n_t = {d}")));
                }
            }
        }
    }

    fn check_snr_grid(&self, out: &mut Vec<FieldError>) {
        if self.snr_db.is_empty() {
            out.push(err("snr_db", "must not be empty"));
        }
        for (i, v) in self.snr_db.iter().enumerate() {
            if !v.is_finite() || *v > 200.0 || *v < -100.0 {
                out.push(err(format!("snr_db[{i}]"), format!("{v} dB is outside [−100, 200]")));
            }
        }
    }

    fn check_windows(&self, out: &mut Vec<FieldError>) {
        if self.windows.is_empty() && self.window == 0 {
            out.push(err("window", "must be at least 1"));
        }
        for (i, &t) in self.windows.iter().enumerate() {
            if t == 0 {
                out.push(err(format!("windows[{i}]"), "must be at least 1"));
            }
        }
    }

    /// Every precondition of the operations run by `command`.
    pub fn validate(&self, command: Command) -> Result<(), ConfigErrors> {
        let mut out = Vec::new();
        match command {
            Command::Scenario => {
                let given = [self.delay_spread_s, self.speed_kmh, self.carrier_hz];
                let names = ["delay_spread_s", "speed_kmh", "carrier_hz"];
                let count = given.iter().filter(|v| v.is_some()).count();
                if count != 0 && count != 3 {
                    for (v, name) in given.iter().zip(names) {
                        if v.is_none() {
                            out.push(err(name, "required when any environment field is set"));
                        }
                    }
                }
                for (v, name) in given.iter().zip(names) {
                    if let Some(v) = v {
                        if !(*v > 0.0 && v.is_finite()) {
                            out.push(err(name, format!("{v} must be positive")));
                        }
                    }
                }
                if out.is_empty() && count == 3 {
                    let env = self.environment().expect("fields present");
                    if let Err(e) = nnpilot_core::scenario::lambda_from_env(&env) {
                        out.push(err("delay_spread_s", e.to_string()));
                    }
                }
            }
            Command::InterpError => {
                self.check_psd(&mut out);
                self.check_link(&mut out, Some(("n", std::slice::from_ref(&self.n))));
                self.check_windows(&mut out);
                self.check_snr_grid(&mut out);
                if self.frames < 2 {
                    out.push(err("frames", "at least 2 frames are needed for standard errors"));
                }
            }
            Command::Prelog => {
                let psd_ok = self.check_psd(&mut out);
                self.check_link(&mut out, None);
                self.check_snr_grid(&mut out);
                if self.window == 0 {
                    out.push(err("window", "must be at least 1"));
                }
                if self.mc_samples < 2 {
                    out.push(err("mc_samples", "must be at least 2"));
                }
                let pts: Vec<(f64, f64)> = self.snr_db.iter().map(|&d| (d, 0.0)).collect();
                if let Err(e) = nnpilot_core::gmi::prelog_fit(&pts) {
                    out.push(err("snr_db", e.to_string()));
                }
                if self.variants.is_empty() {
                    out.push(err("variants", "must not be empty"));
                }
                for (i, v) in self.variants.iter().enumerate() {
                    let path = format!("variants[{i}]");
                    if !VARIANTS.contains(&v.as_str()) {
                        out.push(err(path, format!("unknown variant {v:?}; expected one of {VARIANTS:?}")));
                        continue;
                    }
                    if self.n_t != self.n_r {
                        out.push(err(path.clone(), format!("{v} requires n_t = n_r (got {} and {})", self.n_t, self.n_r)));
                    }
                    let asymptotic = matches!(v.as_str(), "asymptotic" | "digamma" | "general-input");
                    if asymptotic && psd_ok && !self.psd_model().is_alias_free(self.period) {
                        out.push(err(
                            path,
                            format!(
                                "{v} requires period ≤ {} (no aliasing); got {}",
                                self.psd_model().critical_period(),
                                self.period
                            ),
                        ));
                    }
                }
            }
            Command::DecodeSim => {
                self.check_psd(&mut out);
                self.check_link(&mut out, Some(("code_lengths", &self.code_lengths)));
                self.check_snr_grid(&mut out);
                if self.window == 0 {
                    out.push(err("window", "must be at least 1"));
                }
                if self.frames == 0 {
                    out.push(err("frames", "must be at least 1"));
                }
                if self.code_lengths.is_empty() {
                    out.push(err("code_lengths", "must not be empty"));
                }
                if self.code_sizes.len() != self.code_lengths.len() {
                    out.push(err(
                        "code_sizes",
                        format!("has {} entries but code_lengths has {}", self.code_sizes.len(), self.code_lengths.len()),
                    ));
                }
                for (i, &m) in self.code_sizes.iter().enumerate() {
                    if m == 0 {
                        out.push(err(format!("code_sizes[{i}]"), "must be at least 1"));
                    }
                }
            }
            Command::MacRegion | Command::MacVerdict => {
                let psd_ok = self.l_star.is_some() || self.check_psd(&mut out);
                if self.n_t1 == 0 {
                    out.push(err("n_t1", "must be at least 1"));
                }
                if self.n_t2 == 0 {
                    out.push(err("n_t2", "must be at least 1"));
                }
                if self.n_r == 0 {
                    out.push(err("n_r", "must be at least 1"));
                }
                if psd_ok {
                    let l = self.l_star();
                    let nn = self.n_t1 + self.n_t2;
                    if l == 0 {
                        out.push(err("l_star", "must be at least 1"));
                    } else if command == Command::MacRegion && l < nn {
                        out.push(err("l_star", format!("{l} must be at least n_t1 + n_t2 = {nn}")));
                    }
                }
                if command == Command::MacRegion && self.beta_steps == 0 {
                    out.push(err("beta_steps", "must be at least 1"));
                }
            }
            Command::DumpFading => {
                self.check_psd(&mut out);
                if self.n_t == 0 {
                    out.push(err("n_t", "must be at least 1"));
                }
                if self.n_r == 0 {
                    out.push(err("n_r", "must be at least 1"));
                }
                if self.length == 0 || self.length > 1 << 24 {
                    out.push(err("length", format!("{} must lie in 1..=2^24", self.length)));
                }
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(out))
        }
    }

    pub fn environment(&self) -> Option<nnpilot_core::Environment> {
        Some(nnpilot_core::Environment {
            delay_spread: self.delay_spread_s?,
            speed: nnpilot_core::scenario::kmh(self.speed_kmh?),
            carrier: self.carrier_hz?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Scenario,
    InterpError,
    Prelog,
    DecodeSim,
    MacRegion,
    MacVerdict,
    DumpFading,
}
