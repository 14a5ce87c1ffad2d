//! Experiment pipelines. Each returns its artifacts in memory; nothing is
//! written until every computation has succeeded.

use anyhow::Result;
use nnpilot_core::estimator::{profile_rows, EstimationProfile, ProfileRow};
use nnpilot_core::fading::synthesize;
use nnpilot_core::gmi::{self, db_to_linear, nats_to_bits, GmiEstimate};
use nnpilot_core::mac::{
    coherent_region, coherent_tdma_region, corollary1_verdict, jt_region, tdma_legs, tdma_point,
    tdma_region, PreLogRegion, Rational,
};
use nnpilot_core::rng::child_seed;
use nnpilot_core::scenario::{lambda_from_env, within, TYPICAL_ENVIRONMENTS};
use nnpilot_core::sim::{simulate_decoding, simulate_estimation, LinkSetup};
use nnpilot_core::{build_schedule, Environment};
use serde::Serialize;

use crate::config::RunConfig;

/// A named output file.
pub struct Artifact {
    pub name: &'static str,
    pub bytes: Vec<u8>,
}

fn csv_bytes<R: Serialize>(rows: &[R]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))
}

// --- scenario

#[derive(Serialize)]
struct ScenarioRow {
    name: String,
    delay_spread_s: f64,
    speed_kmh: f64,
    carrier_hz: f64,
    lambda_d: f64,
    l_star: u64,
    range_lambda_lo: Option<f64>,
    range_lambda_hi: Option<f64>,
    range_l_star_lo: Option<f64>,
    range_l_star_hi: Option<f64>,
    /// Inside the typical ranges with a factor-2 slack.
    within_range: Option<bool>,
}

pub const SCENARIO_SLACK: f64 = 2.0;

pub fn scenario(cfg: &RunConfig) -> Result<Vec<Artifact>> {
    let mut rows = Vec::new();
    let mut push = |name: String, env: Environment, ranges: Option<((f64, f64), (f64, f64))>| -> Result<()> {
        let (lambda, l_star) = lambda_from_env(&env)?;
        rows.push(ScenarioRow {
            name,
            delay_spread_s: env.delay_spread,
            speed_kmh: env.speed * 3.6,
            carrier_hz: env.carrier,
            lambda_d: lambda,
            l_star,
            range_lambda_lo: ranges.map(|r| r.0 .0),
            range_lambda_hi: ranges.map(|r| r.0 .1),
            range_l_star_lo: ranges.map(|r| r.1 .0),
            range_l_star_hi: ranges.map(|r| r.1 .1),
            within_range: ranges.map(|r| {
                within(lambda, r.0, SCENARIO_SLACK) && within(l_star as f64, r.1, SCENARIO_SLACK)
            }),
        });
        Ok(())
    };
    if let Some(env) = cfg.environment() {
        push("config".into(), env, None)?;
    }
    for row in TYPICAL_ENVIRONMENTS {
        for env in row.corners() {
            push(row.name.into(), env, Some((row.lambda, row.l_star)))?;
        }
    }
    Ok(vec![Artifact {
        name: "scenario.csv",
        bytes: csv_bytes(&rows)?,
    }])
}

// --- interp-error

#[derive(Serialize)]
struct InterpRow {
    l: usize,
    t: usize,
    #[serde(rename = "T")]
    window: String,
    snr_db: f64,
    snr: f64,
    analytic: f64,
    empirical: Option<f64>,
    se: Option<f64>,
}

impl InterpRow {
    fn new(r: ProfileRow, snr_db: f64) -> Self {
        Self {
            l: r.slot,
            t: r.antenna,
            window: r.window,
            snr_db,
            snr: r.snr,
            analytic: r.analytic,
            empirical: r.empirical,
            se: r.se,
        }
    }
}

pub fn interp_error(cfg: &RunConfig, seed: u64) -> Result<Vec<Artifact>> {
    let psd = cfg.psd_model();
    let mut rows = Vec::new();
    for (si, &db) in cfg.snr_db.iter().enumerate() {
        let snr = db_to_linear(db);
        for (wi, &t) in cfg.windows().iter().enumerate() {
            let setup = LinkSetup {
                psd,
                schedule: build_schedule(cfg.period, cfg.n_t, t, cfg.n)?,
                n_r: cfg.n_r,
                snr,
            };
            let run_seed = child_seed(seed, (si * 1000 + wi) as u64);
            let run = simulate_estimation(&setup, cfg.frames, run_seed)?;
            rows.extend(profile_rows(&run.predicted, Some(&run.empirical)).into_iter().map(|r| InterpRow::new(r, db)));
        }
        let limit = EstimationProfile::asymptotic(&psd, cfg.period, cfg.n_t, snr)?;
        rows.extend(profile_rows(&limit, None).into_iter().map(|r| InterpRow::new(r, db)));
    }
    Ok(vec![Artifact {
        name: "interp_error.csv",
        bytes: csv_bytes(&rows)?,
    }])
}

// --- prelog

#[derive(Serialize)]
struct GmiRow {
    variant: String,
    snr_db: f64,
    #[serde(rename = "L")]
    period: usize,
    n_t: usize,
    n_r: usize,
    #[serde(rename = "T")]
    window: String,
    value_nats: f64,
    value_bits: f64,
    se: f64,
    theta: f64,
}

#[derive(Serialize)]
struct FitRow {
    variant: String,
    slope: f64,
    intercept_nats: f64,
    residual_nats: f64,
    /// Infinite-window pre-log (0 with aliasing).
    expected_slope: f64,
}

fn gmi_variant(cfg: &RunConfig, variant: &str, snr: f64, seed: u64) -> Result<GmiEstimate> {
    let psd = cfg.psd_model();
    let (l, n_t, n_r, mc) = (cfg.period, cfg.n_t, cfg.n_r, cfg.mc_samples);
    let finite = || -> Result<EstimationProfile> {
        let s = build_schedule(l, n_t, cfg.window, l - n_t)?;
        Ok(EstimationProfile::finite(&s, &psd, snr)?)
    };
    Ok(match variant {
        "finite-t" => gmi::gmi_lb_finite_t(&finite()?, snr, n_r, mc, seed)?,
        "refined" => gmi::gmi_lb_refined(&finite()?, snr, n_r, mc, seed)?,
        "finite-t-limit" => {
            let p = EstimationProfile::asymptotic(&psd, l, n_t, snr)?;
            gmi::gmi_lb_finite_t(&p, snr, n_r, mc, seed)?
        }
        "asymptotic" => gmi::gmi_lb_asymptotic(&psd, l, n_t, snr, mc, seed)?,
        "digamma" => gmi::asymptotic_closed_form(&psd, l, n_t, snr)?,
        "general-input" => {
            let k = cfg.input.density_constant(n_t);
            let e = cfg.input.mean_energy(n_t);
            gmi::gmi_lb_general_input(&psd, l, n_t, snr, k, e, mc, seed)?
        }
        other => anyhow::bail!("unknown variant {other}"),
    })
}

pub fn prelog(cfg: &RunConfig, seed: u64) -> Result<Vec<Artifact>> {
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    let alias_free = cfg.psd_model().is_alias_free(cfg.period);
    let expected = if alias_free {
        cfg.n_r.min(cfg.n_t) as f64 * (1.0 - cfg.n_t as f64 / cfg.period as f64)
    } else {
        0.0
    };
    for variant in &cfg.variants {
        // same seed at every SNR: common random numbers along the curve
        let mut pts = Vec::new();
        for &db in &cfg.snr_db {
            let g = gmi_variant(cfg, variant, db_to_linear(db), seed)?;
            pts.push((db, g.value));
            rows.push(GmiRow {
                variant: variant.clone(),
                snr_db: db,
                period: cfg.period,
                n_t: cfg.n_t,
                n_r: cfg.n_r,
                window: g.window.map_or_else(|| "inf".into(), |t| t.to_string()),
                value_nats: g.value,
                value_bits: nats_to_bits(g.value),
                se: g.se,
                theta: g.theta,
            });
        }
        let fit = gmi::prelog_fit(&pts)?;
        fits.push(FitRow {
            variant: variant.clone(),
            slope: fit.slope,
            intercept_nats: fit.intercept,
            residual_nats: fit.residual,
            expected_slope: expected,
        });
    }
    Ok(vec![
        Artifact {
            name: "prelog.csv",
            bytes: csv_bytes(&rows)?,
        },
        Artifact {
            name: "prelog_fit.csv",
            bytes: csv_bytes(&fits)?,
        },
    ])
}

// --- decode-sim

#[derive(Serialize)]
struct DecodeRow {
    snr_db: f64,
    n: usize,
    #[serde(rename = "M")]
    m: usize,
    frames: usize,
    block_errors: usize,
    bler: f64,
    ber_se: f64,
    ties: usize,
    rate_nats: f64,
    rate_bits: f64,
}

pub fn decode_sim(cfg: &RunConfig, seed: u64) -> Result<Vec<Artifact>> {
    let psd = cfg.psd_model();
    let mut rows = Vec::new();
    for (si, &db) in cfg.snr_db.iter().enumerate() {
        for (ci, (&n, &m)) in cfg.code_lengths.iter().zip(&cfg.code_sizes).enumerate() {
            let setup = LinkSetup {
                psd,
                schedule: build_schedule(cfg.period, cfg.n_t, cfg.window, n)?,
                n_r: cfg.n_r,
                snr: db_to_linear(db),
            };
            let run_seed = child_seed(seed, (si * 1000 + ci) as u64);
            let st = simulate_decoding(&setup, m, cfg.input, cfg.frames, run_seed)?;
            let rate = (m as f64).ln() / n as f64;
            rows.push(DecodeRow {
                snr_db: db,
                n,
                m,
                frames: st.frames,
                block_errors: st.block_errors,
                bler: st.rate,
                ber_se: st.se,
                ties: st.ties,
                rate_nats: rate,
                rate_bits: nats_to_bits(rate),
            });
        }
    }
    Ok(vec![Artifact {
        name: "decode.csv",
        bytes: csv_bytes(&rows)?,
    }])
}

// --- mac-region

#[derive(Serialize)]
struct RegionRow {
    region: String,
    kind: &'static str,
    label: String,
    pi1: Option<f64>,
    pi2: Option<f64>,
    pi1_exact: String,
    pi2_exact: String,
    a: String,
    b: String,
    c: String,
}

fn f(x: Rational) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

fn point_row(region: &str, kind: &'static str, label: String, p: (Rational, Rational)) -> RegionRow {
    RegionRow {
        region: region.into(),
        kind,
        label,
        pi1: Some(f(p.0)),
        pi2: Some(f(p.1)),
        pi1_exact: p.0.to_string(),
        pi2_exact: p.1.to_string(),
        a: String::new(),
        b: String::new(),
        c: String::new(),
    }
}

fn region_rows(reg: &PreLogRegion, out: &mut Vec<RegionRow>) {
    for (i, v) in reg.vertices.iter().enumerate() {
        out.push(point_row(reg.name, "vertex", i.to_string(), *v));
    }
    for c in &reg.constraints {
        out.push(RegionRow {
            region: reg.name.into(),
            kind: "constraint",
            label: c.label.into(),
            pi1: None,
            pi2: None,
            pi1_exact: String::new(),
            pi2_exact: String::new(),
            a: c.a.to_string(),
            b: c.b.to_string(),
            c: c.c.to_string(),
        });
    }
}

pub fn mac_region(cfg: &RunConfig) -> Result<Vec<Artifact>> {
    let (n1, n2, nr, l) = (cfg.n_t1, cfg.n_t2, cfg.n_r, cfg.l_star());
    let mut rows = Vec::new();
    for reg in [
        jt_region(n1, n2, nr, l)?,
        tdma_region(n1, n2, nr, l)?,
        coherent_region(n1, n2, nr)?,
        coherent_tdma_region(n1, n2, nr)?,
    ] {
        region_rows(&reg, &mut rows);
    }
    let legs = tdma_legs(n1, n2, nr, l)?;
    let steps = cfg.beta_steps as i64;
    for k in 0..=steps {
        let beta = Rational::new(k, steps);
        rows.push(point_row("tdma", "sweep", beta.to_string(), tdma_point(legs, beta)));
    }
    Ok(vec![Artifact {
        name: "region.csv",
        bytes: csv_bytes(&rows)?,
    }])
}

// --- mac-verdict

#[derive(Serialize)]
struct VerdictJson {
    n_t1: usize,
    n_t2: usize,
    n_r: usize,
    l_star: usize,
    thresholds: Thresholds,
    verdict: nnpilot_core::Verdict,
    /// Exact largest sum pre-logs when the regions are defined.
    jt_max_sum: Option<String>,
    tdma_max_sum: Option<String>,
}

#[derive(Serialize)]
struct Thresholds {
    jt: nnpilot_core::Threshold,
    tdma: nnpilot_core::Threshold,
}

pub fn mac_verdict(cfg: &RunConfig) -> Result<Vec<Artifact>> {
    let (n1, n2, nr, l) = (cfg.n_t1, cfg.n_t2, cfg.n_r, cfg.l_star());
    let v = corollary1_verdict(n1, n2, nr, l)?;
    let out = VerdictJson {
        n_t1: n1,
        n_t2: n2,
        n_r: nr,
        l_star: l,
        thresholds: Thresholds {
            jt: v.jt_threshold,
            tdma: v.tdma_threshold,
        },
        verdict: v.verdict,
        jt_max_sum: jt_region(n1, n2, nr, l).ok().map(|r| r.max_sum().to_string()),
        tdma_max_sum: tdma_region(n1, n2, nr, l).ok().map(|r| r.max_sum().to_string()),
    };
    let mut bytes = serde_json::to_vec_pretty(&out)?;
    bytes.push(b'\n');
    Ok(vec![Artifact {
        name: "verdict.json",
        bytes,
    }])
}

// --- dump-fading

pub fn dump_fading(cfg: &RunConfig, seed: u64) -> Result<Vec<Artifact>> {
    let path = synthesize(&cfg.psd_model(), cfg.length, (cfg.n_r, cfg.n_t), seed)?;
    let mut bytes = Vec::new();
    path.write_dump(&mut bytes)?;
    Ok(vec![Artifact {
        name: "fading.bin",
        bytes,
    }])
}
