mod config;
mod experiments;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{Command, RunConfig};
use experiments::Artifact;

const DEFAULT_SEED: u64 = 1;

#[derive(Parser)]
#[command(name = "nnpilot", version, about = "Pilot-aided estimation, nearest-neighbour decoding and pre-log analysis")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct Common {
    /// Flat TOML configuration (must set schema_version = 1)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config (default 1)
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory, created if missing
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores); results do not depend on it
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Sub {
    /// Normalized Doppler bandwidth and critical pilot period of environments
    #[command(after_help = "\
Config: delay_spread_s, speed_kmh, carrier_hz (optional, all or none).

Writes scenario.csv with columns:
  name             environment row (\"config\" for the configured one)
  delay_spread_s   delay spread in seconds
  speed_kmh        speed in km/h
  carrier_hz       carrier frequency in Hz
  lambda_d         normalized Doppler bandwidth 5·σ_τ·(v/c)·f_c
  l_star           critical pilot period floor(1/(2·lambda_d))
  range_lambda_lo, range_lambda_hi, range_l_star_lo, range_l_star_hi
                   typical ranges of the row (empty for \"config\")
  within_range     inside both ranges with a factor-2 slack")]
    Scenario,

    /// Interpolation-error variances: analytic vs. simulated
    #[command(after_help = "\
Config: psd, lambda_d, period, n_t, n_r, n, window or windows, snr_db, frames.

Writes interp_error.csv with columns:
  l          slot within the pilot period (0-based; data slots are n_t..period-1)
  t          transmit antenna (1-based)
  T          estimator window, or \"inf\" for the infinite-window limit
  snr_db     SNR in dB
  snr        SNR, linear
  analytic   predicted error variance
  empirical  simulated error variance (empty for T = inf)
  se         standard error of `empirical`")]
    InterpError,

    /// GMI lower bounds over an SNR grid and their high-SNR slope
    #[command(after_help = "\
Config: psd, lambda_d, period, n_t, n_r, window, snr_db (≥ 4 increasing points
spanning ≥ 20 dB), mc_samples, input, variants (finite-t, finite-t-limit,
refined, asymptotic, digamma, general-input).

Writes prelog.csv with columns:
  variant      bound variant
  snr_db       SNR in dB
  L            pilot period
  n_t, n_r     antenna counts
  T            estimator window, or \"inf\"
  value_nats   bound in nats per channel use
  value_bits   bound in bits per channel use
  se           Monte Carlo standard error in nats (0 for closed forms)
  theta        θ used by the bound

and prelog_fit.csv with columns:
  variant, slope (per ln SNR), intercept_nats, residual_nats (RMS),
  expected_slope (min(n_r, n_t)(1 − n_t/L) without aliasing, else 0).

The expected slope is the infinite-window value. With a finite window T the
interpolation error has a noise-free floor, which is largest at the critical
period, so the finite-t and refined curves flatten at high SNR.")]
    Prelog,

    /// Block-error rate of nearest-neighbour decoding with estimated fading
    #[command(after_help = "\
Config: psd, lambda_d, period, n_t, n_r, window, snr_db, frames, input,
code_lengths and code_sizes (paired element-wise).

Writes decode.csv with columns:
  snr_db        SNR in dB
  n             data symbols per codeword
  M             codebook size
  frames        simulated frames
  block_errors  frames decoded to a wrong message
  bler          block-error rate
  ber_se        binomial standard error of bler
  ties          frames whose minimum metric was attained twice
  rate_nats     ln(M)/n
  rate_bits     log2(M)/n")]
    DecodeSim,

    /// Exact pre-log regions of the two-user MAC
    #[command(after_help = "\
Config: n_t1, n_t2, n_r, l_star (default: critical period of psd/lambda_d),
beta_steps.

Writes region.csv with columns:
  region      jt, tdma, coherent or coherent-tdma
  kind        vertex, constraint, or sweep (TDMA time-sharing points)
  label       vertex index, constraint name, or β
  pi1, pi2    point coordinates (vertex and sweep rows)
  pi1_exact, pi2_exact
              the same as exact fractions
  a, b, c     constraint a·Π1 + b·Π2 ≤ c as exact fractions")]
    MacRegion,

    /// Whether joint transmission beats TDMA in sum pre-log
    #[command(after_help = "\
Config: n_t1, n_t2, n_r, l_star (default: critical period of psd/lambda_d).

Writes verdict.json with fields n_t1, n_t2, n_r, l_star,
thresholds.jt and thresholds.tdma (exact fractions or \"inf\"),
verdict (jt_superior, tdma_superior or indeterminate),
jt_max_sum and tdma_max_sum (exact; null when the region is undefined).")]
    MacVerdict,

    /// Binary export of a synthesized fading path
    #[command(after_help = "\
Config: psd, lambda_d, n_r, n_t, length.

Writes fading.bin: a 32-byte header (magic \"NNPFADE1\", n_r u32, n_t u32,
length u64, seed u64; little-endian) followed by little-endian complex64
samples (f32 re, f32 im), stream by stream with stream index r·n_t + t.")]
    DumpFading,
}

impl Sub {
    fn command(&self) -> Command {
        match self {
            Self::Scenario => Command::Scenario,
            Self::InterpError => Command::InterpError,
            Self::Prelog => Command::Prelog,
            Self::DecodeSim => Command::DecodeSim,
            Self::MacRegion => Command::MacRegion,
            Self::MacVerdict => Command::MacVerdict,
            Self::DumpFading => Command::DumpFading,
        }
    }
}

fn run(cfg: &RunConfig, command: Command, seed: u64) -> Result<Vec<Artifact>> {
    match command {
        Command::Scenario => experiments::scenario(cfg),
        Command::InterpError => experiments::interp_error(cfg, seed),
        Command::Prelog => experiments::prelog(cfg, seed),
        Command::DecodeSim => experiments::decode_sim(cfg, seed),
        Command::MacRegion => experiments::mac_region(cfg),
        Command::MacVerdict => experiments::mac_verdict(cfg),
        Command::DumpFading => experiments::dump_fading(cfg, seed),
    }
}

/// Writes every artifact through a temporary file; on any failure the files
/// written so far are removed.
fn write_all(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>> {
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        for a in artifacts {
            let path = dir.join(a.name);
            let tmp = dir.join(format!(".{}.partial", a.name));
            written.push(tmp.clone());
            fs::write(&tmp, &a.bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
            fs::rename(&tmp, &path).with_context(|| format!("cannot write {}", path.display()))?;
            *written.last_mut().unwrap() = path;
        }
        Ok(())
    })();
    match result {
        Ok(()) => Ok(written),
        Err(e) => {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            Err(e)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match try_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn try_main(cli: Cli) -> Result<()> {
    let cfg = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let command = cli.command.command();
    cfg.validate(command)?;
    let seed = cli.common.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.common.threads {
        anyhow::ensure!(n > 0, "--threads must be at least 1");
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    let artifacts = pool.install(|| run(&cfg, command, seed))?;
    for p in write_all(&cli.common.out, &artifacts)? {
        println!("{}", p.display());
    }
    Ok(())
}
