//! Seeded Monte-Carlo campaigns: MSE vs. complexity over the grid exponent,
//! rate vs. data-block length, minimum SNR for a target rate, and the
//! array-gain sweep with `p_u ~ 1/sqrt(M)`.
//!
//! Every sweep point reuses the same master seed, so trial `i` sees the same
//! channel, CFO and noise draws at every point and in every mode.

use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::config::{RawConfig, SystemConfig};
use crate::error::{Error, Result};
use crate::metrics::{mse_cfo_paired, run_rate_trials, RateReport};
use crate::periodogram::relative_change;
use crate::trial::RxMode;

/// SNR search bracket for [`find_min_snr`], in dB.
pub const SNR_BRACKET_DB: (f64, f64) = (-30.0, 10.0);

/// What is needed to re-run a result standalone.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub config_toml: String,
    /// SHA-256 of `config_toml`, hex.
    pub config_hash: String,
    pub seed: u64,
    pub trials: usize,
    pub version: String,
}

impl Provenance {
    pub fn new(cfg: &SystemConfig, seed: u64, trials: usize) -> Self {
        let config_toml = cfg.to_toml_string();
        let digest = Sha256::digest(config_toml.as_bytes());
        let config_hash = digest.iter().map(|b| format!("{b:02x}")).collect();
        Provenance { config_toml, config_hash, seed, trials, version: env!("CARGO_PKG_VERSION").to_string() }
    }
}

/// Config fields a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Alpha,
    DataLen,
    Antennas,
    SnrDb,
    PilotLen,
    Users,
    Taps,
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "alpha" => SweepParam::Alpha,
            "N_D" => SweepParam::DataLen,
            "M" => SweepParam::Antennas,
            "snr_db" => SweepParam::SnrDb,
            "N" => SweepParam::PilotLen,
            "K" => SweepParam::Users,
            "L" => SweepParam::Taps,
            other => return Err(Error::UnknownParameter(other.to_string())),
        })
    }
}

impl SweepParam {
    pub fn apply(self, cfg: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let int = |name: &'static str| -> Result<i64> {
            if value.fract() != 0.0 {
                return Err(Error::InvalidValue { name, reason: format!("{value} is not an integer") });
            }
            Ok(value as i64)
        };
        let mut raw = RawConfig::default();
        match self {
            SweepParam::Alpha => raw.alpha = Some(value),
            SweepParam::SnrDb => raw.snr_db = Some(value),
            SweepParam::DataLen => raw.data_len = Some(int("N_D")?),
            SweepParam::Antennas => raw.num_antennas = Some(int("M")?),
            SweepParam::PilotLen => raw.pilot_len = Some(int("N")?),
            SweepParam::Users => raw.num_users = Some(int("K")?),
            SweepParam::Taps => raw.num_taps = Some(int("L")?),
        }
        cfg.with(&raw)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: SystemConfig,
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub modes: Vec<RxMode>,
}

impl SweepSpec {
    pub fn check(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::EmptySweep);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseSweepRow {
    pub alpha: f64,
    pub t0: usize,
    pub ops_count: u64,
    pub mse: f64,
    pub mse_stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseSweep {
    pub rows: Vec<MseSweepRow>,
    /// First swept exponent whose relative MSE change to the next one is
    /// below the configured threshold.
    pub knee: Option<f64>,
    pub provenance: Provenance,
}

/// MSE and operation count per grid exponent, paired across exponents.
pub fn run_mse_complexity_sweep(spec: &SweepSpec) -> Result<MseSweep> {
    spec.check()?;
    if spec.param != SweepParam::Alpha {
        return Err(Error::InvalidValue { name: "param", reason: "MSE sweep varies alpha".into() });
    }
    let reports = mse_cfo_paired(&spec.base, &spec.values, spec.trials, spec.seed)?;
    let rows: Vec<MseSweepRow> = spec
        .values
        .iter()
        .zip(&reports)
        .map(|(alpha, r)| MseSweepRow {
            alpha: *alpha,
            t0: crate::config::grid_half_width(spec.base.pilot_len, *alpha, spec.base.delta_max),
            ops_count: r.ops_count,
            mse: r.epsilon,
            mse_stderr: r.std_error,
        })
        .collect();
    let knee = rows
        .windows(2)
        .find(|w| relative_change(w[0].mse, w[1].mse) < spec.base.alpha_rule.delta)
        .map(|w| w[0].alpha);
    Ok(MseSweep { rows, knee, provenance: Provenance::new(&spec.base, spec.seed, spec.trials) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateSweepRow {
    pub mode: RxMode,
    pub value: f64,
    pub report: RateReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateSweep {
    pub param: SweepParam,
    pub rows: Vec<RateSweepRow>,
    pub provenance: Provenance,
}

impl RateSweep {
    /// `(value, mean rate, std. error)` for one mode, in sweep order.
    pub fn curve(&self, mode: RxMode) -> Vec<(f64, f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.mode == mode)
            .map(|r| (r.value, r.report.mean_rate, r.report.mean_rate_stderr))
            .collect()
    }
}

/// Rate per swept value and mode; rows ordered mode-major.
pub fn run_rate_sweep(spec: &SweepSpec) -> Result<RateSweep> {
    spec.check()?;
    let cfgs = spec.values.iter().map(|v| spec.param.apply(&spec.base, *v)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(spec.modes.len() * cfgs.len());
    for mode in &spec.modes {
        for (value, cfg) in spec.values.iter().zip(&cfgs) {
            let report = run_rate_trials(cfg, spec.trials, *mode, spec.seed)?;
            rows.push(RateSweepRow { mode: *mode, value: *value, report });
        }
    }
    Ok(RateSweep { param: spec.param, rows, provenance: Provenance::new(&spec.base, spec.seed, spec.trials) })
}

pub fn run_rate_vs_nd_sweep(spec: &SweepSpec) -> Result<RateSweep> {
    if spec.param != SweepParam::DataLen {
        return Err(Error::InvalidValue { name: "param", reason: "rate-vs-N_D sweep varies N_D".into() });
    }
    run_rate_sweep(spec)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinSnr {
    pub num_antennas: usize,
    pub target_rate: f64,
    pub snr_db: f64,
    pub achieved_rate: f64,
    pub iterations: usize,
}

/// Bisection on `snr_db` in [`SNR_BRACKET_DB`] for the smallest SNR whose
/// mean per-user rate reaches `target_rate`. All evaluations share `seed`.
pub fn find_min_snr(
    cfg: &SystemConfig,
    target_rate: f64,
    num_antennas: usize,
    tolerance_db: f64,
    trials: usize,
    mode: RxMode,
    seed: u64,
) -> Result<MinSnr> {
    if !(tolerance_db > 0.0) {
        return Err(Error::InvalidValue { name: "tolerance_db", reason: "must be > 0".into() });
    }
    let cfg = cfg.with_antennas(num_antennas)?;
    let rate_at = |snr: f64| -> Result<f64> { Ok(run_rate_trials(&cfg.with_snr_db(snr)?, trials, mode, seed)?.mean_rate) };
    let (mut lo, mut hi) = SNR_BRACKET_DB;
    let result = |snr_db, achieved_rate, iterations| MinSnr {
        num_antennas,
        target_rate,
        snr_db,
        achieved_rate,
        iterations,
    };

    if target_rate <= 0.0 {
        return Ok(result(lo, rate_at(lo)?, 0));
    }
    let rate_lo = rate_at(lo)?;
    if rate_lo >= target_rate {
        return Ok(result(lo, rate_lo, 0));
    }
    let rate_hi = rate_at(hi)?;
    if rate_hi < target_rate {
        return Err(Error::BracketFailure { target: target_rate, lo_db: lo, hi_db: hi, rate_hi });
    }
    let mut iterations = 0;
    while hi - lo > tolerance_db {
        let mid = 0.5 * (lo + hi);
        if rate_at(mid)? >= target_rate {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    let snr = 0.5 * (lo + hi);
    Ok(result(snr, rate_at(snr)?, iterations))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGainRow {
    pub num_antennas: usize,
    pub snr_db: f64,
    pub mean_rate: f64,
    pub rate_stderr: f64,
}

/// SNR that keeps `p_u sqrt(M)` fixed: `snr_ref - 5 log10(M / M_ref)`.
pub fn array_gain_snr(snr_ref_db: f64, m_ref: usize, m: usize) -> f64 {
    snr_ref_db - 5.0 * (m as f64 / m_ref as f64).log10()
}

/// Mean rate per antenna count with the transmit SNR scaled as `1/sqrt(M)`.
pub fn run_array_gain_sweep(
    base: &SystemConfig,
    antennas: &[usize],
    snr_ref_db: f64,
    m_ref: usize,
    trials: usize,
    mode: RxMode,
    seed: u64,
) -> Result<(Vec<ArrayGainRow>, Provenance)> {
    if antennas.is_empty() {
        return Err(Error::EmptySweep);
    }
    let rows = antennas
        .iter()
        .map(|&m| {
            let snr_db = array_gain_snr(snr_ref_db, m_ref, m);
            let cfg = base.with_antennas(m)?.with_snr_db(snr_db)?;
            let r = run_rate_trials(&cfg, trials, mode, seed)?;
            Ok(ArrayGainRow { num_antennas: m, snr_db, mean_rate: r.mean_rate, rate_stderr: r.mean_rate_stderr })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((rows, Provenance::new(base, seed, trials)))
}
