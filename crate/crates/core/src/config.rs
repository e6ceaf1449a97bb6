//! Scenario parameters, their validation, and the CFO search grid.
//!
//! A scenario is read as a flat TOML key/value file whose keys match the
//! symbols used throughout the crate (`M`, `K`, `L`, `N`, `N_c`, `N_D`,
//! `snr_db`, ...). Every key is optional; missing keys fall back to the
//! documented defaults in [`RawConfig::defaults`].

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for carrier-derived parameters vs. explicit ones.
const CARRIER_REL_TOL: f64 = 1e-12;

/// Power delay profile as written in a config file: either one row shared by
/// every user, or one row per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PdpSpec {
    Shared(Vec<f64>),
    PerUser(Vec<Vec<f64>>),
}

/// Unvalidated parameter set, as parsed from a file or assembled from flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub num_antennas: Option<i64>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub num_users: Option<i64>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub num_taps: Option<i64>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub pilot_len: Option<i64>,
    #[serde(rename = "N_c", skip_serializing_if = "Option::is_none")]
    pub coherence_len: Option<i64>,
    #[serde(rename = "N_D", skip_serializing_if = "Option::is_none")]
    pub data_len: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_var: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pdp: Option<PdpSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_c: Option<f64>,
    #[serde(rename = "B_w", skip_serializing_if = "Option::is_none")]
    pub b_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_ppm: Option<f64>,
    #[serde(rename = "T_d", skip_serializing_if = "Option::is_none")]
    pub t_d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_alpha_steps: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sinr_cap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_trials: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amortization: Option<f64>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($field:ident),+ $(,)?) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )+
    };
}

impl RawConfig {
    /// Documented defaults: the single-cell scenario used for the rate
    /// studies (f_c = 2 GHz, B_w = 1 MHz, 0.1 ppm offsets, 5 us spread).
    pub fn defaults() -> Self {
        RawConfig {
            num_antennas: Some(40),
            num_users: Some(10),
            num_taps: Some(5),
            pilot_len: Some(2000),
            coherence_len: Some(10_000),
            data_len: Some(1000),
            snr_db: Some(-10.0),
            p_u: None,
            noise_var: Some(1.0),
            delta_max: Some(PI / 2500.0),
            alpha: Some(1.5),
            pdp: None,
            f_c: None,
            b_w: None,
            kappa_ppm: None,
            t_d: None,
            delta: Some(0.05),
            delta_alpha: Some(0.1),
            alpha_start: Some(1.0),
            max_alpha_steps: Some(50),
            sinr_cap: Some(1e12),
            batch_trials: Some(16),
            amortization: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("raw config is always serializable")
    }

    /// Returns `self` with every field that is set in `top` replaced.
    pub fn overlay(mut self, top: &RawConfig) -> Self {
        overlay!(
            self, top, num_antennas, num_users, num_taps, pilot_len, coherence_len, data_len,
            snr_db, p_u, noise_var, delta_max, alpha, pdp, f_c, b_w, kappa_ppm, t_d, delta,
            delta_alpha, alpha_start, max_alpha_steps, sinr_cap, batch_trials, amortization,
        );
        // An explicit power overrides an inherited SNR and vice versa.
        if top.p_u.is_some() && top.snr_db.is_none() {
            self.snr_db = None;
        }
        if top.snr_db.is_some() && top.p_u.is_none() {
            self.p_u = None;
        }
        self
    }
}

/// Carrier-level description from which `delta_max` and `L` follow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierParams {
    /// Carrier frequency in Hz.
    pub f_c: f64,
    /// Bandwidth in Hz.
    pub b_w: f64,
    /// Maximum oscillator offset in parts per million of `f_c`.
    pub kappa_ppm: f64,
    /// Maximum delay spread in seconds.
    pub t_d: f64,
}

impl CarrierParams {
    /// Maximum CFO in radians per channel use: `2 pi kappa f_c / B_w`.
    pub fn delta_max(&self) -> f64 {
        2.0 * PI * self.kappa_ppm * 1e-6 * self.f_c / self.b_w
    }

    /// Channel memory in taps, `T_d * B_w`.
    pub fn taps(&self) -> f64 {
        self.t_d * self.b_w
    }
}

/// Settings of the rule that picks the grid exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaRule {
    pub delta: f64,
    pub delta_alpha: f64,
    pub alpha_start: f64,
    pub max_steps: usize,
}

/// Discrete CFO candidates `Omega(i) = 2 pi i / N^alpha`, `|i| <= T0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    pub t0: usize,
    pub spacing: f64,
    pub offsets: Vec<f64>,
}

impl FrequencyGrid {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Offset for signed grid index `i`.
    pub fn offset(&self, i: i64) -> f64 {
        self.spacing * i as f64
    }

    /// Signed grid index of `offsets[pos]`.
    pub fn index_at(&self, pos: usize) -> i64 {
        pos as i64 - self.t0 as i64
    }
}

/// `T0 = ceil(delta_max / (2 pi) * N^alpha)`.
pub fn grid_half_width(pilot_len: usize, alpha: f64, delta_max: f64) -> usize {
    let scaled = delta_max / (2.0 * PI) * (pilot_len as f64).powf(alpha);
    scaled.ceil().max(0.0) as usize
}

pub fn build_grid(pilot_len: usize, alpha: f64, delta_max: f64) -> FrequencyGrid {
    let t0 = grid_half_width(pilot_len, alpha, delta_max);
    let spacing = 2.0 * PI / (pilot_len as f64).powf(alpha);
    let offsets = (-(t0 as i64)..=t0 as i64)
        .map(|i| spacing * i as f64)
        .collect();
    FrequencyGrid { t0, spacing, offsets }
}

/// Validated scenario. Immutable after construction apart from the public
/// fields tests use to build degenerate cases (`noise_var`, `p_u`).
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Base-station antennas `M`.
    pub num_antennas: usize,
    /// Single-antenna users `K`.
    pub num_users: usize,
    /// Channel taps `L`.
    pub num_taps: usize,
    /// CE pilot length `N`.
    pub pilot_len: usize,
    /// Coherence interval `N_c`.
    pub coherence_len: usize,
    /// Uplink data block `N_D`.
    pub data_len: usize,
    pub snr_db: f64,
    /// Per-user transmit power, `10^(snr_db/10)` with unit noise variance.
    pub p_u: f64,
    /// Receiver noise variance. Always 1 for configs read from files;
    /// tests set it to 0 for noiseless checks.
    pub noise_var: f64,
    pub delta_max: f64,
    pub alpha: f64,
    /// Tap variances, row-major `K x L`.
    pub pdp: Vec<f64>,
    pub carrier: Option<CarrierParams>,
    pub alpha_rule: AlphaRule,
    pub sinr_cap: f64,
    pub batch_trials: usize,
    pub amortization: Option<f64>,
    pub grid: FrequencyGrid,
}

fn positive_dim(name: &'static str, value: Option<i64>) -> Result<usize> {
    match value {
        Some(v) if v > 0 => Ok(v as usize),
        Some(v) => Err(Error::NonPositiveDimension { name, value: v }),
        None => Err(Error::InvalidValue { name, reason: "missing".into() }),
    }
}

fn finite(name: &'static str, value: Option<f64>) -> Result<f64> {
    match value {
        Some(v) if v.is_finite() => Ok(v),
        Some(v) => Err(Error::InvalidValue { name, reason: format!("{v} is not finite") }),
        None => Err(Error::InvalidValue { name, reason: "missing".into() }),
    }
}

fn positive(name: &'static str, value: Option<f64>) -> Result<f64> {
    let v = finite(name, value)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidValue { name, reason: format!("{v} must be > 0") })
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

impl SystemConfig {
    /// Fills unset fields from [`RawConfig::defaults`] and validates.
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        Self::validate(&RawConfig::defaults().overlay(raw))
    }

    /// Validates a complete parameter set and derives `p_u`, `N_u` and the grid.
    pub fn validate(raw: &RawConfig) -> Result<Self> {
        let carrier = match (raw.f_c, raw.b_w, raw.kappa_ppm, raw.t_d) {
            (None, None, None, None) => None,
            (Some(f_c), Some(b_w), Some(kappa_ppm), Some(t_d)) => {
                let c = CarrierParams {
                    f_c: positive("f_c", Some(f_c))?,
                    b_w: positive("B_w", Some(b_w))?,
                    kappa_ppm: positive("kappa_ppm", Some(kappa_ppm))?,
                    t_d: positive("T_d", Some(t_d))?,
                };
                Some(c)
            }
            _ => {
                return Err(Error::InvalidValue {
                    name: "carrier_params",
                    reason: "f_c, B_w, kappa_ppm and T_d must be given together".into(),
                })
            }
        };

        let num_antennas = positive_dim("M", raw.num_antennas)?;
        let num_users = positive_dim("K", raw.num_users)?;
        let num_taps = match (raw.num_taps, carrier) {
            (Some(l), Some(c)) => {
                let l = positive_dim("L", Some(l))?;
                if !rel_close(c.taps(), l as f64, CARRIER_REL_TOL) {
                    return Err(Error::CarrierMismatch { name: "L", derived: c.taps(), given: l as f64 });
                }
                l
            }
            (None, Some(c)) => {
                let l = c.taps().round();
                if l < 1.0 || !rel_close(c.taps(), l, CARRIER_REL_TOL) {
                    return Err(Error::InvalidValue {
                        name: "T_d",
                        reason: format!("T_d * B_w = {} is not a positive integer", c.taps()),
                    });
                }
                l as usize
            }
            (l, None) => positive_dim("L", l)?,
        };
        let pilot_len = positive_dim("N", raw.pilot_len)?;
        let coherence_len = positive_dim("N_c", raw.coherence_len)?;
        let data_len = positive_dim("N_D", raw.data_len)?;
        if pilot_len > coherence_len {
            return Err(Error::PilotExceedsCoherence { pilot_len, coherence_len });
        }

        let (snr_db, p_u) = match (raw.snr_db, raw.p_u) {
            (Some(s), None) => {
                let s = finite("snr_db", Some(s))?;
                (s, 10f64.powf(s / 10.0))
            }
            (None, Some(p)) => {
                let p = positive("p_u", Some(p))?;
                (10.0 * p.log10(), p)
            }
            (Some(s), Some(p)) => {
                let s = finite("snr_db", Some(s))?;
                let p = positive("p_u", Some(p))?;
                if !rel_close(10f64.powf(s / 10.0), p, 1e-9) {
                    return Err(Error::InvalidValue {
                        name: "p_u",
                        reason: format!("p_u = {p} disagrees with snr_db = {s}"),
                    });
                }
                (s, p)
            }
            (None, None) => return Err(Error::InvalidValue { name: "snr_db", reason: "missing".into() }),
        };

        let noise_var = finite("noise_var", raw.noise_var)?;
        if noise_var < 0.0 {
            return Err(Error::InvalidValue { name: "noise_var", reason: "must be >= 0".into() });
        }

        let delta_max = match (raw.delta_max, carrier) {
            (Some(d), Some(c)) => {
                let d = finite("delta_max", Some(d))?;
                if !rel_close(c.delta_max(), d, CARRIER_REL_TOL) {
                    return Err(Error::CarrierMismatch { name: "delta_max", derived: c.delta_max(), given: d });
                }
                d
            }
            (None, Some(c)) => c.delta_max(),
            (d, None) => finite("delta_max", d)?,
        };
        if delta_max < 0.0 {
            return Err(Error::InvalidValue { name: "delta_max", reason: "must be >= 0".into() });
        }
        let limit = PI / num_users as f64;
        if delta_max >= limit {
            return Err(Error::OverlappingWindows { delta_max, limit });
        }

        let alpha = positive("alpha", raw.alpha)?;

        let pdp = match &raw.pdp {
            None => vec![1.0 / num_taps as f64; num_users * num_taps],
            Some(PdpSpec::Shared(row)) => {
                if row.len() != num_taps {
                    return Err(Error::PdpShapeMismatch {
                        expected_users: num_users,
                        expected_taps: num_taps,
                        got: format!("shared row of {}", row.len()),
                    });
                }
                row.iter().copied().cycle().take(num_users * num_taps).collect()
            }
            Some(PdpSpec::PerUser(rows)) => {
                if rows.len() != num_users || rows.iter().any(|r| r.len() != num_taps) {
                    let widths: Vec<_> = rows.iter().map(Vec::len).collect();
                    return Err(Error::PdpShapeMismatch {
                        expected_users: num_users,
                        expected_taps: num_taps,
                        got: format!("{} rows of widths {widths:?}", rows.len()),
                    });
                }
                rows.iter().flatten().copied().collect()
            }
        };
        if let Some(bad) = pdp.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidValue { name: "pdp", reason: format!("tap variance {bad} must be > 0") });
        }

        let alpha_rule = AlphaRule {
            delta: positive("delta", raw.delta)?,
            delta_alpha: positive("delta_alpha", raw.delta_alpha)?,
            alpha_start: positive("alpha_start", raw.alpha_start)?,
            max_steps: positive_dim("max_alpha_steps", raw.max_alpha_steps)?,
        };
        let sinr_cap = positive("sinr_cap", raw.sinr_cap)?;
        let batch_trials = positive_dim("batch_trials", raw.batch_trials)?;
        let amortization = match raw.amortization {
            None => None,
            Some(a) => {
                let a = positive("amortization", Some(a))?;
                if a > 1.0 {
                    return Err(Error::InvalidValue { name: "amortization", reason: "must be <= 1".into() });
                }
                Some(a)
            }
        };

        let grid = build_grid(pilot_len, alpha, delta_max);
        Ok(SystemConfig {
            num_antennas,
            num_users,
            num_taps,
            pilot_len,
            coherence_len,
            data_len,
            snr_db,
            p_u,
            noise_var,
            delta_max,
            alpha,
            pdp,
            carrier,
            alpha_rule,
            sinr_cap,
            batch_trials,
            amortization,
            grid,
        })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_raw(&RawConfig::from_file(path)?)
    }

    /// Full parameter set that reproduces this config through [`SystemConfig::validate`].
    pub fn to_raw(&self) -> RawConfig {
        let pdp = (0..self.num_users)
            .map(|k| self.pdp[k * self.num_taps..(k + 1) * self.num_taps].to_vec())
            .collect();
        RawConfig {
            num_antennas: Some(self.num_antennas as i64),
            num_users: Some(self.num_users as i64),
            num_taps: Some(self.num_taps as i64),
            pilot_len: Some(self.pilot_len as i64),
            coherence_len: Some(self.coherence_len as i64),
            data_len: Some(self.data_len as i64),
            snr_db: Some(self.snr_db),
            p_u: None,
            noise_var: Some(self.noise_var),
            delta_max: Some(self.delta_max),
            alpha: Some(self.alpha),
            pdp: Some(PdpSpec::PerUser(pdp)),
            f_c: self.carrier.map(|c| c.f_c),
            b_w: self.carrier.map(|c| c.b_w),
            kappa_ppm: self.carrier.map(|c| c.kappa_ppm),
            t_d: self.carrier.map(|c| c.t_d),
            delta: Some(self.alpha_rule.delta),
            delta_alpha: Some(self.alpha_rule.delta_alpha),
            alpha_start: Some(self.alpha_rule.alpha_start),
            max_alpha_steps: Some(self.alpha_rule.max_steps as i64),
            sinr_cap: Some(self.sinr_cap),
            batch_trials: Some(self.batch_trials as i64),
            amortization: self.amortization,
        }
    }

    pub fn to_toml_string(&self) -> String {
        self.to_raw().to_toml_string()
    }

    /// Re-validates with some fields replaced.
    pub fn with(&self, changes: &RawConfig) -> Result<Self> {
        let mut raw = self.to_raw();
        // Carrier-derived fields must not pin L or delta_max when those change.
        if changes.num_taps.is_some() || changes.delta_max.is_some() {
            raw.f_c = None;
            raw.b_w = None;
            raw.kappa_ppm = None;
            raw.t_d = None;
        }
        if changes.num_users.is_some() || changes.num_taps.is_some() {
            raw.pdp = None;
        }
        Self::validate(&raw.overlay(changes))
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        self.with(&RawConfig { alpha: Some(alpha), ..Default::default() })
    }

    pub fn with_snr_db(&self, snr_db: f64) -> Result<Self> {
        self.with(&RawConfig { snr_db: Some(snr_db), ..Default::default() })
    }

    pub fn with_antennas(&self, num_antennas: usize) -> Result<Self> {
        self.with(&RawConfig { num_antennas: Some(num_antennas as i64), ..Default::default() })
    }

    pub fn with_data_len(&self, data_len: usize) -> Result<Self> {
        self.with(&RawConfig { data_len: Some(data_len as i64), ..Default::default() })
    }

    /// Uplink slot length `N_u = K L + N_D + 2 (L - 1)`.
    pub fn ul_slot_len(&self) -> usize {
        self.num_users * self.num_taps + self.data_len + 2 * (self.num_taps - 1)
    }

    /// First detected data index, `K L + L - 1`.
    pub fn data_start(&self) -> usize {
        self.num_users * self.num_taps + self.num_taps - 1
    }

    /// Last detected data index (inclusive), `N_u - L`.
    pub fn data_end(&self) -> usize {
        self.ul_slot_len() - self.num_taps
    }

    pub fn pdp(&self, user: usize, tap: usize) -> f64 {
        self.pdp[user * self.num_taps + tap]
    }

    /// Pilot frequency of user `k` (0-based), `2 pi k / K`.
    pub fn pilot_freq(&self, user: usize) -> f64 {
        2.0 * PI * user as f64 / self.num_users as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(f: impl FnOnce(&mut RawConfig)) -> RawConfig {
        let mut r = RawConfig::default();
        f(&mut r);
        r
    }

    #[test]
    fn default_delta_max_is_valid_for_ten_users() {
        let cfg = SystemConfig::from_raw(&raw(|r| {
            r.num_users = Some(10);
            r.delta_max = Some(PI / 2500.0);
        }))
        .unwrap();
        assert!(cfg.delta_max < PI / 10.0);
    }

    #[test]
    fn pilot_longer_than_coherence_is_rejected() {
        let err = SystemConfig::from_raw(&raw(|r| {
            r.pilot_len = Some(2001);
            r.coherence_len = Some(2000);
        }))
        .unwrap_err();
        assert_eq!(err, Error::PilotExceedsCoherence { pilot_len: 2001, coherence_len: 2000 });
    }

    #[test]
    fn ul_slot_length() {
        let cfg = SystemConfig::from_raw(&raw(|r| {
            r.num_users = Some(10);
            r.num_taps = Some(5);
            r.data_len = Some(100);
        }))
        .unwrap();
        assert_eq!(cfg.ul_slot_len(), 158);
        assert_eq!(cfg.data_start(), 54);
        assert_eq!(cfg.data_end() - cfg.data_start() + 1, 100);
    }

    #[test]
    fn rejects_bad_dimensions_and_windows() {
        assert!(matches!(
            SystemConfig::from_raw(&raw(|r| r.num_antennas = Some(0))),
            Err(Error::NonPositiveDimension { name: "M", .. })
        ));
        assert!(matches!(
            SystemConfig::from_raw(&raw(|r| {
                r.num_users = Some(4);
                r.delta_max = Some(PI / 4.0);
            })),
            Err(Error::OverlappingWindows { .. })
        ));
        assert!(matches!(
            SystemConfig::from_raw(&raw(|r| {
                r.num_users = Some(2);
                r.num_taps = Some(3);
                r.pdp = Some(PdpSpec::PerUser(vec![vec![0.5, 0.5]; 2]));
            })),
            Err(Error::PdpShapeMismatch { .. })
        ));
        assert!(matches!(
            SystemConfig::from_raw(&raw(|r| r.pdp = Some(PdpSpec::Shared(vec![0.2, 0.2, 0.2, 0.4, 0.0])))),
            Err(Error::InvalidValue { name: "pdp", .. })
        ));
    }

    #[test]
    fn carrier_params_derive_delta_max_and_taps() {
        let cfg = SystemConfig::from_raw(&raw(|r| {
            r.num_taps = None;
            r.delta_max = None;
            r.f_c = Some(2e9);
            r.b_w = Some(1e6);
            r.kappa_ppm = Some(0.1);
            r.t_d = Some(5e-6);
        }));
        // defaults already carry L and delta_max, which must agree
        let cfg = cfg.unwrap();
        assert_eq!(cfg.num_taps, 5);
        assert!(rel_close(cfg.delta_max, PI / 2500.0, 1e-12));

        let clash = SystemConfig::from_raw(&raw(|r| {
            r.num_taps = Some(4);
            r.f_c = Some(2e9);
            r.b_w = Some(1e6);
            r.kappa_ppm = Some(0.1);
            r.t_d = Some(5e-6);
        }));
        assert!(matches!(clash, Err(Error::CarrierMismatch { name: "L", .. })));
    }

    #[test]
    fn grid_examples() {
        let g = build_grid(2000, 1.5, PI / 2500.0);
        assert_eq!(g.t0, 18);
        assert_eq!(g.len(), 37);

        let g = build_grid(500, 1.0, PI / 2500.0);
        assert_eq!(g.t0, 1);

        let g = build_grid(777, 1.3, 1e-300);
        assert_eq!(g.t0, 1);
        let s = 2.0 * PI / 777f64.powf(1.3);
        assert_eq!(g.offsets, vec![-s, 0.0, s]);
    }

    #[test]
    fn snr_and_power_are_consistent() {
        let cfg = SystemConfig::from_raw(&raw(|r| r.snr_db = Some(-10.0))).unwrap();
        assert!((cfg.p_u - 0.1).abs() < 1e-15);
        let cfg = SystemConfig::from_raw(&raw(|r| r.p_u = Some(0.5))).unwrap();
        assert!((cfg.snr_db - 10.0 * 0.5f64.log10()).abs() < 1e-12);
        assert!(SystemConfig::from_raw(&raw(|r| {
            r.p_u = Some(0.5);
            r.snr_db = Some(0.0);
        }))
        .is_err());
    }

    #[test]
    fn unknown_key_reports_location() {
        let err = RawConfig::from_toml_str("M = 8\nfoo = 3\n").unwrap_err();
        let Error::Config(msg) = err else { panic!() };
        assert!(msg.contains("foo"), "{msg}");
        assert!(msg.contains('2'), "{msg}");
    }

    #[test]
    fn shared_pdp_row_is_broadcast() {
        let cfg = SystemConfig::from_raw(&RawConfig::from_toml_str("K = 2\nL = 2\npdp = [0.7, 0.3]\n").unwrap())
            .unwrap();
        assert_eq!(cfg.pdp, vec![0.7, 0.3, 0.7, 0.3]);
    }
}
