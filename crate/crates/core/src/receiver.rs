//! Uplink receiver: CFO compensation, impulse-pilot channel estimation and
//! time-reversed maximum ratio combining.

use num_complex::Complex64;

use crate::channel::{ChannelRealization, SampleBlock};
use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// Estimates `h_hat[m][k][l]` of the CFO-compensated taps.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub num_antennas: usize,
    pub num_users: usize,
    pub num_taps: usize,
    /// Row-major `M x K x L`.
    pub gains: Vec<Complex64>,
}

impl ChannelEstimate {
    #[inline]
    pub fn taps(&self, m: usize, k: usize) -> &[Complex64] {
        let start = (m * self.num_users + k) * self.num_taps;
        &self.gains[start..start + self.num_taps]
    }

    #[inline]
    pub fn gain(&self, m: usize, k: usize, l: usize) -> Complex64 {
        self.gains[(m * self.num_users + k) * self.num_taps + l]
    }
}

/// `h_hat[m][k][l] = r[m][kL + l] exp(-j w_hat_k (kL + l)) / sqrt(K L p_u)`.
pub fn estimate_channel(rx_pilot: &SampleBlock, omega_hat: &[f64], cfg: &SystemConfig) -> ChannelEstimate {
    let (k_count, l_count) = (cfg.num_users, cfg.num_taps);
    let scale = 1.0 / (k_count as f64 * l_count as f64 * cfg.p_u).sqrt();
    let mut gains = Vec::with_capacity(cfg.num_antennas * k_count * l_count);
    for m in 0..cfg.num_antennas {
        let row = rx_pilot.row(m);
        for (k, w) in omega_hat.iter().enumerate().take(k_count) {
            for l in 0..l_count {
                let t = k * l_count + l;
                gains.push(row[t - rx_pilot.t_start] * Complex64::from_polar(scale, -w * t as f64));
            }
        }
    }
    ChannelEstimate { num_antennas: cfg.num_antennas, num_users: k_count, num_taps: l_count, gains }
}

/// Perfect-CSI baseline: the effective taps
/// `h_tilde[m][k][l] = h[m][k][l] exp(-j dw_k (kL + l))`, `dw = w_hat - w`.
pub fn effective_channel(chan: &ChannelRealization, omega_hat: &[f64]) -> ChannelEstimate {
    let l_count = chan.num_taps;
    let mut gains = Vec::with_capacity(chan.gains.len());
    for m in 0..chan.num_antennas {
        for k in 0..chan.num_users {
            let dw = omega_hat[k] - chan.cfos[k];
            for (l, h) in chan.taps(m, k).iter().enumerate() {
                let t = k * l_count + l;
                gains.push(h * Complex64::from_polar(1.0, -dw * t as f64));
            }
        }
    }
    ChannelEstimate { num_antennas: chan.num_antennas, num_users: chan.num_users, num_taps: l_count, gains }
}

/// TR-MRC outputs `x_hat[k][t]` over the data block
/// `t = K L + L - 1 .. N_u - L`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectedSymbols {
    pub num_users: usize,
    pub t_start: usize,
    pub len: usize,
    /// Row-major `K x len`.
    pub values: Vec<Complex64>,
}

impl DetectedSymbols {
    pub fn row(&self, k: usize) -> &[Complex64] {
        &self.values[k * self.len..(k + 1) * self.len]
    }

    pub fn at(&self, k: usize, t: usize) -> Complex64 {
        self.values[k * self.len + t - self.t_start]
    }
}

/// `x_hat[k][t] = sum_m sum_l conj(h_hat[m][k][l]) r[m][t+l] exp(-j w_hat_k (t+l))`.
pub fn trmrc_detect(
    rx_data: &SampleBlock,
    h_hat: &ChannelEstimate,
    omega_hat: &[f64],
    cfg: &SystemConfig,
) -> Result<DetectedSymbols> {
    let t_start = cfg.data_start();
    let len = cfg.data_len;
    let l_count = cfg.num_taps;
    // last sample touched is (N_u - L) + (L - 1)
    let needed_end = t_start + len + l_count - 1;
    if rx_data.t_start > t_start {
        return Err(rx_data.out_of_range(t_start));
    }
    if rx_data.t_end() < needed_end {
        return Err(rx_data.out_of_range(needed_end - 1));
    }
    let span = len + l_count - 1;
    let off = t_start - rx_data.t_start;

    let mut values = vec![Complex64::new(0.0, 0.0); cfg.num_users * len];
    let mut compensated = vec![Complex64::new(0.0, 0.0); span];
    for (k, w) in omega_hat.iter().enumerate().take(cfg.num_users) {
        let derot: Vec<Complex64> =
            (0..span).map(|s| Complex64::from_polar(1.0, -w * (t_start + s) as f64)).collect();
        let out = &mut values[k * len..(k + 1) * len];
        for m in 0..cfg.num_antennas {
            let row = &rx_data.row(m)[off..off + span];
            for ((c, r), d) in compensated.iter_mut().zip(row).zip(&derot) {
                *c = r * d;
            }
            let taps: Vec<Complex64> = h_hat.taps(m, k).iter().map(|h| h.conj()).collect();
            for (i, o) in out.iter_mut().enumerate() {
                let window = &compensated[i..i + l_count];
                *o += taps.iter().zip(window).map(|(h, c)| h * c).sum::<Complex64>();
            }
        }
    }
    Ok(DetectedSymbols { num_users: cfg.num_users, t_start, len, values })
}

/// Per-trial coherent gain
/// `G[k][t] = sum_{m,l} |h[m][k][l]|^2 exp(-j dw_k (t - kL))`
/// over `t_range`, row-major `K x |t_range|`.
pub fn effective_gain_samples(
    chan: &ChannelRealization,
    omega_hat: &[f64],
    cfg: &SystemConfig,
    t_range: std::ops::Range<usize>,
) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(cfg.num_users * t_range.len());
    for k in 0..cfg.num_users {
        let energy: f64 = (0..cfg.num_antennas)
            .flat_map(|m| chan.taps(m, k).iter().map(|h| h.norm_sqr()))
            .sum();
        let dw = omega_hat[k] - chan.cfos[k];
        let origin = (k * cfg.num_taps) as f64;
        out.extend(t_range.clone().map(|t| Complex64::from_polar(energy, -dw * (t as f64 - origin))));
    }
    out
}

/// Checks that `rx` spans the whole data-phase observation window.
pub fn check_data_support(rx: &SampleBlock, cfg: &SystemConfig) -> Result<()> {
    let start = cfg.data_start();
    let end = cfg.ul_slot_len();
    if rx.t_start > start || rx.t_end() < end {
        return Err(Error::IndexOutOfRange { index: start as i64, start: rx.t_start as i64, end: rx.t_end() as i64 });
    }
    Ok(())
}
