//! Frequency-selective Rayleigh channel, CFO draws, and received-signal
//! synthesis for the CE-pilot slot, the impulse-pilot phase and the data
//! block.
//!
//! Time indices are absolute within the slot being synthesized; CFO phase
//! rotation `exp(j w t)` uses the same index.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// Draws `CN(0, var)` as two independent real Gaussians of variance `var / 2`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// One coherence-slot channel: tap gains `h[m][k][l]` and per-user CFOs.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub num_antennas: usize,
    pub num_users: usize,
    pub num_taps: usize,
    /// Row-major `M x K x L`.
    pub gains: Vec<Complex64>,
    /// CFO of each user in radians per channel use.
    pub cfos: Vec<f64>,
}

impl ChannelRealization {
    pub fn new(
        num_antennas: usize,
        num_users: usize,
        num_taps: usize,
        gains: Vec<Complex64>,
        cfos: Vec<f64>,
    ) -> Self {
        assert_eq!(gains.len(), num_antennas * num_users * num_taps);
        assert_eq!(cfos.len(), num_users);
        ChannelRealization { num_antennas, num_users, num_taps, gains, cfos }
    }

    #[inline]
    pub fn gain(&self, m: usize, k: usize, l: usize) -> Complex64 {
        self.gains[(m * self.num_users + k) * self.num_taps + l]
    }

    /// All taps from user `k` to antenna `m`.
    #[inline]
    pub fn taps(&self, m: usize, k: usize) -> &[Complex64] {
        let start = (m * self.num_users + k) * self.num_taps;
        &self.gains[start..start + self.num_taps]
    }

    /// Same gains with different CFOs.
    pub fn with_cfos(mut self, cfos: Vec<f64>) -> Self {
        assert_eq!(cfos.len(), self.num_users);
        self.cfos = cfos;
        self
    }
}

/// i.i.d. tap gains following the configured power delay profile.
pub fn draw_gains<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Vec<Complex64> {
    let mut gains = Vec::with_capacity(cfg.num_antennas * cfg.num_users * cfg.num_taps);
    for _ in 0..cfg.num_antennas {
        for k in 0..cfg.num_users {
            for l in 0..cfg.num_taps {
                gains.push(complex_gaussian(rng, cfg.pdp(k, l)));
            }
        }
    }
    gains
}

/// CFOs uniform on `[-delta_max, delta_max]`.
pub fn draw_cfos<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Vec<f64> {
    (0..cfg.num_users)
        .map(|_| {
            if cfg.delta_max == 0.0 {
                0.0
            } else {
                rng.random_range(-cfg.delta_max..=cfg.delta_max)
            }
        })
        .collect()
}

pub fn draw_channel<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> ChannelRealization {
    let gains = draw_gains(cfg, rng);
    let cfos = draw_cfos(cfg, rng);
    ChannelRealization::new(cfg.num_antennas, cfg.num_users, cfg.num_taps, gains, cfos)
}

/// Complex baseband samples `r[m][t]` for `t = t_start .. t_start + len`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBlock {
    pub num_antennas: usize,
    pub t_start: usize,
    pub len: usize,
    /// Row-major `M x len`.
    pub samples: Vec<Complex64>,
}

impl SampleBlock {
    pub fn zeros(num_antennas: usize, t_start: usize, len: usize) -> Self {
        SampleBlock { num_antennas, t_start, len, samples: vec![Complex64::new(0.0, 0.0); num_antennas * len] }
    }

    pub fn row(&self, m: usize) -> &[Complex64] {
        &self.samples[m * self.len..(m + 1) * self.len]
    }

    pub fn row_mut(&mut self, m: usize) -> &mut [Complex64] {
        &mut self.samples[m * self.len..(m + 1) * self.len]
    }

    /// Sample at absolute time `t` on antenna `m`.
    pub fn at(&self, m: usize, t: usize) -> Result<Complex64> {
        if t < self.t_start || t >= self.t_start + self.len {
            return Err(self.out_of_range(t));
        }
        Ok(self.samples[m * self.len + t - self.t_start])
    }

    /// One past the last time index.
    pub fn t_end(&self) -> usize {
        self.t_start + self.len
    }

    pub(crate) fn out_of_range(&self, t: usize) -> Error {
        Error::IndexOutOfRange { index: t as i64, start: self.t_start as i64, end: self.t_end() as i64 }
    }

    fn add_noise<R: Rng + ?Sized>(&mut self, noise_var: f64, rng: &mut R) {
        if noise_var == 0.0 {
            return;
        }
        for s in &mut self.samples {
            *s += complex_gaussian(rng, noise_var);
        }
    }
}

/// Constant-envelope pilots `p[k][t] = exp(j 2 pi k t / K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CePilotMatrix {
    pub num_users: usize,
    pub len: usize,
    /// Row-major `K x N`.
    pub values: Vec<Complex64>,
}

impl CePilotMatrix {
    pub fn new(cfg: &SystemConfig) -> Self {
        let values = (0..cfg.num_users)
            .flat_map(|k| {
                let f = cfg.pilot_freq(k);
                (0..cfg.pilot_len).map(move |t| Complex64::from_polar(1.0, f * t as f64))
            })
            .collect();
        CePilotMatrix { num_users: cfg.num_users, len: cfg.pilot_len, values }
    }

    pub fn row(&self, k: usize) -> &[Complex64] {
        &self.values[k * self.len..(k + 1) * self.len]
    }
}

/// `H[m] = sum_l h[m][k][l] exp(-j 2 pi k l / K)` for user `k` (0-based).
pub fn effective_gain(chan: &ChannelRealization, k: usize) -> Vec<Complex64> {
    let f = 2.0 * std::f64::consts::PI * k as f64 / chan.num_users as f64;
    let twiddle: Vec<Complex64> = (0..chan.num_taps).map(|l| Complex64::from_polar(1.0, -f * l as f64)).collect();
    (0..chan.num_antennas)
        .map(|m| chan.taps(m, k).iter().zip(&twiddle).map(|(h, w)| h * w).sum())
        .collect()
}

/// Received CE-pilot slot, `t = 0 .. N-1`:
/// `r[m][t] = sqrt(p_u) sum_q H[m][q] exp(j (2 pi q / K + w_q) t) + n[m][t]`.
pub fn synthesize_ce_pilot_rx<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    chan: &ChannelRealization,
    rng: &mut R,
) -> SampleBlock {
    let n = cfg.pilot_len;
    let amp = cfg.p_u.sqrt();
    let mut block = SampleBlock::zeros(cfg.num_antennas, 0, n);
    for q in 0..cfg.num_users {
        let freq = cfg.pilot_freq(q) + chan.cfos[q];
        let tone: Vec<Complex64> = (0..n).map(|t| Complex64::from_polar(amp, freq * t as f64)).collect();
        let h_eff = effective_gain(chan, q);
        for (m, h) in h_eff.iter().enumerate() {
            for (r, p) in block.row_mut(m).iter_mut().zip(&tone) {
                *r += h * p;
            }
        }
    }
    block.add_noise(cfg.noise_var, rng);
    block
}

/// Information symbols `x[k][t]` over a contiguous time span.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolBlock {
    pub num_users: usize,
    pub t_start: usize,
    pub len: usize,
    /// Row-major `K x len`.
    pub values: Vec<Complex64>,
}

impl SymbolBlock {
    pub fn row(&self, k: usize) -> &[Complex64] {
        &self.values[k * self.len..(k + 1) * self.len]
    }

    pub fn at(&self, k: usize, t: usize) -> Complex64 {
        self.values[k * self.len + t - self.t_start]
    }

    pub fn t_end(&self) -> usize {
        self.t_start + self.len
    }
}

/// Unit-variance i.i.d. `CN(0, 1)` symbols for preamble, data block and
/// postamble, i.e. `t = K L .. N_u - 1`. Drawn time-major so a longer block
/// shares its prefix with a shorter one.
pub fn draw_symbols<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> SymbolBlock {
    let t_start = cfg.num_users * cfg.num_taps;
    let len = cfg.ul_slot_len() - t_start;
    let k_count = cfg.num_users;
    let mut values = vec![Complex64::new(0.0, 0.0); k_count * len];
    for t in 0..len {
        for k in 0..k_count {
            values[k * len + t] = complex_gaussian(rng, 1.0);
        }
    }
    SymbolBlock { num_users: k_count, t_start, len, values }
}

/// Time span of the data-phase observation needed by TR-MRC:
/// `t = K L + L - 1 .. N_u - 1`.
pub fn data_rx_span(cfg: &SystemConfig) -> (usize, usize) {
    let start = cfg.data_start();
    (start, cfg.ul_slot_len() - start)
}

/// Noise-free contribution of user `q` to the data-phase samples over
/// [`data_rx_span`]:
/// `sqrt(p_u) sum_l h[m][q][l] x[q][t - l] exp(j w_q t)`.
pub fn user_data_component(
    cfg: &SystemConfig,
    chan: &ChannelRealization,
    symbols: &SymbolBlock,
    q: usize,
) -> Result<SampleBlock> {
    let (start, len) = data_rx_span(cfg);
    let mut block = SampleBlock::zeros(cfg.num_antennas, start, len);
    add_user_data(cfg, chan, symbols, q, &mut block)?;
    Ok(block)
}

fn check_symbol_support(cfg: &SystemConfig, symbols: &SymbolBlock, start: usize, len: usize) -> Result<()> {
    let need_lo = start + 1 - cfg.num_taps;
    let need_hi = start + len;
    if symbols.t_start > need_lo {
        return Err(Error::IndexOutOfRange {
            index: need_lo as i64,
            start: symbols.t_start as i64,
            end: symbols.t_end() as i64,
        });
    }
    if symbols.t_end() < need_hi {
        return Err(Error::IndexOutOfRange {
            index: need_hi as i64 - 1,
            start: symbols.t_start as i64,
            end: symbols.t_end() as i64,
        });
    }
    Ok(())
}

fn add_user_data(
    cfg: &SystemConfig,
    chan: &ChannelRealization,
    symbols: &SymbolBlock,
    q: usize,
    block: &mut SampleBlock,
) -> Result<()> {
    let (start, len) = (block.t_start, block.len);
    check_symbol_support(cfg, symbols, start, len)?;
    let amp = cfg.p_u.sqrt();
    let w = chan.cfos[q];
    let rot: Vec<Complex64> = (start..start + len).map(|t| Complex64::from_polar(amp, w * t as f64)).collect();
    let x = symbols.row(q);
    // x index of time t is t - symbols.t_start
    let x_off = start - symbols.t_start;
    for m in 0..cfg.num_antennas {
        let taps = chan.taps(m, q);
        let row = block.row_mut(m);
        for (i, (r, rot)) in row.iter_mut().zip(&rot).enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (l, h) in taps.iter().enumerate() {
                acc += h * x[x_off + i - l];
            }
            *r += acc * rot;
        }
    }
    Ok(())
}

/// Received data-phase samples over [`data_rx_span`]:
/// `r[m][t] = sqrt(p_u) sum_q sum_l h[m][q][l] x[q][t-l] exp(j w_q t) + n[m][t]`.
pub fn synthesize_data_rx<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    chan: &ChannelRealization,
    symbols: &SymbolBlock,
    rng: &mut R,
) -> Result<SampleBlock> {
    let (start, len) = data_rx_span(cfg);
    let mut block = SampleBlock::zeros(cfg.num_antennas, start, len);
    for q in 0..cfg.num_users {
        add_user_data(cfg, chan, symbols, q, &mut block)?;
    }
    block.add_noise(cfg.noise_var, rng);
    Ok(block)
}

/// Noise alone over [`data_rx_span`], drawn exactly as [`synthesize_data_rx`]
/// draws it from the same stream.
pub fn data_noise<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> SampleBlock {
    let (start, len) = data_rx_span(cfg);
    let mut block = SampleBlock::zeros(cfg.num_antennas, start, len);
    block.add_noise(cfg.noise_var, rng);
    block
}

/// Received impulse pilots, `t = 0 .. K L - 1`: user `k` sends amplitude
/// `sqrt(K L p_u)` at `t = k L`, so
/// `r[m][k L + l] = sqrt(K L p_u) h[m][k][l] exp(j w_k (k L + l)) + n`.
pub fn synthesize_impulse_pilot_rx<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    chan: &ChannelRealization,
    rng: &mut R,
) -> SampleBlock {
    let (k_count, l_count) = (cfg.num_users, cfg.num_taps);
    let amp = (k_count as f64 * l_count as f64 * cfg.p_u).sqrt();
    let mut block = SampleBlock::zeros(cfg.num_antennas, 0, k_count * l_count);
    for m in 0..cfg.num_antennas {
        let row = block.row_mut(m);
        for k in 0..k_count {
            for (l, h) in chan.taps(m, k).iter().enumerate() {
                let t = k * l_count + l;
                row[t] = h * Complex64::from_polar(amp, chan.cfos[k] * t as f64);
            }
        }
    }
    block.add_noise(cfg.noise_var, rng);
    block
}
