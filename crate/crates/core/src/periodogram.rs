//! Spatially averaged periodogram CFO estimator.
//!
//! For user `k` the periodogram is evaluated only inside that user's window
//! `2 pi k / K + [-delta_max, delta_max]`, on the grid of
//! [`FrequencyGrid`]. Per-antenna periodograms are averaged across the
//! array before the peak is picked.

use num_complex::Complex64;

use crate::channel::SampleBlock;
use crate::config::{grid_half_width, FrequencyGrid, SystemConfig};
use crate::error::{Error, Result};

/// `Phi_k(Omega(i))` for every grid offset of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodogramSlice {
    pub user: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfoEstimateSet {
    pub omega_hat: Vec<f64>,
    /// Signed grid index of each estimate.
    pub grid_index: Vec<i64>,
    /// `omega_hat - omega`, when the true CFOs are known.
    pub residual: Option<Vec<f64>>,
    /// Complex operations spent, per [`ops_count_model`].
    pub ops_count: u64,
}

impl CfoEstimateSet {
    pub fn with_truth(mut self, cfos: &[f64]) -> Self {
        assert_eq!(cfos.len(), self.omega_hat.len());
        self.residual = Some(self.omega_hat.iter().zip(cfos).map(|(e, w)| e - w).collect());
        self
    }

    /// Estimates that leave every CFO uncompensated (the zero-CFO baseline).
    pub fn zeros(num_users: usize) -> Self {
        CfoEstimateSet { omega_hat: vec![0.0; num_users], grid_index: vec![0; num_users], residual: None, ops_count: 0 }
    }
}

/// Neumaier compensated sum.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn check_len(rx: &SampleBlock, cfg: &SystemConfig) -> Result<()> {
    if rx.len != cfg.pilot_len {
        return Err(Error::LengthMismatch { expected: cfg.pilot_len, got: rx.len });
    }
    Ok(())
}

fn phasor(freq: f64, t_start: usize, n: usize) -> Vec<Complex64> {
    (0..n).map(|t| Complex64::from_polar(1.0, -freq * (t_start + t) as f64)).collect()
}

/// Spatial average of the single-antenna periodograms
/// `|sum_t r[m][t] exp(-j f t)|^2 / N`, with `phasor[t] = exp(-j f t)`.
fn averaged_periodogram(rx: &SampleBlock, phasor: &[Complex64]) -> f64 {
    let n = rx.len as f64;
    let per_antenna = (0..rx.num_antennas).map(|m| {
        let acc: Complex64 = rx.row(m).iter().zip(phasor).map(|(r, p)| r * p).sum();
        acc.norm_sqr() / n
    });
    compensated_sum(per_antenna) / rx.num_antennas as f64
}

pub fn periodogram_slice(
    rx: &SampleBlock,
    user: usize,
    grid: &FrequencyGrid,
    cfg: &SystemConfig,
) -> Result<PeriodogramSlice> {
    check_len(rx, cfg)?;
    let base = cfg.pilot_freq(user);
    let values = grid
        .offsets
        .iter()
        .map(|o| averaged_periodogram(rx, &phasor(base + o, rx.t_start, rx.len)))
        .collect();
    Ok(PeriodogramSlice { user, values })
}

/// Position in `slice` of the maximum; ties go to the smallest `|i|`, then to
/// the negative offset.
pub fn argmax_with_ties(values: &[f64], t0: usize) -> usize {
    let center = t0 as i64;
    let order = std::iter::once(0i64).chain((1..=center).flat_map(|d| [-d, d]));
    let mut best: Option<(usize, f64)> = None;
    for i in order {
        let pos = (center + i) as usize;
        let v = values[pos];
        match best {
            Some((_, b)) if !(v > b) => {}
            _ => best = Some((pos, v)),
        }
    }
    best.map(|(p, _)| p).expect("grid is never empty")
}

/// Grid-argmax CFO estimate for every user.
pub fn estimate_cfos(rx: &SampleBlock, cfg: &SystemConfig, grid: &FrequencyGrid) -> Result<CfoEstimateSet> {
    check_len(rx, cfg)?;
    let mut omega_hat = Vec::with_capacity(cfg.num_users);
    let mut grid_index = Vec::with_capacity(cfg.num_users);
    for k in 0..cfg.num_users {
        let slice = periodogram_slice(rx, k, grid, cfg)?;
        let pos = argmax_with_ties(&slice.values, grid.t0);
        omega_hat.push(grid.offsets[pos]);
        grid_index.push(grid.index_at(pos));
    }
    let ops_count = ops_for_grid(cfg.num_antennas, cfg.num_users, cfg.pilot_len, grid.t0);
    Ok(CfoEstimateSet { omega_hat, grid_index, residual: None, ops_count })
}

fn ops_for_grid(m: usize, k: usize, n: usize, t0: usize) -> u64 {
    let points = (m as u64) * (k as u64) * (2 * t0 as u64 + 1);
    // N MACs per point, plus one op for the magnitude-square and averaging
    points * n as u64 + points
}

/// Complex operations `C(M, K, N, alpha) = M K (2 T0 + 1) (N + 1)`.
pub fn ops_count_model(m: usize, k: usize, n: usize, alpha: f64, delta_max: f64) -> u64 {
    ops_for_grid(m, k, n, grid_half_width(n, alpha, delta_max))
}

/// One evaluated grid exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaTracePoint {
    pub alpha: f64,
    pub t0: usize,
    pub mse: f64,
    pub ops_count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSelection {
    pub alpha: f64,
    pub trace: Vec<AlphaTracePoint>,
}

/// `|(e1 - e2) / e1|`, with `0/0` read as no change.
pub fn relative_change(e1: f64, e2: f64) -> f64 {
    if e1 == e2 {
        0.0
    } else if e1 == 0.0 {
        f64::INFINITY
    } else {
        ((e1 - e2) / e1).abs()
    }
}

/// Smallest `alpha = alpha_start + j delta_alpha` with
/// `|(e(alpha) - e(alpha + delta_alpha)) / e(alpha)| < delta`.
///
/// `mse` is evaluated once per candidate, in increasing order. At most
/// `max_steps` candidates are tested.
pub fn select_alpha(
    cfg: &SystemConfig,
    delta: f64,
    delta_alpha: f64,
    alpha_start: f64,
    max_steps: usize,
    mut mse: impl FnMut(f64) -> f64,
) -> Result<AlphaSelection> {
    let alpha_at = |j: usize| alpha_start + j as f64 * delta_alpha;
    let point = |alpha: f64, mse: f64| AlphaTracePoint {
        alpha,
        t0: grid_half_width(cfg.pilot_len, alpha, cfg.delta_max),
        mse,
        ops_count: ops_count_model(cfg.num_antennas, cfg.num_users, cfg.pilot_len, alpha, cfg.delta_max),
    };
    let mut trace = vec![point(alpha_at(0), mse(alpha_at(0)))];
    for j in 0..max_steps {
        let next = alpha_at(j + 1);
        trace.push(point(next, mse(next)));
        if relative_change(trace[j].mse, trace[j + 1].mse) < delta {
            return Ok(AlphaSelection { alpha: trace[j].alpha, trace });
        }
    }
    Err(Error::NoConvergence { steps: max_steps })
}
