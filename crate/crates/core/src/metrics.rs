//! Monte-Carlo metrics: CFO estimation MSE, the per-(user, time) SINR of
//! the TR-MRC output, and the achievable-rate lower bound.
//!
//! The effective signal is `ES[k][t] = sqrt(p_u) mu[k][t] x[k][t]` with
//! `mu[k][t]` the across-trial mean of the coherent gain `G[k][t]`, and
//! everything else in the detector output is treated as worst-case
//! Gaussian noise `EW = x_hat - ES`. Trials are reduced into per-(k, t)
//! sufficient statistics
//!
//! ```text
//!   S_g = sum G,  S_yy = sum |x_hat|^2,  S_yx = sum x_hat conj(x),  S_xx = sum |x|^2
//! ```
//!
//! from which the sample mean of `|x_hat - a x|^2` follows exactly for any
//! `a` once `mu` is known, without storing every trial.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::SystemConfig;
use crate::channel::{data_noise, user_data_component, SampleBlock};
use crate::error::{Error, Result};
use crate::receiver::{effective_gain_samples, trmrc_detect, DetectedSymbols};
use crate::stream::{stream_rng, Purpose};
use crate::trial::{cfo_trial_on_grids, data_trial, DataTrial, RxMode};

/// Number of trial groups used for batch-means standard errors.
const STDERR_GROUPS: usize = 10;

/// Runs `f` for trials `0..trials` in parallel chunks of `chunk` and folds
/// the results in trial order, so the fold is independent of the thread
/// count.
pub(crate) fn fold_trials<T, A>(
    trials: usize,
    chunk: usize,
    init: A,
    f: impl Fn(u64) -> Result<T> + Sync,
    mut fold: impl FnMut(&mut A, usize, T),
) -> Result<A>
where
    T: Send,
{
    let mut acc = init;
    let mut start = 0;
    while start < trials {
        let end = (start + chunk.max(1)).min(trials);
        let results: Vec<Result<T>> = (start..end).into_par_iter().map(|i| f(i as u64)).collect();
        for (i, r) in (start..end).zip(results) {
            fold(&mut acc, i, r?);
        }
        start = end;
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseReport {
    /// `E[(w_hat - w)^2]` over users and trials.
    pub epsilon: f64,
    pub per_user_epsilon: Vec<f64>,
    pub trial_count: usize,
    /// Standard error of `epsilon` from the per-trial user averages.
    pub std_error: f64,
    pub ops_count: u64,
}

fn mse_report(sq_by_trial: &[Vec<f64>], ops_count: u64) -> MseReport {
    let trials = sq_by_trial.len();
    let users = sq_by_trial.first().map_or(0, Vec::len);
    let mut per_user = vec![0.0; users];
    for row in sq_by_trial {
        for (p, v) in per_user.iter_mut().zip(row) {
            *p += v;
        }
    }
    per_user.iter_mut().for_each(|p| *p /= trials as f64);
    let trial_means: Vec<f64> = sq_by_trial.iter().map(|r| r.iter().sum::<f64>() / users as f64).collect();
    let (epsilon, std_error) = mean_and_stderr(&trial_means);
    MseReport { epsilon, per_user_epsilon: per_user, trial_count: trials, std_error, ops_count }
}

pub(crate) fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// CFO estimation MSE of `cfg` (its own grid exponent).
pub fn mse_cfo(cfg: &SystemConfig, trials: usize, seed: u64) -> Result<MseReport> {
    Ok(mse_cfo_paired(cfg, &[cfg.alpha], trials, seed)?.remove(0))
}

/// CFO estimation MSE for several grid exponents on the same realizations.
pub fn mse_cfo_paired(cfg: &SystemConfig, alphas: &[f64], trials: usize, seed: u64) -> Result<Vec<MseReport>> {
    if trials == 0 {
        return Err(Error::InsufficientTrials(0));
    }
    let cfgs = alphas.iter().map(|a| cfg.with_alpha(*a)).collect::<Result<Vec<_>>>()?;
    let grids: Vec<_> = cfgs.iter().map(|c| c.grid.clone()).collect();
    let per_alpha = vec![Vec::with_capacity(trials); alphas.len()];
    let per_alpha = fold_trials(
        trials,
        cfg.batch_trials * 4,
        per_alpha,
        |i| cfo_trial_on_grids(cfg, &grids, seed, i),
        |acc: &mut Vec<Vec<Vec<f64>>>, _, ests| {
            for (a, e) in acc.iter_mut().zip(ests) {
                a.push(e.residual.expect("truth attached").iter().map(|r| r * r).collect());
            }
        },
    )?;
    Ok(per_alpha
        .iter()
        .zip(&cfgs)
        .map(|(sq, c)| {
            let ops = crate::periodogram::ops_count_model(c.num_antennas, c.num_users, c.pilot_len, c.alpha, c.delta_max);
            mse_report(sq, ops)
        })
        .collect())
}

/// Per-(k, t) trial sums.
#[derive(Debug, Clone, PartialEq)]
pub struct RateAccumulator {
    pub num_users: usize,
    pub len: usize,
    pub trials: usize,
    pub sum_g: Vec<Complex64>,
    pub sum_yy: Vec<f64>,
    pub sum_yx: Vec<Complex64>,
    pub sum_xx: Vec<f64>,
}

impl RateAccumulator {
    pub fn new(num_users: usize, len: usize) -> Self {
        let n = num_users * len;
        RateAccumulator {
            num_users,
            len,
            trials: 0,
            sum_g: vec![Complex64::new(0.0, 0.0); n],
            sum_yy: vec![0.0; n],
            sum_yx: vec![Complex64::new(0.0, 0.0); n],
            sum_xx: vec![0.0; n],
        }
    }

    /// Adds one trial: coherent gains `g`, detector outputs `y`, symbols `x`,
    /// all row-major `K x len`.
    pub fn add(&mut self, g: &[Complex64], y: &[Complex64], x: &[Complex64]) {
        for i in 0..self.sum_g.len() {
            self.sum_g[i] += g[i];
            self.sum_yy[i] += y[i].norm_sqr();
            self.sum_yx[i] += y[i] * x[i].conj();
            self.sum_xx[i] += x[i].norm_sqr();
        }
        self.trials += 1;
    }

    pub fn merge(&mut self, other: &RateAccumulator) {
        for i in 0..self.sum_g.len() {
            self.sum_g[i] += other.sum_g[i];
            self.sum_yy[i] += other.sum_yy[i];
            self.sum_yx[i] += other.sum_yx[i];
            self.sum_xx[i] += other.sum_xx[i];
        }
        self.trials += other.trials;
    }

    /// Mean coherent gain `mu[k][t]`.
    pub fn mean_gain(&self) -> Vec<Complex64> {
        let n = self.trials as f64;
        self.sum_g.iter().map(|g| g / n).collect()
    }

    /// Second moments of ES and EW and the normalized ES/EW correlation.
    pub fn moments(&self, p_u: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.trials as f64;
        let amp = p_u.sqrt();
        let mut es = Vec::with_capacity(self.sum_g.len());
        let mut ew = Vec::with_capacity(self.sum_g.len());
        let mut corr = Vec::with_capacity(self.sum_g.len());
        for i in 0..self.sum_g.len() {
            let a = amp * self.sum_g[i] / n;
            let yy = self.sum_yy[i] / n;
            let yx = self.sum_yx[i] / n;
            let xx = self.sum_xx[i] / n;
            // mean |y - a x|^2
            let ew_pow = (yy - 2.0 * (a.conj() * yx).re + a.norm_sqr() * xx).max(0.0);
            // mean ES conj(EW) = a mean x conj(y - a x)
            let cross = a * (yx.conj() - a.conj() * xx);
            let es_sample = a.norm_sqr() * xx;
            let denom = (es_sample * ew_pow).sqrt();
            corr.push(if denom > 0.0 { cross.norm() / denom } else { 0.0 });
            // E|x|^2 = 1 in the signal power
            es.push(a.norm_sqr());
            ew.push(ew_pow);
        }
        (es, ew, corr)
    }
}

/// `es / ew`, capped.
pub fn capped_sinr(es: f64, ew: f64, cap: f64) -> f64 {
    if es <= 0.0 {
        0.0
    } else if ew <= 0.0 || es / ew > cap {
        cap
    } else {
        es / ew
    }
}

/// `(1 / N_u) sum_t log2(1 + sinr[t])`.
pub fn rate_from_sinr(sinr: &[f64], ul_slot_len: usize) -> f64 {
    sinr.iter().map(|s| (1.0 + s).log2()).sum::<f64>() / ul_slot_len as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub mode: RxMode,
    pub num_users: usize,
    /// First data index `K L + L - 1`.
    pub t_start: usize,
    /// `N_D`.
    pub len: usize,
    /// `N_u`.
    pub ul_slot_len: usize,
    /// Row-major `K x N_D`.
    pub sinr: Vec<f64>,
    pub es_power: Vec<f64>,
    pub ew_power: Vec<f64>,
    pub mean_gain: Vec<Complex64>,
    /// `|mean ES conj(EW)| / (rms ES rms EW)` per (k, t).
    pub es_ew_corr: Vec<f64>,
    /// Achievable rate per user, bits per channel use.
    pub rate: Vec<f64>,
    pub rate_stderr: Vec<f64>,
    /// Mean over users.
    pub mean_rate: f64,
    pub mean_rate_stderr: f64,
    /// Rate scaled by the configured CE-slot amortization factor.
    pub overhead_adjusted_rate: Option<Vec<f64>>,
    pub sinr_cap: f64,
    pub trial_count: usize,
}

impl RateReport {
    pub fn sinr_row(&self, k: usize) -> &[f64] {
        &self.sinr[k * self.len..(k + 1) * self.len]
    }

    pub fn max_es_ew_corr(&self) -> f64 {
        self.es_ew_corr.iter().copied().fold(0.0, f64::max)
    }
}

fn per_user_rates(sinr: &[f64], users: usize, len: usize, n_u: usize) -> Vec<f64> {
    (0..users).map(|k| rate_from_sinr(&sinr[k * len..(k + 1) * len], n_u)).collect()
}

fn finalize_sinr(acc: &RateAccumulator, cfg: &SystemConfig) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let (es, ew, corr) = acc.moments(cfg.p_u);
    let sinr = es.iter().zip(&ew).map(|(s, w)| capped_sinr(*s, *w, cfg.sinr_cap)).collect();
    (sinr, es, ew, corr)
}

/// Detector outputs, symbols and coherent gains of one trial over the data block.
fn trial_rows(cfg: &SystemConfig, t: &DataTrial) -> (Vec<Complex64>, Vec<Complex64>) {
    let det = &t.detected;
    let g = effective_gain_samples(&t.chan, t.omega_hat(), cfg, det.t_start..det.t_start + det.len);
    let mut x = Vec::with_capacity(det.values.len());
    for k in 0..cfg.num_users {
        x.extend((det.t_start..det.t_start + det.len).map(|tt| t.symbols.at(k, tt)));
    }
    (g, x)
}

fn group_of(trial: usize, trials: usize, groups: usize) -> usize {
    trial * groups / trials
}

/// Achievable-rate Monte Carlo over `trials` seeded trials.
pub fn run_rate_trials(cfg: &SystemConfig, trials: usize, mode: RxMode, seed: u64) -> Result<RateReport> {
    if trials < 2 {
        return Err(Error::InsufficientTrials(trials));
    }
    let (users, len) = (cfg.num_users, cfg.data_len);
    let groups = STDERR_GROUPS.min(trials);
    let init = vec![RateAccumulator::new(users, len); groups];
    let per_group = fold_trials(
        trials,
        cfg.batch_trials,
        init,
        |i| {
            let t = data_trial(cfg, mode, seed, i)?;
            let (g, x) = trial_rows(cfg, &t);
            Ok((g, t.detected.values, x))
        },
        |acc: &mut Vec<RateAccumulator>, i, (g, y, x)| acc[group_of(i, trials, groups)].add(&g, &y, &x),
    )?;

    let mut total = RateAccumulator::new(users, len);
    for g in &per_group {
        total.merge(g);
    }
    let n_u = cfg.ul_slot_len();
    let (sinr, es_power, ew_power, es_ew_corr) = finalize_sinr(&total, cfg);
    let rate = per_user_rates(&sinr, users, len, n_u);

    let group_rates: Vec<Vec<f64>> =
        per_group.iter().map(|g| per_user_rates(&finalize_sinr(g, cfg).0, users, len, n_u)).collect();
    let rate_stderr = (0..users)
        .map(|k| mean_and_stderr(&group_rates.iter().map(|r| r[k]).collect::<Vec<_>>()).1)
        .collect();
    let group_means: Vec<f64> = group_rates.iter().map(|r| r.iter().sum::<f64>() / users as f64).collect();
    let mean_rate = rate.iter().sum::<f64>() / users as f64;
    let mean_rate_stderr = mean_and_stderr(&group_means).1;
    let overhead_adjusted_rate = cfg.amortization.map(|a| rate.iter().map(|r| r * a).collect());

    Ok(RateReport {
        mode,
        num_users: users,
        t_start: cfg.data_start(),
        len,
        ul_slot_len: n_u,
        sinr,
        es_power,
        ew_power,
        mean_gain: total.mean_gain(),
        es_ew_corr,
        rate,
        rate_stderr,
        mean_rate,
        mean_rate_stderr,
        overhead_adjusted_rate,
        sinr_cap: cfg.sinr_cap,
        trial_count: trials,
    })
}

/// Second moments of the detector-output error components per (k, t).
///
/// `x_hat - ES = SIF + EST + ISI + MUI + AWGN` where
/// * `SIF  = sqrt(p_u) (G - mu) x_k[t]` is the fluctuation of the coherent gain,
/// * `EST` is the desired symbol leaking through the channel-estimation error,
/// * `ISI` collects the user's own other symbols,
/// * `MUI` collects the other users,
/// * `AWGN` is the combined receiver noise.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceBreakdown {
    pub num_users: usize,
    pub len: usize,
    pub sif: Vec<f64>,
    pub est: Vec<f64>,
    pub isi: Vec<f64>,
    pub mui: Vec<f64>,
    pub awgn: Vec<f64>,
    /// Mean `|x_hat - ES|^2`.
    pub ew_power: Vec<f64>,
    pub trial_count: usize,
}

impl InterferenceBreakdown {
    pub fn component_sum(&self) -> Vec<f64> {
        (0..self.sif.len())
            .map(|i| self.sif[i] + self.est[i] + self.isi[i] + self.mui[i] + self.awgn[i])
            .collect()
    }
}

/// Detector-output components of one trial, row-major `K x N_D` each.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialComponents {
    /// `sqrt(p_u) G x` (ES + SIF).
    pub coherent: Vec<Complex64>,
    pub est: Vec<Complex64>,
    pub isi: Vec<Complex64>,
    pub mui: Vec<Complex64>,
    pub awgn: Vec<Complex64>,
    pub gain: Vec<Complex64>,
    pub symbols: Vec<Complex64>,
    pub detected: DetectedSymbols,
}

/// Splits the TR-MRC output of trial `trial` into its components; the
/// components add back up to the detector output.
pub fn trial_components(cfg: &SystemConfig, mode: RxMode, seed: u64, trial: u64) -> Result<TrialComponents> {
    let t = data_trial(cfg, mode, seed, trial)?;
    let omega_hat = t.omega_hat();
    let (users, len) = (cfg.num_users, cfg.data_len);
    let t0 = cfg.data_start();
    let noise: SampleBlock = data_noise(cfg, &mut stream_rng(seed, trial, Purpose::DataNoise));
    let awgn = trmrc_detect(&noise, &t.h_hat, omega_hat, cfg)?.values;
    let per_user: Vec<Vec<Complex64>> = (0..users)
        .map(|q| Ok(trmrc_detect(&user_data_component(cfg, &t.chan, &t.symbols, q)?, &t.h_hat, omega_hat, cfg)?.values))
        .collect::<Result<_>>()?;
    let (gain, symbols) = trial_rows(cfg, &t);

    let amp = cfg.p_u.sqrt();
    let n = users * len;
    let mut coherent = vec![Complex64::new(0.0, 0.0); n];
    let mut est = vec![Complex64::new(0.0, 0.0); n];
    let mut isi = vec![Complex64::new(0.0, 0.0); n];
    let mut mui = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..users {
        let dw = omega_hat[k] - t.chan.cfos[k];
        for i in 0..len {
            let tt = t0 + i;
            let idx = k * len + i;
            // desired-symbol term with the estimated taps
            let mut desired = Complex64::new(0.0, 0.0);
            for m in 0..cfg.num_antennas {
                for l in 0..cfg.num_taps {
                    desired += t.h_hat.gain(m, k, l).conj()
                        * t.chan.gain(m, k, l)
                        * Complex64::from_polar(1.0, -dw * (tt + l) as f64);
                }
            }
            let desired = amp * desired * symbols[idx];
            coherent[idx] = amp * gain[idx] * symbols[idx];
            est[idx] = desired - coherent[idx];
            isi[idx] = per_user[k][idx] - desired;
            mui[idx] = (0..users).filter(|q| *q != k).map(|q| per_user[q][idx]).sum();
        }
    }
    Ok(TrialComponents { coherent, est, isi, mui, awgn, gain, symbols, detected: t.detected })
}

/// Per-(k, t) variances of the error components over `trials` trials.
pub fn interference_breakdown(cfg: &SystemConfig, trials: usize, mode: RxMode, seed: u64) -> Result<InterferenceBreakdown> {
    if trials < 2 {
        return Err(Error::InsufficientTrials(trials));
    }
    let (users, len) = (cfg.num_users, cfg.data_len);
    let n = users * len;

    struct Sums {
        rate: RateAccumulator,
        gx2: Vec<f64>,
        g_x2: Vec<Complex64>,
        est: Vec<f64>,
        isi: Vec<f64>,
        mui: Vec<f64>,
        awgn: Vec<f64>,
    }
    let init = Sums {
        rate: RateAccumulator::new(users, len),
        gx2: vec![0.0; n],
        g_x2: vec![Complex64::new(0.0, 0.0); n],
        est: vec![0.0; n],
        isi: vec![0.0; n],
        mui: vec![0.0; n],
        awgn: vec![0.0; n],
    };
    let sums = fold_trials(
        trials,
        cfg.batch_trials,
        init,
        |i| trial_components(cfg, mode, seed, i),
        |s: &mut Sums, _, c| {
            s.rate.add(&c.gain, &c.detected.values, &c.symbols);
            for i in 0..n {
                let x2 = c.symbols[i].norm_sqr();
                s.gx2[i] += c.gain[i].norm_sqr() * x2;
                s.g_x2[i] += c.gain[i] * x2;
                s.est[i] += c.est[i].norm_sqr();
                s.isi[i] += c.isi[i].norm_sqr();
                s.mui[i] += c.mui[i].norm_sqr();
                s.awgn[i] += c.awgn[i].norm_sqr();
            }
        },
    )?;

    let tn = trials as f64;
    let mu = sums.rate.mean_gain();
    let sif = (0..n)
        .map(|i| {
            let xx = sums.rate.sum_xx[i] / tn;
            let v = sums.gx2[i] / tn - 2.0 * (mu[i].conj() * sums.g_x2[i] / tn).re + mu[i].norm_sqr() * xx;
            cfg.p_u * v.max(0.0)
        })
        .collect();
    let scale = |v: Vec<f64>| v.into_iter().map(|s| s / tn).collect::<Vec<_>>();
    let (_, ew_power, _) = sums.rate.moments(cfg.p_u);
    Ok(InterferenceBreakdown {
        num_users: users,
        len,
        sif,
        est: scale(sums.est),
        isi: scale(sums.isi),
        mui: scale(sums.mui),
        awgn: scale(sums.awgn),
        ew_power,
        trial_count: trials,
    })
}
