//! Fast built-in invariant checks behind `mimo-cfo selftest`.

use num_complex::Complex64;

use crate::channel::{draw_channel, synthesize_ce_pilot_rx, synthesize_data_rx};
use crate::config::{build_grid, RawConfig, SystemConfig};
use crate::metrics::trial_components;
use crate::periodogram::{estimate_cfos, ops_count_model};
use crate::stream::{stream_rng, Purpose};
use crate::trial::{data_trial, RxMode};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, outcome: crate::Result<(bool, String)>) -> CheckResult {
    match outcome {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult { name, passed: false, detail: format!("error: {e}") },
    }
}

fn small_config() -> crate::Result<SystemConfig> {
    SystemConfig::from_raw(&RawConfig {
        num_antennas: Some(4),
        num_users: Some(3),
        num_taps: Some(2),
        pilot_len: Some(200),
        data_len: Some(40),
        snr_db: Some(0.0),
        ..Default::default()
    })
}

fn grid_example() -> crate::Result<(bool, String)> {
    let grid = build_grid(2000, 1.5, std::f64::consts::PI / 2500.0);
    let ops = ops_count_model(80, 10, 2000, 1.5, std::f64::consts::PI / 2500.0);
    Ok((grid.t0 == 18 && grid.len() == 37 && ops == 59_229_600, format!("T0={} ops={ops}", grid.t0)))
}

fn noiseless_on_grid(seed: u64) -> crate::Result<(bool, String)> {
    let mut cfg = small_config()?;
    cfg.noise_var = 0.0;
    let mut rng = stream_rng(seed, 0, Purpose::PilotGains);
    let chan = draw_channel(&cfg, &mut rng);
    let t0 = cfg.grid.t0 as i64;
    let cfos: Vec<f64> = (0..cfg.num_users as i64).map(|k| cfg.grid.offset(k % (2 * t0 + 1) - t0)).collect();
    let chan = chan.with_cfos(cfos.clone());
    let rx = synthesize_ce_pilot_rx(&cfg, &chan, &mut rng);
    let est = estimate_cfos(&rx, &cfg, &cfg.grid)?;
    let worst = est.omega_hat.iter().zip(&cfos).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok((worst == 0.0, format!("max |residual| = {worst:e}")))
}

fn trmrc_brute_force(seed: u64) -> crate::Result<(bool, String)> {
    let cfg = small_config()?;
    let t = data_trial(&cfg, RxMode::ESTIMATED_CFO, seed, 0)?;
    let rx = synthesize_data_rx(&cfg, &t.chan, &t.symbols, &mut stream_rng(seed, 0, Purpose::DataNoise))?;
    let mut worst: f64 = 0.0;
    for k in 0..cfg.num_users {
        let w = t.omega_hat()[k];
        for tt in cfg.data_start()..=cfg.data_end() {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..cfg.num_antennas {
                for l in 0..cfg.num_taps {
                    acc += t.h_hat.gain(m, k, l).conj()
                        * rx.at(m, tt + l)?
                        * Complex64::from_polar(1.0, -w * (tt + l) as f64);
                }
            }
            let got = t.detected.at(k, tt);
            worst = worst.max((got - acc).norm() / acc.norm().max(1e-300));
        }
    }
    Ok((worst < 1e-10, format!("max relative error = {worst:e}")))
}

fn components_add_up(seed: u64) -> crate::Result<(bool, String)> {
    let cfg = small_config()?;
    let c = trial_components(&cfg, RxMode::ESTIMATED_CFO, seed, 0)?;
    let mut worst: f64 = 0.0;
    for (i, x) in c.detected.values.iter().enumerate() {
        let sum = c.coherent[i] + c.est[i] + c.isi[i] + c.mui[i] + c.awgn[i];
        worst = worst.max((sum - x).norm() / x.norm().max(1e-300));
    }
    Ok((worst < 1e-9, format!("max relative error = {worst:e}")))
}

fn config_round_trip() -> crate::Result<(bool, String)> {
    let cfg = small_config()?;
    let text = cfg.to_toml_string();
    let back = SystemConfig::from_raw(&RawConfig::from_toml_str(&text)?)?;
    Ok((back == cfg, format!("{} bytes of TOML", text.len())))
}

fn deterministic(seed: u64) -> crate::Result<(bool, String)> {
    let cfg = small_config()?;
    let a = data_trial(&cfg, RxMode::ESTIMATED_CFO, seed, 3)?;
    let b = data_trial(&cfg, RxMode::ESTIMATED_CFO, seed, 3)?;
    Ok((a.detected == b.detected, "repeat of one seeded trial".into()))
}

/// Runs every check with the given seed.
pub fn run_all(seed: u64) -> Vec<CheckResult> {
    vec![
        check("grid_example", grid_example()),
        check("noiseless_on_grid", noiseless_on_grid(seed)),
        check("trmrc_brute_force", trmrc_brute_force(seed)),
        check("components_add_up", components_add_up(seed)),
        check("config_round_trip", config_round_trip()),
        check("deterministic", deterministic(seed)),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for r in super::run_all(7) {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
