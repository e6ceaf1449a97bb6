//! Monte-Carlo properties of the SINR and rate pipeline.

use mimo_cfo::metrics::{interference_breakdown, rate_from_sinr, run_rate_trials, trial_components};
use mimo_cfo::{Error, RawConfig, RxMode, SystemConfig};

fn config(m: i64, k: i64, l: i64, nd: i64, snr_db: f64) -> SystemConfig {
    SystemConfig::from_raw(&RawConfig {
        num_antennas: Some(m),
        num_users: Some(k),
        num_taps: Some(l),
        pilot_len: Some(200),
        data_len: Some(nd),
        snr_db: Some(snr_db),
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn rate_rises_with_snr_on_paired_draws() {
    let mut prev: Option<(f64, f64)> = None;
    for snr in [-12.0, -9.0, -6.0, -3.0] {
        let r = run_rate_trials(&config(16, 2, 2, 40, snr), 300, RxMode::ESTIMATED_CFO, 21).unwrap();
        if let Some((rate, se)) = prev {
            assert!(r.mean_rate >= rate - se.max(r.mean_rate_stderr), "{snr}: {} < {rate}", r.mean_rate);
        }
        prev = Some((r.mean_rate, r.mean_rate_stderr));
    }
}

#[test]
fn rate_matches_sinr_table() {
    let cfg = config(8, 3, 2, 30, -5.0);
    let r = run_rate_trials(&cfg, 50, RxMode::ESTIMATED_CFO, 22).unwrap();
    for k in 0..cfg.num_users {
        let direct: f64 = r.sinr_row(k).iter().map(|s| (1.0 + s).log2()).sum::<f64>() / cfg.ul_slot_len() as f64;
        assert!((direct - r.rate[k]).abs() <= 1e-12 * direct.max(1.0));
        assert_eq!(rate_from_sinr(r.sinr_row(k), cfg.ul_slot_len()), r.rate[k]);
        assert!(r.rate[k] >= 0.0);
    }
    assert!(r.sinr.iter().all(|s| s.is_finite() && *s >= 0.0));
    assert_eq!(r.trial_count, 50);
}

#[test]
fn single_trial_is_rejected() {
    let err = run_rate_trials(&config(2, 1, 1, 5, 0.0), 1, RxMode::ZERO_CFO, 0).unwrap_err();
    assert_eq!(err, Error::InsufficientTrials(1));
}

#[test]
fn noiseless_single_user_sinr_is_gain_ratio() {
    // Zero CFO, perfect CSI, K = L = 1, no noise: x_hat = sqrt(p_u) G x with
    // G ~ Gamma(M, 1), so SINR = (E G)^2 / Var G = M.
    let mut cfg = config(6, 1, 1, 4, 0.0);
    cfg.noise_var = 0.0;
    let r = run_rate_trials(&cfg, 20_000, RxMode::ZERO_CFO.perfect_csi(), 23).unwrap();
    for s in &r.sinr {
        assert!((s / 6.0 - 1.0).abs() < 0.08, "{s}");
    }
}

#[test]
fn stale_csi_loses_coherent_gain_over_time() {
    // Grid spacing well above the CFO range: every estimate is 0 and the
    // residual equals the true CFO, so |E G| decays along the block.
    let cfg = SystemConfig::from_raw(&RawConfig {
        num_antennas: Some(8),
        num_users: Some(2),
        num_taps: Some(1),
        pilot_len: Some(200),
        alpha: Some(1.0),
        data_len: Some(3000),
        delta_max: Some(0.002),
        snr_db: Some(10.0),
        ..Default::default()
    })
    .unwrap();
    let r = run_rate_trials(&cfg, 300, RxMode::ESTIMATED_CFO, 24).unwrap();
    let first = r.mean_gain[0].norm();
    let last = r.mean_gain[cfg.data_len - 1].norm();
    // E exp(-j w tau) for w ~ U[-d, d] is sinc(d tau)
    let tau = cfg.data_end() as f64;
    let sinc = (0.002 * tau).sin() / (0.002 * tau);
    assert!(last < 0.5 * first, "{first} -> {last}");
    assert!((last / first - sinc.abs()).abs() < 0.15, "{} vs {}", last / first, sinc);
    let zero = run_rate_trials(&cfg, 300, RxMode::ZERO_CFO, 24).unwrap();
    assert!(zero.mean_rate > r.mean_rate);
}

#[test]
fn components_reassemble_detector_output() {
    let cfg = config(5, 3, 3, 20, -2.0);
    for mode in [RxMode::ESTIMATED_CFO, RxMode::ZERO_CFO, RxMode::ESTIMATED_CFO.perfect_csi()] {
        let c = trial_components(&cfg, mode, 25, 4).unwrap();
        for (i, x) in c.detected.values.iter().enumerate() {
            let sum = c.coherent[i] + c.est[i] + c.isi[i] + c.mui[i] + c.awgn[i];
            assert!((sum - x).norm() <= 1e-10 * x.norm().max(1.0));
        }
    }
}

#[test]
fn breakdown_without_signal_is_pure_noise() {
    let mut cfg = config(4, 2, 2, 10, 0.0);
    cfg.p_u = 0.0;
    let b = interference_breakdown(&cfg, 50, RxMode::ZERO_CFO.perfect_csi(), 26).unwrap();
    assert!(b.sif.iter().chain(&b.est).chain(&b.isi).chain(&b.mui).all(|v| *v == 0.0));
    assert!(b.awgn.iter().all(|v| *v > 0.0));
}

#[test]
fn breakdown_components_add_to_ew_power() {
    let cfg = config(8, 2, 2, 15, -5.0);
    let b = interference_breakdown(&cfg, 400, RxMode::ESTIMATED_CFO, 27).unwrap();
    for (sum, ew) in b.component_sum().iter().zip(&b.ew_power) {
        assert!((sum / ew - 1.0).abs() < 0.2, "{sum} vs {ew}");
    }
}
