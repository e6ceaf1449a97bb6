//! Acceptance criteria 1-9. Each test writes one `PASS`/`FAIL` line to stderr
//! (uncaptured, so it shows up in normal `cargo test` output) and then asserts.

use std::io::Write;
use std::process::Command;

use num_complex::Complex64;
use rand::Rng;

use mimo_cfo::channel::{data_noise, draw_channel, synthesize_ce_pilot_rx};
use mimo_cfo::experiments::{find_min_snr, run_array_gain_sweep, run_mse_complexity_sweep, SweepParam, SweepSpec};
use mimo_cfo::metrics::{mse_cfo, run_rate_trials};
use mimo_cfo::periodogram::{estimate_cfos, select_alpha};
use mimo_cfo::stream::{stream_rng, Purpose};
use mimo_cfo::trial::data_trial;
use mimo_cfo::{RawConfig, RxMode, SystemConfig};

fn report(criterion: u32, pass: bool, detail: String) {
    let line = format!(
        "acceptance criterion {criterion}: {} | {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{}", line.trim_end());
}

fn config(raw: RawConfig) -> SystemConfig {
    SystemConfig::from_raw(&raw).unwrap()
}

fn noiseless_small() -> SystemConfig {
    let mut cfg = config(RawConfig {
        num_antennas: Some(8),
        num_users: Some(4),
        num_taps: Some(3),
        pilot_len: Some(500),
        alpha: Some(1.5),
        ..Default::default()
    });
    cfg.noise_var = 0.0;
    cfg
}

#[test]
fn criterion_1_noiseless_grid_exactness() {
    let cfg = noiseless_small();
    let points = cfg.grid.len();
    let mut nonzero = 0usize;
    let mut worst: f64 = 0.0;
    for trial in 0..100u64 {
        let mut rng = stream_rng(101, trial, Purpose::PilotGains);
        let mut pick = stream_rng(101, trial, Purpose::Cfo);
        let cfos: Vec<f64> = (0..cfg.num_users).map(|_| cfg.grid.offsets[pick.random_range(0..points)]).collect();
        let chan = draw_channel(&cfg, &mut rng).with_cfos(cfos.clone());
        let rx = synthesize_ce_pilot_rx(&cfg, &chan, &mut rng);
        let est = estimate_cfos(&rx, &cfg, &cfg.grid).unwrap();
        for (e, w) in est.omega_hat.iter().zip(&cfos) {
            let r = (e - w).abs();
            worst = worst.max(r);
            nonzero += usize::from(r != 0.0);
        }
    }
    report(1, nonzero == 0, format!("100 trials, {nonzero} nonzero residuals, max |residual| = {worst:e}"));
}

#[test]
fn criterion_2_quantization_floor() {
    let cfg = noiseless_small();
    let oracle = cfg.grid.spacing.powi(2) / 12.0;
    let rep = mse_cfo(&cfg, 10_000, 202).unwrap();
    let ratio = rep.epsilon / oracle;
    report(
        2,
        (0.5..=2.0).contains(&ratio),
        format!("eps = {:e}, (2 pi / N^alpha)^2 / 12 = {oracle:e}, ratio {ratio:.4} (need 0.5..2)", rep.epsilon),
    );
}

#[test]
fn criterion_3_mse_complexity_tradeoff() {
    let base = config(RawConfig {
        num_antennas: Some(16),
        num_users: Some(4),
        pilot_len: Some(500),
        snr_db: Some(-10.0),
        ..Default::default()
    });
    let alphas = vec![1.0, 1.2, 1.4, 1.6, 1.8, 2.0];
    let spec = SweepSpec {
        base: base.clone(),
        param: SweepParam::Alpha,
        values: alphas,
        trials: 2000,
        seed: 303,
        modes: vec![RxMode::ESTIMATED_CFO],
    };
    let sweep = run_mse_complexity_sweep(&spec).unwrap();
    let rows = &sweep.rows;
    let mse_ok = rows.windows(2).all(|w| w[1].mse <= w[0].mse + w[0].mse_stderr.max(w[1].mse_stderr));
    let ops_ok = rows.windows(2).all(|w| w[1].ops_count >= w[0].ops_count);
    let rule = select_alpha(&base, 0.05, 0.1, 1.0, 10, |a| mse_cfo(&base.with_alpha(a).unwrap(), 500, 303).unwrap().epsilon);
    let trace: Vec<String> = rows.iter().map(|r| format!("{}:{:.3e}/{}", r.alpha, r.mse, r.ops_count)).collect();
    report(
        3,
        mse_ok && ops_ok && rule.is_ok(),
        format!(
            "mse nonincreasing {mse_ok}, ops nondecreasing {ops_ok}, delta rule -> {:?}; alpha:mse/ops {}",
            rule.map(|s| s.alpha),
            trace.join(" ")
        ),
    );
}

#[test]
fn criterion_4_trmrc_matches_brute_force() {
    let mut pick = stream_rng(404, 0, Purpose::Symbols);
    let mut worst: f64 = 0.0;
    for inst in 0..50u64 {
        let (m, k, l) = (pick.random_range(1..=3), pick.random_range(1..=3), pick.random_range(1..=3));
        let nd = pick.random_range(1..=40);
        let snr = pick.random_range(-10.0..10.0);
        let cfg = config(RawConfig {
            num_antennas: Some(m),
            num_users: Some(k),
            num_taps: Some(l),
            pilot_len: Some(200),
            data_len: Some(nd),
            snr_db: Some(snr),
            ..Default::default()
        });
        let t = data_trial(&cfg, RxMode::ESTIMATED_CFO, 404, inst).unwrap();
        let noise = data_noise(&cfg, &mut stream_rng(404, inst, Purpose::DataNoise));
        let amp = cfg.p_u.sqrt();
        let (m, k, l) = (m as usize, k as usize, l as usize);
        // r[m][t] built from scratch as a double sum over users and taps
        let rx = |a: usize, tt: usize| -> Complex64 {
            let mut s = noise.samples[a * noise.len + tt - noise.t_start];
            for q in 0..k {
                for tap in 0..l {
                    s += amp
                        * t.chan.gains[(a * k + q) * l + tap]
                        * t.symbols.at(q, tt - tap)
                        * Complex64::from_polar(1.0, t.chan.cfos[q] * tt as f64);
                }
            }
            s
        };
        let start = (k * l + l - 1) as usize;
        let mut reference = Vec::new();
        let mut got = Vec::new();
        for user in 0..k {
            let w = t.estimate.omega_hat[user];
            for tt in start..start + nd as usize {
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..m {
                    for tap in 0..l {
                        acc += t.h_hat.gains[(a * k + user) * l + tap].conj()
                            * rx(a, tt + tap)
                            * Complex64::from_polar(1.0, -w * (tt + tap) as f64);
                    }
                }
                reference.push(acc);
                got.push(t.detected.at(user, tt));
            }
        }
        let scale = (reference.iter().map(|z| z.norm_sqr()).sum::<f64>() / reference.len() as f64).sqrt();
        for (a, b) in got.iter().zip(&reference) {
            worst = worst.max((a - b).norm() / scale);
        }
    }
    report(4, worst <= 1e-10, format!("50 instances, max relative deviation {worst:e} (need <= 1e-10)"));
}

#[test]
fn criterion_5_rate_vs_block_length() {
    let cfg = config(RawConfig {
        num_antennas: Some(40),
        num_users: Some(4),
        pilot_len: Some(1000),
        snr_db: Some(-10.0),
        ..Default::default()
    });
    let nds = [50usize, 200, 800, 3000];
    let curve = |mode: RxMode| -> Vec<(f64, f64)> {
        nds.iter()
            .map(|&nd| {
                let r = run_rate_trials(&cfg.with_data_len(nd).unwrap(), 2000, mode, 505).unwrap();
                (r.mean_rate, r.mean_rate_stderr)
            })
            .collect()
    };
    let est = curve(RxMode::ESTIMATED_CFO);
    let zero = curve(RxMode::ZERO_CFO);
    let tol = |a: (f64, f64), b: (f64, f64)| a.1.max(b.1);
    let peak = (0..est.len()).max_by(|&a, &b| est[a].0.total_cmp(&est[b].0)).unwrap();
    let rises = (1..=peak).all(|i| est[i].0 >= est[i - 1].0 - tol(est[i], est[i - 1]));
    let falls = (peak + 1..est.len()).all(|i| est[i].0 <= est[i - 1].0 + tol(est[i], est[i - 1]));
    let unimodal = peak > 0 && peak + 1 < est.len() && rises && falls;
    let zero_ok = zero.windows(2).all(|w| w[1].0 >= w[0].0 - tol(w[0], w[1]));
    let fmt = |c: &[(f64, f64)]| c.iter().map(|(r, s)| format!("{r:.4}+-{s:.4}")).collect::<Vec<_>>().join(" ");
    report(
        5,
        unimodal && zero_ok,
        format!(
            "N_D {nds:?}: estimated-cfo [{}] rises-then-falls {unimodal} (peak at N_D={}); zero-cfo [{}] nondecreasing {zero_ok}",
            fmt(&est),
            nds[peak],
            fmt(&zero)
        ),
    );
}

fn surrogate_base() -> SystemConfig {
    config(RawConfig { num_antennas: Some(40), num_users: Some(4), pilot_len: Some(1000), ..Default::default() })
}

#[test]
fn criterion_6_min_snr_scaling_surrogate() {
    let base = surrogate_base();
    let snrs: Vec<f64> = [20, 40, 80]
        .iter()
        .map(|&m| find_min_snr(&base, 1.0, m, 0.25, 200, RxMode::ESTIMATED_CFO, 606).unwrap().snr_db)
        .collect();
    let gaps: Vec<f64> = snrs.windows(2).map(|w| w[0] - w[1]).collect();
    let ok = gaps.iter().all(|g| (1.0..=3.0).contains(g));
    report(
        6,
        ok,
        format!("surrogate M=20,40,80: min SNR {snrs:.3?} dB, gaps per doubling {gaps:.3?} dB (need 1..3)"),
    );
}

/// Full-size reference point; several hours on one core.
#[test]
#[ignore]
fn criterion_6_full_table_point() {
    let base = config(RawConfig {
        num_antennas: Some(40),
        num_users: Some(10),
        num_taps: Some(5),
        pilot_len: Some(2000),
        coherence_len: Some(10_000),
        data_len: Some(9942),
        ..Default::default()
    });
    let res = find_min_snr(&base, 1.0, 40, 0.25, 200, RxMode::ESTIMATED_CFO, 616).unwrap();
    report(
        6,
        (res.snr_db - (-9.9)).abs() <= 1.0,
        format!("M=40, K=10, N=2000, N_u={}: min SNR {:.3} dB (need -9.9 +- 1.0)", base.ul_slot_len(), res.snr_db),
    );
}

#[test]
fn criterion_7_array_gain() {
    let base = config(RawConfig {
        num_users: Some(4),
        pilot_len: Some(1000),
        data_len: Some(200),
        ..Default::default()
    });
    let (rows, _) = run_array_gain_sweep(&base, &[64, 256], -20.0, 64, 1000, RxMode::ESTIMATED_CFO, 707).unwrap();
    let (a, b) = (rows[0].mean_rate, rows[1].mean_rate);
    let diff = (a - b).abs() / a.max(b);
    report(
        7,
        diff < 0.10,
        format!(
            "M=64 @ {:.2} dB: {a:.5}, M=256 @ {:.2} dB: {b:.5}, relative difference {:.2}% (need < 10%)",
            rows[0].snr_db,
            rows[1].snr_db,
            100.0 * diff
        ),
    );
}

#[test]
fn criterion_8_es_ew_uncorrelated() {
    let cfg = config(RawConfig {
        num_antennas: Some(40),
        num_users: Some(4),
        pilot_len: Some(1000),
        data_len: Some(200),
        snr_db: Some(-10.0),
        ..Default::default()
    });
    let r = run_rate_trials(&cfg, 10_000, RxMode::ESTIMATED_CFO, 808).unwrap();
    let worst = r.max_es_ew_corr();
    report(8, worst < 0.05, format!("10^4 trials, max over (k, t) of |corr(ES, EW)| = {worst:.4} (need < 0.05)"));
}

#[test]
fn criterion_9_cli_determinism() {
    let bin = env!("CARGO_BIN_EXE_mimo-cfo");
    let small = ["--M", "6", "--K", "2", "--L", "2", "--N", "200", "--seed", "9"];
    let cases: Vec<Vec<&str>> = vec![
        vec!["estimate"],
        vec!["mse-sweep", "--trials", "40", "--alphas", "1.0,1.5"],
        vec!["rate-vs-nd", "--trials", "20", "--nd", "20,60", "--per-user"],
        vec!["min-snr", "--trials", "10", "--target-rate", "0.3", "--tolerance-db", "2"],
        vec!["array-gain", "--trials", "10", "--ms", "6,12", "--nd", "20"],
        vec!["selftest"],
    ];
    let run = |args: &[&str], threads: &str| -> Vec<u8> {
        let out = Command::new(bin).args(args).args(small).args(["--threads", threads]).output().unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    let mut mismatches = Vec::new();
    for case in &cases {
        let a = run(case, "1");
        let b = run(case, "1");
        let c = run(case, "3");
        if a != b || a != c || a.is_empty() {
            mismatches.push(case[0]);
        }
    }
    report(
        9,
        mismatches.is_empty(),
        format!("{} subcommands, 2 runs at 1 thread + 1 at 3 threads; mismatches {mismatches:?}", cases.len()),
    );
}
