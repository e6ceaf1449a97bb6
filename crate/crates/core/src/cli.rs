//! `mimo-cfo` command line: config loading, subcommand dispatch and CSV output.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 runtime error
//! (including a failed self-test).

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{RawConfig, SystemConfig};
use crate::error::{Error, Result};
use crate::experiments::{
    find_min_snr, run_array_gain_sweep, run_mse_complexity_sweep, run_rate_vs_nd_sweep, Provenance, SweepParam,
    SweepSpec,
};
use crate::periodogram::estimate_cfos;
use crate::trial::{ce_pilot_slot, RxMode};

#[derive(Debug, Parser)]
#[command(name = "mimo-cfo", version, about = "CE-pilot CFO estimation and TR-MRC uplink rate simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One CFO-estimation run: per-user residuals and operation count.
    Estimate(Common),
    /// CFO estimation MSE and operation count vs. grid exponent.
    MseSweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated grid exponents.
        #[arg(long, default_value = "1.0,1.2,1.4,1.6,1.8,2.0")]
        alphas: String,
    },
    /// Achievable rate vs. data block length, for each mode.
    RateVsNd {
        #[command(flatten)]
        common: Common,
        /// Comma-separated modes.
        #[arg(long, default_value = "estimated-cfo,zero-cfo")]
        modes: String,
        /// Also emit one row per user (user_k = 1..K).
        #[arg(long)]
        per_user: bool,
    },
    /// Minimum SNR reaching a target per-user rate.
    MinSnr {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1.0)]
        target_rate: f64,
        #[arg(long, default_value_t = 0.25)]
        tolerance_db: f64,
    },
    /// Mean rate vs. M with the SNR scaled as 1/sqrt(M).
    ArrayGain {
        #[command(flatten)]
        common: Common,
        /// Comma-separated antenna counts.
        #[arg(long, default_value = "64,256")]
        ms: String,
        /// SNR at the reference antenna count (defaults to the config SNR).
        #[arg(long, allow_hyphen_values = true)]
        snr_ref: Option<f64>,
        /// Reference antenna count (defaults to the first of --ms).
        #[arg(long)]
        m_ref: Option<usize>,
    },
    /// Quick built-in invariant checks.
    Selftest(Common),
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Flat TOML scenario file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Output CSV path (stdout when absent). A `<out>.meta` provenance file is
    /// written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "estimated-cfo")]
    pub mode: String,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long = "M")]
    pub m: Option<i64>,
    #[arg(long = "K")]
    pub k: Option<i64>,
    #[arg(long = "N")]
    pub n: Option<i64>,
    #[arg(long = "L")]
    pub l: Option<i64>,
    #[arg(long = "N_c")]
    pub n_c: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    pub snr_db: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Data block length; a comma-separated list for `rate-vs-nd`.
    #[arg(long)]
    pub nd: Option<String>,
}

impl Common {
    fn flag_overrides(&self) -> Result<RawConfig> {
        let data_len = match &self.nd {
            Some(s) => match parse_list::<i64>(s, "nd")?.as_slice() {
                [one] => Some(*one),
                _ => None,
            },
            None => None,
        };
        Ok(RawConfig {
            num_antennas: self.m,
            num_users: self.k,
            num_taps: self.l,
            pilot_len: self.n,
            coherence_len: self.n_c,
            data_len,
            snr_db: self.snr_db,
            alpha: self.alpha,
            ..Default::default()
        })
    }

    /// Documented defaults, then the config file, then flags.
    pub fn load_config(&self) -> Result<SystemConfig> {
        let file = match &self.config {
            Some(path) => RawConfig::from_file(path)?,
            None => RawConfig::default(),
        };
        let raw = RawConfig::defaults().overlay(&file).overlay(&self.flag_overrides()?);
        SystemConfig::validate(&raw)
    }

    fn mode(&self) -> Result<RxMode> {
        self.mode.parse()
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, name: &'static str) -> Result<Vec<T>> {
    let items = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| Error::InvalidValue { name, reason: format!("cannot parse `{t}`") })
        })
        .collect::<Result<Vec<_>>>()?;
    if items.is_empty() {
        return Err(Error::EmptySweep);
    }
    Ok(items)
}

/// Decimal rendering with at most 12 significant digits.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    let s = format!("{rounded}");
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// A finished table plus the provenance to write next to it.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub provenance: Option<Provenance>,
    pub notes: Vec<(String, String)>,
}

impl Table {
    fn new(header: Vec<&'static str>) -> Self {
        Table { header, rows: Vec::new(), provenance: None, notes: Vec::new() }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            debug_assert_eq!(row.len(), self.header.len());
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    fn write_meta(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        if let Some(p) = &self.provenance {
            writeln!(f, "# mimo-cfo {}", p.version)?;
            writeln!(f, "seed = {}", p.seed)?;
            writeln!(f, "trials = {}", p.trials)?;
            writeln!(f, "config_hash = \"{}\"", p.config_hash)?;
        }
        for (k, v) in &self.notes {
            writeln!(f, "{k} = {v}")?;
        }
        if let Some(p) = &self.provenance {
            writeln!(f, "\n[config]\n{}", p.config_toml)?;
        }
        Ok(())
    }
}

fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn run_estimate(c: &Common) -> Result<Table> {
    let cfg = c.load_config()?;
    let (truth, rx) = ce_pilot_slot(&cfg, c.seed, 0);
    let est = estimate_cfos(&rx, &cfg, &cfg.grid)?.with_truth(&truth);
    let residual = est.residual.clone().expect("truth attached");
    let mut t = Table::new(vec!["user_k", "omega_true", "omega_hat", "residual", "ops_count"]);
    for k in 0..cfg.num_users {
        t.rows.push(vec![
            (k + 1).to_string(),
            fmt_num(truth[k]),
            fmt_num(est.omega_hat[k]),
            fmt_num(residual[k]),
            est.ops_count.to_string(),
        ]);
    }
    t.provenance = Some(Provenance::new(&cfg, c.seed, 1));
    Ok(t)
}

fn run_mse_sweep(c: &Common, alphas: &str) -> Result<Table> {
    let cfg = c.load_config()?;
    let spec = SweepSpec {
        base: cfg,
        param: SweepParam::Alpha,
        values: parse_list(alphas, "alphas")?,
        trials: c.trials.unwrap_or(1000),
        seed: c.seed,
        modes: vec![RxMode::ESTIMATED_CFO],
    };
    let sweep = run_mse_complexity_sweep(&spec)?;
    let mut t = Table::new(vec!["alpha", "T0", "ops_count", "mse", "mse_stderr"]);
    for r in &sweep.rows {
        t.rows.push(vec![fmt_num(r.alpha), r.t0.to_string(), r.ops_count.to_string(), fmt_num(r.mse), fmt_num(r.mse_stderr)]);
    }
    t.notes.push(("knee_alpha".into(), sweep.knee.map_or("\"none\"".into(), fmt_num)));
    t.provenance = Some(sweep.provenance);
    Ok(t)
}

fn run_rate_vs_nd(c: &Common, modes: &str, per_user: bool) -> Result<Table> {
    let cfg = c.load_config()?;
    let values = match &c.nd {
        Some(s) => parse_list::<usize>(s, "nd")?.into_iter().map(|v| v as f64).collect(),
        None => vec![cfg.data_len as f64],
    };
    let modes = modes.split(',').map(|m| m.trim().parse()).collect::<Result<Vec<RxMode>>>()?;
    let spec = SweepSpec { base: cfg, param: SweepParam::DataLen, values, trials: c.trials.unwrap_or(500), seed: c.seed, modes };
    let sweep = run_rate_vs_nd_sweep(&spec)?;
    let mut t = Table::new(vec!["mode", "N_D", "user_k", "rate_bpcu", "rate_stderr"]);
    for row in &sweep.rows {
        let r = &row.report;
        let nd = (row.value as usize).to_string();
        t.rows.push(vec![row.mode.to_string(), nd.clone(), "0".into(), fmt_num(r.mean_rate), fmt_num(r.mean_rate_stderr)]);
        if per_user {
            for k in 0..r.num_users {
                t.rows.push(vec![
                    row.mode.to_string(),
                    nd.clone(),
                    (k + 1).to_string(),
                    fmt_num(r.rate[k]),
                    fmt_num(r.rate_stderr[k]),
                ]);
            }
        }
    }
    if let Some(r) = sweep.rows.first() {
        t.notes.push(("sinr_cap".into(), fmt_num(r.report.sinr_cap)));
    }
    t.provenance = Some(sweep.provenance);
    Ok(t)
}

fn run_min_snr(c: &Common, target: f64, tolerance_db: f64) -> Result<Table> {
    let cfg = c.load_config()?;
    let trials = c.trials.unwrap_or(200);
    let res = find_min_snr(&cfg, target, cfg.num_antennas, tolerance_db, trials, c.mode()?, c.seed)?;
    let mut t = Table::new(vec!["M", "target_rate", "snr_db", "achieved_rate", "iterations"]);
    t.rows.push(vec![
        res.num_antennas.to_string(),
        fmt_num(res.target_rate),
        fmt_num(res.snr_db),
        fmt_num(res.achieved_rate),
        res.iterations.to_string(),
    ]);
    t.provenance = Some(Provenance::new(&cfg, c.seed, trials));
    Ok(t)
}

fn run_array_gain(c: &Common, ms: &str, snr_ref: Option<f64>, m_ref: Option<usize>) -> Result<Table> {
    let cfg = c.load_config()?;
    let ms: Vec<usize> = parse_list(ms, "ms")?;
    let trials = c.trials.unwrap_or(500);
    let (rows, provenance) = run_array_gain_sweep(
        &cfg,
        &ms,
        snr_ref.unwrap_or(cfg.snr_db),
        m_ref.unwrap_or(ms[0]),
        trials,
        c.mode()?,
        c.seed,
    )?;
    let mut t = Table::new(vec!["M", "snr_db", "mean_rate", "rate_stderr"]);
    for r in rows {
        t.rows.push(vec![r.num_antennas.to_string(), fmt_num(r.snr_db), fmt_num(r.mean_rate), fmt_num(r.rate_stderr)]);
    }
    t.provenance = Some(provenance);
    Ok(t)
}

fn run_selftest(c: &Common) -> Result<(Table, bool)> {
    let checks = crate::selftest::run_all(c.seed);
    let ok = checks.iter().all(|r| r.passed);
    let mut t = Table::new(vec!["check", "passed", "detail"]);
    for r in checks {
        t.rows.push(vec![r.name.to_string(), r.passed.to_string(), r.detail]);
    }
    Ok((t, ok))
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Estimate(c) | Command::Selftest(c) => c,
        Command::MseSweep { common, .. }
        | Command::RateVsNd { common, .. }
        | Command::MinSnr { common, .. }
        | Command::ArrayGain { common, .. } => common,
    }
}

fn dispatch(cmd: &Command) -> Result<(Table, bool)> {
    common(cmd).mode()?;
    let table = match cmd {
        Command::Estimate(c) => run_estimate(c)?,
        Command::MseSweep { common, alphas } => run_mse_sweep(common, alphas)?,
        Command::RateVsNd { common, modes, per_user } => run_rate_vs_nd(common, modes, *per_user)?,
        Command::MinSnr { common, target_rate, tolerance_db } => run_min_snr(common, *target_rate, *tolerance_db)?,
        Command::ArrayGain { common, ms, snr_ref, m_ref } => run_array_gain(common, ms, *snr_ref, *m_ref)?,
        Command::Selftest(c) => return run_selftest(c),
    };
    Ok((table, true))
}

/// Runs a parsed command, writing CSV to `--out` or `stdout`. Returns the exit code.
pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let c = common(&cli.command);
    let outcome = match c.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command)),
            Err(e) => Err(Error::InvalidValue { name: "threads", reason: e.to_string() }),
        },
        None => dispatch(&cli.command),
    };
    let (table, ok) = match outcome {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return if e.is_config_error() { 1 } else { 2 };
        }
    };
    let written = match &c.out {
        Some(path) => File::create(path)
            .map_err(Error::from)
            .and_then(|f| table.write_csv(io::BufWriter::new(f)))
            .and_then(|_| table.write_meta(&meta_path(path))),
        None => table.write_csv(&mut *stdout),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: {e}");
        return 2;
    }
    if ok {
        0
    } else {
        let _ = writeln!(stderr, "error: self-test failed");
        2
    }
}

/// Parses `argv` (including the program name) and runs it.
pub fn cli_main<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(argv) {
        Ok(cli) => run(&cli, stdout, stderr),
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            if code == 0 {
                let _ = write!(stdout, "{}", e.render());
            } else {
                let _ = write!(stderr, "{}", e.render());
            }
            code
        }
    }
}
