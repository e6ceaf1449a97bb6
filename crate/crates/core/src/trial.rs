//! One Monte-Carlo trial of the full link: CE-pilot slot and CFO estimation,
//! then an uplink slot with impulse-pilot channel estimation and TR-MRC.
//!
//! CFOs are drawn once per trial and persist into the data slot; the data
//! slot sees a channel independent of the one in the CE-pilot slot.

use std::fmt;
use std::str::FromStr;

use crate::channel::{
    draw_cfos, draw_gains, draw_symbols, synthesize_ce_pilot_rx, synthesize_data_rx,
    synthesize_impulse_pilot_rx, ChannelRealization, SampleBlock, SymbolBlock,
};
use crate::config::{FrequencyGrid, SystemConfig};
use crate::error::{Error, Result};
use crate::periodogram::{estimate_cfos, CfoEstimateSet};
use crate::receiver::{effective_channel, estimate_channel, trmrc_detect, ChannelEstimate, DetectedSymbols};
use crate::stream::{stream_rng, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CfoMode {
    /// CFOs drawn uniformly, estimated with the periodogram and compensated.
    Estimated,
    /// Ideal baseline: no CFO, no compensation.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CsiMode {
    /// Impulse-pilot channel estimates.
    Estimated,
    /// Receiver knows the CFO-rotated taps exactly.
    Perfect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RxMode {
    pub cfo: CfoMode,
    pub csi: CsiMode,
}

impl RxMode {
    pub const ESTIMATED_CFO: RxMode = RxMode { cfo: CfoMode::Estimated, csi: CsiMode::Estimated };
    pub const ZERO_CFO: RxMode = RxMode { cfo: CfoMode::Zero, csi: CsiMode::Estimated };

    pub fn perfect_csi(self) -> Self {
        RxMode { csi: CsiMode::Perfect, ..self }
    }
}

impl fmt::Display for RxMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cfo = match self.cfo {
            CfoMode::Estimated => "estimated-cfo",
            CfoMode::Zero => "zero-cfo",
        };
        match self.csi {
            CsiMode::Estimated => f.write_str(cfo),
            CsiMode::Perfect => write!(f, "{cfo}+perfect-csi"),
        }
    }
}

impl FromStr for RxMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (cfo, csi) = match s.strip_suffix("+perfect-csi") {
            Some(rest) => (rest, CsiMode::Perfect),
            None => (s, CsiMode::Estimated),
        };
        let cfo = match cfo {
            "estimated-cfo" => CfoMode::Estimated,
            "zero-cfo" => CfoMode::Zero,
            _ => {
                return Err(Error::InvalidValue {
                    name: "mode",
                    reason: format!("`{s}` is not one of estimated-cfo, zero-cfo (optionally +perfect-csi)"),
                })
            }
        };
        Ok(RxMode { cfo, csi })
    }
}

/// CE-pilot slot of trial `trial`: the true CFOs and the received block.
pub fn ce_pilot_slot(cfg: &SystemConfig, seed: u64, trial: u64) -> (Vec<f64>, SampleBlock) {
    let cfos = draw_cfos(cfg, &mut stream_rng(seed, trial, Purpose::Cfo));
    let gains = draw_gains(cfg, &mut stream_rng(seed, trial, Purpose::PilotGains));
    let chan = ChannelRealization::new(cfg.num_antennas, cfg.num_users, cfg.num_taps, gains, cfos);
    let rx = synthesize_ce_pilot_rx(cfg, &chan, &mut stream_rng(seed, trial, Purpose::PilotNoise));
    (chan.cfos, rx)
}

/// Estimates the CFOs of trial `trial` on each grid, sharing one received
/// pilot block (paired comparison across grids).
pub fn cfo_trial_on_grids(
    cfg: &SystemConfig,
    grids: &[FrequencyGrid],
    seed: u64,
    trial: u64,
) -> Result<Vec<CfoEstimateSet>> {
    let (cfos, rx) = ce_pilot_slot(cfg, seed, trial);
    grids.iter().map(|g| Ok(estimate_cfos(&rx, cfg, g)?.with_truth(&cfos))).collect()
}

pub fn cfo_trial(cfg: &SystemConfig, seed: u64, trial: u64) -> Result<CfoEstimateSet> {
    let mut v = cfo_trial_on_grids(cfg, std::slice::from_ref(&cfg.grid), seed, trial)?;
    Ok(v.remove(0))
}

/// Everything a data-slot trial produces.
#[derive(Debug, Clone)]
pub struct DataTrial {
    pub estimate: CfoEstimateSet,
    /// Data-slot channel (carrying the true CFOs).
    pub chan: ChannelRealization,
    pub symbols: SymbolBlock,
    pub h_hat: ChannelEstimate,
    pub detected: DetectedSymbols,
}

impl DataTrial {
    pub fn omega_hat(&self) -> &[f64] {
        &self.estimate.omega_hat
    }
}

/// Runs trial `trial` end to end in the given mode.
pub fn data_trial(cfg: &SystemConfig, mode: RxMode, seed: u64, trial: u64) -> Result<DataTrial> {
    let (estimate, cfos) = match mode.cfo {
        CfoMode::Estimated => {
            let (cfos, rx) = ce_pilot_slot(cfg, seed, trial);
            (estimate_cfos(&rx, cfg, &cfg.grid)?.with_truth(&cfos), cfos)
        }
        CfoMode::Zero => {
            let est = CfoEstimateSet::zeros(cfg.num_users).with_truth(&vec![0.0; cfg.num_users]);
            (est, vec![0.0; cfg.num_users])
        }
    };
    let gains = draw_gains(cfg, &mut stream_rng(seed, trial, Purpose::DataGains));
    let chan = ChannelRealization::new(cfg.num_antennas, cfg.num_users, cfg.num_taps, gains, cfos);
    let h_hat = match mode.csi {
        CsiMode::Estimated => {
            let rx = synthesize_impulse_pilot_rx(cfg, &chan, &mut stream_rng(seed, trial, Purpose::ImpulseNoise));
            estimate_channel(&rx, &estimate.omega_hat, cfg)
        }
        CsiMode::Perfect => effective_channel(&chan, &estimate.omega_hat),
    };
    let symbols = draw_symbols(cfg, &mut stream_rng(seed, trial, Purpose::Symbols));
    let rx = synthesize_data_rx(cfg, &chan, &symbols, &mut stream_rng(seed, trial, Purpose::DataNoise))?;
    let detected = trmrc_detect(&rx, &h_hat, &estimate.omega_hat, cfg)?;
    Ok(DataTrial { estimate, chan, symbols, h_hat, detected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RawConfig;

    #[test]
    fn mode_names_round_trip() {
        for m in [RxMode::ESTIMATED_CFO, RxMode::ZERO_CFO, RxMode::ESTIMATED_CFO.perfect_csi(), RxMode::ZERO_CFO.perfect_csi()] {
            assert_eq!(m.to_string().parse::<RxMode>().unwrap(), m);
        }
        assert!("bogus".parse::<RxMode>().is_err());
    }

    #[test]
    fn zero_cfo_chain_ignores_compensation() {
        let cfg = SystemConfig::from_raw(&RawConfig {
            num_antennas: Some(4),
            num_users: Some(2),
            num_taps: Some(2),
            pilot_len: Some(100),
            data_len: Some(30),
            ..Default::default()
        })
        .unwrap();
        let t = data_trial(&cfg, RxMode::ZERO_CFO, 11, 0).unwrap();
        assert!(t.chan.cfos.iter().all(|w| *w == 0.0));
        let again = data_trial(&cfg, RxMode::ZERO_CFO, 11, 0).unwrap();
        assert_eq!(t.detected, again.detected);
        // same channel and noise draws as the estimated-CFO run of the same trial
        let est = data_trial(&cfg, RxMode::ESTIMATED_CFO, 11, 0).unwrap();
        assert_eq!(est.chan.gains, t.chan.gains);
        assert_eq!(est.symbols, t.symbols);
    }
}
