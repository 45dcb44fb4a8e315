//! Run configuration: the system parameters (M, N, L, T, Q), the simulated
//! modes and scenarios, the physical-layer knobs and the sweep. Files are
//! flat TOML with keys named after the fields; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{Doppler, PowerDelayProfile, ProfileKind};
use crate::codebook::{Construction, Criterion, UnitarySource};
use crate::error::{Error, Result};
use crate::modem::{Constellation, ModulationKind, SymbolAlphabet};
use crate::receiver::{DecoderKind, Estimator};
use crate::scenario::{PathlossModel, Scenario};
use crate::spreading::Mode;

/// What the sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// A single point at the configured transmit power.
    None,
    /// Nominal cell-edge SNR in dB; sets the transmit power per scenario.
    SnrDb,
    TxPowerDbm,
    /// Number of devices.
    M,
    /// Number of gateway antennas.
    N,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    /// Devices.
    pub m: usize,
    /// Gateway antennas.
    pub n: usize,
    /// Blocks per frame.
    pub l: usize,
    /// Dispersion-vector length.
    pub t: usize,
    /// Codebook size.
    pub q: usize,
    pub modes: Vec<Mode>,
    pub scenarios: Vec<Scenario>,
    /// Modulation of the point stream (PSK or QAM).
    pub point_modulation: ModulationKind,
    pub point_order: usize,
    pub fsk_order: usize,
    pub decoder: DecoderKind,
    pub estimator: Estimator,
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
    pub bandwidth_hz: f64,
    pub thermal_noise_dbm_per_hz: f64,
    pub carrier_ghz: f64,
    pub r_min_m: f64,
    pub r_max_m: f64,
    /// `[intercept_db, distance_slope, frequency_slope]` overriding the outdoor model.
    pub outdoor_pathloss: Option<[f64; 3]>,
    pub indoor_pathloss: Option<[f64; 3]>,
    pub shadowing_mean_db: f64,
    pub shadowing_var_db2: f64,
    pub n_taps: usize,
    pub pdp: ProfileKind,
    pub pdp_decay_db: f64,
    /// Doppler shift times the symbol period.
    pub fd_norm: f64,
    pub oscillators: usize,
    /// Minimum pilot length; blocks shared by several devices get longer pilots.
    pub pilot_len: usize,
    pub codebook_construction: Construction,
    pub codebook_criterion: Criterion,
    pub codebook_budget: usize,
    pub unitary_source: UnitarySource,
    /// Linear per-sample SINR at which the codebook criteria are scored.
    pub codebook_design_sinr: f64,
    pub codebook_file: Option<PathBuf>,
    /// Draw a fresh device-to-block assignment every frame.
    pub reassign_per_frame: bool,
    /// Explicit sub-band count for the time-frequency lattice.
    pub stf_subbands: Option<usize>,
    pub outage_threshold_db: f64,
    /// Decode every link and report error rates.
    pub error_rates: bool,
    pub n_trials: usize,
    pub master_seed: Option<u64>,
    pub sweep: SweepKind,
    pub sweep_values: Vec<f64>,
    /// With an M sweep, raise L, T and Q to at least M at each point.
    pub scale_grid_with_m: bool,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            m: 8,
            n: 64,
            l: 8,
            t: 8,
            q: 8,
            modes: Mode::ALL.to_vec(),
            scenarios: vec![Scenario::Indoor, Scenario::Outdoor],
            point_modulation: ModulationKind::Psk,
            point_order: 4,
            fsk_order: 4,
            decoder: DecoderKind::Ml,
            estimator: Estimator::Ls,
            tx_power_dbm: 10.0,
            noise_figure_db: 7.0,
            bandwidth_hz: 1e6,
            thermal_noise_dbm_per_hz: -174.0,
            carrier_ghz: 2.0,
            r_min_m: 100.0,
            r_max_m: 1000.0,
            outdoor_pathloss: None,
            indoor_pathloss: None,
            shadowing_mean_db: 4.0,
            shadowing_var_db2: 2.0,
            n_taps: 4,
            pdp: ProfileKind::Exponential,
            pdp_decay_db: 3.0,
            fd_norm: 0.01,
            oscillators: 16,
            pilot_len: 4,
            codebook_construction: Construction::RandomGaussian,
            codebook_criterion: Criterion::MaxMinDistance,
            codebook_budget: 64,
            unitary_source: UnitarySource::Dft,
            codebook_design_sinr: 10.0,
            codebook_file: None,
            reassign_per_frame: true,
            stf_subbands: None,
            outage_threshold_db: 0.0,
            error_rates: true,
            n_trials: 10_000,
            master_seed: None,
            sweep: SweepKind::None,
            sweep_values: Vec::new(),
            scale_grid_with_m: false,
        }
    }
}

/// Grid dimensions at one value of an M sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dimensions {
    pub m: usize,
    pub n: usize,
    pub l: usize,
    pub t: usize,
    pub q: usize,
}

impl SystemConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SystemConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn seed(&self) -> u64 {
        self.master_seed.expect("validated config has a seed")
    }

    /// Dimensions at every structural sweep point (one entry unless the sweep
    /// varies M or N).
    pub fn dimensions(&self) -> Vec<(f64, Dimensions)> {
        let base = Dimensions { m: self.m, n: self.n, l: self.l, t: self.t, q: self.q };
        match self.sweep {
            SweepKind::M => self
                .sweep_values
                .iter()
                .map(|&v| {
                    let m = v as usize;
                    let mut d = Dimensions { m, ..base };
                    if self.scale_grid_with_m {
                        d.l = d.l.max(m);
                        d.t = d.t.max(m);
                        d.q = d.q.max(m);
                    }
                    (v, d)
                })
                .collect(),
            SweepKind::N => self
                .sweep_values
                .iter()
                .map(|&v| (v, Dimensions { n: v as usize, ..base }))
                .collect(),
            _ => vec![(f64::NAN, base)],
        }
    }

    /// Rejects configurations that break the system constraints, naming the
    /// violated inequality.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.master_seed.is_none() {
            return bad("master_seed is required".into());
        }
        if self.n_trials == 0 {
            return bad("n_trials >= 1 violated".into());
        }
        if self.modes.is_empty() || self.scenarios.is_empty() {
            return bad("at least one mode and one scenario are required".into());
        }
        match self.sweep {
            SweepKind::None => {}
            _ if self.sweep_values.is_empty() => return bad("sweep_values must not be empty".into()),
            SweepKind::M | SweepKind::N => {
                if self.sweep_values.iter().any(|v| !(v.fract() == 0.0 && *v >= 1.0)) {
                    return bad("M and N sweep values must be positive integers".into());
                }
            }
            _ => {
                if self.sweep_values.iter().any(|v| !v.is_finite()) {
                    return bad("sweep values must be finite".into());
                }
            }
        }
        for (_, d) in self.dimensions() {
            if d.m == 0 || d.n == 0 {
                return bad(format!("M >= 1 and N >= 1 violated (M = {}, N = {})", d.m, d.n));
            }
            if d.t < d.m {
                return bad(format!("T >= M violated (T = {}, M = {})", d.t, d.m));
            }
            if d.l < d.m {
                return bad(format!("L >= M violated (L = {}, M = {})", d.l, d.m));
            }
            if d.q < d.m {
                return bad(format!("Q >= M violated (Q = {}, M = {})", d.q, d.m));
            }
            if let Some(f) = self.stf_subbands {
                if f == 0 || d.l % f != 0 {
                    return bad(format!("stf_subbands = {f} does not divide L = {}", d.l));
                }
            }
        }
        if self.n_taps == 0 || self.pilot_len < self.n_taps {
            return bad(format!(
                "pilot_len >= n_taps >= 1 violated (pilot_len = {}, n_taps = {})",
                self.pilot_len, self.n_taps
            ));
        }
        if !(self.r_min_m > 0.0 && self.r_min_m < self.r_max_m) {
            return bad(format!(
                "0 < r_min_m < r_max_m violated (r_min_m = {}, r_max_m = {})",
                self.r_min_m, self.r_max_m
            ));
        }
        if self.shadowing_var_db2 < 0.0 {
            return bad("shadowing_var_db2 >= 0 violated".into());
        }
        if !(self.fd_norm >= 0.0) || self.oscillators == 0 {
            return bad("fd_norm >= 0 and oscillators >= 1 required".into());
        }
        if !(self.carrier_ghz > 0.0 && self.bandwidth_hz > 0.0) {
            return bad("carrier_ghz and bandwidth_hz must be positive".into());
        }
        if self.codebook_budget == 0 {
            return bad("codebook_budget >= 1 violated".into());
        }
        if self.point_modulation == ModulationKind::Fsk {
            return bad("point_modulation must be psk or qam".into());
        }
        for m in &self.modes {
            self.alphabet(*m)?;
        }
        self.profile()?;
        Ok(())
    }

    pub fn profile(&self) -> Result<PowerDelayProfile> {
        match self.pdp {
            ProfileKind::Exponential => PowerDelayProfile::exponential(self.n_taps, self.pdp_decay_db),
            ProfileKind::Uniform => PowerDelayProfile::uniform(self.n_taps),
        }
        .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn doppler(&self) -> Doppler {
        Doppler {
            fd_norm: self.fd_norm,
            oscillators: self.oscillators,
        }
    }

    pub fn point_constellation(&self) -> Result<Constellation> {
        Constellation::new(self.point_modulation, self.point_order)
    }

    /// Per-block symbol set of a mode: points without spreading and over
    /// time, tones over frequency, both over time and frequency.
    pub fn alphabet(&self, mode: Mode) -> Result<SymbolAlphabet> {
        match mode {
            Mode::None | Mode::St => SymbolAlphabet::points_only(self.point_constellation()?),
            Mode::Sf => SymbolAlphabet::tones_only(Constellation::fsk(self.fsk_order)?),
            Mode::Stf => SymbolAlphabet::split(self.point_constellation()?, Constellation::fsk(self.fsk_order)?),
        }
    }

    pub fn pathloss_model(&self, scenario: Scenario) -> PathlossModel {
        let custom = match scenario {
            Scenario::Outdoor => self.outdoor_pathloss,
            Scenario::Indoor => self.indoor_pathloss,
        };
        match custom {
            Some([intercept_db, distance_slope, frequency_slope]) => PathlossModel {
                intercept_db,
                distance_slope,
                frequency_slope,
            },
            None => scenario.pathloss_model(),
        }
    }

    /// Thermal noise plus noise figure over the bandwidth, in dBm.
    pub fn noise_dbm(&self) -> f64 {
        self.thermal_noise_dbm_per_hz + 10.0 * self.bandwidth_hz.log10() + self.noise_figure_db
    }

    /// Transmit power giving `snr_db` at the cell edge with mean shadowing.
    pub fn tx_dbm_for_snr(&self, scenario: Scenario, snr_db: f64) -> Result<f64> {
        let edge = self.pathloss_model(scenario).loss_db(self.r_max_m, self.carrier_ghz)?;
        Ok(snr_db + edge + self.shadowing_mean_db + self.noise_dbm())
    }

    /// Transmit powers (dBm) of every power point for a scenario, with the
    /// sweep value each one is reported under.
    pub fn power_points(&self, scenario: Scenario) -> Result<Vec<(f64, f64)>> {
        match self.sweep {
            SweepKind::SnrDb => self
                .sweep_values
                .iter()
                .map(|&s| Ok((s, self.tx_dbm_for_snr(scenario, s)?)))
                .collect(),
            SweepKind::TxPowerDbm => Ok(self.sweep_values.iter().map(|&p| (p, p)).collect()),
            _ => Ok(vec![(f64::NAN, self.tx_power_dbm)]),
        }
    }
}

/// The experiment presets, by name.
pub fn sweep_presets() -> Vec<(&'static str, SystemConfig)> {
    let base = SystemConfig {
        master_seed: Some(2024),
        ..SystemConfig::default()
    };
    vec![
        (
            "fig3",
            SystemConfig {
                sweep: SweepKind::SnrDb,
                sweep_values: (0..=10).map(|i| -40.0 + 3.0 * i as f64).collect(),
                ..base.clone()
            },
        ),
        (
            "fig4",
            SystemConfig {
                m: 16,
                n: 100,
                l: 20,
                t: 20,
                q: 20,
                sweep: SweepKind::SnrDb,
                sweep_values: (0..=10).map(|i| -44.0 + 3.0 * i as f64).collect(),
                ..base.clone()
            },
        ),
        (
            "fig5",
            SystemConfig {
                scenarios: vec![Scenario::Indoor],
                sweep: SweepKind::M,
                sweep_values: vec![2.0, 4.0, 8.0, 16.0, 24.0, 32.0, 40.0],
                scale_grid_with_m: true,
                error_rates: false,
                ..base.clone()
            },
        ),
        (
            "fig6",
            SystemConfig {
                scenarios: vec![Scenario::Indoor],
                sweep: SweepKind::TxPowerDbm,
                sweep_values: (0..=10).map(|i| -10.0 + 4.0 * i as f64).collect(),
                error_rates: false,
                ..base.clone()
            },
        ),
        (
            "fig7",
            SystemConfig {
                scenarios: vec![Scenario::Indoor],
                sweep: SweepKind::N,
                sweep_values: (1..=10).map(|i| 10.0 * i as f64).collect(),
                error_rates: false,
                ..base
            },
        ),
    ]
}

/// Looks up a preset by name.
pub fn preset(name: &str) -> Result<SystemConfig> {
    sweep_presets()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, c)| c)
        .ok_or_else(|| Error::Config(format!("unknown preset {name:?} (expected fig3..fig7)")))
}
