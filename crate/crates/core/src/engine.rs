//! Monte-Carlo orchestration.
//!
//! One trial is one frame: fresh deployment, shadowing and fading, shared by
//! every simulated scenario and mode (common random numbers), and a fresh
//! assignment and payload per mode. Since blocks never overlap, each occupied
//! block is simulated on its own at its absolute time in the frame, which is
//! exactly what the full-frame superposition produces on that block.
//!
//! Within a trial the noiseless received signal `S` and a unit-power noise
//! draw `W` are computed once, and every power point of the sweep observes
//! `√P·S + σ·W`. Trials run on a worker pool and are folded in trial order,
//! so results do not depend on the worker count.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{awgn, gen_taps, propagate_from, Frame, LinkChannel, TapSet};
use crate::codebook::{
    gen_random_codebook, gen_unitary_codebook_with, optimize_codebook, Codebook, Construction, ScoreContext,
};
use crate::config::{Dimensions, SweepKind, SystemConfig};
use crate::error::{Error, Result};
use crate::metrics::{interference_power, DelayProfile, ErrorTally, LinkRecord, Moments, Tally, TrialRecord};
use crate::modem::SymbolAlphabet;
use crate::receiver::{
    decode, estimate_csi, post_sinr, rake_weights, zf_residual, zf_weights, ChannelEstimate, Estimator, PilotSet,
};
use crate::results::{ResultRow, ResultTable};
use crate::rng::{substream, tag};
use crate::scenario::{deploy_nodes, draw_shadowing, Scenario};
use crate::spreading::{
    assign_blocks, build_grid, build_lattice, demap_block, insert_pilot, spread_into, Assignment, BlockGrid,
    BlockLayout, Mode,
};

/// Large- and small-scale state of every device in one trial.
#[derive(Debug, Clone)]
pub struct TrialChannels {
    pub radius: Vec<f64>,
    pub shadowing_db: Vec<f64>,
    /// `taps[device][antenna]` at frame start.
    pub taps: Vec<Vec<TapSet>>,
}

/// Draws the channels of trial `trial`. Each device and each (device,
/// antenna) link has its own sub-stream, so sweeps over M or N reuse the
/// same realizations for the devices and antennas they share.
pub fn draw_channels(cfg: &SystemConfig, dims: Dimensions, trial: u64) -> Result<TrialChannels> {
    let seed = cfg.seed();
    let profile = cfg.profile()?;
    let mut radius = Vec::with_capacity(dims.m);
    let mut shadowing_db = Vec::with_capacity(dims.m);
    let mut taps = Vec::with_capacity(dims.m);
    for d in 0..dims.m as u64 {
        let mut rng = substream(seed, &[trial, tag::DEPLOY, d]);
        radius.push(deploy_nodes(1, cfg.r_min_m, cfg.r_max_m, &mut rng)?.positions[0].radius);
        let mut rng = substream(seed, &[trial, tag::SHADOWING, d]);
        shadowing_db.push(draw_shadowing(cfg.shadowing_mean_db, cfg.shadowing_var_db2, &mut rng)?);
        taps.push(
            (0..dims.n as u64)
                .map(|n| gen_taps(&profile, cfg.doppler(), &mut substream(seed, &[trial, tag::FADING, d, n])))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(TrialChannels { radius, shadowing_db, taps })
}

/// The codebook used at a given grid size: loaded from file, or searched
/// from a sub-stream keyed by (Q, T).
pub fn design_codebook(cfg: &SystemConfig, dims: Dimensions) -> Result<Codebook> {
    if let Some(path) = &cfg.codebook_file {
        let cb = Codebook::load(path)?;
        if cb.q() != dims.q || cb.t() != dims.t {
            return Err(Error::Config(format!(
                "codebook file has Q = {}, T = {} but the run needs Q = {}, T = {}",
                cb.q(),
                cb.t(),
                dims.q,
                dims.t
            )));
        }
        return Ok(cb);
    }
    let seed = cfg.seed();
    let mut rng = substream(seed, &[tag::CODEBOOK, dims.q as u64, dims.t as u64]);
    let constellation = cfg.point_constellation()?;
    let ctx = ScoreContext {
        constellation: &constellation,
        sinr: cfg.codebook_design_sinr,
    };
    let (q, t, source) = (dims.q, dims.t, cfg.unitary_source);
    let (mut cb, _) = match cfg.codebook_construction {
        Construction::RandomGaussian => optimize_codebook(
            |r: &mut crate::rng::SimRng| gen_random_codebook(q, t, r),
            cfg.codebook_criterion,
            &ctx,
            cfg.codebook_budget,
            &mut rng,
        )?,
        Construction::Unitary => optimize_codebook(
            |r: &mut crate::rng::SimRng| gen_unitary_codebook_with(q, t, source, r),
            cfg.codebook_criterion,
            &ctx,
            cfg.codebook_budget,
            &mut rng,
        )?,
    };
    cb.seed = Some(seed);
    Ok(cb)
}

/// Fixed per-mode state: grid, single-block grid, symbol set and pilots.
#[derive(Debug, Clone)]
pub struct ModeSetup {
    pub mode: Mode,
    pub grid: BlockGrid,
    /// One block of the same geometry, used to simulate blocks one at a time.
    pub block: BlockGrid,
    pub alphabet: SymbolAlphabet,
    pub pilots: PilotSet,
}

impl ModeSetup {
    pub fn new(cfg: &SystemConfig, dims: Dimensions, mode: Mode) -> Result<Self> {
        let sharers = if mode == Mode::None { dims.m } else { 1 };
        let pilot_len = cfg.pilot_len.max(sharers * cfg.n_taps);
        let layout = BlockLayout::new(cfg.n_taps, pilot_len, dims.t)?;
        let alphabet = cfg.alphabet(mode)?;
        let tones = alphabet.n_tones();
        let grid = match (mode, cfg.stf_subbands) {
            (Mode::Stf, Some(f)) => build_lattice(mode, dims.l / f, f, layout, tones)?,
            _ => build_grid(mode, dims.l, dims.m, layout, tones)?,
        };
        if mode != Mode::None && grid.n_blocks() < dims.m {
            return Err(Error::Config(format!("L >= M violated (L = {}, M = {})", grid.n_blocks(), dims.m)));
        }
        let block = build_lattice(mode, 1, 1, layout, tones)?;
        let pilots = PilotSet::zadoff_chu(sharers, cfg.n_taps, pilot_len)?;
        Ok(ModeSetup { mode, grid, block, alphabet, pilots })
    }

    /// Fraction of each block spent on the pilot and its cyclic prefix.
    pub fn pilot_overhead(&self) -> f64 {
        let l = self.grid.layout();
        (l.cyclic_prefix + l.pilot_len) as f64 / l.block_len() as f64
    }
}

/// Everything fixed for one structural sweep point.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub cfg: SystemConfig,
    pub dims: Dimensions,
    pub codebook: Codebook,
    pub modes: Vec<ModeSetup>,
    /// Per scenario: (reported sweep value, transmit power in dBm) of every power point.
    pub power_points: Vec<(Scenario, Vec<(f64, f64)>)>,
    /// Noise power per sample, mW.
    pub noise_power: f64,
    profile: Vec<f64>,
}

/// One device's noiseless contribution to its block, at unit transmit power
/// and unit large-scale gain.
struct DeviceSignal {
    device: usize,
    vector: usize,
    label: usize,
    bits: Vec<u8>,
    /// `rx[n]`: the block as received on antenna `n`.
    rx: Vec<Frame>,
    /// Small-scale taps on every antenna at the middle of the data part.
    taps_mid: Vec<Vec<Complex64>>,
    /// Tone row carrying the data.
    row: usize,
    /// `window[n]`: the data window of that row on antenna `n`.
    window: Vec<Vec<Complex64>>,
    /// Antenna-averaged tap powers.
    pdp: Vec<f64>,
}

fn mode_index(mode: Mode) -> u64 {
    Mode::ALL.iter().position(|&m| m == mode).unwrap() as u64
}

impl Simulator {
    pub fn new(cfg: &SystemConfig, dims: Dimensions) -> Result<Self> {
        let codebook = design_codebook(cfg, dims)?;
        Self::with_codebook(cfg, dims, codebook)
    }

    pub fn with_codebook(cfg: &SystemConfig, dims: Dimensions, codebook: Codebook) -> Result<Self> {
        cfg.validate()?;
        if codebook.q() != dims.q || codebook.t() != dims.t {
            return Err(Error::Config("codebook does not match Q and T".into()));
        }
        let modes = cfg
            .modes
            .iter()
            .map(|&m| ModeSetup::new(cfg, dims, m))
            .collect::<Result<Vec<_>>>()?;
        let power_points = cfg
            .scenarios
            .iter()
            .map(|&s| Ok((s, cfg.power_points(s)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Simulator {
            cfg: cfg.clone(),
            dims,
            codebook,
            modes,
            power_points,
            noise_power: 10f64.powf(cfg.noise_dbm() / 10.0),
            profile: cfg.profile()?.weights().to_vec(),
        })
    }

    fn assignment(&self, setup: &ModeSetup, trial: u64) -> Result<Assignment> {
        if setup.mode == Mode::None {
            return Ok(Assignment::shared(self.dims.m));
        }
        let frame_key = if self.cfg.reassign_per_frame { trial } else { u64::MAX };
        let mut rng = substream(self.cfg.seed(), &[frame_key, tag::ASSIGN, mode_index(setup.mode)]);
        assign_blocks(&setup.grid, self.dims.m, &mut rng)
    }

    fn device_signal(
        &self,
        setup: &ModeSetup,
        channels: &TrialChannels,
        device: usize,
        block: usize,
        pilot_index: usize,
        trial: u64,
    ) -> Result<DeviceSignal> {
        let mut rng = substream(self.cfg.seed(), &[trial, tag::BITS, device as u64]);
        let vector = rng.random_range(0..self.dims.q);
        let bits: Vec<u8> = (0..setup.alphabet.bits_per_symbol()).map(|_| rng.random_range(0..2u8)).collect();
        let label = setup.alphabet.label_of_bits(&bits)?;
        let symbol = setup.alphabet.tx_symbol(label);

        let mut tx = setup.block.empty_frame();
        insert_pilot(&mut tx, setup.pilots.sequence(pilot_index), 0, &setup.block)?;
        spread_into(&mut tx, symbol, self.codebook.vector(vector), 0, &setup.block)?;

        let t0 = (setup.grid.cell(block).slot * setup.grid.block_len()) as u64;
        let layout = setup.grid.layout();
        let mid = (layout.data_offset() + layout.data_len / 2) as f64;
        let mut links = Vec::with_capacity(self.dims.n);
        let mut taps_mid = Vec::with_capacity(self.dims.n);
        for taps in &channels.taps[device] {
            taps_mid.push(taps.at(t0 as f64 + mid));
            links.push(LinkChannel::unit(taps.clone()));
        }
        let rx = propagate_from(&tx, &links, t0 as usize);
        let (d0, w) = (layout.data_offset(), layout.data_window());
        let window = rx.iter().map(|f| f.row(symbol.tone)[d0..d0 + w].to_vec()).collect();
        let pdp = (0..taps_mid[0].len())
            .map(|k| taps_mid.iter().map(|h| h[k].norm_sqr()).sum::<f64>() / taps_mid.len() as f64)
            .collect();
        Ok(DeviceSignal {
            device,
            vector,
            label,
            bits,
            rx,
            taps_mid,
            row: symbol.tone,
            window,
            pdp,
        })
    }

    /// Runs one trial. The result is indexed `[scenario][mode][power point]`.
    pub fn trial(&self, trial: u64) -> Result<Vec<Vec<Vec<TrialRecord>>>> {
        let channels = draw_channels(&self.cfg, self.dims, trial)?;
        let mut out: Vec<Vec<Vec<TrialRecord>>> = self
            .power_points
            .iter()
            .map(|(_, pts)| {
                self.modes
                    .iter()
                    .map(|_| {
                        pts.iter()
                            .map(|_| TrialRecord {
                                links: Vec::new(),
                                interference: Vec::new(),
                                noise_power: self.noise_power,
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        for (mi, setup) in self.modes.iter().enumerate() {
            let assignment = self.assignment(setup, trial)?;
            let mut blocks: Vec<usize> = assignment.blocks().to_vec();
            blocks.sort_unstable();
            blocks.dedup();
            for block in blocks {
                let occupants: Vec<usize> = assignment.occupants(block).collect();
                let signals = occupants
                    .iter()
                    .enumerate()
                    .map(|(rank, &d)| self.device_signal(setup, &channels, d, block, rank, trial))
                    .collect::<Result<Vec<_>>>()?;
                let mut noise_rng = substream(self.cfg.seed(), &[trial, tag::NOISE, occupants[0] as u64]);
                let noise = awgn(
                    self.dims.n,
                    setup.block.frame_rows(),
                    setup.block.frame_len(),
                    1.0,
                    &mut noise_rng,
                );
                for (si, (scenario, points)) in self.power_points.iter().enumerate() {
                    let model = self.cfg.pathloss_model(*scenario);
                    let gains = signals
                        .iter()
                        .map(|s| {
                            let pl = model.loss_db(channels.radius[s.device], self.cfg.carrier_ghz)?;
                            Ok(10f64.powf(-(pl + channels.shadowing_db[s.device]) / 20.0))
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    for (pi, &(_, tx_dbm)) in points.iter().enumerate() {
                        let power = 10f64.powf(tx_dbm / 10.0);
                        let rec = &mut out[si][mi][pi];
                        self.observe_block(setup, &signals, &gains, &noise, power, rec)?;
                    }
                }
            }
        }
        Ok(out)
    }

    fn observe_block(
        &self,
        setup: &ModeSetup,
        signals: &[DeviceSignal],
        gains: &[f64],
        noise: &[Frame],
        power: f64,
        rec: &mut TrialRecord,
    ) -> Result<()> {
        let sigma2 = self.noise_power;
        let amps: Vec<f64> = gains.iter().map(|g| power.sqrt() * g).collect();
        let mut rx: Vec<Frame> = noise
            .iter()
            .map(|w| {
                let mut f = w.clone();
                f.samples_mut().iter_mut().for_each(|z| *z *= sigma2.sqrt());
                f
            })
            .collect();
        for (s, &a) in signals.iter().zip(&amps) {
            for (acc, y) in rx.iter_mut().zip(&s.rx) {
                acc.add_scaled(y, Complex64::new(a, 0.0))?;
            }
        }
        let obs = demap_block(&rx, &setup.block, 0)?;
        let w = setup.grid.layout().data_window();
        let scaled_pdp = |s: &DeviceSignal, a: f64| -> Vec<f64> { s.pdp.iter().map(|p| a * a * p).collect() };

        for (i, s) in signals.iter().enumerate() {
            let a = amps[i];
            let true_taps: Vec<Vec<Complex64>> =
                s.taps_mid.iter().map(|h| h.iter().map(|z| z * a).collect()).collect();
            let est = match self.cfg.estimator {
                Estimator::Perfect => ChannelEstimate::perfect(true_taps.clone()),
                kind => {
                    let prior: Vec<f64> = self.profile.iter().map(|p| a * a * p).collect();
                    estimate_csi(&obs.pilot, &setup.pilots, i, kind, sigma2, &prior)?
                }
            };

            let (decoded_label, decoded_vector, decoded_bits) = if self.cfg.error_rates {
                let d = decode(self.cfg.decoder, &obs, &est, &self.codebook, &setup.alphabet, sigma2)?;
                (d.label, d.vector_index, d.bits)
            } else {
                (s.label, s.vector, s.bits.clone())
            };

            let v = self.codebook.vector(s.vector);
            let zf_chain = setup.mode.uses_tones();
            let weights = if zf_chain { zf_weights(&est, v, w) } else { rake_weights(&est, v, w) };
            // interferers only reach the serving row if they transmit on it
            let others: Vec<(&[Vec<Complex64>], f64)> = signals
                .iter()
                .zip(&amps)
                .enumerate()
                .filter(|(j, (o, _))| *j != i && o.row == s.row)
                .map(|(_, (o, &ao))| (o.window.as_slice(), ao))
                .collect();
            let sinr = post_sinr(&weights, (&s.window, a), &others, sigma2);

            let mut profiles: Vec<DelayProfile> = signals
                .iter()
                .zip(&amps)
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, (o, &ao))| DelayProfile::from_powers(scaled_pdp(o, ao)))
                .collect();
            if zf_chain {
                let c = zf_residual(&est, &true_taps, w);
                let rx_power: f64 = scaled_pdp(s, a).iter().sum();
                profiles.push(DelayProfile {
                    powers: c.iter().map(|z| rx_power * z.norm_sqr()).collect(),
                    delays: (0..w).map(|j| j.min(w - j) as f64).collect(),
                });
            } else {
                profiles.push(DelayProfile::from_powers(scaled_pdp(s, a)));
            }
            rec.interference.push(interference_power(&profiles).linear);
            rec.links.push(LinkRecord {
                sinr,
                true_bits: s.bits.clone(),
                decoded_bits,
                true_label: s.label,
                decoded_label,
                true_vector: s.vector,
                decoded_vector,
            });
        }
        Ok(())
    }
}

/// Running aggregate of one (scenario, mode, power point) cell.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CellAccumulator {
    pub outage: Tally,
    pub sinr_db: Moments,
    pub interference: Moments,
    pub errors: ErrorTally,
}

/// Per-link SINR values below this are recorded at the floor so that a
/// degenerate link cannot poison the mean.
const SINR_FLOOR_DB: f64 = -300.0;

impl CellAccumulator {
    pub fn push(&mut self, rec: &TrialRecord, threshold_db: f64, with_errors: bool) -> Result<()> {
        for l in &rec.links {
            let s = l.sinr_db();
            self.outage.push(s < threshold_db);
            self.sinr_db.push(if s.is_nan() { SINR_FLOOR_DB } else { s.max(SINR_FLOOR_DB) });
            if with_errors {
                self.errors.push(l)?;
            }
        }
        rec.interference.iter().for_each(|&x| self.interference.push(x));
        Ok(())
    }

    pub fn merge(&mut self, other: &CellAccumulator) {
        self.outage.merge(&other.outage);
        self.sinr_db.merge(&other.sinr_db);
        self.interference.merge(&other.interference);
        self.errors.merge(&other.errors);
    }
}

/// Aggregates `[scenario][mode][point]` for a simulator over `trials`,
/// folding per-trial results in trial order.
pub fn accumulate(
    sim: &Simulator,
    trials: std::ops::Range<u64>,
    pool: &rayon::ThreadPool,
) -> Result<Vec<Vec<Vec<CellAccumulator>>>> {
    let shape = |sim: &Simulator| -> Vec<Vec<Vec<CellAccumulator>>> {
        sim.power_points
            .iter()
            .map(|(_, pts)| sim.modes.iter().map(|_| vec![CellAccumulator::default(); pts.len()]).collect())
            .collect()
    };
    let threshold = sim.cfg.outage_threshold_db;
    let errors = sim.cfg.error_rates;
    let one = |t: u64| -> Result<Vec<Vec<Vec<CellAccumulator>>>> {
        let mut acc = shape(sim);
        for (a, r) in acc.iter_mut().flatten().flatten().zip(sim.trial(t)?.iter().flatten().flatten()) {
            a.push(r, threshold, errors)?;
        }
        Ok(acc)
    };
    let mut total = shape(sim);
    const CHUNK: u64 = 256;
    let mut start = trials.start;
    while start < trials.end {
        let end = (start + CHUNK).min(trials.end);
        let parts = pool.install(|| (start..end).into_par_iter().map(one).collect::<Result<Vec<_>>>())?;
        for part in parts {
            for (a, b) in total.iter_mut().flatten().flatten().zip(part.iter().flatten().flatten()) {
                a.merge(b);
            }
        }
        start = end;
    }
    Ok(total)
}

/// Runs the configured experiment on all available cores.
pub fn run_experiment(cfg: &SystemConfig) -> Result<ResultTable> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    run_experiment_with_workers(cfg, workers)
}

/// Runs the configured experiment on `workers` threads. The result does not
/// depend on `workers`.
pub fn run_experiment_with_workers(cfg: &SystemConfig, workers: usize) -> Result<ResultTable> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let seed = cfg.seed();
    let mut table = ResultTable::default();
    for (structural, dims) in cfg.dimensions() {
        let sim = Simulator::new(cfg, dims)?;
        let acc = accumulate(&sim, 0..cfg.n_trials as u64, &pool)?;
        for ((scenario, points), per_mode) in sim.power_points.iter().zip(&acc) {
            for (setup, cells) in sim.modes.iter().zip(per_mode) {
                for (&(power_value, _), cell) in points.iter().zip(cells) {
                    let x = match cfg.sweep {
                        SweepKind::M | SweepKind::N => structural,
                        SweepKind::None => cfg.tx_power_dbm,
                        _ => power_value,
                    };
                    table.rows.extend(cell_rows(x, setup, *scenario, cell, cfg.error_rates, seed)?);
                }
            }
        }
    }
    Ok(table)
}

fn cell_rows(
    x: f64,
    setup: &ModeSetup,
    scenario: Scenario,
    cell: &CellAccumulator,
    errors: bool,
    seed: u64,
) -> Result<Vec<ResultRow>> {
    let name = |metric: &str| format!("{metric}/{}/{}", setup.mode.name(), scenario.name());
    let row = |metric: &str, estimate: f64, ci: (f64, f64), n: u64| ResultRow {
        sweep_value: x,
        metric: name(metric),
        estimate,
        ci_lo: ci.0,
        ci_hi: ci.1,
        n,
        seed,
    };
    let mut rows = Vec::new();
    let p = cell.outage.proportion()?;
    rows.push(row("outage_probability", p.estimate, (p.ci_lo, p.ci_hi), p.n));
    let s = &cell.sinr_db;
    rows.push(row("sinr_db", s.mean(), s.ci(), s.n));
    let i = &cell.interference;
    let (lo, hi) = i.ci();
    rows.push(row(
        "interference_db",
        crate::metrics::to_db(i.mean()),
        (crate::metrics::to_db(lo), crate::metrics::to_db(hi)),
        i.n,
    ));
    if errors {
        let r = cell.errors.rates()?;
        for (metric, p) in [("ber", r.bit), ("ser", r.symbol), ("ver", r.vector)] {
            rows.push(row(metric, p.estimate, (p.ci_lo, p.ci_hi), p.n));
        }
    }
    let o = setup.pilot_overhead();
    rows.push(row("pilot_overhead", o, (o, o), s.n));
    Ok(rows)
}
