//! Small-scale fading and the multiple-access channel.
//!
//! Each (device, antenna) link carries a tapped delay line whose taps are
//! independent sum-of-sinusoids processes. Every sinusoid has a complex
//! Gaussian weight and a Doppler shift `fd·cos(α)`, with the arrival angles
//! stratified around the circle and randomly rotated. The marginal of every
//! tap is exactly circular Gaussian and the ensemble autocorrelation is
//! `J0(2π·fd·lag)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::complex_normal;
use crate::scenario::LargeScaleGain;

/// Average power per tap, normalized to unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile {
    weights: Vec<f64>,
}

impl PowerDelayProfile {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Domain("power-delay profile needs at least one tap".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Domain(format!(
                "power-delay profile weights must be finite and non-negative: {weights:?}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::Domain("power-delay profile has zero total power".into()));
        }
        Ok(Self {
            weights: weights.into_iter().map(|w| w / sum).collect(),
        })
    }

    /// `n` taps decaying by `decay_db` per tap.
    pub fn exponential(n: usize, decay_db: f64) -> Result<Self> {
        Self::new((0..n).map(|k| 10f64.powf(-decay_db * k as f64 / 10.0)).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Shape of the power-delay profile, as named in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Exponential,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Doppler {
    /// Maximum Doppler shift times the symbol period.
    pub fd_norm: f64,
    /// Sinusoids per tap.
    pub oscillators: usize,
}

impl Doppler {
    pub const STATIC: Doppler = Doppler {
        fd_norm: 0.0,
        oscillators: 16,
    };
}

#[derive(Debug, Clone, PartialEq)]
struct TapProcess {
    weights: Vec<Complex64>,
    /// Doppler shift of each sinusoid in cycles per symbol.
    shifts: Vec<f64>,
    /// `e^{j2π·shift}`: rotation of each sinusoid over one symbol.
    steps: Vec<Complex64>,
}

impl TapProcess {
    fn new(weights: Vec<Complex64>, shifts: Vec<f64>) -> Self {
        let steps = shifts.iter().map(|f| Complex64::cis(2.0 * PI * f)).collect();
        TapProcess { weights, shifts, steps }
    }
}

impl TapProcess {
    fn value(&self) -> Complex64 {
        self.weights.iter().sum()
    }
}

/// Fading taps of one (device, antenna) link together with their Doppler state.
#[derive(Debug, Clone, PartialEq)]
pub struct TapSet {
    taps: Vec<TapProcess>,
    fd_norm: f64,
}

/// Draws a fresh set of fading taps.
pub fn gen_taps<R: Rng + ?Sized>(
    profile: &PowerDelayProfile,
    doppler: Doppler,
    rng: &mut R,
) -> Result<TapSet> {
    if !(doppler.fd_norm >= 0.0 && doppler.fd_norm.is_finite()) {
        return Err(Error::Domain(format!(
            "normalized Doppler must be finite and non-negative (got {})",
            doppler.fd_norm
        )));
    }
    if doppler.oscillators == 0 {
        return Err(Error::Domain("Doppler model needs at least one oscillator".into()));
    }
    let k = doppler.oscillators;
    let taps = profile
        .weights()
        .iter()
        .map(|&p| {
            let rotation: f64 = rng.random::<f64>() * 2.0 * PI;
            let shifts = (0..k)
                .map(|i| doppler.fd_norm * ((2.0 * PI * i as f64 + rotation) / k as f64).cos())
                .collect();
            let weights = (0..k).map(|_| complex_normal(rng, p / k as f64)).collect();
            TapProcess::new(weights, shifts)
        })
        .collect();
    Ok(TapSet {
        taps,
        fd_norm: doppler.fd_norm,
    })
}

impl TapSet {
    /// Static taps with exactly the given values.
    pub fn fixed(values: &[Complex64]) -> Self {
        TapSet {
            taps: values
                .iter()
                .map(|&v| TapProcess::new(vec![v], vec![0.0]))
                .collect(),
            fd_norm: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn fd_norm(&self) -> f64 {
        self.fd_norm
    }

    /// Tap values at symbol time 0.
    pub fn current(&self) -> Vec<Complex64> {
        self.taps.iter().map(TapProcess::value).collect()
    }

    /// Tap values at symbol time `t`.
    pub fn at(&self, t: f64) -> Vec<Complex64> {
        self.taps
            .iter()
            .map(|tap| {
                tap.weights
                    .iter()
                    .zip(&tap.shifts)
                    .map(|(w, f)| w * Complex64::cis(2.0 * PI * f * t))
                    .sum()
            })
            .collect()
    }

    /// Tap values for `len` consecutive symbols starting at `t0`, laid out
    /// as `out[t * n_taps + k]`.
    pub fn window(&self, t0: usize, len: usize) -> Vec<Complex64> {
        let n = self.taps.len();
        let mut out = vec![Complex64::new(0.0, 0.0); n * len];
        let mut col = vec![Complex64::new(0.0, 0.0); len];
        for (k, tap) in self.taps.iter().enumerate() {
            col.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            let start = |i: usize| tap.weights[i] * tap.steps[i].powu(t0 as u32);
            let step = |i: usize| tap.steps[i];
            // four sinusoids per pass keep independent recurrences in flight
            let m = tap.weights.len();
            let mut i = 0;
            while i + 4 <= m {
                let (mut p0, mut p1, mut p2, mut p3) = (start(i), start(i + 1), start(i + 2), start(i + 3));
                let (s0, s1, s2, s3) = (step(i), step(i + 1), step(i + 2), step(i + 3));
                for c in col.iter_mut() {
                    *c += (p0 + p1) + (p2 + p3);
                    p0 *= s0;
                    p1 *= s1;
                    p2 *= s2;
                    p3 *= s3;
                }
                i += 4;
            }
            for j in i..m {
                let (mut p, s) = (start(j), step(j));
                for c in col.iter_mut() {
                    *c += p;
                    p *= s;
                }
            }
            for (t, c) in col.iter().enumerate() {
                out[t * n + k] = *c;
            }
        }
        out
    }

    /// Advances the state by `steps` symbol periods.
    pub fn advance(&mut self, steps: u64) {
        for tap in &mut self.taps {
            for (w, &f) in tap.weights.iter_mut().zip(&tap.shifts) {
                *w *= Complex64::cis(2.0 * PI * f * steps as f64);
            }
        }
    }
}

/// Returns the taps after `steps` symbol periods.
pub fn evolve_doppler(state: &TapSet, steps: u64) -> TapSet {
    let mut next = state.clone();
    next.advance(steps);
    next
}

/// Composite channel of one (device, antenna) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkChannel {
    pub large_scale: LargeScaleGain,
    pub small_scale: TapSet,
}

impl LinkChannel {
    /// Unit large-scale gain, for tests and calibration.
    pub fn unit(small_scale: TapSet) -> Self {
        LinkChannel {
            large_scale: LargeScaleGain {
                pathloss_db: 0.0,
                shadowing_db: 0.0,
            },
            small_scale,
        }
    }

    pub fn amplitude(&self) -> f64 {
        self.large_scale.amplitude()
    }

    /// Composite taps (large-scale amplitude applied) at symbol time `t`.
    pub fn taps_at(&self, t: f64) -> Vec<Complex64> {
        let a = self.amplitude();
        self.small_scale.at(t).into_iter().map(|h| h * a).collect()
    }
}

/// A time-frequency grid of complex samples: one row per frequency stream,
/// one column per symbol period.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    rows: usize,
    len: usize,
    data: Vec<Complex64>,
}

impl Frame {
    pub fn zeros(rows: usize, len: usize) -> Self {
        Frame {
            rows,
            len,
            data: vec![Complex64::new(0.0, 0.0); rows * len],
        }
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let len = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != len) {
            return Err(Error::Contract("frame rows must share one length".into()));
        }
        let n = rows.len();
        Ok(Frame {
            rows: n,
            len,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.len..(r + 1) * self.len]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [Complex64] {
        &mut self.data[r * self.len..(r + 1) * self.len]
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.data
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(Complex64::norm_sqr).sum()
    }

    fn same_shape(&self, other: &Frame) -> bool {
        self.rows == other.rows && self.len == other.len
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Frame, scale: Complex64) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::Contract(format!(
                "frame shape mismatch: {}x{} vs {}x{}",
                self.rows, self.len, other.rows, other.len
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * scale;
        }
        Ok(())
    }

    /// Columns `[lo, hi]` spanned by non-zero samples, if any.
    fn support(&self) -> Option<(usize, usize)> {
        let mut span: Option<(usize, usize)> = None;
        for r in 0..self.rows {
            let row = self.row(r);
            if let Some(first) = row.iter().position(|z| *z != Complex64::new(0.0, 0.0)) {
                let last = row.iter().rposition(|z| *z != Complex64::new(0.0, 0.0)).unwrap();
                span = Some(match span {
                    None => (first, last),
                    Some((lo, hi)) => (lo.min(first), hi.max(last)),
                });
            }
        }
        span
    }
}

/// Noiseless output of one transmitted frame on every antenna:
/// `y_n[t] = Σ_k g_n·h_{n,k}(t)·x[t−k]`, each row filtered independently.
pub fn propagate(frame: &Frame, links: &[LinkChannel]) -> Vec<Frame> {
    propagate_from(frame, links, 0)
}

/// [`propagate`] for a frame whose first sample is sent at symbol time `t0`.
pub fn propagate_from(frame: &Frame, links: &[LinkChannel], t0: usize) -> Vec<Frame> {
    let mut out = vec![Frame::zeros(frame.rows, frame.len); links.len()];
    let Some((lo, last)) = frame.support() else {
        return out;
    };
    for (link, y) in links.iter().zip(out.iter_mut()) {
        let n_taps = link.small_scale.len();
        let hi = (last + n_taps - 1).min(frame.len - 1);
        let span = hi - lo + 1;
        let amp = link.amplitude();
        let taps = link.small_scale.window(t0 + lo, span);
        for r in 0..frame.rows {
            let x = frame.row(r);
            if x[lo..=last].iter().all(|z| z.norm_sqr() == 0.0) {
                continue;
            }
            let yr = y.row_mut(r);
            for t in lo..=hi {
                let h = &taps[(t - lo) * n_taps..(t - lo + 1) * n_taps];
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, hk) in h.iter().enumerate() {
                    if t >= k + lo {
                        acc += hk * x[t - k];
                    }
                }
                yr[t] = acc * amp;
            }
        }
    }
    out
}

/// Complex white Gaussian noise of the given power on every antenna.
pub fn awgn<R: Rng + ?Sized>(
    antennas: usize,
    rows: usize,
    len: usize,
    power: f64,
    rng: &mut R,
) -> Vec<Frame> {
    (0..antennas)
        .map(|_| {
            let mut f = Frame::zeros(rows, len);
            if power > 0.0 {
                for z in f.samples_mut() {
                    *z = complex_normal(rng, power);
                }
            }
            f
        })
        .collect()
}

/// Superposes every device's frame through its per-antenna channels and adds
/// independent noise of power `noise_power` on each antenna.
///
/// `channels[m][n]` is the link from device `m` to antenna `n`.
pub fn mac_superpose<R: Rng + ?Sized>(
    frames: &[Frame],
    channels: &[Vec<LinkChannel>],
    noise_power: f64,
    rng: &mut R,
) -> Result<Vec<Frame>> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Contract("at least one device frame is required".into()))?;
    if frames.len() != channels.len() {
        return Err(Error::Contract(format!(
            "{} frames but {} channel sets",
            frames.len(),
            channels.len()
        )));
    }
    if frames.iter().any(|f| !f.same_shape(first)) {
        return Err(Error::Contract("device frames differ in shape".into()));
    }
    let antennas = channels[0].len();
    if channels.iter().any(|c| c.len() != antennas) || antennas == 0 {
        return Err(Error::Contract(
            "every device needs a channel to every antenna".into(),
        ));
    }
    if !(noise_power >= 0.0) {
        return Err(Error::Domain(format!("noise power must be non-negative (got {noise_power})")));
    }
    let mut rx = awgn(antennas, first.rows, first.len, noise_power, rng);
    let one = Complex64::new(1.0, 0.0);
    for (frame, links) in frames.iter().zip(channels) {
        for (acc, y) in rx.iter_mut().zip(propagate(frame, links)) {
            acc.add_scaled(&y, one)?;
        }
    }
    Ok(rx)
}
