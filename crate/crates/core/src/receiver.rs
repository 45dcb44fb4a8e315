//! Gateway processing of one block: pilot-based channel estimation, ZF
//! equalization, symbol/vector decoding, and the linear combiners used to
//! measure post-processing SINR.
//!
//! All signals here are per antenna. A data window holds `W = T + n_taps − 1`
//! samples, so the linear convolution of a spread symbol with the channel fits
//! exactly and circular processing over `W` bins is exact.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::modem::{square_law_detect, SymbolAlphabet, TxSymbol};
use crate::spreading::BlockObservation;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft(buf: &mut [Complex64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(buf));
}

fn ifft(buf: &mut [Complex64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()).process(buf));
    let scale = 1.0 / buf.len() as f64;
    for z in buf {
        *z *= scale;
    }
}

fn spectrum(x: &[Complex64], len: usize) -> Vec<Complex64> {
    let mut buf = vec![ZERO; len];
    buf[..x.len()].copy_from_slice(x);
    fft(&mut buf);
    buf
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Linear convolution of `h` and `x`, truncated or zero-padded to `len`.
pub fn convolve(h: &[Complex64], x: &[Complex64], len: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; len];
    for (k, hk) in h.iter().enumerate() {
        for (i, xi) in x.iter().enumerate() {
            if let Some(o) = out.get_mut(i + k) {
                *o += hk * xi;
            }
        }
    }
    out
}

/// Orthogonal pilot sequences for devices sharing a block.
///
/// Orthogonality is required for every relative delay up to the channel
/// length, since the gateway separates the taps of every sharer: for pilots
/// `i, j` and delays `k, k' < n_taps` the circular correlation must vanish
/// unless `(i, k) = (j, k')`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotSet {
    sequences: Vec<Vec<Complex64>>,
    n_taps: usize,
}

impl PilotSet {
    pub fn new(sequences: Vec<Vec<Complex64>>, n_taps: usize) -> Result<Self> {
        let len = sequences.first().map_or(0, Vec::len);
        if sequences.is_empty() || n_taps == 0 || len < n_taps {
            return Err(Error::Config(format!(
                "pilots must be non-empty and at least n_taps = {n_taps} long"
            )));
        }
        if sequences.iter().any(|s| s.len() != len) {
            return Err(Error::Config("pilot sequences differ in length".into()));
        }
        let set = PilotSet { sequences, n_taps };
        let tol = 1e-9 * len as f64;
        for (i, a) in set.sequences.iter().enumerate() {
            let ea = norm_sqr(a);
            for (j, b) in set.sequences.iter().enumerate().skip(i) {
                for k in 0..n_taps {
                    for k2 in 0..n_taps {
                        if i == j && k2 <= k {
                            continue;
                        }
                        let c: Complex64 = (0..len)
                            .map(|t| a[(t + len - k) % len] * b[(t + len - k2) % len].conj())
                            .sum();
                        if c.norm() > tol * (1.0 + ea) {
                            return Err(Error::Config(format!(
                                "pilots {i} and {j} are not orthogonal at delays {k}, {k2}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(set)
    }

    /// `count` cyclic shifts of one Zadoff-Chu sequence of length `len`,
    /// spaced `n_taps` apart.
    pub fn zadoff_chu(count: usize, n_taps: usize, len: usize) -> Result<Self> {
        if count * n_taps > len {
            return Err(Error::Config(format!(
                "{count} pilots for {n_taps}-tap channels need at least {} symbols (got {len})",
                count * n_taps
            )));
        }
        let n = len as f64;
        let base: Vec<Complex64> = (0..len)
            .map(|i| {
                let i = i as f64;
                let phase = if len.is_multiple_of(2) { PI * i * i / n } else { PI * i * (i + 1.0) / n };
                Complex64::cis(-phase)
            })
            .collect();
        let sequences = (0..count)
            .map(|m| (0..len).map(|t| base[(t + len - m * n_taps) % len]).collect())
            .collect();
        Self::new(sequences, n_taps)
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn pilot_len(&self) -> usize {
        self.sequences[0].len()
    }

    pub fn n_taps(&self) -> usize {
        self.n_taps
    }

    pub fn sequence(&self, i: usize) -> &[Complex64] {
        &self.sequences[i]
    }

    pub fn energy(&self, i: usize) -> f64 {
        norm_sqr(&self.sequences[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Ls,
    Mmse,
    /// The true channel, for isolating estimation loss.
    Perfect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    /// `taps[n]`: estimated taps on antenna `n`.
    pub taps: Vec<Vec<Complex64>>,
    pub estimator: Estimator,
    pub pilot_len: usize,
}

impl ChannelEstimate {
    pub fn perfect(taps: Vec<Vec<Complex64>>) -> Self {
        ChannelEstimate {
            taps,
            estimator: Estimator::Perfect,
            pilot_len: 0,
        }
    }

    pub fn antennas(&self) -> usize {
        self.taps.len()
    }
}

/// Estimates the taps of pilot `which` on every antenna.
///
/// `pilot_obs[n]` is the received pilot (cyclic prefix removed) on antenna
/// `n`. LS correlates with each delayed copy of the pilot and divides by its
/// energy. MMSE shrinks each LS tap by `v_k / (v_k + σ²/E_p)`, where
/// `prior[k]` is the tap's prior variance `v_k`.
pub fn estimate_csi(
    pilot_obs: &[Vec<Complex64>],
    pilots: &PilotSet,
    which: usize,
    estimator: Estimator,
    noise_power: f64,
    prior: &[f64],
) -> Result<ChannelEstimate> {
    if which >= pilots.len() {
        return Err(Error::Contract(format!("pilot {which} not in a set of {}", pilots.len())));
    }
    let len = pilots.pilot_len();
    if pilot_obs.iter().any(|y| y.len() != len) {
        return Err(Error::Contract(format!("pilot observations must have {len} samples")));
    }
    let n_taps = pilots.n_taps();
    if estimator == Estimator::Mmse && prior.len() != n_taps {
        return Err(Error::Contract(format!("MMSE needs a prior for each of {n_taps} taps")));
    }
    if estimator == Estimator::Perfect {
        return Err(Error::Contract("perfect CSI is not estimated from pilots".into()));
    }
    let p = pilots.sequence(which);
    let ep = pilots.energy(which);
    let taps = pilot_obs
        .iter()
        .map(|y| {
            (0..n_taps)
                .map(|k| {
                    let ls: Complex64 = (0..len).map(|t| y[t] * p[(t + len - k) % len].conj()).sum::<Complex64>() / ep;
                    match estimator {
                        Estimator::Mmse => {
                            let v = prior[k];
                            let noise = noise_power / ep;
                            if v + noise > 0.0 { ls * (v / (v + noise)) } else { ZERO }
                        }
                        _ => ls,
                    }
                })
                .collect()
        })
        .collect();
    Ok(ChannelEstimate {
        taps,
        estimator,
        pilot_len: len,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equalized {
    /// Each antenna deconvolved on its own.
    pub per_antenna: Vec<Vec<Complex64>>,
    /// All antennas jointly inverted: `Σ Ĝ_n*·Y_n / max(Σ |Ĝ_n|², ε)` per bin.
    pub combined: Vec<Complex64>,
    /// Some bin fell below the regularization floor.
    pub flagged: bool,
}

/// Spectral power below `ZF_FLOOR` times the mean is treated as a null and
/// clamped to that level before inversion; bins above it invert exactly.
const ZF_FLOOR: f64 = 1e-8;

/// Regularized frequency-domain inversion of the estimated channel over the
/// window. `window[n]` is the received data window on antenna `n`.
pub fn zf_equalize(window: &[Vec<Complex64>], est: &ChannelEstimate) -> Result<Equalized> {
    equalize(window, est, None)
}

/// Like [`zf_equalize`] with the combined inversion regularized by
/// `noise_power` (linear MMSE for unit-energy chips).
pub fn mmse_equalize(window: &[Vec<Complex64>], est: &ChannelEstimate, noise_power: f64) -> Result<Equalized> {
    equalize(window, est, Some(noise_power))
}

fn equalize(window: &[Vec<Complex64>], est: &ChannelEstimate, reg: Option<f64>) -> Result<Equalized> {
    if window.len() != est.antennas() || window.is_empty() {
        return Err(Error::Contract(format!(
            "{} antenna windows but an estimate for {} antennas",
            window.len(),
            est.antennas()
        )));
    }
    let w = window[0].len();
    if window.iter().any(|y| y.len() != w) || est.taps.iter().any(|h| h.len() > w) {
        return Err(Error::Contract("antenna windows differ in length or are shorter than the channel".into()));
    }
    let mut flagged = false;
    let mut num = vec![ZERO; w];
    let mut den = vec![0.0; w];
    let mut per_antenna = Vec::with_capacity(window.len());
    for (y, h) in window.iter().zip(&est.taps) {
        let g = spectrum(h, w);
        let mut yf = spectrum(y, w);
        let mean = g.iter().map(|z| z.norm_sqr()).sum::<f64>() / w as f64;
        let eps = ZF_FLOOR * mean;
        for f in 0..w {
            let p = g[f].norm_sqr();
            if p <= eps {
                flagged = true;
            }
            num[f] += g[f].conj() * yf[f];
            den[f] += p;
            yf[f] = if p.max(eps) > 0.0 { yf[f] * g[f].conj() / p.max(eps) } else { ZERO };
        }
        ifft(&mut yf);
        per_antenna.push(yf);
    }
    let mean = den.iter().sum::<f64>() / w as f64;
    let floor = ZF_FLOOR * mean;
    let mut combined: Vec<Complex64> = num
        .iter()
        .zip(&den)
        .map(|(n, &d)| {
            let d = match reg {
                Some(noise) => d + noise,
                None => d.max(floor),
            };
            if d > 0.0 { n / d } else { ZERO }
        })
        .collect();
    ifft(&mut combined);
    Ok(Equalized {
        per_antenna,
        combined,
        flagged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    /// Exhaustive joint search over (vector, symbol).
    Ml,
    Zf,
    Mmse,
    /// Matched filter (RAKE) combining.
    Mf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub vector_index: usize,
    pub label: usize,
    pub symbol: TxSymbol,
    pub bits: Vec<u8>,
    pub cost: f64,
}

/// Precomputed correlations for the ML metric.
struct Templates {
    /// `corr[q][tone] = Σ_n <ĝ_n ⊛ v_q, y_{n,tone}>`
    corr: Vec<Vec<Complex64>>,
    /// `energy[q] = Σ_n ‖ĝ_n ⊛ v_q‖²`
    energy: Vec<f64>,
    base: f64,
}

fn templates(obs: &BlockObservation, est: &ChannelEstimate, codebook: &Codebook) -> Result<Templates> {
    if obs.antennas() != est.antennas() {
        return Err(Error::Contract("observation and estimate disagree on antenna count".into()));
    }
    let tones = obs.data.first().map_or(0, Vec::len);
    let w = obs.data.first().and_then(|d| d.first()).map_or(0, Vec::len);
    let mut corr = vec![vec![ZERO; tones]; codebook.q()];
    let mut energy = vec![0.0; codebook.q()];
    for (q, v) in codebook.vectors().iter().enumerate() {
        for (n, h) in est.taps.iter().enumerate() {
            let c = convolve(h, v, w);
            energy[q] += norm_sqr(&c);
            for t in 0..tones {
                corr[q][t] += inner(&c, &obs.data[n][t]);
            }
        }
    }
    let base = obs.data.iter().flatten().map(|y| norm_sqr(y)).sum();
    Ok(Templates { corr, energy, base })
}

impl Templates {
    fn cost(&self, q: usize, s: TxSymbol) -> f64 {
        let c = self.corr[q].get(s.tone).copied().unwrap_or(ZERO);
        self.base - 2.0 * (s.point.conj() * c).re + s.point.norm_sqr() * self.energy[q]
    }
}

/// `Σ_n Σ_tones ‖y − template‖²` for one hypothesis, where the template is
/// `point·(ĝ_n ⊛ v_q)` on the hypothesis' tone and zero on the others.
pub fn hypothesis_cost(
    obs: &BlockObservation,
    est: &ChannelEstimate,
    codebook: &Codebook,
    q: usize,
    symbol: TxSymbol,
) -> Result<f64> {
    Ok(templates(obs, est, codebook)?.cost(q, symbol))
}

fn decision(alphabet: &SymbolAlphabet, q: usize, label: usize, cost: f64) -> Decision {
    Decision {
        vector_index: q,
        label,
        symbol: alphabet.tx_symbol(label),
        bits: alphabet.label_bits(label),
        cost,
    }
}

/// Exhaustive ML search; ties go to the lowest vector index, then the lowest label.
pub fn ml_decode(
    obs: &BlockObservation,
    est: &ChannelEstimate,
    codebook: &Codebook,
    alphabet: &SymbolAlphabet,
) -> Result<Decision> {
    let tpl = templates(obs, est, codebook)?;
    let mut best = (0, 0, f64::INFINITY);
    for q in 0..codebook.q() {
        for label in 0..alphabet.size() {
            let c = tpl.cost(q, alphabet.tx_symbol(label));
            if c < best.2 {
                best = (q, label, c);
            }
        }
    }
    Ok(decision(alphabet, best.0, best.1, best.2))
}

fn detect_tone(obs: &BlockObservation, alphabet: &SymbolAlphabet) -> usize {
    if alphabet.tone_constellation().is_some() {
        square_law_detect(&obs.tone_energies())
    } else {
        0
    }
}

/// Slices an equalized window: the vector with the strongest matched
/// correlation, then the nearest point.
fn slice(
    z: &[Complex64],
    tone: usize,
    codebook: &Codebook,
    alphabet: &SymbolAlphabet,
) -> Decision {
    let t = codebook.t();
    let mut best = (0, f64::NEG_INFINITY, ZERO);
    for (q, v) in codebook.vectors().iter().enumerate() {
        let c = inner(v, &z[..t]);
        if c.norm_sqr() > best.1 {
            best = (q, c.norm_sqr(), c);
        }
    }
    let (q, _, c) = best;
    let s = c / t as f64;
    let point_label = alphabet.point_constellation().map_or(0, |pc| pc.nearest(s));
    let label = alphabet.label(point_label, alphabet.tone_label(tone));
    let sym = alphabet.tx_symbol(label);
    let cost: f64 = z
        .iter()
        .enumerate()
        .map(|(i, zi)| {
            let x = codebook.vector(q).get(i).map_or(ZERO, |v| sym.point * v);
            (zi - x).norm_sqr()
        })
        .sum();
    decision(alphabet, q, label, cost)
}

/// ZF equalization of the detected tone, then slicing. FSK tones are
/// detected by square-law energy on the raw window.
pub fn zf_decode(
    obs: &BlockObservation,
    est: &ChannelEstimate,
    codebook: &Codebook,
    alphabet: &SymbolAlphabet,
) -> Result<Decision> {
    let tone = detect_tone(obs, alphabet);
    let eq = zf_equalize(&obs.tone(tone), est)?;
    Ok(slice(&eq.combined, tone, codebook, alphabet))
}

pub fn mmse_decode(
    obs: &BlockObservation,
    est: &ChannelEstimate,
    codebook: &Codebook,
    alphabet: &SymbolAlphabet,
    noise_power: f64,
) -> Result<Decision> {
    let tone = detect_tone(obs, alphabet);
    let eq = mmse_equalize(&obs.tone(tone), est, noise_power)?;
    Ok(slice(&eq.combined, tone, codebook, alphabet))
}

/// Matched-filter decoding: each vector's RAKE statistic, normalized by the
/// template energy, picks the vector and then the point.
pub fn mf_decode(
    obs: &BlockObservation,
    est: &ChannelEstimate,
    codebook: &Codebook,
    alphabet: &SymbolAlphabet,
) -> Result<Decision> {
    let tone = detect_tone(obs, alphabet);
    let tpl = templates(obs, est, codebook)?;
    let mut best = (0, f64::NEG_INFINITY);
    for q in 0..codebook.q() {
        let c = tpl.corr[q][tone];
        let score = if tpl.energy[q] > 0.0 { c.norm_sqr() / tpl.energy[q] } else { 0.0 };
        if score > best.1 {
            best = (q, score);
        }
    }
    let q = best.0;
    let s = if tpl.energy[q] > 0.0 { tpl.corr[q][tone] / tpl.energy[q] } else { ZERO };
    let point_label = alphabet.point_constellation().map_or(0, |pc| pc.nearest(s));
    let label = alphabet.label(point_label, alphabet.tone_label(tone));
    Ok(decision(alphabet, q, label, tpl.cost(q, alphabet.tx_symbol(label))))
}

pub fn decode(
    kind: DecoderKind,
    obs: &BlockObservation,
    est: &ChannelEstimate,
    codebook: &Codebook,
    alphabet: &SymbolAlphabet,
    noise_power: f64,
) -> Result<Decision> {
    match kind {
        DecoderKind::Ml => ml_decode(obs, est, codebook, alphabet),
        DecoderKind::Zf => zf_decode(obs, est, codebook, alphabet),
        DecoderKind::Mmse => mmse_decode(obs, est, codebook, alphabet, noise_power),
        DecoderKind::Mf => mf_decode(obs, est, codebook, alphabet),
    }
}

/// RAKE combiner for vector `v`: `a_n = ĝ_n ⊛ v` over a window of `w`.
pub fn rake_weights(est: &ChannelEstimate, v: &[Complex64], w: usize) -> Vec<Vec<Complex64>> {
    est.taps.iter().map(|h| convolve(h, v, w)).collect()
}

/// `R[δ] = Σ_n Σ_k conj(a_{n,k})·b_{n,k+δ}` for `δ = −(K−1) … K−1`, stored at
/// index `δ + K − 1`.
fn tap_correlation(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> Vec<Complex64> {
    let k = a.iter().chain(b).map(Vec::len).max().unwrap_or(0);
    let mut r = vec![ZERO; (2 * k).saturating_sub(1)];
    for (ha, hb) in a.iter().zip(b) {
        for (i, x) in ha.iter().enumerate() {
            let xc = x.conj();
            for (j, y) in hb.iter().enumerate() {
                r[j + k - 1 - i] += xc * y;
            }
        }
    }
    r
}

/// Spectrum over `w` bins of a correlation from [`tap_correlation`].
fn correlation_spectrum(r: &[Complex64], w: usize) -> Vec<Complex64> {
    let k = r.len().div_ceil(2);
    (0..w)
        .map(|f| {
            r.iter()
                .enumerate()
                .map(|(i, c)| {
                    let delta = i as f64 - (k as f64 - 1.0);
                    c * Complex64::cis(-2.0 * PI * f as f64 * delta / w as f64)
                })
                .sum()
        })
        .collect()
}

/// `D[f] = Σ_n |Ĝ_n[f]|²` and its regularization floor.
fn joint_power(taps: &[Vec<Complex64>], w: usize) -> (Vec<f64>, f64) {
    let d: Vec<f64> = correlation_spectrum(&tap_correlation(taps, taps), w)
        .iter()
        .map(|z| z.re.max(0.0))
        .collect();
    let eps = ZF_FLOOR * d.iter().sum::<f64>() / w as f64;
    (d, eps)
}

/// Linear weights whose output `Σ_n <a_n, y_n>` equals the ZF-combined
/// window correlated with `v / T`.
///
/// With `b = ifft(V / D) / T`, each antenna's weights are the estimated
/// channel convolved circularly with `b`, so only one transform is needed.
pub fn zf_weights(est: &ChannelEstimate, v: &[Complex64], w: usize) -> Vec<Vec<Complex64>> {
    let (d, eps) = joint_power(&est.taps, w);
    let t = v.len() as f64;
    let mut b = spectrum(v, w);
    for (z, df) in b.iter_mut().zip(&d) {
        *z = if df.max(eps) > 0.0 { *z / df.max(eps) / t } else { ZERO };
    }
    ifft(&mut b);
    est.taps
        .iter()
        .map(|h| {
            (0..w)
                .map(|i| h.iter().enumerate().map(|(k, hk)| hk * b[(i + w - k) % w]).sum())
                .collect()
        })
        .collect()
}

/// Powers at the output of a linear combiner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrParts {
    pub signal: f64,
    pub interference: f64,
    pub noise: f64,
}

impl SinrParts {
    pub fn linear(&self) -> f64 {
        self.signal / (self.interference + self.noise)
    }

    pub fn db(&self) -> f64 {
        10.0 * self.linear().log10()
    }
}

fn combine(weights: &[Vec<Complex64>], x: &[Vec<Complex64>]) -> Complex64 {
    weights.iter().zip(x).map(|(a, y)| inner(a, y)).sum()
}

/// Output powers of combiner `weights` applied to the noiseless serving
/// signal, each interferer's noiseless signal and white noise of
/// `noise_power` per sample. Signals are `N × W` windows paired with an
/// amplitude that scales them.
pub fn post_sinr(
    weights: &[Vec<Complex64>],
    serving: (&[Vec<Complex64>], f64),
    interferers: &[(&[Vec<Complex64>], f64)],
    noise_power: f64,
) -> SinrParts {
    let power = |(x, a): (&[Vec<Complex64>], f64)| (combine(weights, x) * a).norm_sqr();
    SinrParts {
        signal: power(serving),
        interference: interferers.iter().map(|&i| power(i)).sum(),
        noise: noise_power * weights.iter().map(|a| norm_sqr(a)).sum::<f64>(),
    }
}

/// Residual impulse response left after joint ZF inversion of the true
/// channel `taps` with the estimate: `ifft(Σ Ĝ_n*·G_n / D − 1)` over `w` bins.
pub fn zf_residual(est: &ChannelEstimate, taps: &[Vec<Complex64>], w: usize) -> Vec<Complex64> {
    let (d, eps) = joint_power(&est.taps, w);
    let cross = correlation_spectrum(&tap_correlation(&est.taps, taps), w);
    let mut r: Vec<Complex64> = cross
        .iter()
        .zip(&d)
        .map(|(c, df)| if df.max(eps) > 0.0 { c / df.max(eps) - 1.0 } else { Complex64::new(-1.0, 0.0) })
        .collect();
    ifft(&mut r);
    r
}
