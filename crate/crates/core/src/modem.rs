//! Gray-mapped PSK/QAM/FSK modulation, the two-way stream split used when
//! spreading over time and frequency together, and square-law FSK detection.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulationKind {
    Psk,
    Qam,
    Fsk,
}

/// A modulated symbol: a complex point for PSK/QAM, a tone index for FSK.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Symbol {
    Point(Complex64),
    Tone(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    kind: ModulationKind,
    order: usize,
    /// Indexed by the integer value of the bit label.
    points: Vec<Complex64>,
    /// Tone index of each bit label (FSK only).
    tones: Vec<usize>,
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

fn inverse_gray(mut g: usize) -> usize {
    let mut i = 0;
    while g != 0 {
        i ^= g;
        g >>= 1;
    }
    i
}

impl Constellation {
    pub fn new(kind: ModulationKind, order: usize) -> Result<Self> {
        if order < 2 || !order.is_power_of_two() {
            return Err(Error::Config(format!(
                "modulation order must be a power of two >= 2 (got {order})"
            )));
        }
        let (points, tones) = match kind {
            ModulationKind::Psk => {
                let offset = if order == 4 { PI / 4.0 } else { 0.0 };
                let pts = (0..order)
                    .map(|b| {
                        let pos = inverse_gray(b) as f64;
                        Complex64::cis(2.0 * PI * pos / order as f64 + offset)
                    })
                    .collect();
                (pts, vec![0; order])
            }
            ModulationKind::Qam => {
                let bits = order.trailing_zeros();
                if !bits.is_multiple_of(2) {
                    return Err(Error::Config(format!(
                        "QAM order must be a square power of two (got {order})"
                    )));
                }
                let side = 1usize << (bits / 2);
                let norm = (2.0 * (order as f64 - 1.0) / 3.0).sqrt();
                let level = |g: usize| (2.0 * inverse_gray(g) as f64 - (side as f64 - 1.0)) / norm;
                let pts = (0..order)
                    .map(|b| Complex64::new(level(b >> (bits / 2)), level(b & (side - 1))))
                    .collect();
                (pts, vec![0; order])
            }
            ModulationKind::Fsk => (
                vec![Complex64::new(1.0, 0.0); order],
                (0..order).map(inverse_gray).collect(),
            ),
        };
        Ok(Constellation {
            kind,
            order,
            points,
            tones,
        })
    }

    pub fn psk(order: usize) -> Result<Self> {
        Self::new(ModulationKind::Psk, order)
    }

    pub fn qam(order: usize) -> Result<Self> {
        Self::new(ModulationKind::Qam, order)
    }

    pub fn fsk(order: usize) -> Result<Self> {
        Self::new(ModulationKind::Fsk, order)
    }

    pub fn kind(&self) -> ModulationKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.order.trailing_zeros() as usize
    }

    /// Complex points indexed by bit label (all ones for FSK).
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    pub fn tone(&self, label: usize) -> usize {
        self.tones[label]
    }

    /// Bit label carried by FSK tone `tone`.
    pub fn label_of_tone(&self, tone: usize) -> usize {
        gray(tone)
    }

    pub fn symbol(&self, label: usize) -> Symbol {
        match self.kind {
            ModulationKind::Fsk => Symbol::Tone(self.tones[label]),
            _ => Symbol::Point(self.points[label]),
        }
    }

    /// Label of the point closest to `z`; ties go to the lowest label.
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Samples of FSK tone `k` over one symbol of `samples` samples with the
    /// minimum orthogonal spacing of one cycle per symbol.
    pub fn tone_waveform(&self, k: usize, samples: usize) -> Vec<Complex64> {
        (0..samples)
            .map(|n| Complex64::cis(2.0 * PI * (k * n) as f64 / samples as f64))
            .collect()
    }
}

/// Integer value of an MSB-first bit slice.
pub fn bits_to_label(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)
}

/// `width` MSB-first bits of `label`.
pub fn label_to_bits(label: usize, width: usize) -> Vec<u8> {
    (0..width).rev().map(|i| ((label >> i) & 1) as u8).collect()
}

/// Maps bits onto symbols, `log2(order)` bits per symbol, MSB first.
pub fn modulate(bits: &[u8], c: &Constellation) -> Result<Vec<Symbol>> {
    let k = c.bits_per_symbol();
    if !bits.len().is_multiple_of(k) {
        return Err(Error::Contract(format!(
            "{} bits cannot be split into {k}-bit symbols",
            bits.len()
        )));
    }
    Ok(bits.chunks(k).map(|ch| c.symbol(bits_to_label(ch))).collect())
}

/// Splits a stream into two by taking `k1` bits for the first stream and
/// then `k2` bits for the second, repeatedly.
pub fn split_stream(bits: &[u8], k1: usize, k2: usize) -> Result<(Vec<u8>, Vec<u8>)> {
    let chunk = k1 + k2;
    if chunk == 0 || !bits.len().is_multiple_of(chunk) {
        return Err(Error::Contract(format!(
            "{} bits are not a multiple of {k1}+{k2}",
            bits.len()
        )));
    }
    let mut a = Vec::with_capacity(bits.len() / chunk * k1);
    let mut b = Vec::with_capacity(bits.len() / chunk * k2);
    for ch in bits.chunks(chunk) {
        a.extend_from_slice(&ch[..k1]);
        b.extend_from_slice(&ch[k1..]);
    }
    Ok((a, b))
}

/// Inverse of [`split_stream`].
pub fn merge_streams(a: &[u8], b: &[u8], k1: usize, k2: usize) -> Result<Vec<u8>> {
    let groups = if k1 > 0 { a.len() / k1 } else { b.len() / k2.max(1) };
    if (k1 > 0 && !a.len().is_multiple_of(k1))
        || (k2 > 0 && !b.len().is_multiple_of(k2))
        || (k2 > 0 && b.len() / k2 != groups)
        || (k1 == 0 && !a.is_empty())
        || (k2 == 0 && !b.is_empty())
    {
        return Err(Error::Contract("stream lengths do not match the split ratio".into()));
    }
    let mut out = Vec::with_capacity(a.len() + b.len());
    for g in 0..groups {
        out.extend_from_slice(&a[g * k1..(g + 1) * k1]);
        out.extend_from_slice(&b[g * k2..(g + 1) * k2]);
    }
    Ok(out)
}

/// Noncoherent FSK decision: the tone with the largest energy summed over
/// antennas. `energies[n][k]` is the matched-filter energy of tone `k` on
/// antenna `n`. Ties go to the lowest tone.
pub fn square_law_detect(energies: &[Vec<f64>]) -> usize {
    let order = energies.first().map_or(0, Vec::len);
    let mut best = 0;
    let mut best_e = f64::NEG_INFINITY;
    for k in 0..order {
        let e: f64 = energies.iter().map(|row| row[k]).sum();
        if e > best_e {
            best_e = e;
            best = k;
        }
    }
    best
}

/// One transmitted symbol: a complex point riding on an FSK tone. Modes
/// without tones always use tone 0; modes without points use the point 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxSymbol {
    pub point: Complex64,
    pub tone: usize,
}

impl TxSymbol {
    pub fn point(point: Complex64) -> Self {
        TxSymbol { point, tone: 0 }
    }
}

/// The per-block symbol set of a spreading mode: PSK/QAM points, FSK tones,
/// or both. A combined label carries the point bits first, then the tone
/// bits, matching [`split_stream`] with `k1` point bits and `k2` tone bits.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolAlphabet {
    points: Option<Constellation>,
    tones: Option<Constellation>,
}

impl SymbolAlphabet {
    pub fn new(points: Option<Constellation>, tones: Option<Constellation>) -> Result<Self> {
        if points.is_none() && tones.is_none() {
            return Err(Error::Config("symbol alphabet needs points, tones or both".into()));
        }
        if points.as_ref().is_some_and(|c| c.kind() == ModulationKind::Fsk) {
            return Err(Error::Config("point stream must be PSK or QAM".into()));
        }
        if tones.as_ref().is_some_and(|c| c.kind() != ModulationKind::Fsk) {
            return Err(Error::Config("tone stream must be FSK".into()));
        }
        Ok(SymbolAlphabet { points, tones })
    }

    pub fn points_only(c: Constellation) -> Result<Self> {
        Self::new(Some(c), None)
    }

    pub fn tones_only(c: Constellation) -> Result<Self> {
        Self::new(None, Some(c))
    }

    pub fn split(points: Constellation, tones: Constellation) -> Result<Self> {
        Self::new(Some(points), Some(tones))
    }

    pub fn point_constellation(&self) -> Option<&Constellation> {
        self.points.as_ref()
    }

    pub fn tone_constellation(&self) -> Option<&Constellation> {
        self.tones.as_ref()
    }

    /// Bits per symbol on the point and tone streams.
    pub fn split_bits(&self) -> (usize, usize) {
        (
            self.points.as_ref().map_or(0, Constellation::bits_per_symbol),
            self.tones.as_ref().map_or(0, Constellation::bits_per_symbol),
        )
    }

    pub fn bits_per_symbol(&self) -> usize {
        let (a, b) = self.split_bits();
        a + b
    }

    /// Number of distinct labels.
    pub fn size(&self) -> usize {
        1 << self.bits_per_symbol()
    }

    /// Number of FSK tones (1 without a tone stream).
    pub fn n_tones(&self) -> usize {
        self.tones.as_ref().map_or(1, Constellation::order)
    }

    pub fn point_order(&self) -> usize {
        self.points.as_ref().map_or(1, Constellation::order)
    }

    /// Combined label from its point and tone labels.
    pub fn label(&self, point_label: usize, tone_label: usize) -> usize {
        (point_label << self.split_bits().1) | tone_label
    }

    /// (point label, tone label) of a combined label.
    pub fn parts(&self, label: usize) -> (usize, usize) {
        let k2 = self.split_bits().1;
        (label >> k2, label & ((1 << k2) - 1))
    }

    pub fn tx_symbol(&self, label: usize) -> TxSymbol {
        let (p, t) = self.parts(label);
        TxSymbol {
            point: self.points.as_ref().map_or(Complex64::new(1.0, 0.0), |c| c.point(p)),
            tone: self.tones.as_ref().map_or(0, |c| c.tone(t)),
        }
    }

    /// Label of the tone stream carried on FSK tone `tone`.
    pub fn tone_label(&self, tone: usize) -> usize {
        self.tones.as_ref().map_or(0, |c| c.label_of_tone(tone))
    }

    pub fn label_bits(&self, label: usize) -> Vec<u8> {
        label_to_bits(label, self.bits_per_symbol())
    }

    /// Maps one symbol's worth of bits to its label.
    pub fn label_of_bits(&self, bits: &[u8]) -> Result<usize> {
        if bits.len() != self.bits_per_symbol() {
            return Err(Error::Contract(format!(
                "{} bits given for a {}-bit symbol",
                bits.len(),
                self.bits_per_symbol()
            )));
        }
        Ok(bits_to_label(bits))
    }
}
