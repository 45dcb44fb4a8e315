//! Outage probability, the delay-moment interference metric, output SINR and
//! error rates, with Wilson confidence intervals and mergeable accumulators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::receiver::SinrParts;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Outcome of one device's link in one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRecord {
    pub sinr: SinrParts,
    pub true_bits: Vec<u8>,
    pub decoded_bits: Vec<u8>,
    pub true_label: usize,
    pub decoded_label: usize,
    pub true_vector: usize,
    pub decoded_vector: usize,
}

impl LinkRecord {
    pub fn sinr_db(&self) -> f64 {
        self.sinr.db()
    }
}

/// Everything measured in one trial (one frame).
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub links: Vec<LinkRecord>,
    /// Interference metric of every link, linear.
    pub interference: Vec<f64>,
    pub noise_power: f64,
}

/// A binomial proportion with its 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: u64,
}

impl Proportion {
    pub fn new(hits: u64, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Contract("proportion of an empty sample".into()));
        }
        let (ci_lo, ci_hi) = wilson(hits, n, Z95);
        Ok(Proportion {
            estimate: hits as f64 / n as f64,
            ci_lo,
            ci_hi,
            n,
        })
    }

    /// Normal-approximation standard error of the estimate.
    pub fn std_err(&self) -> f64 {
        (self.estimate * (1.0 - self.estimate) / self.n as f64).sqrt()
    }
}

/// Wilson score interval for `hits` out of `n` at normal quantile `z`.
pub fn wilson(hits: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if hits == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if hits as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Fraction of (trial, link) pairs whose post-processing SINR is below `threshold_db`.
pub fn link_outage_probability(records: &[TrialRecord], threshold_db: f64) -> Result<Proportion> {
    let mut t = Tally::default();
    for l in records.iter().flat_map(|r| &r.links) {
        t.push(l.sinr_db() < threshold_db);
    }
    t.proportion()
}

/// Received power-delay profile of one contributor: tap powers (linear,
/// large-scale gain applied) and delays in symbol periods.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayProfile {
    pub powers: Vec<f64>,
    pub delays: Vec<f64>,
}

impl DelayProfile {
    /// Taps at delays 0, 1, 2, …
    pub fn from_powers(powers: Vec<f64>) -> Self {
        let delays = (0..powers.len()).map(|k| k as f64).collect();
        DelayProfile { powers, delays }
    }

    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }

    /// `(τ̄, τ²)`: power-weighted mean delay and mean-squared delay.
    pub fn moments(&self) -> (f64, f64) {
        let p = self.total_power();
        if p <= 0.0 {
            return (0.0, 0.0);
        }
        let m1 = self.powers.iter().zip(&self.delays).map(|(p, d)| p * d).sum::<f64>() / p;
        let m2 = self.powers.iter().zip(&self.delays).map(|(p, d)| p * d * d).sum::<f64>() / p;
        (m1, m2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContributorMoments {
    pub power: f64,
    pub mean_delay: f64,
    pub second_moment: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceReport {
    pub contributors: Vec<ContributorMoments>,
    /// `Σ power·(τ̄ + τ²)` with delays in symbol periods.
    pub linear: f64,
    /// `10·log10(linear)`; −∞ when nothing contributes.
    pub db: f64,
}

/// The delay-spread interference metric: each contributor adds its received
/// power times the sum of its mean delay and mean-squared delay.
pub fn interference_power(profiles: &[DelayProfile]) -> InterferenceReport {
    let contributors: Vec<ContributorMoments> = profiles
        .iter()
        .map(|p| {
            let (m1, m2) = p.moments();
            ContributorMoments {
                power: p.total_power(),
                mean_delay: m1,
                second_moment: m2,
            }
        })
        .collect();
    let linear = contributors
        .iter()
        .map(|c| c.power * (c.mean_delay + c.second_moment))
        .sum::<f64>();
    InterferenceReport {
        contributors,
        linear,
        db: to_db(linear),
    }
}

/// `10·log10(x)`, with −∞ for zero.
pub fn to_db(x: f64) -> f64 {
    if x > 0.0 { 10.0 * x.log10() } else { f64::NEG_INFINITY }
}

/// Serving energy over interference plus noise, in dB.
pub fn output_sinr(parts: &SinrParts) -> Result<f64> {
    if !(parts.noise > 0.0) {
        return Err(Error::Config(format!("noise power must be positive (got {})", parts.noise)));
    }
    Ok(parts.db())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub bit: Proportion,
    pub symbol: Proportion,
    pub vector: Proportion,
}

/// Bit, symbol and dispersion-vector error rates over every link.
pub fn error_rates(records: &[TrialRecord]) -> Result<ErrorRates> {
    let mut acc = ErrorTally::default();
    for l in records.iter().flat_map(|r| &r.links) {
        acc.push(l)?;
    }
    acc.rates()
}

/// Success counter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub hits: u64,
    pub n: u64,
}

impl Tally {
    pub fn push(&mut self, hit: bool) {
        self.hits += hit as u64;
        self.n += 1;
    }

    pub fn merge(&mut self, other: &Tally) {
        self.hits += other.hits;
        self.n += other.n;
    }

    pub fn proportion(&self) -> Result<Proportion> {
        Proportion::new(self.hits, self.n)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ErrorTally {
    pub bits: Tally,
    pub symbols: Tally,
    pub vectors: Tally,
}

impl ErrorTally {
    pub fn push(&mut self, l: &LinkRecord) -> Result<()> {
        if l.true_bits.len() != l.decoded_bits.len() {
            return Err(Error::Contract("decoded and true bit counts differ".into()));
        }
        for (a, b) in l.true_bits.iter().zip(&l.decoded_bits) {
            self.bits.push(a != b);
        }
        self.symbols.push(l.true_label != l.decoded_label);
        self.vectors.push(l.true_vector != l.decoded_vector);
        Ok(())
    }

    pub fn merge(&mut self, other: &ErrorTally) {
        self.bits.merge(&other.bits);
        self.symbols.merge(&other.symbols);
        self.vectors.merge(&other.vectors);
    }

    pub fn rates(&self) -> Result<ErrorRates> {
        Ok(ErrorRates {
            bit: self.bits.proportion()?,
            symbol: self.symbols.proportion()?,
            vector: self.vectors.proportion()?,
        })
    }
}

/// Sample mean and variance accumulator. Merging is exact, so folding in a
/// fixed order gives bit-identical results.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 { f64::NAN } else { self.sum / self.n as f64 }
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    pub fn std_err(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }

    /// 95% normal interval of the mean.
    pub fn ci(&self) -> (f64, f64) {
        let h = Z95 * self.std_err();
        (self.mean() - h, self.mean() + h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(sinr_db: f64) -> LinkRecord {
        LinkRecord {
            sinr: SinrParts {
                signal: 10f64.powf(sinr_db / 10.0),
                interference: 0.0,
                noise: 1.0,
            },
            true_bits: vec![0, 1],
            decoded_bits: vec![0, 1],
            true_label: 1,
            decoded_label: 1,
            true_vector: 0,
            decoded_vector: 0,
        }
    }

    fn trial(links: Vec<LinkRecord>) -> TrialRecord {
        TrialRecord {
            interference: vec![0.0; links.len()],
            links,
            noise_power: 1.0,
        }
    }

    #[test]
    fn outage_extremes_and_counting() {
        assert_eq!(link_outage_probability(&[trial(vec![link(10.0); 5])], 0.0).unwrap().estimate, 0.0);
        assert_eq!(link_outage_probability(&[trial(vec![link(-10.0); 5])], 0.0).unwrap().estimate, 1.0);
        let mut links = vec![link(-3.0); 3];
        links.extend(vec![link(3.0); 7]);
        assert!((link_outage_probability(&[trial(links)], 0.0).unwrap().estimate - 0.3).abs() < 1e-15);
        assert!(matches!(link_outage_probability(&[], 0.0), Err(Error::Contract(_))));
    }

    #[test]
    fn interference_sentinels() {
        assert_eq!(interference_power(&[]).db, f64::NEG_INFINITY);
        let delta = DelayProfile::from_powers(vec![3.0]);
        assert_eq!(interference_power(&[delta]).db, f64::NEG_INFINITY);
    }

    #[test]
    fn two_equal_taps() {
        let p = 0.37;
        let r = interference_power(&[DelayProfile::from_powers(vec![p / 2.0, p / 2.0])]);
        assert!((r.contributors[0].mean_delay - 0.5).abs() < 1e-15);
        assert!((r.contributors[0].second_moment - 0.5).abs() < 1e-15);
        assert!((r.db - 10.0 * p.log10()).abs() < 1e-12);
    }

    #[test]
    fn adding_an_interferer_never_reduces() {
        let a = DelayProfile::from_powers(vec![0.5, 0.3, 0.2]);
        let b = DelayProfile::from_powers(vec![1.0, 0.0, 0.0, 0.0]);
        let one = interference_power(std::slice::from_ref(&a)).linear;
        let two = interference_power(&[a, b]).linear;
        assert!(two >= one);
    }

    #[test]
    fn sinr_examples() {
        let s = |signal, interference, noise| SinrParts { signal, interference, noise };
        assert!(output_sinr(&s(1.0, 0.0, 1.0)).unwrap().abs() < 1e-12);
        assert!((output_sinr(&s(100.0, 0.0, 1.0)).unwrap() - 20.0).abs() < 1e-12);
        assert!(output_sinr(&s(10.0, 9.0, 1.0)).unwrap().abs() < 1e-12);
        assert!(matches!(output_sinr(&s(1.0, 0.0, 0.0)), Err(Error::Config(_))));
    }

    #[test]
    fn error_rate_counting() {
        let perfect = error_rates(&[trial(vec![link(0.0); 4])]).unwrap();
        assert_eq!((perfect.bit.estimate, perfect.symbol.estimate, perfect.vector.estimate), (0.0, 0.0, 0.0));
        let mut l = link(0.0);
        l.decoded_bits = vec![1, 0];
        assert_eq!(error_rates(&[trial(vec![l])]).unwrap().bit.estimate, 1.0);
        let mut l = link(0.0);
        l.true_bits = vec![0; 100];
        l.decoded_bits = vec![0; 100];
        for i in [3, 17, 40, 41, 99] {
            l.decoded_bits[i] = 1;
        }
        assert!((error_rates(&[trial(vec![l])]).unwrap().bit.estimate - 0.05).abs() < 1e-15);
        assert!(error_rates(&[]).is_err());
    }

    #[test]
    fn wilson_brackets_estimate() {
        for (h, n) in [(0, 10), (3, 10), (10, 10), (500, 1000)] {
            let (lo, hi) = wilson(h, n, Z95);
            let p = h as f64 / n as f64;
            assert!(lo <= p && p <= hi && lo >= 0.0 && hi <= 1.0);
        }
        // known value: 5/10 → [0.2366, 0.7634]
        let (lo, hi) = wilson(5, 10, Z95);
        assert!((lo - 0.236_593).abs() < 1e-5 && (hi - 0.763_407).abs() < 1e-5);
    }

    #[test]
    fn moments_merge_matches_single_pass() {
        let xs = [1.0, 4.0, -2.0, 8.5, 3.25];
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..2].iter().for_each(|&x| a.push(x));
        xs[2..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert_eq!(a, all);
        assert!((all.mean() - 2.95).abs() < 1e-12);
    }
}
