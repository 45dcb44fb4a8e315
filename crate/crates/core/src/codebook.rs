//! Dispersion-vector codebooks: random and unitary constructions, scoring
//! criteria, budgeted search and a plain-text file format.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modem::Constellation;
use crate::rng::complex_normal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    RandomGaussian,
    Unitary,
}

impl Construction {
    pub fn name(self) -> &'static str {
        match self {
            Construction::RandomGaussian => "random_gaussian",
            Construction::Unitary => "unitary",
        }
    }
}

/// Design criterion used to rank candidate codebooks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Pairwise union bound on the detection error probability.
    MinErrorProb,
    /// Log-det mutual-information proxy.
    MaxCapacity,
    /// Smallest distance between distinct spread symbols.
    MaxMinDistance,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::MinErrorProb => "min_error_prob",
            Criterion::MaxCapacity => "max_capacity",
            Criterion::MaxMinDistance => "max_min_distance",
        }
    }
}

/// Source of unitary matrices for the unitary construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitarySource {
    Dft,
    Haar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    vectors: Vec<Vec<Complex64>>,
    t: usize,
    pub construction: Construction,
    pub criterion: Criterion,
    pub seed: Option<u64>,
}

/// Rescales `v` so that `Σ|v_i|² = v.len()`.
fn renormalize(v: &mut [Complex64]) {
    let e: f64 = v.iter().map(Complex64::norm_sqr).sum();
    if e > 0.0 {
        let s = (v.len() as f64 / e).sqrt();
        v.iter_mut().for_each(|z| *z *= s);
    }
}

impl Codebook {
    /// Wraps explicit vectors; each is renormalized to the power constraint.
    pub fn from_vectors(
        vectors: Vec<Vec<Complex64>>,
        construction: Construction,
        criterion: Criterion,
    ) -> Result<Self> {
        let t = vectors.first().map_or(0, Vec::len);
        if vectors.is_empty() || t == 0 {
            return Err(Error::Config("codebook needs at least one non-empty vector".into()));
        }
        if vectors.iter().any(|v| v.len() != t) {
            return Err(Error::Contract("dispersion vectors differ in length".into()));
        }
        let mut vectors = vectors;
        for v in &mut vectors {
            if v.iter().all(|z| z.norm_sqr() == 0.0) {
                return Err(Error::Config("dispersion vector is identically zero".into()));
            }
            renormalize(v);
        }
        Ok(Codebook {
            vectors,
            t,
            construction,
            criterion,
            seed: None,
        })
    }

    pub fn q(&self) -> usize {
        self.vectors.len()
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn vector(&self, q: usize) -> &[Complex64] {
        &self.vectors[q]
    }

    pub fn vectors(&self) -> &[Vec<Complex64>] {
        &self.vectors
    }

    /// Largest deviation of any `Σ|v_i|²` from `T`.
    pub fn power_error(&self) -> f64 {
        self.vectors
            .iter()
            .map(|v| (v.iter().map(Complex64::norm_sqr).sum::<f64>() - self.t as f64).abs())
            .fold(0.0, f64::max)
    }

    /// Writes the codebook as structured text.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "stfs-codebook v1");
        let _ = writeln!(s, "q {}", self.q());
        let _ = writeln!(s, "t {}", self.t);
        let _ = writeln!(s, "construction {}", self.construction.name());
        let _ = writeln!(s, "criterion {}", self.criterion.name());
        match self.seed {
            Some(seed) => {
                let _ = writeln!(s, "seed {seed}");
            }
            None => {
                let _ = writeln!(s, "seed none");
            }
        }
        for v in &self.vectors {
            let row: Vec<String> = v.iter().map(|z| format!("{:e},{:e}", z.re, z.im)).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        s
    }

    /// Parses the text produced by [`Codebook::to_text`]. Entries are kept
    /// bit-exact; no renormalization is applied.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let bad = |what: &str| Error::Parse(format!("codebook: {what}"));
        if lines.next() != Some("stfs-codebook v1") {
            return Err(bad("missing 'stfs-codebook v1' header"));
        }
        let mut field = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad(&format!("missing '{key}' line")))?;
            let (k, v) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| bad(&format!("malformed line '{line}'")))?;
            if k != key {
                return Err(bad(&format!("expected '{key}', found '{k}'")));
            }
            Ok(v.trim().to_string())
        };
        let q: usize = field("q")?.parse().map_err(|_| bad("q is not an integer"))?;
        let t: usize = field("t")?.parse().map_err(|_| bad("t is not an integer"))?;
        let construction = match field("construction")?.as_str() {
            "random_gaussian" => Construction::RandomGaussian,
            "unitary" => Construction::Unitary,
            other => return Err(bad(&format!("unknown construction '{other}'"))),
        };
        let criterion = match field("criterion")?.as_str() {
            "min_error_prob" => Criterion::MinErrorProb,
            "max_capacity" => Criterion::MaxCapacity,
            "max_min_distance" => Criterion::MaxMinDistance,
            other => return Err(bad(&format!("unknown criterion '{other}'"))),
        };
        let seed = match field("seed")?.as_str() {
            "none" => None,
            s => Some(s.parse().map_err(|_| bad("seed is not an integer"))?),
        };
        let mut vectors = Vec::with_capacity(q);
        for line in lines {
            let row = line
                .split_whitespace()
                .map(|pair| {
                    let (re, im) = pair.split_once(',').ok_or_else(|| bad("entry is not 're,im'"))?;
                    let re: f64 = re.parse().map_err(|_| bad("bad real part"))?;
                    let im: f64 = im.parse().map_err(|_| bad("bad imaginary part"))?;
                    Ok(Complex64::new(re, im))
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != t {
                return Err(bad(&format!("row has {} entries, expected {t}", row.len())));
            }
            vectors.push(row);
        }
        if vectors.len() != q || q == 0 || t == 0 {
            return Err(bad(&format!("expected {q} rows, found {}", vectors.len())));
        }
        Ok(Codebook {
            vectors,
            t,
            construction,
            criterion,
            seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// `q` vectors of length `t`, each with a single non-zero entry `√T·e^{jθ}`
/// at a uniformly drawn position, θ being the phase of a Gaussian draw.
pub fn gen_random_codebook<R: Rng + ?Sized>(q: usize, t: usize, rng: &mut R) -> Result<Codebook> {
    if q == 0 || t == 0 {
        return Err(Error::Config(format!("codebook needs q >= 1 and t >= 1 (got q = {q}, t = {t})")));
    }
    let vectors = (0..q)
        .map(|_| {
            let pos = rng.random_range(0..t);
            let g = complex_normal(rng, 1.0);
            let mut v = vec![Complex64::new(0.0, 0.0); t];
            v[pos] = Complex64::from_polar((t as f64).sqrt(), g.arg());
            v
        })
        .collect();
    Codebook::from_vectors(vectors, Construction::RandomGaussian, Criterion::MaxMinDistance)
}

fn dft_matrix(n: usize) -> DMatrix<Complex64> {
    let s = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(n, n, |r, c| Complex64::cis(-2.0 * PI * (r * c) as f64 / n as f64) * s)
}

fn haar_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(n, n, |_, _| complex_normal(rng, 1.0));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    // Fix the phases of R's diagonal so the result is Haar distributed.
    for c in 0..n {
        let d = r[(c, c)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for row in 0..n {
            q[(row, c)] *= ph;
        }
    }
    q
}

/// Vectors taken from a unitary matrix: the first `t` rows of an `m×m`
/// unitary when `m ≥ t`, otherwise the first `m` columns of a `t×t` unitary.
/// Every vector is scaled by `√(T/M)` and then renormalized to `Σ|v_i|² = T`.
pub fn gen_unitary_codebook_with<R: Rng + ?Sized>(
    m: usize,
    t: usize,
    source: UnitarySource,
    rng: &mut R,
) -> Result<Codebook> {
    if m == 0 || t == 0 {
        return Err(Error::Config(format!("unitary codebook needs m, t >= 1 (got m = {m}, t = {t})")));
    }
    let dim = m.max(t);
    let u = match source {
        UnitarySource::Dft => dft_matrix(dim),
        UnitarySource::Haar => haar_matrix(dim, rng),
    };
    let scale = (t as f64 / m as f64).sqrt();
    let vectors = (0..m)
        .map(|c| (0..t).map(|r| u[(r, c)] * scale).collect())
        .collect();
    Codebook::from_vectors(vectors, Construction::Unitary, Criterion::MaxMinDistance)
}

/// Unitary construction from DFT matrices.
pub fn gen_unitary_codebook(m: usize, t: usize) -> Result<Codebook> {
    let mut unused = crate::rng::substream(0, &[]);
    gen_unitary_codebook_with(m, t, UnitarySource::Dft, &mut unused)
}

/// Operating point for the error-probability and capacity criteria.
#[derive(Debug, Clone, Copy)]
pub struct ScoreContext<'a> {
    pub constellation: &'a Constellation,
    /// Linear per-sample SINR at which the criteria are evaluated.
    pub sinr: f64,
}

/// Smallest `‖s·v_q − s'·v_q'‖` over distinct hypotheses `(q, s) ≠ (q', s')`.
pub fn min_distance(codebook: &Codebook, constellation: &Constellation) -> f64 {
    let points = distinct_points(constellation);
    let hyps: Vec<Vec<Complex64>> = codebook
        .vectors()
        .iter()
        .flat_map(|v| {
            points
                .iter()
                .map(move |s| v.iter().map(|x| x * s).collect::<Vec<_>>())
        })
        .collect();
    let mut best = f64::INFINITY;
    for i in 0..hyps.len() {
        for j in i + 1..hyps.len() {
            let d: f64 = hyps[i]
                .iter()
                .zip(&hyps[j])
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
            best = best.min(d);
        }
    }
    if best.is_finite() {
        best.sqrt()
    } else {
        0.0
    }
}

/// Constellation points with repeats removed (FSK carries all of its
/// information in the tone, so its points coincide).
fn distinct_points(c: &Constellation) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = Vec::new();
    for &p in c.points() {
        if !out.iter().any(|q| (q - p).norm_sqr() < 1e-24) {
            out.push(p);
        }
    }
    out
}

fn q_function(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}

/// Score of a codebook under a criterion; larger is better for every criterion.
pub fn score(codebook: &Codebook, criterion: Criterion, ctx: &ScoreContext<'_>) -> f64 {
    match criterion {
        Criterion::MaxMinDistance => min_distance(codebook, ctx.constellation),
        Criterion::MinErrorProb => {
            // Union bound averaged over equiprobable hypotheses, noise variance 1/sinr per sample.
            let sigma = (1.0 / ctx.sinr / 2.0).sqrt();
            let pts = distinct_points(ctx.constellation);
            let hyps: Vec<(usize, Complex64)> = (0..codebook.q())
                .flat_map(|q| pts.iter().map(move |&s| (q, s)))
                .collect();
            let mut bound = 0.0;
            for (i, &(qa, sa)) in hyps.iter().enumerate() {
                for (j, &(qb, sb)) in hyps.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let d: f64 = codebook
                        .vector(qa)
                        .iter()
                        .zip(codebook.vector(qb))
                        .map(|(a, b)| (a * sa - b * sb).norm_sqr())
                        .sum::<f64>()
                        .sqrt();
                    bound += q_function(d / (2.0 * sigma));
                }
            }
            -bound / hyps.len() as f64
        }
        Criterion::MaxCapacity => {
            let t = codebook.t();
            let v = DMatrix::from_fn(t, codebook.q(), |r, c| codebook.vector(c)[r]);
            let gram = &v * v.adjoint() * Complex64::new(ctx.sinr / codebook.q() as f64, 0.0)
                + DMatrix::<Complex64>::identity(t, t);
            match gram.cholesky() {
                Some(ch) => (0..t).map(|i| 2.0 * ch.l()[(i, i)].re.log2()).sum(),
                None => f64::NEG_INFINITY,
            }
        }
    }
}

/// Draws `budget` candidates from `generator` and keeps the best-scoring one
/// (the earliest among equals).
pub fn optimize_codebook<R, G>(
    mut generator: G,
    criterion: Criterion,
    ctx: &ScoreContext<'_>,
    budget: usize,
    rng: &mut R,
) -> Result<(Codebook, f64)>
where
    R: Rng + ?Sized,
    G: FnMut(&mut R) -> Result<Codebook>,
{
    if budget == 0 {
        return Err(Error::Config("codebook search budget must be at least 1".into()));
    }
    let mut best: Option<(Codebook, f64)> = None;
    for _ in 0..budget {
        let cand = generator(rng)?;
        let s = score(&cand, criterion, ctx);
        if best.as_ref().is_none_or(|(_, b)| s > *b) {
            best = Some((cand, s));
        }
    }
    let (mut cb, s) = best.expect("budget >= 1");
    cb.criterion = criterion;
    Ok((cb, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn nonzeros(v: &[Complex64]) -> usize {
        v.iter().filter(|z| z.norm_sqr() > 0.0).count()
    }

    #[test]
    fn smallest_random_codebook() {
        let mut rng = substream(1, &[]);
        let cb = gen_random_codebook(1, 1, &mut rng).unwrap();
        assert!((cb.vector(0)[0].norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_codebook_power_and_sparsity() {
        let mut rng = substream(2, &[]);
        let cb = gen_random_codebook(8, 8, &mut rng).unwrap();
        assert_eq!(cb.q(), 8);
        assert!(cb.power_error() < 1e-12);
        assert!(cb.vectors().iter().all(|v| nonzeros(v) == 1));
    }

    #[test]
    fn identity_unitary_case() {
        let cb = gen_unitary_codebook(4, 4).unwrap();
        assert!(cb.power_error() < 1e-12);
        // A 4-point DFT column has all entries of magnitude 1 after renormalization.
        for v in cb.vectors() {
            assert!(v.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn unitary_fewer_vectors_than_length() {
        let cb = gen_unitary_codebook(2, 4).unwrap();
        assert_eq!((cb.q(), cb.t()), (2, 4));
        assert!(cb.power_error() < 1e-12);
    }

    #[test]
    fn unitary_more_vectors_than_length() {
        let cb = gen_unitary_codebook(6, 3).unwrap();
        assert_eq!((cb.q(), cb.t()), (6, 3));
        assert!(cb.power_error() < 1e-12);
        let mut rng = substream(3, &[]);
        let h = gen_unitary_codebook_with(5, 7, UnitarySource::Haar, &mut rng).unwrap();
        assert!(h.power_error() < 1e-12);
    }

    #[test]
    fn unitary_columns_stay_orthogonal_when_m_le_t() {
        let mut rng = substream(4, &[]);
        for (m, t) in [(4, 4), (2, 4), (3, 8), (8, 8)] {
            for source in [UnitarySource::Dft, UnitarySource::Haar] {
                let cb = gen_unitary_codebook_with(m, t, source, &mut rng).unwrap();
                for a in 0..m {
                    for b in a + 1..m {
                        let ip: Complex64 =
                            cb.vector(a).iter().zip(cb.vector(b)).map(|(x, y)| x * y.conj()).sum();
                        assert!(ip.norm() < 1e-10, "m={m} t={t} {source:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn duplicate_vectors_score_zero() {
        let v = vec![Complex64::new(0.0, 0.0), Complex64::new(2f64.sqrt(), 0.0)];
        let cb = Codebook::from_vectors(vec![v.clone(), v], Construction::RandomGaussian, Criterion::MaxMinDistance)
            .unwrap();
        let c = Constellation::psk(2).unwrap();
        assert_eq!(min_distance(&cb, &c), 0.0);
    }

    #[test]
    fn budget_one_returns_candidate() {
        let c = Constellation::psk(2).unwrap();
        let ctx = ScoreContext { constellation: &c, sinr: 10.0 };
        let mut r1 = substream(5, &[]);
        let mut r2 = substream(5, &[]);
        let (best, _) =
            optimize_codebook(|r| gen_random_codebook(4, 4, r), Criterion::MaxMinDistance, &ctx, 1, &mut r1)
                .unwrap();
        let direct = gen_random_codebook(4, 4, &mut r2).unwrap();
        assert_eq!(best.vectors(), direct.vectors());
        assert!(optimize_codebook(|r| gen_random_codebook(4, 4, r), Criterion::MaxMinDistance, &ctx, 0, &mut r1)
            .is_err());
    }

    #[test]
    fn criteria_prefer_separated_codebooks() {
        let c = Constellation::psk(2).unwrap();
        let ctx = ScoreContext { constellation: &c, sinr: 4.0 };
        let s2 = 2f64.sqrt();
        let z = Complex64::new(0.0, 0.0);
        let good = Codebook::from_vectors(
            vec![vec![Complex64::new(s2, 0.0), z], vec![z, Complex64::new(s2, 0.0)]],
            Construction::RandomGaussian,
            Criterion::MaxMinDistance,
        )
        .unwrap();
        let bad = Codebook::from_vectors(
            vec![vec![Complex64::new(s2, 0.0), z], vec![Complex64::new(s2, 0.0), z]],
            Construction::RandomGaussian,
            Criterion::MaxMinDistance,
        )
        .unwrap();
        for crit in [Criterion::MaxMinDistance, Criterion::MinErrorProb, Criterion::MaxCapacity] {
            assert!(score(&good, crit, &ctx) > score(&bad, crit, &ctx), "{crit:?}");
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut rng = substream(6, &[]);
        let mut cb = gen_unitary_codebook_with(3, 5, UnitarySource::Haar, &mut rng).unwrap();
        cb.seed = Some(99);
        let back = Codebook::from_text(&cb.to_text()).unwrap();
        assert_eq!(back, cb);
        assert!(Codebook::from_text("garbage").is_err());
        let truncated: String = cb.to_text().lines().take(7).collect::<Vec<_>>().join("\n");
        assert!(Codebook::from_text(&truncated).is_err());
    }
}
