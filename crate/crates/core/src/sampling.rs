//! Seeded random variates for scenario generation.
//!
//! Every draw starts from a probability in the open interval (0, 1) and is
//! pushed through [`inverse_cdf`]. Monte Carlo sampling draws those
//! probabilities independently; Latin hypercube sampling stratifies each
//! dimension into `n` equal cells and visits every cell exactly once.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A univariate distribution, parameterised in the units of the application.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Distribution {
    Uniform { lo: f64, hi: f64 },
    /// Note the second parameter is the variance, not the standard deviation.
    Normal { mean: f64, variance: f64 },
    Gumbel { location: f64, scale: f64 },
    Exponential { rate: f64 },
    /// `exp(location + scale * Z)` with `Z` standard normal.
    Lognormal { location: f64, scale: f64 },
    /// Takes the value 1 with probability `p`, else 0.
    Bernoulli { p: f64 },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDistribution(msg));
        let finite = |v: f64| v.is_finite();
        match *self {
            Distribution::Uniform { lo, hi } => {
                if !(finite(lo) && finite(hi)) || hi <= lo {
                    return bad(format!("uniform needs finite lo < hi, got [{lo}, {hi}]"));
                }
            }
            Distribution::Normal { mean, variance } => {
                if !finite(mean) || !finite(variance) || variance < 0.0 {
                    return bad(format!("normal needs variance >= 0, got {variance}"));
                }
            }
            Distribution::Gumbel { location, scale } | Distribution::Lognormal { location, scale } => {
                if !finite(location) || !finite(scale) || scale <= 0.0 {
                    return bad(format!("scale must be > 0, got {scale}"));
                }
            }
            Distribution::Exponential { rate } => {
                if !finite(rate) || rate <= 0.0 {
                    return bad(format!("rate must be > 0, got {rate}"));
                }
            }
            Distribution::Bernoulli { p } => {
                if !(0.0..=1.0).contains(&p) {
                    return bad(format!("bernoulli p must lie in [0, 1], got {p}"));
                }
            }
        }
        Ok(())
    }

    /// Quantile function without argument checks. `p` must lie in (0, 1).
    #[inline]
    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            Distribution::Uniform { lo, hi } => lo + (hi - lo) * p,
            Distribution::Normal { mean, variance } => mean + variance.sqrt() * standard_normal_quantile(p),
            Distribution::Gumbel { location, scale } => location - scale * (-p.ln()).ln(),
            Distribution::Exponential { rate } => -(-p).ln_1p() / rate,
            Distribution::Lognormal { location, scale } => {
                (location + scale * standard_normal_quantile(p)).exp()
            }
            Distribution::Bernoulli { p: prob } => {
                if p >= 1.0 - prob {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `F⁻¹(p)` for a validated distribution.
///
/// Bernoulli thresholds at `1 − p_param`: probabilities at or above the
/// threshold map to 1.
pub fn inverse_cdf(spec: &Distribution, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    spec.validate()?;
    Ok(spec.quantile(p))
}

/// Standard normal quantile (Wichura's AS241, PPND16).
pub fn standard_normal_quantile(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_6,
        1.331_416_678_917_843_8e2,
        1.971_590_950_306_551_3e3,
        1.373_169_376_550_946e4,
        4.592_195_393_154_987e4,
        6.726_577_092_700_87e4,
        3.343_057_558_358_813e4,
        2.509_080_928_730_122_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091e1,
        6.871_870_074_920_579e2,
        5.394_196_021_424_751e3,
        2.121_379_430_158_659_7e4,
        3.930_789_580_009_271e4,
        2.872_908_573_572_194_3e4,
        5.226_495_278_852_854e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_5,
        4.630_337_846_156_545,
        5.769_497_221_460_691,
        3.647_848_324_763_204_5,
        1.270_458_252_452_368_4,
        2.417_807_251_774_506e-1,
        2.272_384_498_926_918_4e-2,
        7.745_450_142_783_414e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_8,
        1.676_384_830_183_803_8,
        6.897_673_349_851e-1,
        1.481_039_764_274_800_8e-1,
        1.519_866_656_361_645_7e-2,
        5.475_938_084_995_345e-4,
        1.050_750_071_644_416_8e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103,
        5.463_784_911_164_114,
        1.784_826_539_917_291_3,
        2.965_605_718_285_048_7e-1,
        2.653_218_952_657_612_4e-2,
        1.242_660_947_388_078_4e-3,
        2.711_555_568_743_487_6e-5,
        2.010_334_399_292_288_1e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879e-1,
        1.369_298_809_227_358e-1,
        1.487_536_129_085_061_5e-2,
        7.868_691_311_456_133e-4,
        1.846_318_317_510_054_8e-5,
        1.421_511_758_316_445_9e-7,
        2.044_263_103_389_939_7e-15,
    ];

    fn poly(c: &[f64; 8], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        r -= 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// How probability points are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Plain Monte Carlo: independent uniforms.
    Mcs,
    /// Latin hypercube: one point per stratum per dimension.
    #[default]
    Lhs,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mcs" | "mc" => Ok(Scheme::Mcs),
            "lhs" => Ok(Scheme::Lhs),
            other => Err(Error::InvalidParams(format!("unknown sampling scheme '{other}'"))),
        }
    }
}

/// Uniform source strictly inside (0, 1).
#[derive(Debug, Clone)]
pub struct UniformStream {
    rng: ChaCha8Rng,
}

impl UniformStream {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Independent substream `stream` of the generator seeded with `seed`.
    pub fn substream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        let bits = self.rng.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// An `rows × cols` matrix of probabilities in (0, 1), row-major.
pub fn probability_matrix(scheme: Scheme, rows: usize, cols: usize, seed: u64) -> Vec<f64> {
    let mut stream = UniformStream::new(seed);
    match scheme {
        Scheme::Mcs => (0..rows * cols).map(|_| stream.next_open01()).collect(),
        Scheme::Lhs => {
            let mut out = vec![0.0; rows * cols];
            let mut perm: Vec<usize> = (0..rows).collect();
            let width = 1.0 / rows as f64;
            for c in 0..cols {
                perm.shuffle(stream.rng_mut());
                for (r, &cell) in perm.iter().enumerate() {
                    let u = stream.next_open01();
                    // stays inside (0, 1) because u is strictly inside its cell
                    out[r * cols + c] = ((cell as f64 + u) * width).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
                }
            }
            out
        }
    }
}

/// A seeded draw of `rows` scenarios over `cols` dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub seed: u64,
    pub scheme: Scheme,
}

impl SampleMatrix {
    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |r| self.get(r, c))
    }
}

/// Draws `n × d` values of `spec` under `scheme`.
pub fn sample(spec: &Distribution, scheme: Scheme, n: usize, d: usize, seed: u64) -> Result<SampleMatrix> {
    spec.validate()?;
    if n == 0 || d == 0 {
        return Err(Error::InvalidParams("sample needs n >= 1 and d >= 1".into()));
    }
    let values = probability_matrix(scheme, n, d, seed)
        .into_iter()
        .map(|p| spec.quantile(p))
        .collect();
    Ok(SampleMatrix { rows: n, cols: d, values, seed, scheme })
}

pub fn sample_mcs(spec: &Distribution, n: usize, d: usize, seed: u64) -> Result<SampleMatrix> {
    sample(spec, Scheme::Mcs, n, d, seed)
}

pub fn sample_lhs(spec: &Distribution, n: usize, d: usize, seed: u64) -> Result<SampleMatrix> {
    sample(spec, Scheme::Lhs, n, d, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_cdf_closed_forms() {
        let e = inverse_cdf(&Distribution::Exponential { rate: 1.0 }, 1.0 - (-1.0f64).exp()).unwrap();
        assert!((e - 1.0).abs() < 1e-12);
        let g = inverse_cdf(&Distribution::Gumbel { location: 0.0, scale: 1.0 }, (-1.0f64).exp()).unwrap();
        assert!(g.abs() < 1e-12);
        let n = inverse_cdf(&Distribution::Normal { mean: 0.0, variance: 1.0 }, 0.5).unwrap();
        assert_eq!(n, 0.0);
    }

    #[test]
    fn inverse_cdf_rejects_bad_input() {
        let spec = Distribution::Uniform { lo: 0.0, hi: 1.0 };
        assert!(inverse_cdf(&spec, 0.0).is_err());
        assert!(inverse_cdf(&spec, 1.0).is_err());
        assert!(inverse_cdf(&spec, f64::NAN).is_err());
        assert!(inverse_cdf(&Distribution::Uniform { lo: 1.0, hi: 1.0 }, 0.5).is_err());
        assert!(inverse_cdf(&Distribution::Exponential { rate: 0.0 }, 0.5).is_err());
        assert!(inverse_cdf(&Distribution::Bernoulli { p: 1.5 }, 0.5).is_err());
        assert!(inverse_cdf(&Distribution::Normal { mean: 0.0, variance: -1.0 }, 0.5).is_err());
    }

    #[test]
    fn bernoulli_threshold() {
        let b = Distribution::Bernoulli { p: 0.3 };
        assert_eq!(b.quantile(0.69), 0.0);
        assert_eq!(b.quantile(0.71), 1.0);
        assert_eq!(Distribution::Bernoulli { p: 0.0 }.quantile(0.999_999), 0.0);
    }

    #[test]
    fn degenerate_bernoulli_is_constant() {
        let m = sample_mcs(&Distribution::Bernoulli { p: 1.0 }, 3, 1, 11).unwrap();
        assert!(m.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn mcs_uniform_mean() {
        let m = sample_mcs(&Distribution::Uniform { lo: 0.0, hi: 20.0 }, 10_000, 1, 3).unwrap();
        let mean = m.values.iter().sum::<f64>() / m.values.len() as f64;
        assert!((mean - 10.0).abs() < 0.5, "{mean}");
    }

    #[test]
    fn same_seed_same_matrix() {
        let spec = Distribution::Gumbel { location: 0.0, scale: 1.0 };
        for scheme in [Scheme::Mcs, Scheme::Lhs] {
            let a = sample(&spec, scheme, 50, 4, 7).unwrap();
            let b = sample(&spec, scheme, 50, 4, 7).unwrap();
            assert_eq!(a, b);
            let c = sample(&spec, scheme, 50, 4, 8).unwrap();
            assert_ne!(a.values, c.values);
        }
    }

    #[test]
    fn lhs_uniform_quartiles() {
        let m = sample_lhs(&Distribution::Uniform { lo: 0.0, hi: 20.0 }, 4, 1, 5).unwrap();
        let mut cells: Vec<usize> = m.values.iter().map(|v| (v / 5.0).floor() as usize).collect();
        cells.sort_unstable();
        assert_eq!(cells, vec![0, 1, 2, 3]);
    }

    #[test]
    fn lhs_normal_pair_straddles_median() {
        for seed in 0..20 {
            let m = sample_lhs(&Distribution::Normal { mean: 0.0, variance: 1.0 }, 2, 1, seed).unwrap();
            let neg = m.values.iter().filter(|&&v| v < 0.0).count();
            assert_eq!(neg, 1);
        }
    }

    #[test]
    fn lhs_bernoulli_count_is_exact() {
        let m = sample_lhs(&Distribution::Bernoulli { p: 0.375 }, 100, 3, 2).unwrap();
        for c in 0..3 {
            let ones: f64 = m.column(c).sum();
            assert!(ones == 37.0 || ones == 38.0, "{ones}");
        }
    }

    #[test]
    fn scheme_parses() {
        assert_eq!("LHS".parse::<Scheme>().unwrap(), Scheme::Lhs);
        assert_eq!("mcs".parse::<Scheme>().unwrap(), Scheme::Mcs);
        assert!("qmc".parse::<Scheme>().is_err());
    }
}
