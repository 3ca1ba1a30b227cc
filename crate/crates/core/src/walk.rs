//! Increment laws, their norming sequences and sampling.
//!
//! A [`LawSpec`] is an unchecked description (from code or from a config
//! block). [`IncrementLaw`] can only be obtained through validation, so every
//! sampler and exact routine downstream works with a law that is known to be
//! mean-zero, irreducible on the integers and inside the stability domain
//! `{1 < alpha < 2, |beta| <= 1} ∪ {alpha = 2, beta = 0}`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_rational::Ratio;
use rand::{Rng, RngExt};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::numeric::zeta::{zeta, zeta_tail};

pub type Prob = Ratio<i64>;

#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    /// Finitely many `(value, probability)` pairs.
    Finite(Vec<(i64, Prob)>),
    /// `P(X = ±k) ∝ k^{-alpha-1}` for `k >= 1`.
    PowerTail { alpha: f64, symmetric: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LawSpec {
    pub name: String,
    pub support: Support,
}

impl LawSpec {
    pub fn finite(name: &str, pairs: &[(i64, i64, i64)]) -> Self {
        LawSpec {
            name: name.to_string(),
            support: Support::Finite(pairs.iter().map(|&(v, num, den)| (v, Ratio::new(num, den))).collect()),
        }
    }

    pub fn power_tail(name: &str, alpha: f64) -> Self {
        LawSpec {
            name: name.to_string(),
            support: Support::PowerTail { alpha, symmetric: true },
        }
    }

    /// Reads a law from `key = value` pairs.
    ///
    /// Recognised keys: `name`, and either `support` (comma-separated
    /// `value:probability` items, probabilities as `a/b` or decimals) or
    /// `alpha` with optional `symmetric` (default `true`). A `name` alone
    /// refers to one of the bundled laws.
    pub fn from_properties(props: &HashMap<String, String>) -> Result<Self> {
        let name = props
            .get("name")
            .cloned()
            .ok_or_else(|| Error::config("law block needs a 'name'"))?;
        if let Some(support) = props.get("support") {
            let mut pairs = Vec::new();
            for item in support.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let (v, p) = item
                    .split_once(':')
                    .ok_or_else(|| Error::config(format!("support item '{item}' is not value:prob")))?;
                let v: i64 = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::config(format!("bad support value '{v}'")))?;
                pairs.push((v, parse_probability(p.trim())?));
            }
            return Ok(LawSpec {
                name,
                support: Support::Finite(pairs),
            });
        }
        if let Some(alpha) = props.get("alpha") {
            let alpha: f64 = alpha
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("bad alpha '{alpha}'")))?;
            let symmetric = match props.get("symmetric").map(|s| s.trim()) {
                None | Some("true") | Some("yes") | Some("1") => true,
                Some("false") | Some("no") | Some("0") => false,
                Some(other) => return Err(Error::config(format!("bad symmetric flag '{other}'"))),
            };
            return Ok(LawSpec {
                name,
                support: Support::PowerTail { alpha, symmetric },
            });
        }
        IncrementLaw::bundled(&name).map(|law| law.spec())
    }
}

/// Parses `a/b`, an integer, or a decimal such as `0.25` into an exact ratio.
pub fn parse_probability(text: &str) -> Result<Prob> {
    let bad = || Error::config(format!("bad probability '{text}'"));
    if text.contains('/') || !text.contains('.') {
        return Ratio::<i64>::from_str(text).map_err(|_| bad());
    }
    let (int, frac) = text.split_once('.').ok_or_else(bad)?;
    if frac.len() > 15 || !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let int: i64 = if int.is_empty() {
        0
    } else {
        int.parse().map_err(|_| bad())?
    };
    let den = 10i64.pow(frac.len() as u32);
    let num: i64 = if frac.is_empty() {
        0
    } else {
        frac.parse().map_err(|_| bad())?
    };
    Ok(Ratio::new(int * den + num, den))
}

/// Outcome of [`validate`]: every violated invariant is listed.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub name: String,
    pub issues: Vec<String>,
    /// Lattice period of the walk (gcd of possible return times to 0).
    pub period: Option<u32>,
    pub mean: Option<Prob>,
    /// `None` means infinite.
    pub variance: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

/// `(alpha, beta)` in `{1 < alpha < 2, |beta| <= 1} ∪ {alpha = 2, beta = 0}`.
pub fn in_stability_domain(alpha: f64, beta: f64) -> bool {
    (alpha > 1.0 && alpha < 2.0 && beta.abs() <= 1.0) || (alpha == 2.0 && beta == 0.0)
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn validate(spec: &LawSpec) -> ValidationReport {
    let mut issues = Vec::new();
    match &spec.support {
        Support::Finite(pairs) => {
            let mut mean = None;
            let mut variance = None;
            let mut period = None;
            if pairs.is_empty() {
                issues.push("support is empty".to_string());
            }
            for (v, p) in pairs {
                if *p < Ratio::from_integer(0) {
                    issues.push(format!("negative probability {p} at {v}"));
                }
            }
            let total: Prob = pairs.iter().map(|(_, p)| *p).sum();
            if total != Ratio::from_integer(1) {
                issues.push(format!("probabilities sum to {total} != 1"));
            }
            if !pairs.is_empty() {
                let m: Prob = pairs.iter().map(|(v, p)| Ratio::from_integer(*v) * p).sum();
                if m != Ratio::from_integer(0) {
                    issues.push(format!("mean = {} != 0", ratio_to_f64(m)));
                }
                mean = Some(m);
                let second: Prob = pairs.iter().map(|(v, p)| Ratio::from_integer(v * v) * p).sum();
                variance = Some(ratio_to_f64(second - m * m));
                let charged: Vec<i64> = pairs
                    .iter()
                    .filter(|(_, p)| *p > Ratio::from_integer(0))
                    .map(|(v, _)| *v)
                    .collect();
                let g = charged.iter().fold(0, |acc, &v| gcd(acc, v));
                if g == 0 {
                    issues.push("law is a point mass at 0".to_string());
                } else if g != 1 {
                    issues.push(format!("support lies in the sublattice {g}Z"));
                } else {
                    let h = charged.iter().fold(0, |acc, &v| gcd(acc, v - charged[0]));
                    period = Some(h as u32);
                }
            }
            ValidationReport {
                name: spec.name.clone(),
                issues,
                period,
                mean,
                variance,
                alpha: 2.0,
                beta: 0.0,
            }
        }
        Support::PowerTail { alpha, symmetric } => {
            if !(*alpha > 1.0 && *alpha < 2.0) {
                issues.push(format!("power-tail exponent alpha = {alpha} must lie in (1, 2)"));
            }
            if !symmetric {
                issues.push("asymmetric power-tail laws are not supported".to_string());
            }
            let beta = 0.0;
            if !in_stability_domain(*alpha, beta) && issues.is_empty() {
                issues.push(format!(
                    "(alpha, beta) = ({alpha}, {beta}) outside the stability domain"
                ));
            }
            ValidationReport {
                name: spec.name.clone(),
                issues,
                period: Some(1),
                // exactly zero by symmetry
                mean: Some(Ratio::from_integer(0)),
                variance: None,
                alpha: *alpha,
                beta,
            }
        }
    }
}

fn ratio_to_f64(r: Prob) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// The scale `c(n)` with `S_n / c(n)` converging to the stable law, and its
/// inverse `c^{-1}(N)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormingSequence {
    /// `c(n) = sigma sqrt(n)`.
    Gaussian { sigma2: f64 },
    /// `c(n) = (scale * n)^{1/alpha}`.
    Stable { alpha: f64, scale: f64 },
}

impl NormingSequence {
    pub fn c(&self, n: f64) -> f64 {
        match *self {
            NormingSequence::Gaussian { sigma2 } => (sigma2 * n).sqrt(),
            NormingSequence::Stable { alpha, scale } => (scale * n).powf(1.0 / alpha),
        }
    }

    pub fn c_inv(&self, level: f64) -> f64 {
        match *self {
            NormingSequence::Gaussian { sigma2 } => level * level / sigma2,
            NormingSequence::Stable { alpha, scale } => level.powf(alpha) / scale,
        }
    }

    /// `N / c^{-1}(N)`, the local-time scaling factor.
    pub fn local_time_scale(&self, level: f64) -> f64 {
        level / self.c_inv(level)
    }

    pub fn calibration(&self) -> String {
        match *self {
            NormingSequence::Gaussian { sigma2 } => {
                format!("c(n) = sqrt({sigma2} n), exact for finite variance")
            }
            NormingSequence::Stable { alpha, scale } => format!(
                "c(n) = ({scale:.6} n)^(1/{alpha}); scale = A Gamma(1-alpha) cos(pi alpha/2) from the tail constant A"
            ),
        }
    }
}

#[derive(Debug)]
enum Sampler {
    /// Uniform index into a table of `denominator` outcomes.
    Table(Vec<i64>),
    /// Cumulative search when the common denominator is too large for a table.
    Cumulative {
        values: Vec<i64>,
        cdf: Vec<f64>,
    },
    PowerTail(PowerTailSampler),
}

/// Inverse-CDF sampler for `|X|` with `P(|X| = k) = k^{-s} / zeta(s)`.
///
/// A table covers `k <= TABLE_MAX`; beyond that the tail `P(|X| > k)` is
/// evaluated by Euler–Maclaurin and inverted exactly, so there is no
/// truncation.
#[derive(Debug)]
struct PowerTailSampler {
    s: f64,
    zeta_s: f64,
    cdf: Vec<f64>,
    guide: Vec<u32>,
}

const TABLE_MAX: usize = 4096;
const GUIDE_SIZE: usize = 4096;

impl PowerTailSampler {
    fn new(alpha: f64) -> Self {
        let s = alpha + 1.0;
        let zeta_s = zeta(s);
        let mut cdf = vec![0.0; TABLE_MAX + 1];
        // cdf[k] = 1 - P(|X| > k), using the tail to avoid accumulated error.
        for (k, c) in cdf.iter_mut().enumerate().skip(1) {
            *c = 1.0 - zeta_tail(s, k as u64 + 1) / zeta_s;
        }
        let mut guide = vec![0u32; GUIDE_SIZE];
        let mut k = 1usize;
        for (i, g) in guide.iter_mut().enumerate() {
            let u = i as f64 / GUIDE_SIZE as f64;
            while k < TABLE_MAX && cdf[k] < u {
                k += 1;
            }
            *g = k as u32;
        }
        Self { s, zeta_s, cdf, guide }
    }

    fn tail(&self, k: u64) -> f64 {
        zeta_tail(self.s, k + 1) / self.zeta_s
    }

    fn sample_abs(&self, u: f64) -> u64 {
        if u <= self.cdf[TABLE_MAX] {
            let mut k = self.guide[(u * GUIDE_SIZE as f64) as usize] as usize;
            while self.cdf[k] < u {
                k += 1;
            }
            // guide may start one cell late only if cdf[k-1] >= u
            while k > 1 && self.cdf[k - 1] >= u {
                k -= 1;
            }
            return k as u64;
        }
        // smallest k with P(|X| > k) < v
        let v = 1.0 - u;
        let alpha = self.s - 1.0;
        let approx = (v * alpha * self.zeta_s).powf(-1.0 / alpha) - 0.5;
        let lo = TABLE_MAX as u64 + 1;
        let mut k = if approx.is_finite() && approx > lo as f64 {
            (approx as u64).min(1 << 60)
        } else {
            lo
        };
        while self.tail(k) >= v {
            k += 1;
        }
        while k > lo && self.tail(k - 1) < v {
            k -= 1;
        }
        k
    }

    fn tail_probability_table(&self) -> f64 {
        1.0 - self.cdf[TABLE_MAX]
    }
}

#[derive(Debug)]
struct LawInner {
    name: String,
    support: Support,
    // sorted by value, zero-probability entries removed
    pmf: Vec<(i64, f64)>,
    exact: Vec<(i64, Prob)>,
    variance: Option<f64>,
    alpha: f64,
    beta: f64,
    period: u32,
    norming: NormingSequence,
    sampler: Sampler,
}

/// A validated increment law. Cheap to clone and shareable across threads.
#[derive(Debug, Clone)]
pub struct IncrementLaw {
    inner: Arc<LawInner>,
}

impl PartialEq for IncrementLaw {
    fn eq(&self, other: &Self) -> bool {
        self.inner.name == other.inner.name && self.inner.support == other.inner.support
    }
}

impl fmt::Display for IncrementLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.inner.name)
    }
}

impl TryFrom<LawSpec> for IncrementLaw {
    type Error = Error;
    fn try_from(spec: LawSpec) -> Result<Self> {
        IncrementLaw::new(spec)
    }
}

pub const BUNDLED_LAWS: [&str; 6] = ["simple", "lazy", "sigma4", "power-1.2", "power-1.5", "power-1.8"];

impl IncrementLaw {
    pub fn new(spec: LawSpec) -> Result<Self> {
        let report = validate(&spec);
        if !report.is_valid() {
            return Err(Error::InvalidLaw {
                name: spec.name,
                issues: report.issues.join("; "),
            });
        }
        let period = report.period.unwrap_or(1);
        let (pmf, exact, norming, sampler) = match &spec.support {
            Support::Finite(pairs) => {
                let mut exact: Vec<(i64, Prob)> = pairs
                    .iter()
                    .filter(|(_, p)| *p > Ratio::from_integer(0))
                    .copied()
                    .collect();
                exact.sort_by_key(|(v, _)| *v);
                exact.dedup_by(|b, a| {
                    if a.0 == b.0 {
                        a.1 += b.1;
                        true
                    } else {
                        false
                    }
                });
                let pmf: Vec<(i64, f64)> = exact.iter().map(|&(v, p)| (v, ratio_to_f64(p))).collect();
                let sigma2 = report.variance.expect("finite law has a variance");
                let lcm = exact
                    .iter()
                    .fold(1i64, |acc, (_, p)| acc / gcd(acc, *p.denom()) * *p.denom());
                let sampler = if lcm <= 1 << 16 {
                    let mut table = Vec::with_capacity(lcm as usize);
                    for &(v, p) in &exact {
                        let n = (*p.numer() * (lcm / *p.denom())) as usize;
                        table.extend(std::iter::repeat_n(v, n));
                    }
                    Sampler::Table(table)
                } else {
                    let mut acc = 0.0;
                    let cdf = pmf
                        .iter()
                        .map(|(_, p)| {
                            acc += p;
                            acc
                        })
                        .collect();
                    Sampler::Cumulative {
                        values: pmf.iter().map(|(v, _)| *v).collect(),
                        cdf,
                    }
                };
                (pmf, exact, NormingSequence::Gaussian { sigma2 }, sampler)
            }
            Support::PowerTail { alpha, .. } => {
                let s = alpha + 1.0;
                // P(|X| > x) ~ A x^{-alpha}
                let tail_constant = 1.0 / (alpha * zeta(s));
                let scale = tail_constant * gamma(1.0 - alpha) * (std::f64::consts::PI * alpha / 2.0).cos();
                (
                    Vec::new(),
                    Vec::new(),
                    NormingSequence::Stable { alpha: *alpha, scale },
                    Sampler::PowerTail(PowerTailSampler::new(*alpha)),
                )
            }
        };
        Ok(IncrementLaw {
            inner: Arc::new(LawInner {
                name: spec.name,
                support: spec.support,
                pmf,
                exact,
                variance: report.variance,
                alpha: report.alpha,
                beta: report.beta,
                period,
                norming,
                sampler,
            }),
        })
    }

    /// Rademacher steps `±1`.
    pub fn simple() -> Self {
        Self::new(LawSpec::finite("simple", &[(-1, 1, 2), (1, 1, 2)])).unwrap()
    }

    /// `{-1: 1/4, 0: 1/2, +1: 1/4}`.
    pub fn lazy() -> Self {
        Self::new(LawSpec::finite("lazy", &[(-1, 1, 4), (0, 1, 2), (1, 1, 4)])).unwrap()
    }

    /// An aperiodic two-sided law with variance 4.
    pub fn sigma4() -> Self {
        Self::new(LawSpec::finite(
            "sigma4",
            &[(-3, 1, 6), (-2, 1, 8), (0, 5, 12), (2, 1, 8), (3, 1, 6)],
        ))
        .unwrap()
    }

    /// Symmetric `P(X = ±k) ∝ k^{-alpha-1}`.
    pub fn power_tail(alpha: f64) -> Result<Self> {
        Self::new(LawSpec::power_tail(&format!("power-{alpha}"), alpha))
    }

    pub fn bundled(name: &str) -> Result<Self> {
        match name {
            "simple" => Ok(Self::simple()),
            "lazy" => Ok(Self::lazy()),
            "sigma4" => Ok(Self::sigma4()),
            "power-1.2" => Self::power_tail(1.2),
            "power-1.5" => Self::power_tail(1.5),
            "power-1.8" => Self::power_tail(1.8),
            other => Err(Error::config(format!(
                "unknown law '{other}' (bundled: {})",
                BUNDLED_LAWS.join(", ")
            ))),
        }
    }

    pub fn spec(&self) -> LawSpec {
        LawSpec {
            name: self.inner.name.clone(),
            support: self.inner.support.clone(),
        }
    }

    pub fn name(&self) -> &str {
        &self.inner.name
    }

    pub fn support(&self) -> &Support {
        &self.inner.support
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.inner.support, Support::Finite(_))
    }

    /// `(value, probability)` pairs of a finite law, sorted by value.
    pub fn pmf(&self) -> &[(i64, f64)] {
        &self.inner.pmf
    }

    pub fn pmf_exact(&self) -> &[(i64, Prob)] {
        &self.inner.exact
    }

    pub fn prob(&self, value: i64) -> f64 {
        match &self.inner.support {
            Support::Finite(_) => self
                .inner
                .pmf
                .iter()
                .find(|(v, _)| *v == value)
                .map_or(0.0, |(_, p)| *p),
            Support::PowerTail { alpha, .. } => {
                if value == 0 {
                    0.0
                } else {
                    let s = alpha + 1.0;
                    0.5 * (value.unsigned_abs() as f64).powf(-s) / zeta(s)
                }
            }
        }
    }

    /// Smallest and largest jump of a finite law.
    pub fn jump_range(&self) -> Option<(i64, i64)> {
        let pmf = &self.inner.pmf;
        Some((pmf.first()?.0, pmf.last()?.0))
    }

    /// True when the walk cannot jump over a level on its way down.
    pub fn is_downward_skip_free(&self) -> bool {
        matches!(self.jump_range(), Some((-1, _)))
    }

    /// Finite variance, or `None` for infinite variance.
    pub fn variance(&self) -> Option<f64> {
        self.inner.variance
    }

    pub fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    pub fn beta(&self) -> f64 {
        self.inner.beta
    }

    pub fn period(&self) -> u32 {
        self.inner.period
    }

    pub fn norming(&self) -> NormingSequence {
        self.inner.norming
    }

    /// `P(|X| > k)` for a power-tail law, exact up to Euler–Maclaurin error.
    pub fn abs_tail(&self, k: u64) -> f64 {
        match &self.inner.support {
            Support::Finite(_) => self
                .inner
                .pmf
                .iter()
                .filter(|(v, _)| v.unsigned_abs() > k)
                .map(|(_, p)| p)
                .sum(),
            Support::PowerTail { alpha, .. } => {
                let s = alpha + 1.0;
                zeta_tail(s, k + 1) / zeta(s)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        match &self.inner.sampler {
            Sampler::Table(table) => table[rng.random_range(0..table.len())],
            Sampler::Cumulative { values, cdf } => {
                let u: f64 = rng.random();
                let i = cdf.partition_point(|&c| c <= u).min(values.len() - 1);
                values[i]
            }
            Sampler::PowerTail(s) => {
                let word = rng.next_u64();
                let u = (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                let k = s.sample_abs(u) as i64;
                // low bit is unused by u
                if word & 1 == 0 {
                    k
                } else {
                    -k
                }
            }
        }
    }

    /// Probability that the inverse-CDF sampler leaves its lookup table.
    pub fn sampler_tail_mass(&self) -> f64 {
        match &self.inner.sampler {
            Sampler::PowerTail(s) => s.tail_probability_table(),
            _ => 0.0,
        }
    }
}

/// Draws one increment; the stream is a pure function of the rng state.
pub fn sample_increment<R: Rng + ?Sized>(law: &IncrementLaw, rng: &mut R) -> i64 {
    law.sample(rng)
}

pub fn norming(law: &IncrementLaw, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("norming needs n >= 1"));
    }
    Ok(law.norming().c(n as f64))
}

pub fn inverse_norming(law: &IncrementLaw, level: u64) -> Result<f64> {
    if level == 0 {
        return Err(Error::domain("inverse norming needs N >= 1"));
    }
    Ok(law.norming().c_inv(level as f64))
}
