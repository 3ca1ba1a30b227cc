//! Verdicts: fitting, goodness of fit, transforms, moments and slopes.
//!
//! Every test returns a [`TestReport`] whose pass flag is computed from its
//! own fields, so a report read back from disk can be re-judged.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Default significance level of goodness-of-fit tests.
pub const GOF_LEVEL: f64 = 0.01;
/// Default number of Monte Carlo standard errors allowed.
pub const SIGMAS: f64 = 4.0;
/// Minimum expected count per chi-square bin.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// Passes when `value >= threshold`.
    PValue,
    /// Distance in standard errors beyond any bias band; passes when `value <= threshold`.
    Sigmas,
    /// Absolute error; passes when `value <= threshold`.
    AbsError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub reference: String,
    pub measure: Measure,
    pub value: f64,
    pub threshold: f64,
    pub n: usize,
    pub seed: Option<u64>,
}

impl TestReport {
    pub fn passed(&self) -> bool {
        if self.value.is_nan() {
            return false;
        }
        match self.measure {
            Measure::PValue => self.value >= self.threshold,
            Measure::Sigmas | Measure::AbsError => self.value <= self.threshold,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn abs_error(name: impl Into<String>, estimate: f64, reference: f64, tolerance: f64) -> Self {
        TestReport {
            name: name.into(),
            statistic: estimate,
            reference: format!("{reference}"),
            measure: Measure::AbsError,
            value: (estimate - reference).abs(),
            threshold: tolerance,
            n: 1,
            seed: None,
        }
    }

    /// One line: `PASS name: measure value vs threshold (statistic, n)`.
    pub fn summary_line(&self) -> String {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let (what, cmp) = match self.measure {
            Measure::PValue => ("p", ">="),
            Measure::Sigmas => ("sigmas", "<="),
            Measure::AbsError => ("abs err", "<="),
        };
        format!(
            "{verdict} {}: {what} = {:.4e} (need {cmp} {:.1e}); statistic {:.6} vs {}; n = {}",
            self.name, self.value, self.threshold, self.statistic, self.reference, self.n
        )
    }
}

#[derive(Serialize)]
struct ReportRow<'a> {
    #[serde(flatten)]
    report: &'a TestReport,
    passed: bool,
}

pub fn write_reports_jsonl<W: Write>(mut out: W, reports: &[TestReport]) -> Result<()> {
    for r in reports {
        serde_json::to_writer(
            &mut out,
            &ReportRow {
                report: r,
                passed: r.passed(),
            },
        )?;
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_reports_csv<W: Write>(mut out: W, reports: &[TestReport]) -> Result<()> {
    writeln!(out, "name,statistic,reference,measure,value,threshold,n,seed,passed")?;
    for r in reports {
        let measure = match r.measure {
            Measure::PValue => "p_value",
            Measure::Sigmas => "sigmas",
            Measure::AbsError => "abs_error",
        };
        writeln!(
            out,
            "{},{:.12e},\"{}\",{measure},{:.12e},{:.3e},{},{},{}",
            r.name,
            r.statistic,
            r.reference.replace('"', "'"),
            r.value,
            r.threshold,
            r.n,
            r.seed.map_or(String::new(), |s| s.to_string()),
            r.passed()
        )?;
    }
    Ok(())
}

/// Maximum-likelihood `p` of a geometric law on `{1, 2, ...}` with its
/// delta-method standard error.
pub fn fit_geometric(samples: &[u64]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples to fit".into()));
    }
    if samples.contains(&0) {
        return Err(Error::domain("geometric samples must be >= 1"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().map(|&x| x as f64).sum::<f64>() / n;
    let p = 1.0 / mean;
    Ok((p, p * ((1.0 - p) / n).sqrt()))
}

/// `|estimate - reference|` in units of `stderr`, as a report.
pub fn sigma_report(name: &str, estimate: f64, stderr: f64, reference: f64, n: usize) -> TestReport {
    let dist = (estimate - reference).abs();
    TestReport {
        name: name.to_string(),
        statistic: estimate,
        reference: format!("{reference}"),
        measure: Measure::Sigmas,
        value: if stderr > 0.0 {
            dist / stderr
        } else if dist == 0.0 {
            0.0
        } else {
            f64::INFINITY
        },
        threshold: SIGMAS,
        n,
        seed: None,
    }
}

fn chi_square_p(statistic: f64, df: usize) -> f64 {
    if df == 0 {
        return f64::NAN;
    }
    ChiSquared::new(df as f64).map_or(f64::NAN, |d| d.sf(statistic))
}

/// Pearson chi-square of integer samples against a pmf on `{0, 1, ...}`.
///
/// Consecutive values are merged until each bin expects at least five
/// observations; the last bin absorbs the upper tail.
pub fn chi_square_pmf(name: &str, samples: &[u64], pmf: impl Fn(u64) -> f64, fitted: usize) -> Result<TestReport> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::InsufficientData("no samples".into()));
    }
    let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
    for &s in samples {
        *hist.entry(s).or_default() += 1;
    }
    let nf = n as f64;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut exp_acc, mut obs_acc) = (0.0, 0.0);
    let mut cum = 0.0;
    let mut k = 0u64;
    // stop opening new bins once the remaining mass cannot fill one
    while (1.0 - cum) * nf >= 2.0 * MIN_EXPECTED {
        let p = pmf(k);
        cum += p;
        exp_acc += p * nf;
        obs_acc += *hist.get(&k).unwrap_or(&0) as f64;
        if exp_acc >= MIN_EXPECTED {
            bins.push((obs_acc, exp_acc));
            exp_acc = 0.0;
            obs_acc = 0.0;
        }
        k += 1;
        if k > 100_000_000 {
            return Err(Error::domain("pmf mass does not accumulate"));
        }
    }
    let tail_obs: f64 = hist.range(k..).map(|(_, &c)| c as f64).sum::<f64>() + obs_acc;
    let tail_exp = (1.0 - cum).max(0.0) * nf + exp_acc;
    match bins.last_mut() {
        Some(last) if tail_exp < MIN_EXPECTED => {
            last.0 += tail_obs;
            last.1 += tail_exp;
        }
        _ => bins.push((tail_obs, tail_exp)),
    }
    if bins.len() < 2 + fitted {
        return Err(Error::InsufficientData(format!("only {} chi-square bins", bins.len())));
    }
    let statistic: f64 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let df = bins.len() - 1 - fitted;
    Ok(TestReport {
        name: name.to_string(),
        statistic,
        reference: format!("chi-square, {df} df"),
        measure: Measure::PValue,
        value: chi_square_p(statistic, df),
        threshold: GOF_LEVEL,
        n,
        seed: None,
    })
}

/// Two-sample chi-square homogeneity test on categorical data.
///
/// Categories are taken in sorted order and adjacent ones merged until both
/// samples expect at least five observations per bin.
pub fn chi_square_two_sample<K: Ord + Clone>(name: &str, a: &[K], b: &[K]) -> Result<TestReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    let mut table: BTreeMap<K, (f64, f64)> = BTreeMap::new();
    for k in a {
        table.entry(k.clone()).or_default().0 += 1.0;
    }
    for k in b {
        table.entry(k.clone()).or_default().1 += 1.0;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let share_a = na / (na + nb);
    let share_b = 1.0 - share_a;
    let enough = |x: f64, y: f64| (x + y) * share_a.min(share_b) >= MIN_EXPECTED;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (_, (x, y)) in table {
        acc.0 += x;
        acc.1 += y;
        if enough(acc.0, acc.1) {
            bins.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 + acc.1 > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => bins.push(acc),
        }
    }
    let df = bins.len().saturating_sub(1);
    let statistic: f64 = bins
        .iter()
        .map(|&(x, y)| {
            let d = x * (nb / na).sqrt() - y * (na / nb).sqrt();
            d * d / (x + y)
        })
        .sum();
    let value = if df == 0 { 1.0 } else { chi_square_p(statistic, df) };
    Ok(TestReport {
        name: name.to_string(),
        statistic,
        reference: format!("homogeneity, {df} df"),
        measure: Measure::PValue,
        value,
        threshold: GOF_LEVEL,
        n: a.len() + b.len(),
        seed: None,
    })
}

/// Kolmogorov distribution survival `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn stephens(n: f64, d: f64) -> f64 {
    let s = n.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

/// One-sample Kolmogorov–Smirnov test against a continuous cdf.
pub fn ks_one_sample(name: &str, samples: &[f64], cdf: impl Fn(f64) -> f64, reference: &str) -> Result<TestReport> {
    ks_one_sample_with_allowance(name, samples, cdf, reference, 0.0)
}

/// KS test against a limit law when the sampled law is known to sit within
/// `allowance` (in sup-distance) of it: only the part of the KS distance
/// beyond the allowance is charged to sampling noise.
pub fn ks_one_sample_with_allowance(
    name: &str,
    samples: &[f64],
    cdf: impl Fn(f64) -> f64,
    reference: &str,
    allowance: f64,
) -> Result<TestReport> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d = 0.0f64;
    for (i, &xi) in x.iter().enumerate() {
        let f = cdf(xi);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(TestReport {
        name: name.to_string(),
        statistic: d,
        reference: if allowance > 0.0 {
            format!("{reference} (allowance {allowance:.2e})")
        } else {
            reference.to_string()
        },
        measure: Measure::PValue,
        value: stephens(n, (d - allowance).max(0.0)),
        threshold: GOF_LEVEL,
        n: x.len(),
        seed: None,
    })
}

pub fn ks_two_sample(name: &str, a: &[f64], b: &[f64]) -> Result<TestReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    Ok(TestReport {
        name: name.to_string(),
        statistic: d,
        reference: "two-sample".to_string(),
        measure: Measure::PValue,
        value: stephens(ne, d),
        threshold: GOF_LEVEL,
        n: x.len() + y.len(),
        seed: None,
    })
}

/// Spreads integer counts uniformly over the unit cell below them and
/// divides by `scale`: `(L - U) / scale` with `U` uniform on `[0, 1)`.
///
/// Makes lattice data continuous so a KS test is calibrated; the jitter is
/// reproducible from `seed`.
pub fn jitter_lattice(counts: &[u64], scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    counts
        .iter()
        .map(|&c| {
            let u: f64 = rng.random();
            (c as f64 - u) / scale
        })
        .collect()
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `E exp(-lambda X)` for each `lambda`, with standard errors.
pub fn empirical_laplace(samples: &[f64], lambdas: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    Ok(lambdas
        .iter()
        .map(|&l| {
            let t: Vec<f64> = samples.iter().map(|&x| (-l * x).exp()).collect();
            mean_and_stderr(&t)
        })
        .collect())
}

/// Bootstrap replicates used by [`moment_compare`].
pub const BOOTSTRAP_REPLICATES: usize = 100;

/// Bootstrap standard error of the mean.
pub fn bootstrap_stderr(values: &[f64], replicates: usize, seed: u64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<f64> = (0..replicates)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    let m = means.iter().sum::<f64>() / replicates as f64;
    (means.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (replicates - 1) as f64).sqrt()
}

/// Compares the mean of per-sample products (`x^m`, or `x y` for a mixed
/// moment) with a prediction.
///
/// Passes when `|mean - prediction| <= relative_band |prediction| +
/// tolerance_sigmas * stderr`; the reported value is the excess over the
/// band in bootstrap standard errors.
pub fn mean_compare(
    name: &str,
    products: &[f64],
    prediction: f64,
    tolerance_sigmas: f64,
    relative_band: f64,
    seed: u64,
) -> Result<TestReport> {
    if products.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    let mean = products.iter().sum::<f64>() / products.len() as f64;
    let se = bootstrap_stderr(products, BOOTSTRAP_REPLICATES, seed);
    let excess = ((mean - prediction).abs() - relative_band * prediction.abs()).max(0.0);
    Ok(TestReport {
        name: name.to_string(),
        statistic: mean,
        reference: if relative_band > 0.0 {
            format!("{prediction} (band {:.0}%, stderr {se:.4e})", relative_band * 100.0)
        } else {
            format!("{prediction} (stderr {se:.4e})")
        },
        measure: Measure::Sigmas,
        value: if se > 0.0 {
            excess / se
        } else if excess == 0.0 {
            0.0
        } else {
            f64::INFINITY
        },
        threshold: tolerance_sigmas,
        n: products.len(),
        seed: Some(seed),
    })
}

/// Empirical `order`-th moment against a prediction; see [`mean_compare`].
pub fn moment_compare(
    name: &str,
    samples: &[f64],
    order: u32,
    prediction: f64,
    tolerance_sigmas: f64,
    relative_band: f64,
    seed: u64,
) -> Result<TestReport> {
    if order == 0 || order > 4 {
        return Err(Error::Unsupported(format!("moment order {order} outside 1..=4")));
    }
    let powers: Vec<f64> = samples.iter().map(|x| x.powi(order as i32)).collect();
    mean_compare(name, &powers, prediction, tolerance_sigmas, relative_band, seed)
}

/// Least-squares slope of `log y` against `log x`, with its standard error.
pub fn tail_slope(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientData("need at least two (x, y) pairs".into()));
    }
    if x.iter().chain(y).any(|&v| v <= 0.0 || !v.is_finite()) {
        return Err(Error::domain("tail_slope needs positive finite values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    if lx.len() < 3 {
        return Ok((slope, 0.0));
    }
    let rss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| {
            let r = b - my - slope * (a - mx);
            r * r
        })
        .sum();
    Ok((slope, (rss / (n - 2.0) / sxx).sqrt()))
}

/// Weighted least-squares slope in log-log coordinates, where `rel_err[i]`
/// is the relative standard error of `y[i]`.
pub fn weighted_tail_slope(x: &[f64], y: &[f64], rel_err: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() != rel_err.len() || x.len() < 2 {
        return Err(Error::InsufficientData("need at least two (x, y) pairs".into()));
    }
    if x.iter().chain(y).chain(rel_err).any(|&v| v <= 0.0 || !v.is_finite()) {
        return Err(Error::domain("weighted_tail_slope needs positive finite values"));
    }
    let w: Vec<f64> = rel_err.iter().map(|e| 1.0 / (e * e)).collect();
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let sw: f64 = w.iter().sum();
    let mx = lx.iter().zip(&w).map(|(a, w)| a * w).sum::<f64>() / sw;
    let my = ly.iter().zip(&w).map(|(a, w)| a * w).sum::<f64>() / sw;
    let sxx: f64 = lx.iter().zip(&w).map(|(a, w)| w * (a - mx) * (a - mx)).sum();
    let sxy: f64 = lx
        .iter()
        .zip(&ly)
        .zip(&w)
        .map(|((a, b), w)| w * (a - mx) * (b - my))
        .sum();
    Ok((sxy / sxx, (1.0 / sxx).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn exp_draws(rate: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                -(1.0 - u).ln() / rate
            })
            .collect()
    }

    fn geometric_draws(p: f64, n: usize, seed: u64) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                ((1.0 - u).ln() / (1.0 - p).ln()).floor() as u64 + 1
            })
            .collect()
    }

    #[test]
    fn constant_ones_fit_p_one() {
        let (p, se) = fit_geometric(&[1, 1, 1, 1]).unwrap();
        assert_eq!(p, 1.0);
        assert_eq!(se, 0.0);
        assert!(fit_geometric(&[]).is_err());
        assert!(fit_geometric(&[0, 1]).is_err());
    }

    #[test]
    fn geometric_self_fit() {
        let s = geometric_draws(0.3, 100_000, 1);
        let (p, se) = fit_geometric(&s).unwrap();
        assert!((p - 0.3).abs() < 4.0 * se);
    }

    #[test]
    fn ks_self_test_and_power() {
        let s = exp_draws(0.5, 100_000, 2);
        let good = ks_one_sample("ks", &s, |x| 1.0 - (-0.5 * x).exp(), "Exp(0.5)").unwrap();
        assert!(good.passed(), "{}", good.summary_line());
        let bad = ks_one_sample("ks", &s, |x| 1.0 - (-x).exp(), "Exp(1)").unwrap();
        assert!(!bad.passed());
    }

    #[test]
    fn kolmogorov_values() {
        // P(K > 1.36) ~ 0.049, P(K > 1.63) ~ 0.0098
        assert_abs_diff_eq!(kolmogorov_sf(1.36), 0.0494, epsilon = 1e-3);
        assert_abs_diff_eq!(kolmogorov_sf(1.628), 0.01, epsilon = 5e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn chi_square_self_test() {
        let p = 0.05;
        let s = geometric_draws(p, 50_000, 3);
        let pmf = |k: u64| if k == 0 { 0.0 } else { p * (1.0 - p).powi(k as i32 - 1) };
        let r = chi_square_pmf("geom", &s, pmf, 0).unwrap();
        assert!(r.passed(), "{}", r.summary_line());
        let wrong = |k: u64| if k == 0 { 0.0 } else { 0.06 * 0.94f64.powi(k as i32 - 1) };
        assert!(!chi_square_pmf("geom", &s, wrong, 0).unwrap().passed());
    }

    #[test]
    fn two_sample_tests() {
        let a = geometric_draws(0.2, 20_000, 4);
        let b = geometric_draws(0.2, 20_000, 5);
        let c = geometric_draws(0.22, 20_000, 6);
        assert!(chi_square_two_sample("same", &a, &b).unwrap().passed());
        assert!(!chi_square_two_sample("diff", &a, &c).unwrap().passed());
        let x = exp_draws(1.0, 20_000, 7);
        let y = exp_draws(1.0, 20_000, 8);
        let z = exp_draws(1.1, 20_000, 9);
        assert!(ks_two_sample("same", &x, &y).unwrap().passed());
        assert!(!ks_two_sample("diff", &x, &z).unwrap().passed());
    }

    #[test]
    fn laplace_of_zeros_and_exponentials() {
        let zeros = vec![0.0; 10];
        for (v, se) in empirical_laplace(&zeros, &[0.5, 1.0, 7.0]).unwrap() {
            assert_eq!(v, 1.0);
            assert_eq!(se, 0.0);
        }
        let s = exp_draws(0.5, 100_000, 10);
        let (v, se) = empirical_laplace(&s, &[1.0]).unwrap()[0];
        assert!((v - 1.0 / 3.0).abs() < 4.0 * se);
    }

    #[test]
    fn moments() {
        let s = exp_draws(1.0, 50_000, 11);
        // E X^2 = 2 for Exp(1)
        let r = moment_compare("m2", &s, 2, 2.0, 4.0, 0.0, 1).unwrap();
        assert!(r.passed(), "{}", r.summary_line());
        assert!(!moment_compare("m2", &s, 2, 2.5, 4.0, 0.0, 1).unwrap().passed());
        assert!(moment_compare("m2", &s, 2, 2.1, 4.0, 0.1, 1).unwrap().passed());
        assert!(moment_compare("m5", &s, 5, 1.0, 4.0, 0.0, 1).is_err());
    }

    #[test]
    fn slopes() {
        let x = [1.0, 2.0, 4.0, 8.0, 16.0];
        let y: Vec<f64> = x.iter().map(|v| 1.0 / (2.0 * v)).collect();
        let (s, se) = tail_slope(&x, &y).unwrap();
        assert_abs_diff_eq!(s, -1.0, epsilon = 1e-10);
        assert!(se < 1e-10);
        assert!(tail_slope(&[1.0, 2.0], &[1.0, 0.0]).is_err());
        let (w, _) = weighted_tail_slope(&x, &y, &[0.1; 5]).unwrap();
        assert_abs_diff_eq!(w, -1.0, epsilon = 1e-10);
    }

    #[test]
    fn reports_round_trip_through_json() {
        let r = TestReport::abs_error("q", 2.0000001, 2.0, 1e-6);
        assert!(r.passed());
        let mut buf = Vec::new();
        write_reports_jsonl(&mut buf, std::slice::from_ref(&r)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("\"passed\":true"));
        let back: TestReport = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(back, r);
    }
}
