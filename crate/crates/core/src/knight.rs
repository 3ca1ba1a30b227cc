//! Knight's up-crossing chain for the simple reflected walk.
//!
//! `Q_n` counts up-crossings from `n` to `n + 1` during a fixed number of
//! excursions away from 0. Each up-crossing of `n - 1 -> n` is followed by a
//! geometric(1/2) number of up-crossings `n -> n + 1` before the walk falls
//! back, so `Q` is a critical Galton–Watson process with offspring law
//! `P(k) = 2^{-(k+1)}` and transition kernel
//! `p(i, j) = binom(i + j - 1, j) 2^{-i-j}`.

use std::io::Write;

use rand::Rng;
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::parallel::replicate;
use crate::sim::Simulator;
use crate::stats::{chi_square_pmf, mean_compare, TestReport};
use crate::walk::IncrementLaw;

/// Largest dropped mass accepted by [`exact_q_pmf`].
pub const PMF_TOLERANCE: f64 = 1e-10;

/// `p(i, j) = binom(i + j - 1, j) 2^{-i-j}`, with `p(0, 0) = 1`.
pub fn kernel_p(i: u64, j: u64) -> f64 {
    if i == 0 {
        return if j == 0 { 1.0 } else { 0.0 };
    }
    (ln_binomial(i + j - 1, j) - (i + j) as f64 * std::f64::consts::LN_2).exp()
}

/// The same kernel written as `(-1)^j binom(-i, j) 2^{-i-j}`, evaluated
/// term by term. Only meant for checking [`kernel_p`] on small arguments.
pub fn kernel_p_alternating(i: u64, j: u64) -> f64 {
    // binom(-i, j) = prod_{t < j} (-i - t) / (t + 1)
    let mut binom = 1.0;
    for t in 0..j {
        binom *= (-(i as f64) - t as f64) / (t + 1) as f64;
    }
    let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * binom * 0.5f64.powi((i + j) as i32)
}

/// Row `i` of the kernel up to `j_max`, with the mass beyond it.
pub fn kernel_row(i: u64, j_max: u64) -> (Vec<f64>, f64) {
    let row: Vec<f64> = (0..=j_max).map(|j| kernel_p(i, j)).collect();
    let tail = (1.0 - row.iter().sum::<f64>()).max(0.0);
    (row, tail)
}

/// `i` geometric(1/2) offspring counts summed: the number of zeros seen
/// before the `i`-th one in a stream of fair bits.
pub fn offspring_sum<R: Rng + ?Sized>(i: u64, rng: &mut R) -> u64 {
    let mut need = i;
    let mut zeros = 0u64;
    while need > 0 {
        let mut w = rng.next_u64();
        let ones = w.count_ones() as u64;
        if ones < need {
            need -= ones;
            zeros += 64 - ones;
            continue;
        }
        for _ in 1..need {
            w &= w - 1;
        }
        let pos = w.trailing_zeros() as u64;
        zeros += pos + 1 - need;
        need = 0;
    }
    zeros
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QTrajectory {
    pub states: Vec<u64>,
    /// Set when the population exceeded the bound; the trajectory stops there.
    pub truncated: bool,
}

/// Branching realisation of `Q_0 = m, ..., Q_{n_max}`.
pub fn simulate_q<R: Rng + ?Sized>(m: u64, n_max: usize, bound: u64, rng: &mut R) -> QTrajectory {
    let mut states = Vec::with_capacity(n_max + 1);
    states.push(m);
    let mut q = m;
    for _ in 0..n_max {
        if q > bound {
            return QTrajectory {
                states,
                truncated: true,
            };
        }
        q = offspring_sum(q, rng);
        states.push(q);
    }
    QTrajectory {
        states,
        truncated: false,
    }
}

fn kernel_matrix(cap: usize) -> Vec<Vec<f64>> {
    (0..=cap as u64).map(|i| kernel_row(i, cap as u64).0).collect()
}

fn step_pmf(pmf: &[f64], kernel: &[Vec<f64>]) -> Vec<f64> {
    let cap = kernel.len() - 1;
    let mut next = vec![0.0; cap + 1];
    for (i, &p) in pmf.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (n, k) in next.iter_mut().zip(&kernel[i]) {
            *n += p * k;
        }
    }
    next
}

/// Law of `Q_n` started at `m`, on `0..=support_cap`.
pub fn exact_q_pmf(m: u64, n: usize, support_cap: usize) -> Result<Vec<f64>> {
    q_pmfs(m, n, support_cap).map(|mut v| v.pop().unwrap())
}

/// Laws of `Q_0, ..., Q_n`.
fn q_pmfs(m: u64, n: usize, support_cap: usize) -> Result<Vec<Vec<f64>>> {
    if m as usize > support_cap {
        return Err(Error::domain(format!("start {m} above the support cap {support_cap}")));
    }
    let kernel = kernel_matrix(support_cap);
    let mut pmf = vec![0.0; support_cap + 1];
    pmf[m as usize] = 1.0;
    let mut out = vec![pmf.clone()];
    for _ in 0..n {
        pmf = step_pmf(&pmf, &kernel);
        out.push(pmf.clone());
    }
    let dropped = 1.0 - pmf.iter().sum::<f64>();
    if dropped > PMF_TOLERANCE {
        return Err(Error::Truncation {
            what: format!("law of Q_{n} from {m} on 0..={support_cap}"),
            achieved: dropped,
            tolerance: PMF_TOLERANCE,
        });
    }
    Ok(out)
}

/// Law of `Q_n + Q_{n-1}` from the joint law of consecutive states.
pub fn sum_consecutive_pmf(m: u64, n: usize, support_cap: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::domain("Q_n + Q_{n-1} needs n >= 1"));
    }
    let laws = q_pmfs(m, n - 1, support_cap)?;
    let prev = laws.last().unwrap();
    let mut out = vec![0.0; 2 * support_cap + 1];
    for (i, &p) in prev.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for j in 0..=support_cap {
            out[i + j] += p * kernel_p(i as u64, j as u64);
        }
    }
    let dropped = 1.0 - out.iter().sum::<f64>();
    if dropped > PMF_TOLERANCE {
        return Err(Error::Truncation {
            what: format!("law of Q_{n} + Q_{} from {m}", n - 1),
            achieved: dropped,
            tolerance: PMF_TOLERANCE,
        });
    }
    Ok(out)
}

/// Extinction probability `P(Q_n = 0)` from `Q_0 = 1`, by iterating the
/// offspring generating function `f(s) = 1 / (2 - s)` at 0.
pub fn extinction_by_generating_function(n: usize) -> f64 {
    let mut s = 0.0;
    for _ in 0..n {
        s = 1.0 / (2.0 - s);
    }
    s
}

pub fn write_pmf_csv<W: Write>(mut out: W, pmf: &[f64]) -> Result<()> {
    writeln!(out, "state,probability")?;
    for (k, p) in pmf.iter().enumerate() {
        writeln!(out, "{k},{p:.15e}")?;
    }
    Ok(())
}

/// Support cap large enough for `Q_n + Q_{n-1}` from `m` at the default
/// tolerance.
pub fn default_support_cap(m: u64, n: usize) -> usize {
    // Q_n has mean m and variance 2 m n, with an exponential tail of scale ~2n.
    (m as usize + 1) * 40 + 60 * n.max(1)
}

/// Local time at level `n` of the simple reflected walk over `m`
/// excursions away from 0, compared with the exact law of `Q_n + Q_{n-1}`.
pub fn identity_check(
    law: &IncrementLaw,
    m: u64,
    n: u64,
    samples: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<TestReport>> {
    if *law != IncrementLaw::simple() {
        return Err(Error::Unsupported(format!(
            "the up-crossing identity holds for the simple walk only, got '{}'",
            law.name()
        )));
    }
    if n == 0 || m == 0 {
        return Err(Error::domain("identity check needs m >= 1 and n >= 1"));
    }
    let sim = Simulator::new(law, &[n], u64::MAX)?;
    let counts = replicate(seed, samples, workers, |rng, _| {
        sim.reflected_excursions(m, rng).counts[0]
    })?;
    let pmf = sum_consecutive_pmf(m, n as usize, default_support_cap(m, n as usize))?;
    let name = format!("knight m={m} n={n}");
    let chi = chi_square_pmf(
        &format!("{name} chi-square"),
        &counts,
        |k| pmf.get(k as usize).copied().unwrap_or(0.0),
        0,
    )?
    .with_seed(seed);
    let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let mean = mean_compare(&format!("{name} mean vs 2m"), &values, 2.0 * m as f64, 4.0, 0.0, seed)?;
    Ok(vec![chi, mean])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel_p(0, 0), 1.0);
        assert_eq!(kernel_p(0, 3), 0.0);
        assert_abs_diff_eq!(kernel_p(1, 0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(kernel_p(1, 1), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(kernel_p(1, 2), 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(kernel_p(2, 1), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn both_kernel_forms_agree() {
        for i in 0..15 {
            for j in 0..25 {
                let a = kernel_p(i, j);
                let b = kernel_p_alternating(i, j);
                assert!((a - b).abs() <= 1e-13 * a.max(1e-300) + 1e-300, "({i},{j}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn rows_are_stochastic_and_mean_preserving() {
        for i in 0..30u64 {
            let (row, _) = kernel_row(i, 2000);
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            let mean: f64 = row.iter().enumerate().map(|(j, p)| j as f64 * p).sum();
            assert_abs_diff_eq!(mean, i as f64, epsilon = 1e-10);
        }
    }

    #[test]
    fn extinction_matches_generating_function() {
        let laws = q_pmfs(1, 20, 1500).unwrap();
        for (n, law) in laws.iter().enumerate() {
            let gf = extinction_by_generating_function(n);
            assert_abs_diff_eq!(law[0], n as f64 / (n as f64 + 1.0), epsilon = 1e-9);
            assert_abs_diff_eq!(gf, n as f64 / (n as f64 + 1.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn one_step_from_one_is_geometric() {
        let pmf = exact_q_pmf(1, 1, 100).unwrap();
        for (j, p) in pmf.iter().enumerate().take(30) {
            assert_abs_diff_eq!(*p, 0.5f64.powi(j as i32 + 1), epsilon = 1e-15);
        }
        assert_eq!(exact_q_pmf(4, 0, 10).unwrap()[4], 1.0);
    }

    #[test]
    fn small_cap_is_a_truncation_error() {
        assert!(matches!(exact_q_pmf(3, 5, 10), Err(Error::Truncation { .. })));
    }

    #[test]
    fn zero_is_absorbing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = simulate_q(0, 10, 1 << 20, &mut rng);
        assert!(t.states.iter().all(|&q| q == 0));
    }

    #[test]
    fn offspring_sum_has_the_kernel_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws: Vec<u64> = (0..200_000).map(|_| offspring_sum(3, &mut rng)).collect();
        let r = chi_square_pmf("offspring", &draws, |j| kernel_p(3, j), 0).unwrap();
        assert!(r.passed(), "{}", r.summary_line());
    }

    #[test]
    fn non_simple_walk_is_unsupported() {
        assert!(matches!(
            identity_check(&IncrementLaw::lazy(), 1, 1, 10, 0, 1),
            Err(Error::Unsupported(_))
        ));
    }
}
