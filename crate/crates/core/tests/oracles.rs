//! Library outputs against independent closed forms and against a second,
//! unrelated route through the library.

use approx::assert_abs_diff_eq;
use ltlab::green::{escape_prob, green_sum, green_sum_with, hitting_prob, StripDp, TimeZero};
use ltlab::knight::{exact_q_pmf, simulate_q, sum_consecutive_pmf};
use ltlab::ladder::{compute_u, exact_ladder_pmf, renewal_table, Cumulative, LadderKind};
use ltlab::limit::{a_20_closed, field_marginal_laplace, kac_moment_value};
use ltlab::stats::chi_square_pmf;
use ltlab::walk::{IncrementLaw, LawSpec, Support};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn green_incl(law: &IncrementLaw, x: usize, y: usize) -> f64 {
    green_sum_with(law, x, y, 1e-6, TimeZero::Include).unwrap().value
}

fn negated(law: &IncrementLaw) -> IncrementLaw {
    let Support::Finite(pairs) = law.support() else {
        panic!("finite law expected")
    };
    let flipped: Vec<_> = pairs.iter().map(|&(v, p)| (-v, p)).collect();
    IncrementLaw::new(LawSpec {
        name: format!("{}-negated", law.name()),
        support: Support::Finite(flipped),
    })
    .unwrap()
}

fn test_laws() -> Vec<IncrementLaw> {
    vec![
        IncrementLaw::simple(),
        IncrementLaw::lazy(),
        IncrementLaw::sigma4(),
        IncrementLaw::new(LawSpec::finite("skewed", &[(-2, 1, 4), (1, 1, 2), (0, 1, 4)])).unwrap(),
    ]
}

#[test]
fn simple_and_lazy_green_functions_have_closed_forms() {
    for (x, y) in [(1, 1), (3, 7), (7, 3), (20, 20), (15, 40)] {
        let m = x.min(y) as f64;
        assert_abs_diff_eq!(green_incl(&IncrementLaw::simple(), x, y), 2.0 * m, epsilon = 1e-9 * m);
        // the lazy walk holds for two steps on average
        assert_abs_diff_eq!(green_incl(&IncrementLaw::lazy(), x, y), 4.0 * m, epsilon = 1e-9 * m);
    }
}

#[test]
fn gamblers_ruin_and_escape_probabilities() {
    let law = IncrementLaw::simple();
    for n in [1usize, 5, 50, 200] {
        assert_abs_diff_eq!(escape_prob(&law, n).unwrap(), 1.0 / (2.0 * n as f64), epsilon = 1e-12);
        for x in 1..=n.min(10) {
            assert_abs_diff_eq!(hitting_prob(&law, x, n).unwrap(), x as f64 / n as f64, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(hitting_prob(&law, 0, n).unwrap(), 0.5 / n as f64, epsilon = 1e-12);
    }
}

#[test]
fn expected_visits_are_the_inverse_escape_probability() {
    for law in test_laws() {
        for n in [1usize, 7, 30] {
            let visits = green_incl(&law, n, n);
            assert_abs_diff_eq!(visits * escape_prob(&law, n).unwrap(), 1.0, epsilon = 1e-9);
        }
    }
}

/// `P(chi+ = k) = sum_{j >= 1} G'(1, j) P(X = k + j - 1)` where `G'` is the
/// Green function (time 0 included) of the negated walk killed below 1.
#[test]
fn ascending_ladder_law_matches_a_green_function_route() {
    for law in test_laws() {
        let (lo, hi) = law.jump_range().unwrap();
        let up = exact_ladder_pmf(&law, LadderKind::StrictAscending, hi as usize).unwrap();
        let neg = negated(&law);
        let reach = (-lo) as usize + hi as usize + 1;
        for k in 1..=hi as usize {
            let oracle: f64 = (1..=reach)
                .map(|j| green_incl(&neg, 1, j) * law.prob((k + j - 1) as i64))
                .sum();
            assert_abs_diff_eq!(up.prob(k), oracle, epsilon = 1e-9);
        }
    }
}

/// `P(chi- = k) = P(X = -k) + sum_{y >= 1} G0(y) P(X = -k - y)` with
/// `G0(y) = sum_{z >= 1} P(X = z) G(z, y)`.
#[test]
fn descending_ladder_law_matches_a_green_function_route() {
    for law in test_laws() {
        let (lo, hi) = law.jump_range().unwrap();
        let down = exact_ladder_pmf(&law, LadderKind::WeakDescending, (-lo) as usize).unwrap();
        for k in 0..=(-lo) as usize {
            let mut oracle = law.prob(-(k as i64));
            for y in 1..=(-lo) as usize {
                let g0: f64 = (1..=hi as usize)
                    .map(|z| law.prob(z as i64) * green_incl(&law, z, y))
                    .sum();
                oracle += g0 * law.prob(-((k + y) as i64));
            }
            assert_abs_diff_eq!(down.prob(k), oracle, epsilon = 1e-9);
        }
    }
}

#[test]
fn hitting_identity_holds_for_every_start() {
    for law in test_laws() {
        let (lo, hi) = law.jump_range().unwrap();
        let up = exact_ladder_pmf(&law, LadderKind::StrictAscending, hi as usize).unwrap();
        let down = exact_ladder_pmf(&law, LadderKind::WeakDescending, (-lo) as usize).unwrap();
        let h_plus = renewal_table(&up, 60, Cumulative::LessEq).unwrap();
        for n in [1usize, 10, 60] {
            let visits = green_incl(&law, n, n);
            for x in 0..=n {
                let u = compute_u(x, n, &h_plus, &down).unwrap();
                assert_abs_diff_eq!(hitting_prob(&law, x, n).unwrap(), u / visits, epsilon = 1e-9);
            }
        }
    }
}

#[test]
fn first_moment_from_zero_is_the_renewal_mass() {
    for law in test_laws() {
        let (_, hi) = law.jump_range().unwrap();
        let up = exact_ladder_pmf(&law, LadderKind::StrictAscending, hi as usize).unwrap();
        let h_plus = renewal_table(&up, 50, Cumulative::LessEq).unwrap();
        for n in [1usize, 13, 50] {
            let by_green = hitting_prob(&law, 0, n).unwrap() / escape_prob(&law, n).unwrap();
            assert_abs_diff_eq!(h_plus.h(n).unwrap(), by_green, epsilon = 1e-9);
        }
    }
}

#[test]
fn strip_propagation_converges_to_the_green_sum() {
    let law = IncrementLaw::sigma4();
    let exact = green_sum(&law, 5, 9, 1e-9).unwrap().value;
    let mut dp = StripDp::new(&law, 5, 400).unwrap();
    let partial = dp.green_partial(9, 200_000);
    assert!(partial <= exact + 1e-9);
    // paths leaving the strip are lost, about 2.5% of the visits here
    assert!(exact - partial < 0.04 * exact, "{partial} vs {exact}");
}

/// `E_x[L(a) L(b)] = G(x, a) G(a, b) + G(x, b) G(b, a)` for `a != b`; for the
/// simple walk with `x = b = N`, `a = N/2` this is `3 N^2`, the Kac sum.
#[test]
fn exact_mixed_moment_matches_the_kac_sum() {
    let law = IncrementLaw::simple();
    let n = 200usize;
    let (a, b) = (n / 2, n);
    let exact = green_incl(&law, n, a) * green_incl(&law, a, b) + green_incl(&law, n, b) * green_incl(&law, b, a);
    let kac = (n * n) as f64 * kac_moment_value(1.0, &[0.5, 1.0], a_20_closed).unwrap();
    assert_abs_diff_eq!(exact, kac, epsilon = 1e-6 * kac);
}

/// The compound-Poisson Laplace transform against a numerical convolution of
/// exponential jump densities.
#[test]
fn marginal_laplace_matches_numerical_convolution() {
    let (u, x0) = (1.0, 1.0);
    let rate = x0 / (2.0 * u);
    let mean_jump = 2.0 * u;
    let h = 0.01;
    let len = (80.0 / h) as usize;
    let jump: Vec<f64> = (0..len)
        .map(|i| (-(i as f64) * h / mean_jump).exp() / mean_jump)
        .collect();
    let mut fold = jump.clone();
    let mut density = vec![0.0; len];
    let mut poisson = (-rate).exp();
    for k in 1..40 {
        poisson *= rate / k as f64;
        for (d, f) in density.iter_mut().zip(&fold) {
            *d += poisson * f;
        }
        // trapezoid convolution fold * jump
        let mut next = vec![0.0; len];
        for (i, slot) in next.iter_mut().enumerate() {
            let mut s = 0.0;
            for j in 0..=i {
                let w = if j == 0 || j == i { 0.5 } else { 1.0 };
                s += w * fold[j] * jump[i - j];
            }
            *slot = s * h;
        }
        fold = next;
        if poisson < 1e-14 {
            break;
        }
    }
    for lambda in [0.5, 1.0, 2.0] {
        let atom = (-rate).exp();
        let continuous: f64 = density
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let w = if i == 0 { 0.5 } else { 1.0 };
                w * d * (-lambda * i as f64 * h).exp() * h
            })
            .sum();
        assert_abs_diff_eq!(atom + continuous, field_marginal_laplace(u, lambda, x0), epsilon = 2e-3);
    }
}

/// Exact finite-N law of the simple reflected field at one level: a
/// binomial number of excursions reach the level and each adds a
/// geometric number of visits.
#[test]
fn finite_n_field_laplace_is_close_to_the_limit() {
    let law = IncrementLaw::simple();
    let n = 500usize;
    for u in [0.5, 1.0, 2.0] {
        let level = (u * n as f64) as usize;
        let q = hitting_prob(&law, 0, level).unwrap();
        let p = escape_prob(&law, level).unwrap();
        for lambda in [0.5, 1.0, 2.0] {
            let s = lambda / n as f64;
            let geo = p * (-s).exp() / (1.0 - (1.0 - p) * (-s).exp());
            let exact = (1.0 - q + q * geo).powi(n as i32);
            assert_abs_diff_eq!(exact, field_marginal_laplace(u, lambda, 1.0), epsilon = 5e-3);
        }
    }
}

#[test]
fn branching_simulation_matches_the_exact_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (m, n) in [(1u64, 3usize), (4, 2)] {
        let pmf = exact_q_pmf(m, n, 400).unwrap();
        let samples: Vec<u64> = (0..40_000)
            .map(|_| simulate_q(m, n, 10_000, &mut rng).states[n])
            .collect();
        let r = chi_square_pmf("q", &samples, |k| pmf.get(k as usize).copied().unwrap_or(0.0), 0).unwrap();
        assert!(r.passed(), "{}", r.summary_line());
    }
}

#[test]
fn consecutive_sum_has_mean_twice_the_start() {
    for m in [1u64, 3, 6] {
        for n in [1usize, 2, 5] {
            let pmf = sum_consecutive_pmf(m, n, 600).unwrap();
            let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
            assert_abs_diff_eq!(mean, 2.0 * m as f64, epsilon = 1e-7);
        }
    }
}
