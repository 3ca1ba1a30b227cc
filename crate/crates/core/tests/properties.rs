//! Invariants over randomly generated laws, points and configs.

use ltlab::experiment::{ExperimentConfig, ExperimentId};
use ltlab::green::{escape_prob, green_sum, green_sum_with, hitting_prob, StripDp, TimeZero};
use ltlab::ladder::{compute_u, exact_ladder_pmf, renewal_table, Cumulative, LadderKind};
use ltlab::limit::{a_20_closed, field_marginal_laplace, kac_moment_value};
use ltlab::parallel::replicate;
use ltlab::walk::{IncrementLaw, LawSpec};
use proptest::prelude::*;
use rand::RngExt;

/// Mean-zero laws on `{-3..3}` with integer weights: negative weights are
/// scaled by the positive first moment and vice versa.
fn mean_zero_law() -> impl Strategy<Value = IncrementLaw> {
    (prop::array::uniform3(0i64..4), prop::array::uniform3(0i64..4), 0i64..4).prop_filter_map(
        "needs both signs and an aperiodic support",
        |(neg, pos, zero)| {
            let first = |w: &[i64; 3]| w.iter().enumerate().map(|(k, &c)| (k as i64 + 1) * c).sum::<i64>();
            let (down, up) = (first(&neg), first(&pos));
            if down == 0 || up == 0 {
                return None;
            }
            let mut weights: Vec<(i64, i64)> = Vec::new();
            for k in 0..3 {
                weights.push((-(k as i64) - 1, neg[k] * up));
                weights.push((k as i64 + 1, pos[k] * down));
            }
            weights.push((0, zero));
            weights.retain(|&(_, w)| w > 0);
            let total: i64 = weights.iter().map(|&(_, w)| w).sum();
            let triples: Vec<(i64, i64, i64)> = weights.iter().map(|&(v, w)| (v, w, total)).collect();
            IncrementLaw::new(LawSpec::finite("random", &triples)).ok()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hitting_identity_holds(law in mean_zero_law(), level in 1usize..25) {
        let (lo, hi) = law.jump_range().unwrap();
        let up = exact_ladder_pmf(&law, LadderKind::StrictAscending, hi as usize).unwrap();
        let down = exact_ladder_pmf(&law, LadderKind::WeakDescending, (-lo) as usize).unwrap();
        let h_plus = renewal_table(&up, level, Cumulative::LessEq).unwrap();
        let visits = 1.0 / escape_prob(&law, level).unwrap();
        for x in 0..=level {
            let u = compute_u(x, level, &h_plus, &down).unwrap();
            let p = hitting_prob(&law, x, level).unwrap();
            prop_assert!((p - u / visits).abs() < 1e-8, "x = {x}: {p} vs {}", u / visits);
        }
    }

    #[test]
    fn ladder_laws_are_probability_vectors(law in mean_zero_law()) {
        let (lo, hi) = law.jump_range().unwrap();
        let up = exact_ladder_pmf(&law, LadderKind::StrictAscending, hi as usize).unwrap();
        let down = exact_ladder_pmf(&law, LadderKind::WeakDescending, (-lo) as usize).unwrap();
        for chi in [&up, &down] {
            let total: f64 = (0..=chi.max_height()).map(|k| chi.prob(k)).sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
            prop_assert!((0..=chi.max_height()).all(|k| chi.prob(k) >= -1e-12));
        }
        prop_assert_eq!(up.prob(0), 0.0);
    }

    #[test]
    fn renewal_density_is_a_probability(law in mean_zero_law()) {
        let (_, hi) = law.jump_range().unwrap();
        let up = exact_ladder_pmf(&law, LadderKind::StrictAscending, hi as usize).unwrap();
        let table = renewal_table(&up, 40, Cumulative::LessEq).unwrap();
        for x in 0..=40 {
            let h = table.h(x).unwrap();
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&h), "h+({x}) = {h}");
        }
    }

    #[test]
    fn strip_propagation_brackets_the_green_sum(law in mean_zero_law(), x in 1usize..8, y in 1usize..8) {
        let exact = green_sum(&law, x, y, 1e-8).unwrap().value;
        let mut dp = StripDp::new(&law, x, 80).unwrap();
        let short = dp.green_partial(y, 200);
        let long = short + dp.green_partial(y, 2_000);
        prop_assert!(short <= long + 1e-12);
        prop_assert!(long <= exact + 1e-9, "{long} > {exact}");
    }

    #[test]
    fn green_with_time_zero_adds_one_on_the_diagonal(law in mean_zero_law(), x in 1usize..20) {
        let excl = green_sum(&law, x, x, 1e-8).unwrap().value;
        let incl = green_sum_with(&law, x, x, 1e-8, TimeZero::Include).unwrap().value;
        prop_assert!((incl - excl - 1.0).abs() < 1e-9);
    }

    #[test]
    fn kac_moment_is_permutation_invariant(
        u0 in 0.1f64..3.0,
        mut u in prop::collection::vec(0.1f64..3.0, 1..5),
        rotate in 0usize..5,
    ) {
        let base = kac_moment_value(u0, &u, a_20_closed).unwrap();
        let len = u.len();
        u.rotate_left(rotate % len);
        u.reverse();
        let permuted = kac_moment_value(u0, &u, a_20_closed).unwrap();
        prop_assert!((base - permuted).abs() <= 1e-10 * base.abs().max(1.0));
    }

    #[test]
    fn kac_moment_is_homogeneous(
        u0 in 0.1f64..3.0,
        u in prop::collection::vec(0.1f64..3.0, 1..5),
        scale in 0.2f64..5.0,
    ) {
        // 2 min(u, v) has degree one, so the m-th moment has degree m
        let base = kac_moment_value(u0, &u, a_20_closed).unwrap();
        let scaled: Vec<f64> = u.iter().map(|x| x * scale).collect();
        let value = kac_moment_value(u0 * scale, &scaled, a_20_closed).unwrap();
        let expected = base * scale.powi(u.len() as i32);
        prop_assert!((value - expected).abs() <= 1e-9 * expected);
    }

    #[test]
    fn marginal_laplace_is_bounded_and_decreasing(
        u in 0.05f64..5.0,
        lambda in 0.0f64..10.0,
        step in 0.01f64..3.0,
        x0 in 0.1f64..3.0,
    ) {
        let at = field_marginal_laplace(u, lambda, x0);
        let next = field_marginal_laplace(u, lambda + step, x0);
        let atom = (-x0 / (2.0 * u)).exp();
        prop_assert!(next <= at);
        prop_assert!(at <= 1.0 && next >= atom - 1e-15);
    }

    #[test]
    fn replicates_do_not_depend_on_worker_count(master in any::<u64>(), count in 0usize..200, workers in 2usize..6) {
        let draw = |rng: &mut rand_chacha::ChaCha8Rng, i: usize| (i, rng.random::<u64>());
        let serial = replicate(master, count, 1, draw).unwrap();
        let parallel = replicate(master, count, workers, draw).unwrap();
        prop_assert_eq!(serial, parallel);
    }

    #[test]
    fn config_round_trips_through_ini(
        id_index in 0usize..ExperimentId::ALL.len(),
        seed in any::<u64>(),
        levels in prop::option::of(prop::collection::vec(1u64..10_000, 1..5)),
        u_list in prop::option::of(prop::collection::vec(0.01f64..10.0, 1..5)),
        samples in prop::option::of(1usize..1_000_000),
        cap in prop::option::of(1u64..1_000_000_000),
        workers in prop::option::of(1usize..16),
        custom in any::<bool>(),
    ) {
        let mut cfg = ExperimentConfig::new(ExperimentId::ALL[id_index]).with_seed(seed);
        cfg.levels = levels;
        cfg.u_list = u_list;
        cfg.samples = samples;
        cfg.cap = cap;
        cfg.workers = workers;
        if custom {
            let law = IncrementLaw::new(LawSpec::finite("custom", &[(-2, 1, 4), (0, 1, 4), (1, 1, 2)])).unwrap();
            cfg = cfg.with_laws(&[IncrementLaw::simple(), law]).with_param("note", 3);
        }
        let back = ExperimentConfig::parse(&cfg.to_ini()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
