//! Tail sums of `k^{-s}`, used by the power-tail laws.

// B_{2j} / (2j)! for j = 1..6.
const BERNOULLI_OVER_FACTORIAL: [f64; 6] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
];

/// `sum_{k >= from} k^{-s}` for `s > 1` and `from >= 1`.
///
/// Direct summation up to a cut-off of at least 16, then Euler–Maclaurin for
/// the remainder; relative accuracy is close to machine precision.
pub fn zeta_tail(s: f64, from: u64) -> f64 {
    assert!(s > 1.0, "zeta_tail needs s > 1, got {s}");
    assert!(from >= 1);
    let cut = from.max(16);
    let mut head = 0.0;
    // Sum smallest terms first.
    for k in (from..cut).rev() {
        head += (k as f64).powf(-s);
    }
    let m = cut as f64;
    let mut tail = m.powf(1.0 - s) / (s - 1.0) + 0.5 * m.powf(-s);
    // rising factorial (s)_{2j-1} and power m^{-s-2j+1}
    let mut rising = s;
    let mut power = m.powf(-s - 1.0);
    for (j, b) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        tail += b * rising * power;
        let r = 2.0 * j as f64 + 1.0;
        rising *= (s + r) * (s + r + 1.0);
        power /= m * m;
    }
    head + tail
}

/// Riemann zeta function for real `s > 1`.
pub fn zeta(s: f64) -> f64 {
    zeta_tail(s, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn known_values() {
        let pi = std::f64::consts::PI;
        assert_relative_eq!(zeta(2.0), pi * pi / 6.0, max_relative = 1e-14);
        assert_relative_eq!(zeta(4.0), pi.powi(4) / 90.0, max_relative = 1e-14);
        // zeta(2.5) from tables
        assert_relative_eq!(zeta(2.5), 1.341_487_257_250_917, max_relative = 1e-13);
    }

    #[test]
    fn tail_matches_brute_force() {
        let s = 2.5;
        let brute: f64 = (1..40u64).map(|k| (k as f64).powf(-s)).sum();
        assert_relative_eq!(zeta(s) - zeta_tail(s, 40), brute, max_relative = 1e-13);
        assert_relative_eq!(zeta_tail(s, 3), zeta(s) - 1.0 - 2f64.powf(-s), max_relative = 1e-13);
    }
}
