//! Ladder heights and renewal functions.
//!
//! For a finite-support law with jumps in `[-a, b]` the ladder laws follow
//! from the Wiener–Hopf factorisation
//! `1 - phi(z) = (1 - E z^{chi+}) (1 - E z^{-chi-})`: the polynomial
//! `z^a (phi(z) - 1)` has a double root at 1, `a - 1` roots inside the unit
//! disc and `b - 1` outside. The outside roots build the ascending factor,
//! the inside ones the descending factor. Both factors are finite
//! polynomials, so the ladder laws are exact up to root-finding error, which
//! is checked by multiplying the factors back together.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::poly::{deflate, product_of_linear_factors, roots};
use crate::walk::IncrementLaw;

/// Largest acceptable factorisation residual.
pub const LADDER_TOLERANCE: f64 = 1e-10;
/// Stopping threshold for convolution series.
pub const SERIES_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LadderKind {
    /// Position at the first time the walk is `>= 1`.
    StrictAscending,
    /// Minus the position at the first time `n >= 1` with `S_n <= 0`.
    WeakDescending,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderLaw {
    pub kind: LadderKind,
    /// `pmf[k] = P(chi = k)`.
    pub pmf: Vec<f64>,
    /// `P(chi = 0)`; always 0 for strict ascending heights.
    pub zero_atom: f64,
    pub mean: f64,
    /// Max coefficient error of the recombined factorisation.
    pub residual: f64,
}

impl LadderLaw {
    pub fn prob(&self, k: usize) -> f64 {
        self.pmf.get(k).copied().unwrap_or(0.0)
    }

    pub fn max_height(&self) -> usize {
        self.pmf.len().saturating_sub(1)
    }
}

/// Exact ladder-height law of a finite-support walk.
///
/// `bound` is the largest height the caller is prepared to tabulate; mass
/// above it counts towards the residual.
pub fn exact_ladder_pmf(law: &IncrementLaw, kind: LadderKind, bound: usize) -> Result<LadderLaw> {
    let (ascending, descending, residual) = wiener_hopf(law)?;
    let mut pmf = match kind {
        LadderKind::StrictAscending => ascending,
        LadderKind::WeakDescending => descending,
    };
    let mut residual = residual;
    if pmf.len() > bound + 1 {
        residual = residual.max(pmf[bound + 1..].iter().sum());
        pmf.truncate(bound + 1);
    }
    if residual > LADDER_TOLERANCE {
        return Err(Error::Truncation {
            what: format!("{kind:?} ladder law of '{}' with bound {bound}", law.name()),
            achieved: residual,
            tolerance: LADDER_TOLERANCE,
        });
    }
    let zero_atom = pmf[0];
    let mean = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    Ok(LadderLaw {
        kind,
        pmf,
        zero_atom,
        mean,
        residual,
    })
}

fn clean(mut pmf: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    for p in pmf.iter_mut() {
        if *p < 0.0 {
            if *p < -LADDER_TOLERANCE {
                return Err(Error::Truncation {
                    what: format!("{what}: negative ladder probability"),
                    achieved: -*p,
                    tolerance: LADDER_TOLERANCE,
                });
            }
            *p = 0.0;
        }
    }
    Ok(pmf)
}

/// Returns `(ascending pmf, descending pmf, residual)`, both indexed by height.
fn wiener_hopf(law: &IncrementLaw) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let (lo, hi) = law
        .jump_range()
        .ok_or_else(|| Error::Unsupported(format!("ladder laws need a finite-support law, got '{}'", law.name())))?;
    let a = (-lo) as usize;
    let b = hi as usize;
    let mut poly = vec![0.0; a + b + 1];
    for &(v, p) in law.pmf() {
        poly[(v + a as i64) as usize] += p;
    }
    poly[a] -= 1.0;
    let (q1, r1) = deflate(&poly, 1.0);
    let (reduced, r2) = deflate(&q1, 1.0);
    let deflation_error = r1.abs().max(r2.abs());

    let (mut inside, mut outside) = (Vec::new(), Vec::new());
    for r in roots(&reduced) {
        if r.norm() < 1.0 {
            inside.push(r);
        } else {
            outside.push(Complex64::new(1.0, 0.0) / r);
        }
    }
    if inside.len() != a - 1 || outside.len() != b - 1 {
        return Err(Error::Truncation {
            what: format!(
                "root split for '{}': {} inside / {} outside, expected {} / {}",
                law.name(),
                inside.len(),
                outside.len(),
                a - 1,
                b - 1
            ),
            achieved: f64::INFINITY,
            tolerance: LADDER_TOLERANCE,
        });
    }
    let one = Complex64::new(1.0, 0.0);
    outside.push(one);
    inside.push(one);
    // 1 - E z^{chi+}
    let up = product_of_linear_factors(&outside);
    // 1 - E w^{chi-} = (1 - q) * down(w)
    let down = product_of_linear_factors(&inside);
    let scale = -law.prob(lo) / down[a];
    let mut ascending = vec![0.0; b + 1];
    for k in 1..=b {
        ascending[k] = -up[k];
    }
    let mut descending = vec![0.0; a + 1];
    descending[0] = 1.0 - scale;
    for k in 1..=a {
        descending[k] = -scale * down[k];
    }
    let ascending = clean(ascending, law.name())?;
    let descending = clean(descending, law.name())?;

    // Recombine: (1 - F+(z)) (1 - F-(1/z)) against 1 - phi(z), as a Laurent
    // polynomial in z with offset a.
    let mut product = vec![0.0; a + b + 1];
    let mut f_up = vec![1.0; b + 1];
    for k in 1..=b {
        f_up[k] = -ascending[k];
    }
    let mut f_down = vec![1.0 - descending[0]; a + 1];
    for k in 1..=a {
        f_down[k] = -descending[k];
    }
    for (i, u) in f_up.iter().enumerate() {
        for (k, d) in f_down.iter().enumerate() {
            product[i + a - k] += u * d;
        }
    }
    let mut residual = deflation_error;
    for (idx, value) in product.iter().enumerate() {
        let v = idx as i64 - a as i64;
        let target = if v == 0 { 1.0 - law.prob(0) } else { -law.prob(v) };
        residual = residual.max((value - target).abs());
    }
    let mass_error = (ascending.iter().sum::<f64>() - 1.0)
        .abs()
        .max((descending.iter().sum::<f64>() - 1.0).abs());
    Ok((ascending, descending, residual.max(mass_error)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cumulative {
    /// `H(x) = sum_{y <= x} h(y)`.
    LessEq,
    /// `H(x) = sum_{y < x} h(y)`.
    Less,
}

impl Cumulative {
    pub fn symbol(self) -> &'static str {
        match self {
            Cumulative::LessEq => "<=",
            Cumulative::Less => "<",
        }
    }
}

/// Renewal mass `h(x) = sum_{k >= 0} P(chi_1 + ... + chi_k = x)` and its
/// cumulative sums on `0..=x_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalTable {
    pub h: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub convention: Cumulative,
    /// Bound on the total mass of the omitted convolution powers.
    pub truncation_error: f64,
}

impl RenewalTable {
    pub fn x_max(&self) -> usize {
        self.h.len() - 1
    }

    pub fn h(&self, x: usize) -> Result<f64> {
        self.h
            .get(x)
            .copied()
            .ok_or_else(|| Error::domain(format!("renewal table covers 0..={}, asked for {x}", self.x_max())))
    }

    /// `H(x)` under the table's convention.
    pub fn cum(&self, x: usize) -> Result<f64> {
        self.cumulative
            .get(x)
            .copied()
            .ok_or_else(|| Error::domain(format!("renewal table covers 0..={}, asked for {x}", self.x_max())))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,h,H,convention,truncation_error")?;
        for (x, (h, c)) in self.h.iter().zip(&self.cumulative).enumerate() {
            writeln!(
                out,
                "{x},{h:.15e},{c:.15e},{},{:.3e}",
                self.convention.symbol(),
                self.truncation_error
            )?;
        }
        Ok(())
    }
}

/// Sums the convolution powers of `chi` on `0..=x_max`.
pub fn renewal_table(chi: &LadderLaw, x_max: usize, convention: Cumulative) -> Result<RenewalTable> {
    if chi.zero_atom >= 1.0 {
        return Err(Error::Divergent(format!(
            "{:?} ladder law has zero atom {}",
            chi.kind, chi.zero_atom
        )));
    }
    let width = x_max + 1;
    let step: Vec<f64> = chi.pmf.iter().take(width).copied().collect();
    let mut h = vec![0.0; width];
    let mut power = vec![0.0; width];
    power[0] = 1.0;
    let mut partial = 0.0;
    let truncation_error;
    loop {
        for (acc, p) in h.iter_mut().zip(&power) {
            *acc += p;
        }
        let mut next = vec![0.0; width];
        for (i, &p) in power.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (j, &q) in step.iter().enumerate().take(width - i) {
                next[i + j] += p * q;
            }
        }
        power = next;
        let mass: f64 = power.iter().sum();
        if mass == 0.0 {
            truncation_error = 0.0;
            break;
        }
        partial += mass;
        if mass < SERIES_TOLERANCE {
            // The mass on [0, x_max] is submultiplicative in k.
            truncation_error = mass * partial / (1.0 - mass);
            for (acc, p) in h.iter_mut().zip(&power) {
                *acc += p;
            }
            break;
        }
    }
    let mut cumulative = Vec::with_capacity(width);
    let mut acc = 0.0;
    for &v in &h {
        match convention {
            Cumulative::LessEq => {
                acc += v;
                cumulative.push(acc);
            }
            Cumulative::Less => {
                cumulative.push(acc);
                acc += v;
            }
        }
    }
    Ok(RenewalTable {
        h,
        cumulative,
        convention,
        truncation_error,
    })
}

/// `U(x, N) = h+(N - x) + sum_{k >= 1} E[h+(N - x + S_k); S_k < x]` where
/// `S_k` sums `k` weak descending ladder heights.
///
/// This is the expected local time at `N` before `tau-` of the walk started
/// at `x` (time 0 included).
pub fn compute_u(x: usize, level: usize, h_plus: &RenewalTable, chi_minus: &LadderLaw) -> Result<f64> {
    if level == 0 {
        return Err(Error::domain("U(x, N) needs N >= 1"));
    }
    if x > level {
        return Err(Error::domain(format!("U(x, N) needs x <= N, got x = {x}, N = {level}")));
    }
    let base = level - x;
    let mut total = h_plus.h(base)?;
    if x == 0 {
        return Ok(total);
    }
    h_plus.h(level - 1)?;
    let step: Vec<f64> = (0..x).map(|k| chi_minus.prob(k)).collect();
    let mut power = step.clone();
    loop {
        let mass: f64 = power.iter().sum();
        for (s, &p) in power.iter().enumerate() {
            total += p * h_plus.h[base + s];
        }
        if mass < SERIES_TOLERANCE {
            break;
        }
        let mut next = vec![0.0; x];
        for (i, &p) in power.iter().enumerate() {
            for (j, &q) in step.iter().enumerate().take(x - i) {
                next[i + j] += p * q;
            }
        }
        power = next;
    }
    Ok(total)
}

/// `P_d(S_{tau-} = -j)` for `j = 0, 1, ...`: where a walk started at height
/// `d >= 1` first lands in `(-inf, 0]`.
pub fn first_descent_law(d: usize, chi_minus: &LadderLaw) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::domain("first descent needs a start d >= 1"));
    }
    let h_minus = renewal_table(chi_minus, d - 1, Cumulative::LessEq)?;
    let max_j = chi_minus.max_height().saturating_sub(1);
    let mut out = vec![0.0; max_j + 1];
    for (j, o) in out.iter_mut().enumerate() {
        *o = (0..d).map(|s| h_minus.h[s] * chi_minus.prob(d + j - s)).sum();
    }
    Ok(out)
}

/// Monte Carlo ladder heights with their epoch lengths.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LadderSample {
    pub heights: Vec<u64>,
    pub epochs: Vec<u64>,
    /// Samples that hit the step cap; excluded from `heights`.
    pub capped: usize,
}

pub const DEFAULT_STEP_CAP: u64 = 100_000_000;

pub fn sample_ladder_heights<R: Rng + ?Sized>(
    law: &IncrementLaw,
    kind: LadderKind,
    count: usize,
    cap: u64,
    rng: &mut R,
) -> LadderSample {
    let mut out = LadderSample::default();
    for _ in 0..count {
        let mut s: i64 = 0;
        let mut n = 0u64;
        let done = loop {
            if n == cap {
                break None;
            }
            s += law.sample(rng);
            n += 1;
            match kind {
                LadderKind::StrictAscending if s >= 1 => break Some(s as u64),
                LadderKind::WeakDescending if s <= 0 => break Some((-s) as u64),
                _ => {}
            }
        };
        match done {
            Some(height) => {
                out.heights.push(height);
                out.epochs.push(n);
            }
            None => out.capped += 1,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn simple_walk_ladders() {
        let law = IncrementLaw::simple();
        let up = exact_ladder_pmf(&law, LadderKind::StrictAscending, 10).unwrap();
        assert_eq!(up.pmf, vec![0.0, 1.0]);
        let down = exact_ladder_pmf(&law, LadderKind::WeakDescending, 10).unwrap();
        assert_abs_diff_eq!(down.pmf[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(down.pmf[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn lazy_walk_ascends_by_one() {
        let up = exact_ladder_pmf(&IncrementLaw::lazy(), LadderKind::StrictAscending, 10).unwrap();
        assert_eq!(up.pmf, vec![0.0, 1.0]);
    }

    #[test]
    fn sigma4_factorisation_is_tight() {
        let law = IncrementLaw::sigma4();
        for kind in [LadderKind::StrictAscending, LadderKind::WeakDescending] {
            let l = exact_ladder_pmf(&law, kind, 10).unwrap();
            assert!(l.residual < 1e-13, "{kind:?}: {}", l.residual);
            assert_abs_diff_eq!(l.pmf.iter().sum::<f64>(), 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn small_bound_is_a_truncation_error() {
        let err = exact_ladder_pmf(&IncrementLaw::sigma4(), LadderKind::StrictAscending, 1);
        assert!(matches!(err, Err(Error::Truncation { .. })));
    }

    #[test]
    fn heavy_tail_is_unsupported() {
        let law = IncrementLaw::power_tail(1.5).unwrap();
        assert!(matches!(
            exact_ladder_pmf(&law, LadderKind::StrictAscending, 10),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn simple_walk_renewal_functions() {
        let law = IncrementLaw::simple();
        let up = exact_ladder_pmf(&law, LadderKind::StrictAscending, 10).unwrap();
        let t = renewal_table(&up, 20, Cumulative::LessEq).unwrap();
        assert!(t.h.iter().all(|&h| (h - 1.0).abs() < 1e-15));
        let down = exact_ladder_pmf(&law, LadderKind::WeakDescending, 10).unwrap();
        let t = renewal_table(&down, 20, Cumulative::LessEq).unwrap();
        for &h in &t.h {
            assert_abs_diff_eq!(h, 2.0, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(t.cum(1).unwrap(), 4.0, epsilon = 1e-10);
        let strict = renewal_table(&down, 20, Cumulative::Less).unwrap();
        assert_abs_diff_eq!(strict.cum(1).unwrap(), 2.0, epsilon = 1e-10);
        assert_eq!(strict.cum(0).unwrap(), 0.0);
    }

    #[test]
    fn x_max_zero_gives_geometric_resummation() {
        let down = exact_ladder_pmf(&IncrementLaw::simple(), LadderKind::WeakDescending, 10).unwrap();
        let t = renewal_table(&down, 0, Cumulative::LessEq).unwrap();
        assert_eq!(t.h.len(), 1);
        assert_abs_diff_eq!(t.h[0], 1.0 / (1.0 - down.zero_atom), epsilon = 1e-11);
        assert!(t.truncation_error < 1e-11);
    }

    #[test]
    fn point_mass_at_zero_diverges() {
        let chi = LadderLaw {
            kind: LadderKind::WeakDescending,
            pmf: vec![1.0],
            zero_atom: 1.0,
            mean: 0.0,
            residual: 0.0,
        };
        assert!(matches!(
            renewal_table(&chi, 5, Cumulative::LessEq),
            Err(Error::Divergent(_))
        ));
    }

    #[test]
    fn simple_walk_u_values() {
        let law = IncrementLaw::simple();
        let up = exact_ladder_pmf(&law, LadderKind::StrictAscending, 10).unwrap();
        let down = exact_ladder_pmf(&law, LadderKind::WeakDescending, 10).unwrap();
        let hp = renewal_table(&up, 100, Cumulative::LessEq).unwrap();
        for n in [1usize, 5, 50] {
            assert_abs_diff_eq!(compute_u(0, n, &hp, &down).unwrap(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(compute_u(1, n, &hp, &down).unwrap(), 2.0, epsilon = 1e-10);
            if n >= 2 {
                assert_abs_diff_eq!(compute_u(2, n, &hp, &down).unwrap(), 4.0, epsilon = 1e-10);
            }
        }
        assert!(matches!(compute_u(6, 5, &hp, &down), Err(Error::Domain(_))));
    }

    #[test]
    fn renewal_recursion_oracle() {
        // h(x) (1 - q) = [x == 0] + sum_{j >= 1} P(chi = j) h(x - j)
        let down = exact_ladder_pmf(&IncrementLaw::sigma4(), LadderKind::WeakDescending, 10).unwrap();
        let t = renewal_table(&down, 30, Cumulative::LessEq).unwrap();
        let mut h = vec![0.0; 31];
        for x in 0..=30 {
            let mut s = if x == 0 { 1.0 } else { 0.0 };
            for j in 1..=x {
                s += down.prob(j) * h[x - j];
            }
            h[x] = s / (1.0 - down.zero_atom);
        }
        for (got, want) in t.h.iter().zip(&h).take(31) {
            assert_abs_diff_eq!(*got, *want, epsilon = 1e-10);
        }
    }

    #[test]
    fn first_descent_of_skip_free_law_lands_on_zero() {
        let down = exact_ladder_pmf(&IncrementLaw::lazy(), LadderKind::WeakDescending, 10).unwrap();
        for d in 1..5 {
            let f = first_descent_law(d, &down).unwrap();
            assert_abs_diff_eq!(f[0], 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn first_descent_sums_to_one() {
        let down = exact_ladder_pmf(&IncrementLaw::sigma4(), LadderKind::WeakDescending, 10).unwrap();
        for d in 1..8 {
            let f = first_descent_law(d, &down).unwrap();
            assert_abs_diff_eq!(f.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn sampled_simple_walk_heights() {
        let law = IncrementLaw::simple();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = sample_ladder_heights(&law, LadderKind::StrictAscending, 2000, 10_000, &mut rng);
        assert!(s.heights.iter().all(|&h| h == 1));
        assert_eq!(s.heights.len() + s.capped, 2000);
    }
}
