//! Green function and hitting probabilities of the walk killed at leaving
//! `{1, 2, ...}`.
//!
//! The walk is watched only while it sits in `{1, ..., top}`. A jump to
//! `top + d` is replaced by the exact law of where the walk next enters
//! `(-inf, top]`, which is the first-descent law of a walk started at `d`.
//! This censored chain visits every site `<= top` exactly as often as the
//! original walk, so solving its banded linear system gives the Green
//! function without any truncation of the state space.
//!
//! [`StripDp`] is the plain time-stepping propagator on a bounded strip with
//! absorbed and overflow mass bookkeeping; it is used for cross-checks.

use std::io::Write;

use crate::error::{Error, Result};
use crate::ladder::{exact_ladder_pmf, first_descent_law, LadderKind};
use crate::numeric::banded::BandedMatrix;
use crate::walk::IncrementLaw;

/// Whether the `n = 0` term is part of the Green sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeZero {
    /// `sum_{n >= 1} P_x(S_n = y, tau- > n)`.
    Exclude,
    /// Also counts `n = 0`, matching local times `L(n, x) = sum_{j=0}^n`.
    Include,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenValue {
    pub value: f64,
    pub error_bound: f64,
    /// Size of the linear system that produced the value.
    pub states: usize,
}

/// The censored killed chain on `{1, ..., top}`.
#[derive(Debug, Clone)]
pub struct KilledChain {
    law: IncrementLaw,
    top: usize,
    // re_entry[d - 1][j] = P(enter (-inf, top] at top - j | jumped to top + d)
    re_entry: Vec<Vec<f64>>,
    lower: usize,
    upper: usize,
    ladder_residual: f64,
}

impl KilledChain {
    pub fn new(law: &IncrementLaw, top: usize) -> Result<Self> {
        let (lo, hi) = law.jump_range().ok_or_else(|| {
            Error::Unsupported(format!(
                "exact Green functions need a finite-support law, '{}' has unbounded jumps",
                law.name()
            ))
        })?;
        if top == 0 {
            return Err(Error::domain("the strip needs at least one site"));
        }
        let a = (-lo) as usize;
        let b = hi as usize;
        let descent = exact_ladder_pmf(law, LadderKind::WeakDescending, a)?;
        let re_entry = (1..=b)
            .map(|d| first_descent_law(d, &descent))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            law: law.clone(),
            top,
            re_entry,
            lower: a + b,
            upper: b,
            ladder_residual: descent.residual,
        })
    }

    pub fn top(&self) -> usize {
        self.top
    }

    /// One-step transitions from site `i` to sites in `1..=top`; the rest of
    /// the mass is killed.
    fn row(&self, i: usize, mut visit: impl FnMut(usize, f64)) {
        let top = self.top as i64;
        for &(v, p) in self.law.pmf() {
            let target = i as i64 + v;
            if target <= 0 {
                continue;
            }
            if target <= top {
                visit(target as usize, p);
            } else {
                self.censor((target - top) as usize, p, &mut visit);
            }
        }
    }

    fn censor(&self, d: usize, p: f64, visit: &mut impl FnMut(usize, f64)) {
        for (j, &q) in self.re_entry[d - 1].iter().enumerate() {
            let landing = self.top as i64 - j as i64;
            if landing >= 1 && q > 0.0 {
                visit(landing as usize, p * q);
            }
        }
    }

    /// Distribution over sites `1..=top` after the first step from `x >= 0`,
    /// including the censoring of starts above `top`.
    fn first_step(&self, x: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        if x == 0 {
            self.row(0, |j, p| out.push((j, p)));
        } else if x <= self.top {
            self.row(x, |j, p| out.push((j, p)));
        } else {
            let mut visit = |j, p| out.push((j, p));
            self.censor(x - self.top, 1.0, &mut visit);
        }
        out
    }

    fn matrix(&self) -> BandedMatrix {
        let n = self.top;
        let mut m = BandedMatrix::zeros(n, self.lower, self.upper);
        for i in 1..=n {
            m.add(i - 1, i - 1, 1.0);
            self.row(i, |j, p| m.add(i - 1, j - 1, -p));
        }
        m
    }

    /// Solves `(I - P) g = rhs` on the strip.
    fn solve(&self, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.matrix().solve_many(rhs)
    }

    /// `G0(i, y)` for `i = 1..=top` (index `i - 1`), counting time 0.
    pub fn green_column(&self, y: usize) -> Result<(Vec<f64>, f64)> {
        if y == 0 || y > self.top {
            return Err(Error::domain(format!("target {y} outside 1..={}", self.top)));
        }
        let mut e = vec![0.0; self.top];
        e[y - 1] = 1.0;
        let ones = vec![1.0; self.top];
        let mut sol = self.solve(&[e, ones]);
        let occupation = sol.pop().unwrap();
        let column = sol.pop().unwrap();
        // First-order perturbation bound: |dG| <= ||G||_inf * ||dP||_inf * max G.
        let norm = occupation.iter().fold(0.0f64, |m, &v| m.max(v));
        let peak = column.iter().fold(0.0f64, |m, &v| m.max(v));
        let row_error = self.ladder_residual * self.law.pmf().len() as f64 + f64::EPSILON;
        Ok((column, norm * row_error * peak))
    }

    /// Green value from any start `x >= 0` given a column from [`Self::green_column`].
    pub fn green_from(&self, column: &[f64], x: usize, y: usize, time_zero: TimeZero) -> f64 {
        let zero_term = if x == y && time_zero == TimeZero::Include {
            1.0
        } else {
            0.0
        };
        if x >= 1 && x <= self.top {
            return column[x - 1] - if x == y { 1.0 } else { 0.0 } + zero_term;
        }
        self.first_step(x).iter().map(|&(j, p)| p * column[j - 1]).sum::<f64>() + zero_term
    }
}

/// `sum_{n >= 1} P_x(S_n = y, tau- > n)`.
pub fn green_sum(law: &IncrementLaw, x: usize, y: usize, tolerance: f64) -> Result<GreenValue> {
    green_sum_with(law, x, y, tolerance, TimeZero::Exclude)
}

pub fn green_sum_with(
    law: &IncrementLaw,
    x: usize,
    y: usize,
    tolerance: f64,
    time_zero: TimeZero,
) -> Result<GreenValue> {
    if y == 0 {
        return Err(Error::domain("the killed walk never sits at 0 after time 0"));
    }
    let chain = KilledChain::new(law, x.max(y))?;
    let (column, error_bound) = chain.green_column(y)?;
    if error_bound > tolerance {
        return Err(Error::Truncation {
            what: format!("Green sum G({x}, {y}) for '{}'", law.name()),
            achieved: error_bound,
            tolerance,
        });
    }
    Ok(GreenValue {
        value: chain.green_from(&column, x, y, time_zero),
        error_bound,
        states: chain.top(),
    })
}

/// `(N / c^{-1}(N)) * green_sum(floor(uN), floor(vN))`.
pub fn scaled_green(law: &IncrementLaw, u: f64, v: f64, level: usize) -> Result<f64> {
    let x = lattice_point(u, level);
    let y = lattice_point(v, level);
    if x == 0 || y == 0 {
        return Err(Error::domain(format!(
            "floor(uN) and floor(vN) must be >= 1 (u = {u}, v = {v}, N = {level})"
        )));
    }
    let g = green_sum(law, x, y, 1e-6)?;
    Ok(law.norming().local_time_scale(level as f64) * g.value)
}

/// `floor(u N)`, robust to `u N` landing a hair below an integer.
pub fn lattice_point(u: f64, level: usize) -> usize {
    (u * level as f64 + 1e-9).floor().max(0.0) as usize
}

/// Probability that the walk started at `x >= 0` visits `level` before
/// `tau-` (time 0 counts, so `x = level` gives 1).
pub fn hitting_prob(law: &IncrementLaw, x: usize, level: usize) -> Result<f64> {
    let (chain, f) = hitting_vector(law, level)?;
    if x == level {
        return Ok(1.0);
    }
    Ok(eval_start(&chain, &f, x))
}

/// `p_N`: the probability that the walk started at `level` leaves
/// `{1, 2, ...}` before returning to `level`.
pub fn escape_prob(law: &IncrementLaw, level: usize) -> Result<f64> {
    let (chain, f) = hitting_vector(law, level)?;
    let mut ret = 0.0;
    chain.row(level, |j, p| ret += p * f[j - 1]);
    Ok(1.0 - ret)
}

/// `f[i - 1] = P_i(hit level before tau-)` for `i = 1..=level`.
fn hitting_vector(law: &IncrementLaw, level: usize) -> Result<(KilledChain, Vec<f64>)> {
    if level == 0 {
        return Err(Error::domain("hitting level must be >= 1"));
    }
    let chain = KilledChain::new(law, level)?;
    let n = level;
    let mut m = BandedMatrix::zeros(n, chain.lower, chain.upper);
    let mut rhs = vec![0.0; n];
    for i in 1..n {
        m.add(i - 1, i - 1, 1.0);
        chain.row(i, |j, p| m.add(i - 1, j - 1, -p));
    }
    m.set(n - 1, n - 1, 1.0);
    rhs[n - 1] = 1.0;
    let f = m.solve(&rhs);
    Ok((chain, f))
}

fn eval_start(chain: &KilledChain, f: &[f64], x: usize) -> f64 {
    if x >= 1 && x <= chain.top() {
        return f[x - 1];
    }
    chain.first_step(x).iter().map(|&(j, p)| p * f[j - 1]).sum()
}

pub fn write_green_csv<W: Write>(mut out: W, rows: &[(usize, usize, GreenValue)]) -> Result<()> {
    writeln!(out, "x,y,green,error_bound,n_steps")?;
    for (x, y, g) in rows {
        writeln!(out, "{x},{y},{:.15e},{:.3e},{}", g.value, g.error_bound, g.states)?;
    }
    Ok(())
}

/// Time-stepping propagator of the killed walk on `{1, ..., y_max}`.
///
/// Mass that jumps to `<= 0` is absorbed, mass that jumps above `y_max` is
/// dropped into `overflow`; surviving + absorbed + overflow stays 1.
#[derive(Debug, Clone)]
pub struct StripDp {
    law: IncrementLaw,
    y_max: usize,
    // index 0 unused
    state: Vec<f64>,
    scratch: Vec<f64>,
    pub absorbed: f64,
    pub overflow: f64,
    pub steps: u64,
}

impl StripDp {
    pub fn new(law: &IncrementLaw, start: usize, y_max: usize) -> Result<Self> {
        if law.jump_range().is_none() {
            return Err(Error::Unsupported(format!(
                "strip propagation needs a finite-support law, got '{}'",
                law.name()
            )));
        }
        if start == 0 || start > y_max {
            return Err(Error::domain(format!("start {start} outside 1..={y_max}")));
        }
        let mut state = vec![0.0; y_max + 1];
        state[start] = 1.0;
        Ok(Self {
            law: law.clone(),
            y_max,
            state,
            scratch: vec![0.0; y_max + 1],
            absorbed: 0.0,
            overflow: 0.0,
            steps: 0,
        })
    }

    pub fn mass_at(&self, y: usize) -> f64 {
        self.state.get(y).copied().unwrap_or(0.0)
    }

    pub fn surviving(&self) -> f64 {
        self.state.iter().sum()
    }

    pub fn step(&mut self) {
        self.scratch.iter_mut().for_each(|v| *v = 0.0);
        let top = self.y_max as i64;
        for i in 1..=self.y_max {
            let m = self.state[i];
            if m == 0.0 {
                continue;
            }
            for &(v, p) in self.law.pmf() {
                let t = i as i64 + v;
                if t <= 0 {
                    self.absorbed += m * p;
                } else if t > top {
                    self.overflow += m * p;
                } else {
                    self.scratch[t as usize] += m * p;
                }
            }
        }
        std::mem::swap(&mut self.state, &mut self.scratch);
        self.steps += 1;
    }

    /// Accumulates `sum_{n = 1}^{steps} P(S_n = y, survived)`.
    pub fn green_partial(&mut self, y: usize, steps: u64) -> f64 {
        let mut total = 0.0;
        for _ in 0..steps {
            self.step();
            total += self.mass_at(y);
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn simple_walk_green_values() {
        let law = IncrementLaw::simple();
        assert_abs_diff_eq!(green_sum(&law, 1, 3, 1e-9).unwrap().value, 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(green_sum(&law, 3, 1, 1e-9).unwrap().value, 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(green_sum(&law, 2, 2, 1e-9).unwrap().value, 3.0, epsilon = 1e-10);
        let with_zero = green_sum_with(&law, 2, 2, 1e-9, TimeZero::Include).unwrap();
        assert_abs_diff_eq!(with_zero.value, 4.0, epsilon = 1e-10);
    }

    #[test]
    fn simple_walk_scaled_green() {
        let law = IncrementLaw::simple();
        assert_abs_diff_eq!(scaled_green(&law, 1.0, 1.0, 200).unwrap(), 1.995, epsilon = 1e-8);
        assert_abs_diff_eq!(scaled_green(&law, 0.25, 0.75, 200).unwrap(), 0.5, epsilon = 1e-8);
        assert!(scaled_green(&law, 0.001, 1.0, 200).is_err());
    }

    #[test]
    fn simple_walk_hitting() {
        let law = IncrementLaw::simple();
        for x in 1..=10 {
            assert_abs_diff_eq!(hitting_prob(&law, x, 10).unwrap(), x as f64 / 10.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(hitting_prob(&law, 0, 10).unwrap(), 0.05, epsilon = 1e-12);
        assert_abs_diff_eq!(escape_prob(&law, 25).unwrap(), 0.02, epsilon = 1e-12);
    }

    #[test]
    fn heavy_tail_is_rejected() {
        let law = IncrementLaw::power_tail(1.5).unwrap();
        assert!(matches!(green_sum(&law, 1, 1, 1e-6), Err(Error::Unsupported(_))));
    }

    #[test]
    fn strip_conserves_mass() {
        let law = IncrementLaw::sigma4();
        let mut dp = StripDp::new(&law, 5, 40).unwrap();
        for _ in 0..500 {
            dp.step();
            let total = dp.surviving() + dp.absorbed + dp.overflow;
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn strip_brackets_the_exact_value() {
        // Dropping overflow and stopping early only lose visits; each lost
        // unit of mass can contribute at most G0(y, y) further visits.
        let law = IncrementLaw::sigma4();
        let (x, y) = (3, 4);
        let exact = green_sum(&law, x, y, 1e-9).unwrap().value;
        let diag = green_sum_with(&law, y, y, 1e-9, TimeZero::Include).unwrap().value;
        let mut dp = StripDp::new(&law, x, 8 * y).unwrap();
        let partial = dp.green_partial(y, 20_000);
        assert!(partial <= exact + 1e-12);
        assert!(exact <= partial + (dp.overflow + dp.surviving()) * diag + 1e-12);
    }

    #[test]
    fn censoring_does_not_depend_on_the_strip_height() {
        let law = IncrementLaw::sigma4();
        let small = KilledChain::new(&law, 6).unwrap();
        let big = KilledChain::new(&law, 60).unwrap();
        let (cs, _) = small.green_column(4).unwrap();
        let (cb, _) = big.green_column(4).unwrap();
        for x in 0..=6 {
            let a = small.green_from(&cs, x, 4, TimeZero::Exclude);
            let b = big.green_from(&cb, x, 4, TimeZero::Exclude);
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }
}
