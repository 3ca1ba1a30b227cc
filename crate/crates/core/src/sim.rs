//! Monte Carlo local-time fields of killed and reflected walks.
//!
//! Local times are only recorded at a short sorted list of levels; the
//! highest one is the top of the window of interest. Two devices keep the
//! cost down:
//!
//! * Simple and lazy walks advance several steps at once while no level and
//!   no killing can be reached: `k` simple steps are `2 popcount - k` over
//!   `k` random bits, `k` lazy steps are `popcount - k` over `2k` bits.
//! * Finite-support walks that jump above the top level are moved straight
//!   to where they next re-enter `(-inf, top]`, drawn from the exact
//!   first-descent law. Nothing above the top is recorded, so the counts are
//!   unchanged, but the skipped steps are not part of `excursion_length`.
//!   Power-tail walks are stepped one by one and rely on the step cap.

use rand::{Rng, RngExt};

use crate::error::{Error, Result};
use crate::ladder::{exact_ladder_pmf, first_descent_law, LadderKind};
use crate::walk::IncrementLaw;

pub use crate::ladder::DEFAULT_STEP_CAP;

/// Visits at a fixed set of levels by one killed excursion or one reflected
/// field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalTimeFieldSample {
    pub start: u64,
    pub levels: Vec<u64>,
    pub counts: Vec<u64>,
    /// Steps simulated (steps skipped above the top level are not counted).
    pub excursion_length: u64,
    /// Regenerations completed (reflected fields only).
    pub regenerations: u64,
    pub capped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunInfo {
    pub steps: u64,
    pub capped: bool,
}

#[derive(Debug, Clone)]
enum Stepping {
    Simple,
    Lazy,
    General,
}

/// Precomputed simulation plan for one law and level set.
#[derive(Debug, Clone)]
pub struct Simulator {
    law: IncrementLaw,
    levels: Vec<u64>,
    top: i64,
    // 0, the levels and top + 1, sorted
    events: Vec<i64>,
    stepping: Stepping,
    // re_entry[d - 1] = cumulative law of j, re-entry at top - j after a jump to top + d
    re_entry: Option<Vec<Vec<f64>>>,
    cap: u64,
}

struct Bits<'a, R: Rng + ?Sized> {
    rng: &'a mut R,
    word: u64,
    avail: u32,
}

impl<'a, R: Rng + ?Sized> Bits<'a, R> {
    fn new(rng: &'a mut R) -> Self {
        Self { rng, word: 0, avail: 0 }
    }

    /// Number of ones among the next `k` random bits.
    fn ones(&mut self, mut k: u64) -> u64 {
        let mut total = 0u64;
        while k > 0 {
            if self.avail == 0 {
                self.word = self.rng.next_u64();
                self.avail = 64;
            }
            let take = k.min(self.avail as u64) as u32;
            let chunk = if take == 64 {
                self.word
            } else {
                self.word & ((1u64 << take) - 1)
            };
            total += chunk.count_ones() as u64;
            self.word = if take == 64 { 0 } else { self.word >> take };
            self.avail -= take;
            k -= take as u64;
        }
        total
    }
}

impl Simulator {
    pub fn new(law: &IncrementLaw, levels: &[u64], cap: u64) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::config("need at least one level"));
        }
        if levels.contains(&0) {
            return Err(Error::config("levels must be positive"));
        }
        if cap == 0 {
            return Err(Error::config("step cap must be >= 1"));
        }
        let mut sorted = levels.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != levels.len() || sorted != levels {
            return Err(Error::config("levels must be strictly increasing"));
        }
        let top = *sorted.last().unwrap() as i64;
        let mut events = vec![0i64];
        events.extend(sorted.iter().map(|&l| l as i64));
        events.push(top + 1);
        let stepping = match law.pmf_exact() {
            p if law.is_finite() && p.len() == 2 && law.jump_range() == Some((-1, 1)) => Stepping::Simple,
            p if law.is_finite()
                && p.len() == 3
                && law.jump_range() == Some((-1, 1))
                && (law.prob(0) - 0.5).abs() < 1e-15
                && (law.prob(1) - 0.25).abs() < 1e-15 =>
            {
                Stepping::Lazy
            }
            _ => Stepping::General,
        };
        let re_entry = match law.jump_range() {
            Some((lo, hi)) if lo < -1 => {
                let descent = exact_ladder_pmf(law, LadderKind::WeakDescending, (-lo) as usize)?;
                let mut tables = Vec::new();
                for d in 1..=hi as usize {
                    let pmf = first_descent_law(d, &descent)?;
                    let mut acc = 0.0;
                    let mut cdf: Vec<f64> = pmf
                        .iter()
                        .map(|p| {
                            acc += p;
                            acc
                        })
                        .collect();
                    if let Some(last) = cdf.last_mut() {
                        *last = f64::INFINITY;
                    }
                    tables.push(cdf);
                }
                Some(tables)
            }
            _ => None,
        };
        Ok(Self {
            law: law.clone(),
            levels: sorted,
            top,
            events,
            stepping,
            re_entry,
            cap,
        })
    }

    pub fn law(&self) -> &IncrementLaw {
        &self.law
    }

    pub fn levels(&self) -> &[u64] {
        &self.levels
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    fn level_index(&self, s: i64) -> Option<usize> {
        if s <= 0 || s > self.top {
            return None;
        }
        self.levels.binary_search(&(s as u64)).ok()
    }

    /// Largest number of steps that cannot reach an event before the last one.
    fn chunk(&self, s: i64) -> u64 {
        let i = self.events.partition_point(|&e| e < s);
        let mut d = i64::MAX;
        if i < self.events.len() {
            d = d.min(self.events[i] - s);
        }
        if i > 0 {
            d = d.min(s - self.events[i - 1]);
        }
        d.max(1) as u64
    }

    /// Where a walk that jumped to `s > top` next enters `(-inf, top]`.
    fn re_enter<R: Rng + ?Sized>(&self, s: i64, rng: &mut R) -> i64 {
        match &self.re_entry {
            None => self.top,
            Some(tables) => {
                let cdf = &tables[(s - self.top - 1) as usize];
                let u: f64 = rng.random();
                let j = cdf.partition_point(|&c| c <= u);
                self.top - j as i64
            }
        }
    }

    /// Advances from `s` by one move and returns `(new position, steps)`.
    ///
    /// Positions above the top level are only ever returned for power-tail
    /// walks.
    fn advance<R: Rng + ?Sized>(&self, s: i64, budget: u64, bits: &mut Bits<'_, R>) -> (i64, u64) {
        let next = match self.stepping {
            Stepping::Simple => {
                let k = self.chunk(s).min(budget);
                (s + 2 * bits.ones(k) as i64 - k as i64, k)
            }
            Stepping::Lazy => {
                let k = self.chunk(s).min(budget);
                (s + bits.ones(2 * k) as i64 - k as i64, k)
            }
            Stepping::General => (s + self.law.sample(bits.rng), 1),
        };
        if next.0 > self.top && self.law.is_finite() {
            (self.re_enter(next.0, bits.rng), next.1)
        } else {
            next
        }
    }

    /// Runs the walk from `start` until it is `<= 0` or the cap is reached,
    /// adding visits to `counts`. Time 0 counts when `count_start` is set.
    pub fn killed_into<R: Rng + ?Sized>(
        &self,
        start: u64,
        rng: &mut R,
        counts: &mut [u64],
        count_start: bool,
    ) -> RunInfo {
        let mut bits = Bits::new(rng);
        self.killed_bits(start as i64, &mut bits, counts, count_start, self.cap)
    }

    fn killed_bits<R: Rng + ?Sized>(
        &self,
        start: i64,
        bits: &mut Bits<'_, R>,
        counts: &mut [u64],
        count_start: bool,
        cap: u64,
    ) -> RunInfo {
        let mut s = start;
        if s > self.top && self.law.is_finite() {
            s = self.re_enter(s, bits.rng);
            if s <= 0 {
                return RunInfo {
                    steps: 0,
                    capped: false,
                };
            }
        }
        if count_start || s != start {
            if let Some(i) = self.level_index(s) {
                counts[i] += 1;
            }
        }
        let mut n = 0u64;
        loop {
            if n >= cap {
                return RunInfo { steps: n, capped: true };
            }
            let (next, k) = self.advance(s, cap - n, bits);
            s = next;
            n += k;
            if s <= 0 {
                return RunInfo {
                    steps: n,
                    capped: false,
                };
            }
            if let Some(i) = self.level_index(s) {
                counts[i] += 1;
            }
        }
    }

    /// One excursion of the walk started at `start`, killed at `tau-`.
    pub fn killed<R: Rng + ?Sized>(&self, start: u64, rng: &mut R) -> LocalTimeFieldSample {
        let mut counts = vec![0; self.levels.len()];
        let run = self.killed_into(start, rng, &mut counts, true);
        LocalTimeFieldSample {
            start,
            levels: self.levels.clone(),
            counts,
            excursion_length: run.steps,
            regenerations: 0,
            capped: run.capped,
        }
    }

    /// The reflected walk `W_{n+1} = (W_n + X_{n+1})^+` from `W_0 = 0`, run
    /// through `m` returns to 0 (staying at 0 counts as a return). Visits at
    /// times `1..=T_m` are recorded; the step cap applies to the whole field.
    pub fn reflected_direct<R: Rng + ?Sized>(&self, m: u64, rng: &mut R) -> LocalTimeFieldSample {
        let mut counts = vec![0; self.levels.len()];
        let mut bits = Bits::new(rng);
        let mut w = 0i64;
        let mut n = 0u64;
        let mut returns = 0u64;
        let mut capped = false;
        while returns < m {
            if n >= self.cap {
                capped = true;
                break;
            }
            let (next, k) = self.advance(w, self.cap - n, &mut bits);
            n += k;
            w = next.max(0);
            if w == 0 {
                returns += 1;
            } else if let Some(i) = self.level_index(w) {
                counts[i] += 1;
            }
        }
        LocalTimeFieldSample {
            start: 0,
            levels: self.levels.clone(),
            counts,
            excursion_length: n,
            regenerations: returns,
            capped,
        }
    }

    /// Sum of `m` independent killed excursions started at 0.
    pub fn reflected_iid<R: Rng + ?Sized>(&self, m: u64, rng: &mut R) -> LocalTimeFieldSample {
        let mut counts = vec![0; self.levels.len()];
        let mut n = 0u64;
        let mut capped = false;
        for _ in 0..m {
            let run = self.killed_into(0, rng, &mut counts, false);
            n += run.steps;
            if run.capped {
                capped = true;
                break;
            }
        }
        LocalTimeFieldSample {
            start: 0,
            levels: self.levels.clone(),
            counts,
            excursion_length: n,
            regenerations: m,
            capped,
        }
    }

    /// The reflected walk run until `m` excursions have left 0 and come back;
    /// steps that stay at 0 are not counted as excursions.
    pub fn reflected_excursions<R: Rng + ?Sized>(&self, m: u64, rng: &mut R) -> LocalTimeFieldSample {
        let mut counts = vec![0; self.levels.len()];
        let mut bits = Bits::new(rng);
        let mut n = 0u64;
        let mut done = 0u64;
        let mut capped = false;
        while done < m {
            if n >= self.cap {
                capped = true;
                break;
            }
            let (first, k) = self.advance(0, 1, &mut bits);
            n += k;
            if first <= 0 {
                continue;
            }
            if let Some(i) = self.level_index(first) {
                counts[i] += 1;
            }
            let run = self.killed_bits(first, &mut bits, &mut counts, false, self.cap - n);
            n += run.steps;
            if run.capped {
                capped = true;
                break;
            }
            done += 1;
        }
        LocalTimeFieldSample {
            start: 0,
            levels: self.levels.clone(),
            counts,
            excursion_length: n,
            regenerations: done,
            capped,
        }
    }
}

pub fn simulate_killed<R: Rng + ?Sized>(
    law: &IncrementLaw,
    start: u64,
    levels: &[u64],
    cap: u64,
    rng: &mut R,
) -> Result<LocalTimeFieldSample> {
    Ok(Simulator::new(law, levels, cap)?.killed(start, rng))
}

pub fn simulate_reflected_direct<R: Rng + ?Sized>(
    law: &IncrementLaw,
    m: u64,
    levels: &[u64],
    cap: u64,
    rng: &mut R,
) -> Result<LocalTimeFieldSample> {
    if m == 0 {
        return Err(Error::config("need at least one regeneration"));
    }
    Ok(Simulator::new(law, levels, cap)?.reflected_direct(m, rng))
}

pub fn simulate_reflected_iid<R: Rng + ?Sized>(
    law: &IncrementLaw,
    m: u64,
    levels: &[u64],
    cap: u64,
    rng: &mut R,
) -> Result<LocalTimeFieldSample> {
    if m == 0 {
        return Err(Error::config("need at least one regeneration"));
    }
    Ok(Simulator::new(law, levels, cap)?.reflected_iid(m, rng))
}

/// How many regenerations `M(N)` a rescaled field uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MRule {
    Fixed(u64),
    /// `round(c^{-1}(N) / (N h+(N)))`; finite-support laws only.
    Asymptotic,
}

impl MRule {
    pub fn resolve(&self, law: &IncrementLaw, level: u64) -> Result<u64> {
        match *self {
            MRule::Fixed(m) if m >= 1 => Ok(m),
            MRule::Fixed(_) => Err(Error::config("M must be >= 1")),
            MRule::Asymptotic => {
                let (_, hi) = law.jump_range().ok_or_else(|| {
                    Error::Unsupported("the asymptotic M rule needs h+ exactly, use a fixed M".into())
                })?;
                let up = exact_ladder_pmf(law, LadderKind::StrictAscending, hi as usize)?;
                let table = crate::ladder::renewal_table(&up, level as usize, crate::ladder::Cumulative::LessEq)?;
                let h = table.h(level as usize)?;
                let m = law.norming().c_inv(level as f64) / (level as f64 * h);
                Ok((m.round() as u64).max(1))
            }
        }
    }
}

/// One sample of `(N / c^{-1}(N)) L_W(T_M, floor(u N))` over a list of `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledField {
    pub level: u64,
    pub u_list: Vec<f64>,
    pub m: u64,
    pub values: Vec<f64>,
    pub capped: bool,
}

/// Lattice levels `floor(u N)` for a `u` list; they must be distinct and positive.
pub fn field_levels(u_list: &[f64], level: u64) -> Result<Vec<u64>> {
    let levels: Vec<u64> = u_list
        .iter()
        .map(|&u| crate::green::lattice_point(u, level as usize) as u64)
        .collect();
    if levels.windows(2).any(|w| w[0] >= w[1]) || levels.first() == Some(&0) {
        return Err(Error::config(format!(
            "u list must give strictly increasing positive levels, got {levels:?}"
        )));
    }
    Ok(levels)
}

pub fn rescaled_field<R: Rng + ?Sized>(
    sim: &Simulator,
    level: u64,
    u_list: &[f64],
    m: u64,
    rng: &mut R,
) -> RescaledField {
    let sample = sim.reflected_direct(m, rng);
    let scale = sim.law().norming().local_time_scale(level as f64);
    RescaledField {
        level,
        u_list: u_list.to_vec(),
        m,
        values: sample.counts.iter().map(|&c| c as f64 * scale).collect(),
        capped: sample.capped,
    }
}
