//! Limit-side quantities: the 0-potential density `a(u, v)`, Kac moment
//! predictions, exponential limit laws and the compound-Poisson marginal of
//! the rescaled field.
//!
//! For `alpha = 2` the density is `a(u, v) = 2 min(u, v)`, the Green
//! function of Brownian motion killed at 0; it is available both in closed
//! form and by quadrature of the killed heat kernel. For `alpha < 2` the
//! integrand needs a table of `psi(a, b)` (stable density times bridge
//! positivity probability), which has no closed form and must be supplied.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::ladder::RenewalTable;
use crate::numeric::quad::{integrate, integrate_with_breaks};
use crate::walk::{IncrementLaw, NormingSequence};

/// Orders above this are refused by the permutation sums.
pub const MAX_KAC_ORDER: usize = 8;

/// `2 min(u, v)`.
pub fn a_20_closed(u: f64, v: f64) -> f64 {
    2.0 * u.min(v).max(0.0)
}

/// `(1 / sqrt(2 pi)) int_0^inf x^{-1/2} e^{-(u-v)^2 / 2x} (1 - e^{-2uv/x}) dx`.
///
/// The range is split at `x = 1`; the upper part is mapped back to `(0, 1]`
/// by `y = 1/x`, and both parts use `x = t^2` to remove the square-root
/// endpoint behaviour.
pub fn a_20_quadrature(u: f64, v: f64, tolerance: f64) -> Result<f64> {
    if u <= 0.0 || v <= 0.0 {
        return Err(Error::domain(format!("quadrature needs u, v > 0, got ({u}, {v})")));
    }
    let d2 = (u - v) * (u - v);
    let c = 2.0 * u * v;
    let norm = 1.0 / (2.0 * PI).sqrt();
    // x = t^2 on (0, 1]: dx = 2t dt, x^{-1/2} = 1/t
    let lower = |t: f64| {
        if t == 0.0 {
            return 0.0;
        }
        let x = t * t;
        2.0 * (-d2 / (2.0 * x)).exp() * -(-c / x).exp_m1()
    };
    // x = 1/y, y = t^2: dx = y^{-2} dy, x^{-1/2} = y^{1/2}
    let upper = |t: f64| {
        if t == 0.0 {
            return 2.0 * c;
        }
        let y = t * t;
        2.0 * (-d2 * y / 2.0).exp() * -(-c * y).exp_m1() / y
    };
    let half = tolerance / 2.0;
    let a = integrate(lower, 0.0, 1.0, half / norm)?;
    let b = integrate(upper, 0.0, 1.0, half / norm)?;
    Ok(norm * (a.value + b.value))
}

/// Grid of `psi(a, b)` values with bilinear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiTable {
    a_grid: Vec<f64>,
    b_grid: Vec<f64>,
    // row-major: values[i * b_grid.len() + j] = psi(a_grid[i], b_grid[j])
    values: Vec<f64>,
}

impl PsiTable {
    pub fn new(a_grid: Vec<f64>, b_grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if a_grid.len() < 2 || b_grid.len() < 2 {
            return Err(Error::config("psi table needs at least a 2x2 grid"));
        }
        if values.len() != a_grid.len() * b_grid.len() {
            return Err(Error::config("psi table is not a full grid"));
        }
        for g in [&a_grid, &b_grid] {
            if g.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::config("psi grid must be strictly increasing"));
            }
        }
        if values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::config("psi values must be finite and nonnegative"));
        }
        Ok(Self { a_grid, b_grid, values })
    }

    /// Tabulates `f` on `{0, step, ..., extent}^2`.
    pub fn from_fn(extent: f64, step: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let n = (extent / step).round() as usize;
        let grid: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();
        let mut values = Vec::with_capacity(grid.len() * grid.len());
        for &a in &grid {
            for &b in &grid {
                values.push(f(a, b));
            }
        }
        Self::new(grid.clone(), grid, values)
    }

    /// `psi(a, b) = phi(b - a) (1 - e^{-2ab})` with `phi` the standard normal
    /// density: the `alpha = 2` table.
    pub fn brownian(extent: f64, step: f64) -> Result<Self> {
        Self::from_fn(extent, step, psi_brownian)
    }

    pub fn zero(extent: f64, step: f64) -> Result<Self> {
        Self::from_fn(extent, step, |_, _| 0.0)
    }

    /// Reads `a,b,psi` rows (header optional).
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut rows = Vec::new();
        for (no, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::config(format!("psi csv line {}: expected a,b,psi", no + 1)));
            }
            let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
            match parsed {
                Ok(v) => rows.push((v[0], v[1], v[2])),
                Err(_) if no == 0 => continue,
                Err(_) => return Err(Error::config(format!("psi csv line {}: not numeric", no + 1))),
            }
        }
        let a: BTreeSet<u64> = rows.iter().map(|r| r.0.to_bits()).collect();
        let b: BTreeSet<u64> = rows.iter().map(|r| r.1.to_bits()).collect();
        let mut a_grid: Vec<f64> = a.into_iter().map(f64::from_bits).collect();
        let mut b_grid: Vec<f64> = b.into_iter().map(f64::from_bits).collect();
        a_grid.sort_by(f64::total_cmp);
        b_grid.sort_by(f64::total_cmp);
        let mut values = vec![f64::NAN; a_grid.len() * b_grid.len()];
        for (x, y, v) in rows {
            let i = a_grid.partition_point(|&g| g < x);
            let j = b_grid.partition_point(|&g| g < y);
            values[i * b_grid.len() + j] = v;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::config("psi csv does not cover a full grid"));
        }
        Self::new(a_grid, b_grid, values)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "a,b,psi")?;
        for (i, a) in self.a_grid.iter().enumerate() {
            for (j, b) in self.b_grid.iter().enumerate() {
                writeln!(out, "{a},{b},{:.15e}", self.values[i * self.b_grid.len() + j])?;
            }
        }
        Ok(())
    }

    /// Largest `r` with `[0, r]^2` inside the table.
    pub fn extent(&self) -> f64 {
        self.a_grid.last().unwrap().min(*self.b_grid.last().unwrap())
    }

    fn covers_origin(&self) -> bool {
        self.a_grid[0] <= 0.0 && self.b_grid[0] <= 0.0
    }

    pub fn value(&self, a: f64, b: f64) -> f64 {
        let locate = |g: &[f64], x: f64| {
            let k = g.partition_point(|&t| t <= x).clamp(1, g.len() - 1) - 1;
            let w = ((x - g[k]) / (g[k + 1] - g[k])).clamp(0.0, 1.0);
            (k, w)
        };
        let (i, wa) = locate(&self.a_grid, a);
        let (j, wb) = locate(&self.b_grid, b);
        let nb = self.b_grid.len();
        let v = |i: usize, j: usize| self.values[i * nb + j];
        (1.0 - wa) * ((1.0 - wb) * v(i, j) + wb * v(i, j + 1)) + wa * ((1.0 - wb) * v(i + 1, j) + wb * v(i + 1, j + 1))
    }
}

pub fn psi_brownian(a: f64, b: f64) -> f64 {
    let d = b - a;
    (-d * d / 2.0).exp() / (2.0 * PI).sqrt() * -(-2.0 * a * b).exp_m1()
}

/// Smallest ray parameter the table must reach for [`a_generic_quadrature`].
pub const MIN_RAY_REACH: f64 = 4.0;

/// `int_0^inf x^{-1/alpha} psi(u x^{-1/alpha}, v x^{-1/alpha}) dx`.
///
/// With `s = x^{-1/alpha}` this is `alpha int_0^inf s^{-alpha} psi(us, vs) ds`.
/// The table is integrated exactly piecewise between grid crossings; past
/// the edge of the table `psi` is taken constant along the ray, giving the
/// tail `alpha psi_exit s_exit^{1 - alpha} / (alpha - 1)`.
pub fn a_generic_quadrature(u: f64, v: f64, psi: &PsiTable, alpha: f64, tolerance: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::domain(format!("alpha = {alpha} outside (1, 2]")));
    }
    if u <= 0.0 || v <= 0.0 {
        return Ok(0.0);
    }
    let far = u.max(v);
    let s_exit = psi.extent() / far;
    if !psi.covers_origin() || s_exit < MIN_RAY_REACH {
        return Err(Error::domain(format!(
            "psi table must cover [0, {}]^2 for (u, v) = ({u}, {v}); it covers [{}, {}]^2",
            MIN_RAY_REACH * far,
            psi.a_grid[0].max(psi.b_grid[0]),
            psi.extent()
        )));
    }
    let mut breaks: Vec<f64> = psi
        .a_grid
        .iter()
        .map(|&g| g / u)
        .chain(psi.b_grid.iter().map(|&g| g / v))
        .filter(|&s| s > 0.0 && s < s_exit)
        .collect();
    breaks.push(0.0);
    breaks.push(s_exit);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1.0));
    let integrand = |s: f64| {
        if s == 0.0 {
            0.0
        } else {
            alpha * s.powf(-alpha) * psi.value(u * s, v * s)
        }
    };
    let body = integrate_with_breaks(integrand, &breaks, tolerance)?;
    let exit = psi.value(u * s_exit, v * s_exit);
    let tail = alpha * exit * s_exit.powf(1.0 - alpha) / (alpha - 1.0);
    Ok(body.value + tail)
}

/// The potential density used by a limit model.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialDensity {
    /// `2 min(u, v)`.
    Brownian,
    /// Quadrature over a supplied table.
    Table { psi: PsiTable, tolerance: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitModel {
    pub alpha: f64,
    pub beta: f64,
    pub sigma2: Option<f64>,
    pub density: PotentialDensity,
}

impl LimitModel {
    pub fn brownian(sigma2: f64) -> Self {
        LimitModel {
            alpha: 2.0,
            beta: 0.0,
            sigma2: Some(sigma2),
            density: PotentialDensity::Brownian,
        }
    }

    pub fn for_law(law: &IncrementLaw) -> Result<Self> {
        match law.variance() {
            Some(s2) => Ok(Self::brownian(s2)),
            None => Err(Error::Unsupported(format!(
                "no closed-form potential density for alpha = {}; supply a psi table",
                law.alpha()
            ))),
        }
    }

    pub fn with_table(alpha: f64, beta: f64, psi: PsiTable, tolerance: f64) -> Self {
        LimitModel {
            alpha,
            beta,
            sigma2: None,
            density: PotentialDensity::Table { psi, tolerance },
        }
    }

    pub fn a(&self, u: f64, v: f64) -> Result<f64> {
        match &self.density {
            PotentialDensity::Brownian => Ok(a_20_closed(u, v)),
            PotentialDensity::Table { psi, tolerance } => a_generic_quadrature(u, v, psi, self.alpha, *tolerance),
        }
    }

    /// `c = 1 / a(1, 1)`.
    pub fn c_const(&self) -> Result<f64> {
        Ok(1.0 / self.a(1.0, 1.0)?)
    }
}

fn for_each_permutation(items: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        f(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        for_each_permutation(items, k + 1, f);
        items.swap(k, i);
    }
}

fn permutation_sum(u_list: &[f64], first: impl Fn(f64) -> Result<f64>, a: &impl Fn(f64, f64) -> f64) -> Result<f64> {
    let m = u_list.len();
    if m == 0 {
        return Err(Error::domain("need at least one level"));
    }
    if m > MAX_KAC_ORDER {
        return Err(Error::Unsupported(format!("Kac order {m} exceeds {MAX_KAC_ORDER}")));
    }
    let mut idx: Vec<usize> = (0..m).collect();
    let mut total = 0.0;
    let mut err = None;
    for_each_permutation(&mut idx, 0, &mut |perm| {
        let lead = match first(u_list[perm[0]]) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                return;
            }
        };
        let chain: f64 = perm.windows(2).map(|w| a(u_list[w[0]], u_list[w[1]])).product();
        total += lead * chain;
    });
    match err {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// `sum_sigma a(u0, u_sigma(1)) prod_i a(u_sigma(i), u_sigma(i+1))`.
pub fn kac_moment_value(u0: f64, u_list: &[f64], a: impl Fn(f64, f64) -> f64) -> Result<f64> {
    permutation_sum(u_list, |u| Ok(a(u0, u)), &a)
}

/// `(c^{-1}(N)/N)^{m-1} sum_sigma h+(u_sigma(1) N) prod_i a(u_sigma(i), u_sigma(i+1))`.
pub fn kac_from_zero(
    u_list: &[f64],
    a: impl Fn(f64, f64) -> f64,
    h_plus: &RenewalTable,
    level: usize,
    norming: &NormingSequence,
) -> Result<f64> {
    let sum = permutation_sum(u_list, |u| h_plus.h(crate::green::lattice_point(u, level)), &a)?;
    let factor = norming.c_inv(level as f64) / level as f64;
    Ok(factor.powi(u_list.len() as i32 - 1) * sum)
}

/// `exp(-rate x)` for `x >= 0`.
pub fn exponential_limit_sf(x: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        (-rate * x).exp()
    }
}

/// Rate of the exponential limit of `L / N` given `L > 0`: `sigma^2 / 2` for
/// finite-variance laws.
pub fn exponential_rate(law: &IncrementLaw) -> Result<f64> {
    let model = LimitModel::for_law(law)?;
    Ok(model.c_const()? * model.sigma2.unwrap())
}

/// Sup-distance between the law of `(L - U) / scale`, with `L` geometric on
/// `{1, 2, ...}` with parameter `p` and `U` uniform on `[0, 1)`, and the
/// exponential law of the given rate.
///
/// The survival function of `(L - U) / scale` is `(1 - p)^k` at `x = k /
/// scale` and linear in between; the bound adds the chord error of the
/// exponential on each cell.
pub fn jittered_geometric_distance(p: f64, scale: f64, rate: f64) -> f64 {
    let lq = (-p).ln_1p();
    let h = rate / scale;
    let chord = h * h / 8.0;
    let gap = |k: f64| ((k * lq).exp() - (-h * k).exp()).abs();
    let mut worst = 0.0f64;
    let mut k = 0.0;
    loop {
        let tail = (-h * k).exp();
        worst = worst.max(gap(k).max(gap(k + 1.0)) + chord * tail);
        if (k * lq).exp() < 1e-14 && tail < 1e-14 {
            return worst;
        }
        k += 1.0;
    }
}

/// Laplace transform `exp(-lambda x0 / (1 + 2 u lambda))` of a compound
/// Poisson variable with rate `x0 / (2u)` and exponential jumps of mean `2u`.
pub fn field_marginal_laplace(u: f64, lambda: f64, x0: f64) -> f64 {
    (-lambda * x0 / (1.0 + 2.0 * u * lambda)).exp()
}

/// Limit of `E[l(u1) l(u2)]` for the rescaled field with `E l(u) = x0`:
/// `x0^2 + 4 x0 min(u1, u2)`.
pub fn field_product_moment(u1: f64, u2: f64, x0: f64) -> f64 {
    x0 * x0 + x0 * 2.0 * a_20_closed(u1, u2)
}

pub fn write_predictions_csv<W: Write>(mut out: W, rows: &[(Vec<f64>, usize, f64)]) -> Result<()> {
    writeln!(out, "u_list,m,prediction")?;
    for (u, m, v) in rows {
        let key: Vec<String> = u.iter().map(|x| x.to_string()).collect();
        writeln!(out, "{},{m},{v:.15e}", key.join(" "))?;
    }
    Ok(())
}
