use std::collections::BTreeMap;
use std::time::Instant;

use super::config::{ExperimentConfig, ExperimentId, Params};
use super::report::{ExperimentRecord, Table};
use crate::error::{Error, Result};
use crate::green::{escape_prob, green_sum, hitting_prob, lattice_point};
use crate::knight::{
    default_support_cap, exact_q_pmf, extinction_by_generating_function, identity_check, kernel_row,
    sum_consecutive_pmf,
};
use crate::ladder::{compute_u, exact_ladder_pmf, renewal_table, Cumulative, LadderKind, LadderLaw, RenewalTable};
use crate::limit::{
    a_20_closed, a_20_quadrature, a_generic_quadrature, exponential_rate, field_marginal_laplace, field_product_moment,
    jittered_geometric_distance, kac_from_zero, kac_moment_value, write_predictions_csv, LimitModel, PsiTable,
};
use crate::parallel::{default_workers, derive_seed, replicate};
use crate::sim::{field_levels, rescaled_field, MRule, Simulator, DEFAULT_STEP_CAP};
use crate::stats::{
    chi_square_pmf, chi_square_two_sample, empirical_laplace, fit_geometric, jitter_lattice, ks_one_sample,
    ks_one_sample_with_allowance, mean_compare, sigma_report, weighted_tail_slope, TestReport, SIGMAS,
};
use crate::walk::IncrementLaw;

/// Largest fraction of capped samples a finite-variance run may have.
pub const FINITE_VARIANCE_CAPPED_TOLERANCE: f64 = 1e-4;

/// Runs the experiment named in `config` and collects its reports and
/// tables. Nothing is written to disk; see [`super::emit_report`].
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRecord> {
    let started = Instant::now();
    let mut run = Run {
        params: Params::new(config),
        workers: config.workers.unwrap_or_else(default_workers).max(1),
        seed: config.seed,
        next_stream: 0,
        reports: Vec::new(),
        tables: Vec::new(),
        capped: 0,
        simulated: 0,
    };
    match config.id {
        ExperimentId::KilledGeometric => killed_geometric(&mut run)?,
        ExperimentId::ConditionalExponential => conditional_exponential(&mut run)?,
        ExperimentId::HittingAsymptotics => hitting_asymptotics(&mut run)?,
        ExperimentId::GreenConvergence => green_convergence(&mut run)?,
        ExperimentId::QuadratureAform => quadrature_aform(&mut run)?,
        ExperimentId::KacMoments => kac_moments(&mut run)?,
        ExperimentId::KnightIdentity => knight_identity(&mut run)?,
        ExperimentId::FddMarginal => fdd_marginal(&mut run)?,
        ExperimentId::ReflectedEquivalence => reflected_equivalence(&mut run)?,
        ExperimentId::HeavytailSlopes => heavytail_slopes(&mut run)?,
    }
    // heavy-tail runs report their own, looser cap check
    if run.simulated > 0 && config.id != ExperimentId::HeavytailSlopes {
        let mut r = TestReport::abs_error(
            "fraction of samples at the step cap",
            run.capped as f64 / run.simulated as f64,
            0.0,
            FINITE_VARIANCE_CAPPED_TOLERANCE,
        );
        r.n = run.simulated as usize;
        run.report(r);
    }
    Ok(ExperimentRecord {
        config: config.clone(),
        reports: run.reports,
        tables: run.tables,
        wall_clock: started.elapsed(),
        workers: run.workers,
        capped: run.capped,
        simulated: run.simulated,
        artifacts: Vec::new(),
    })
}

struct Run<'a> {
    params: Params<'a>,
    workers: usize,
    seed: u64,
    next_stream: u64,
    reports: Vec<TestReport>,
    tables: Vec<Table>,
    capped: u64,
    simulated: u64,
}

impl Run<'_> {
    /// Master seed for the next independent batch; batches are numbered in
    /// program order, so the sequence depends only on the config seed.
    fn batch_seed(&mut self) -> u64 {
        self.next_stream += 1;
        derive_seed(!self.seed, self.next_stream)
    }

    fn account(&mut self, capped: impl IntoIterator<Item = bool>) {
        for c in capped {
            self.simulated += 1;
            self.capped += c as u64;
        }
    }

    fn report(&mut self, r: TestReport) {
        self.reports.push(r);
    }
}

fn f(x: f64) -> String {
    x.to_string()
}

fn geometric_pmf(p: f64) -> impl Fn(u64) -> f64 {
    move |k| {
        if k == 0 {
            0.0
        } else {
            p * ((k - 1) as f64 * (-p).ln_1p()).exp()
        }
    }
}

fn ladders(law: &IncrementLaw) -> Result<(LadderLaw, LadderLaw)> {
    let (lo, hi) = law.jump_range().ok_or_else(|| {
        Error::Unsupported(format!(
            "'{}' has no finite support; exact ladder laws need one",
            law.name()
        ))
    })?;
    let up = exact_ladder_pmf(law, LadderKind::StrictAscending, hi.max(1) as usize)?;
    let down = exact_ladder_pmf(law, LadderKind::WeakDescending, (-lo).max(1) as usize)?;
    Ok((up, down))
}

fn h_plus_table(law: &IncrementLaw, x_max: usize) -> Result<RenewalTable> {
    let (up, _) = ladders(law)?;
    renewal_table(&up, x_max, Cumulative::LessEq)
}

fn require_finite_variance(law: &IncrementLaw, id: ExperimentId) -> Result<LimitModel> {
    LimitModel::for_law(law).map_err(|_| {
        Error::config(format!(
            "{id} needs a finite-variance law, '{}' has alpha = {}",
            law.name(),
            law.alpha()
        ))
    })
}

/// Killed excursions from `start`, one count vector per sample.
fn killed_counts(run: &mut Run, sim: &Simulator, start: u64, samples: usize) -> Result<(Vec<Vec<u64>>, u64)> {
    let seed = run.batch_seed();
    let out = replicate(seed, samples, run.workers, |rng, _| {
        let s = sim.killed(start, rng);
        (s.counts, s.capped)
    })?;
    run.account(out.iter().map(|o| o.1));
    Ok((out.into_iter().map(|o| o.0).collect(), seed))
}

fn column(samples: &[Vec<u64>], i: usize) -> Vec<u64> {
    samples.iter().map(|c| c[i]).collect()
}

fn killed_geometric(run: &mut Run) -> Result<()> {
    let laws = run.params.laws(&["simple"])?;
    let levels = run.params.levels(&[50, 100, 200])?;
    let samples = run.params.samples(1_000_000)?;
    let cap = run.params.cap(DEFAULT_STEP_CAP);
    run.params.finish()?;
    let mut table = Table::new(
        "killed-geometric.csv",
        &["law", "level", "p_hat", "stderr", "reference", "n"],
    );
    for law in &laws {
        for &n in &levels {
            let sim = Simulator::new(law, &[n], cap)?;
            let (raw, seed) = killed_counts(run, &sim, n, samples)?;
            let counts = column(&raw, 0);
            let (p, se) = fit_geometric(&counts)?;
            let reference = escape_prob(law, n as usize)?;
            let tag = format!("{} N={n}", law.name());
            run.report(sigma_report(&format!("{tag}: geometric parameter"), p, se, reference, samples).with_seed(seed));
            run.report(
                chi_square_pmf(&format!("{tag}: geometric fit"), &counts, geometric_pmf(reference), 0)?.with_seed(seed),
            );
            table.push(vec![
                law.name().into(),
                n.to_string(),
                f(p),
                f(se),
                f(reference),
                samples.to_string(),
            ]);
        }
    }
    run.tables.push(table);
    Ok(())
}

fn empirical_sf_table(name: String, values: &[f64], rate: f64, points: usize) -> Table {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut table = Table::new(name, &["x", "empirical_sf", "reference_sf", "n"]);
    let x_max = 8.0 / rate;
    for j in 0..=points {
        let x = x_max * j as f64 / points as f64;
        let above = n - sorted.partition_point(|&v| v <= x);
        table.push(vec![
            f(x),
            f(above as f64 / n as f64),
            f((-rate * x).exp()),
            n.to_string(),
        ]);
    }
    table
}

fn conditional_exponential(run: &mut Run) -> Result<()> {
    let laws = run.params.laws(&["simple", "sigma4"])?;
    let levels = run.params.levels(&[200])?;
    let samples = run.params.samples(100_000)?;
    let cap = run.params.cap(DEFAULT_STEP_CAP);
    let points: usize = run.params.get("grid_points", 100)?;
    run.params.finish()?;
    for law in &laws {
        require_finite_variance(law, ExperimentId::ConditionalExponential)?;
        let rate = exponential_rate(law)?;
        for &n in &levels {
            // started at N, so every sample has L >= 1
            let sim = Simulator::new(law, &[n], cap)?;
            let (raw, seed) = killed_counts(run, &sim, n, samples)?;
            let jitter_seed = run.batch_seed();
            let x = jitter_lattice(&column(&raw, 0), n as f64, jitter_seed);
            let name = format!("{} N={n}: KS of L/N given L > 0", law.name());
            // exact finite-N distance from the limit law, charged as bias
            let allowance = jittered_geometric_distance(escape_prob(law, n as usize)?, n as f64, rate);
            let r = ks_one_sample_with_allowance(
                &name,
                &x,
                |t| -(-rate * t).exp_m1(),
                &format!("Exp(rate {rate})"),
                allowance,
            )?;
            run.report(r.with_seed(seed));
            run.tables.push(empirical_sf_table(
                format!("conditional-exponential-{}-{n}.csv", law.name()),
                &x,
                rate,
                points,
            ));
        }
    }
    Ok(())
}

fn hitting_asymptotics(run: &mut Run) -> Result<()> {
    let laws = run.params.laws(&["simple"])?;
    let levels = run.params.levels(&[50, 100, 200, 400])?;
    let starts: Vec<usize> = run.params.list("starts", &[0, 1, 2])?;
    let identity_tol: f64 = run.params.get("identity_tolerance", 1e-8)?;
    let bias: f64 = run.params.get("bias_constant", 2.0)?;
    run.params.finish()?;
    let mut table = Table::new(
        "hitting-asymptotics.csv",
        &["law", "level", "x", "hitting_prob", "identity_rhs", "asymptotic"],
    );
    for law in &laws {
        let model = require_finite_variance(law, ExperimentId::HittingAsymptotics)?;
        let c = model.c_const()?;
        let (_, down) = ladders(law)?;
        let top = *levels.iter().max().unwrap() as usize;
        let h_plus = h_plus_table(law, top)?;
        for &n in &levels {
            let n = n as usize;
            let expected_visits = 1.0 / escape_prob(law, n)?;
            let scale = law.norming().local_time_scale(n as f64);
            for &x in starts.iter().filter(|&&x| x <= n) {
                let hit = hitting_prob(law, x, n)?;
                let u = compute_u(x, n, &h_plus, &down)?;
                let rhs = u / expected_visits;
                let asym = c * u * scale;
                let tag = format!("{} N={n} x={x}", law.name());
                run.report(TestReport::abs_error(
                    format!("{tag}: P_x(L > 0) = U / E_N L"),
                    hit,
                    rhs,
                    identity_tol,
                ));
                run.report(TestReport::abs_error(
                    format!("{tag}: P_x(L > 0) against c U N / c^-1(N)"),
                    hit,
                    asym,
                    asym * bias / n as f64,
                ));
                table.push(vec![
                    law.name().into(),
                    n.to_string(),
                    x.to_string(),
                    f(hit),
                    f(rhs),
                    f(asym),
                ]);
            }
        }
    }
    run.tables.push(table);
    Ok(())
}

/// `(2/N)(1 + 1/|u - v|)` off the diagonal and `2/N` on it.
pub fn green_tolerance(u: f64, v: f64, level: u64) -> f64 {
    let base = 2.0 / level as f64;
    if (u - v).abs() < 1e-12 {
        base
    } else {
        base * (1.0 + 1.0 / (u - v).abs())
    }
}

fn green_convergence(run: &mut Run) -> Result<()> {
    let laws = run.params.laws(&["simple"])?;
    let levels = run.params.levels(&[400])?;
    let grid = run.params.u_list(&[0.2, 0.4, 0.6, 0.8, 1.0])?;
    run.params.finish()?;
    let mut table = Table::new(
        "green-convergence.csv",
        &[
            "law",
            "level",
            "u",
            "v",
            "x",
            "y",
            "green",
            "error_bound",
            "scaled_green",
            "limit",
            "tolerance",
        ],
    );
    for law in &laws {
        let model = require_finite_variance(law, ExperimentId::GreenConvergence)?;
        for &n in &levels {
            let scale = law.norming().local_time_scale(n as f64);
            for &u in &grid {
                for &v in &grid {
                    let (x, y) = (lattice_point(u, n as usize), lattice_point(v, n as usize));
                    if x == 0 || y == 0 {
                        return Err(Error::config(format!("u = {u}, v = {v} round to site 0 at N = {n}")));
                    }
                    let g = green_sum(law, x, y, 1e-6)?;
                    let scaled = scale * g.value;
                    let limit = model.a(u, v)?;
                    let tol = green_tolerance(u, v, n);
                    run.report(TestReport::abs_error(
                        format!("{} N={n} (u,v)=({u},{v}): scaled Green", law.name()),
                        scaled,
                        limit,
                        tol,
                    ));
                    table.push(vec![
                        law.name().into(),
                        n.to_string(),
                        f(u),
                        f(v),
                        x.to_string(),
                        y.to_string(),
                        f(g.value),
                        f(g.error_bound),
                        f(scaled),
                        f(limit),
                        f(tol),
                    ]);
                }
            }
        }
    }
    run.tables.push(table);
    Ok(())
}

fn quadrature_aform(run: &mut Run) -> Result<()> {
    let grid = run
        .params
        .u_list(&[0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5])?;
    let tolerance: f64 = run.params.get("tolerance", 1e-6)?;
    let quad_tol: f64 = run.params.get("quadrature_tolerance", 1e-8)?;
    let extent: f64 = run.params.get("psi_extent", 8.0)?;
    let step: f64 = run.params.get("psi_step", 0.01)?;
    let table_tol: f64 = run.params.get("table_tolerance", 1e-4)?;
    run.params.finish()?;
    let mut table = Table::new(
        "quadrature-aform.csv",
        &["u", "v", "quadrature", "closed_form", "abs_error"],
    );
    let mut worst = (0.0f64, 0.0, 0.0, 0.0);
    for &u in &grid {
        for &v in &grid {
            let q = a_20_quadrature(u, v, quad_tol)?;
            let exact = a_20_closed(u, v);
            let err = (q - exact).abs();
            if err >= worst.0 {
                worst = (err, q, exact, 0.0);
            }
            table.push(vec![f(u), f(v), f(q), f(exact), f(err)]);
        }
    }
    let points = grid.len() * grid.len();
    let mut r = TestReport::abs_error(
        format!("max |quadrature - 2 min(u,v)| over {points} points"),
        worst.1,
        worst.2,
        tolerance,
    );
    r.n = points;
    run.report(r);
    // the same density through the generic table route
    let psi = PsiTable::brownian(extent, step)?;
    let a11 = a_generic_quadrature(1.0, 1.0, &psi, 2.0, quad_tol)?;
    run.report(TestReport::abs_error(
        "tabulated psi route at (1,1)",
        a11,
        2.0,
        table_tol,
    ));
    run.tables.push(table);
    Ok(())
}

fn kac_moments(run: &mut Run) -> Result<()> {
    let laws = run.params.laws(&["simple"])?;
    let levels = run.params.levels(&[200])?;
    let samples = run.params.samples(1_000_000)?;
    let cap = run.params.cap(DEFAULT_STEP_CAP);
    let mixed: Vec<f64> = run.params.u_list(&[0.5, 1.0])?;
    let from_zero: Vec<f64> = run.params.list("from_zero_u", &[0.5, 1.0, 2.0])?;
    let band: f64 = run.params.get("band", 0.1)?;
    run.params.finish()?;
    let mut predictions = Vec::new();
    for law in &laws {
        let model = require_finite_variance(law, ExperimentId::KacMoments)?;
        let a = |u: f64, v: f64| model.a(u, v).unwrap_or(f64::NAN);
        let norming = law.norming();
        for &n in &levels {
            let tag = format!("{} N={n}", law.name());
            let factor = norming.c_inv(n as f64) / n as f64;

            // from N: levels {u N} for the mixed list plus N itself
            let mut us = mixed.clone();
            us.push(1.0);
            us.sort_by(f64::total_cmp);
            us.dedup();
            let sim = Simulator::new(law, &field_levels(&us, n)?, cap)?;
            let (raw, seed) = killed_counts(run, &sim, n, samples)?;
            let at_n = us.iter().position(|&u| u == 1.0).unwrap();
            let l_n: Vec<f64> = raw.iter().map(|c| c[at_n] as f64).collect();
            let first = factor * kac_moment_value(1.0, &[1.0], a)?;
            predictions.push((vec![1.0], 1, first));
            let bseed = run.batch_seed();
            run.report(mean_compare(
                &format!("{tag}: E_N L(N)"),
                &l_n,
                first,
                SIGMAS,
                0.0,
                bseed,
            )?);
            let p = escape_prob(law, n as usize)?;
            let second = (2.0 - p) / (p * p);
            let sq: Vec<f64> = l_n.iter().map(|x| x * x).collect();
            let bseed = run.batch_seed();
            run.report(mean_compare(
                &format!("{tag}: E_N L(N)^2 (exact geometric)"),
                &sq,
                second,
                SIGMAS,
                0.0,
                bseed,
            )?);
            let idx: Vec<usize> = mixed.iter().map(|u| us.iter().position(|w| w == u).unwrap()).collect();
            let products: Vec<f64> = raw.iter().map(|c| idx.iter().map(|&i| c[i] as f64).product()).collect();
            let mixed_pred = factor.powi(mixed.len() as i32) * kac_moment_value(1.0, &mixed, a)?;
            predictions.push((mixed.clone(), mixed.len(), mixed_pred));
            let bseed = run.batch_seed();
            let r = mean_compare(
                &format!("{tag}: mixed moment at u = {mixed:?}"),
                &products,
                mixed_pred,
                SIGMAS,
                band,
                bseed,
            )?;
            run.report(r.with_seed(seed));

            // from 0
            let top = lattice_point(from_zero.iter().cloned().fold(0.0, f64::max), n as usize);
            let h_plus = h_plus_table(law, top)?;
            let sim = Simulator::new(law, &field_levels(&from_zero, n)?, cap)?;
            let (raw, _) = killed_counts(run, &sim, 0, samples)?;
            for (i, &u) in from_zero.iter().enumerate() {
                let pred = kac_from_zero(&[u], a, &h_plus, n as usize, &norming)?;
                predictions.push((vec![0.0, u], 1, pred));
                let v: Vec<f64> = raw.iter().map(|c| c[i] as f64).collect();
                let bseed = run.batch_seed();
                run.report(mean_compare(
                    &format!("{tag}: E_0 L(uN) at u = {u}"),
                    &v,
                    pred,
                    SIGMAS,
                    0.0,
                    bseed,
                )?);
            }
        }
    }
    let mut buf = Vec::new();
    write_predictions_csv(&mut buf, &predictions)?;
    let text = String::from_utf8(buf).expect("csv is utf-8");
    let mut lines = text.lines();
    let mut table = Table::new("kac-predictions.csv", &["u_list", "m", "prediction"]);
    lines.next();
    for line in lines {
        table.push(line.split(',').map(str::to_string).collect());
    }
    run.tables.push(table);
    Ok(())
}

fn knight_identity(run: &mut Run) -> Result<()> {
    let laws = run.params.laws(&["simple"])?;
    let m_list: Vec<u64> = run.params.list("m_list", &[1, 3])?;
    let n_list: Vec<u64> = run.params.list("n_list", &[1, 2, 5])?;
    let samples = run.params.samples(100_000)?;
    let max_generation: usize = run.params.get("extinction_generations", 20)?;
    run.params.finish()?;
    let law = match laws.as_slice() {
        [law] => law.clone(),
        _ => return Err(Error::config("knight-identity takes exactly one law")),
    };
    for &m in &m_list {
        for &n in &n_list {
            let seed = run.batch_seed();
            let reports = identity_check(&law, m, n, samples, seed, run.workers)?;
            run.simulated += samples as u64;
            for r in reports {
                run.report(r);
            }
            let pmf = sum_consecutive_pmf(m, n as usize, default_support_cap(m, n as usize))?;
            let mut table = Table::new(format!("knight-exact-m{m}-n{n}.csv"), &["state", "probability"]);
            let last = pmf.iter().rposition(|&p| p > 1e-15).unwrap_or(0);
            for (k, p) in pmf.iter().enumerate().take(last + 1) {
                table.push(vec![k.to_string(), f(*p)]);
            }
            run.tables.push(table);
        }
    }
    kernel_checks(run, max_generation)
}

fn kernel_checks(run: &mut Run, max_generation: usize) -> Result<()> {
    const ROWS: u64 = 30;
    const WIDTH: u64 = 2000;
    let (mut sum_err, mut mean_err, mut conv_err) = (0.0f64, 0.0f64, 0.0f64);
    let geometric: Vec<f64> = (0..=WIDTH).map(|k| 0.5f64.powi(k as i32 + 1)).collect();
    let mut conv = vec![0.0; WIDTH as usize + 1];
    conv[0] = 1.0;
    for i in 0..ROWS {
        let (row, _) = kernel_row(i, WIDTH);
        sum_err = sum_err.max((row.iter().sum::<f64>() - 1.0).abs());
        let mean: f64 = row.iter().enumerate().map(|(j, p)| j as f64 * p).sum();
        mean_err = mean_err.max((mean - i as f64).abs());
        conv_err = conv_err.max(row.iter().zip(&conv).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        let mut next = vec![0.0; conv.len()];
        for (a, &p) in conv.iter().enumerate() {
            for (b, &q) in geometric.iter().enumerate().take(conv.len() - a) {
                next[a + b] += p * q;
            }
        }
        conv = next;
    }
    run.report(TestReport::abs_error(
        format!("kernel row sums, rows 0..{ROWS}"),
        1.0 + sum_err,
        1.0,
        1e-10,
    ));
    run.report(TestReport::abs_error(
        format!("kernel mean preservation, rows 0..{ROWS}"),
        mean_err,
        0.0,
        1e-9,
    ));
    run.report(TestReport::abs_error(
        "kernel rows against geometric convolutions",
        conv_err,
        0.0,
        1e-12,
    ));
    let mut worst = 0.0f64;
    for n in 1..=max_generation {
        let exact = n as f64 / (n as f64 + 1.0);
        let by_kernel = exact_q_pmf(1, n, default_support_cap(1, n))?[0];
        worst = worst
            .max((by_kernel - exact).abs())
            .max((extinction_by_generating_function(n) - exact).abs());
    }
    run.report(TestReport::abs_error(
        format!("extinction n/(n+1), n <= {max_generation}"),
        worst,
        0.0,
        1e-9,
    ));
    Ok(())
}

fn fdd_marginal(run: &mut Run) -> Result<()> {
    let laws = run.params.laws(&["simple"])?;
    let levels = run.params.levels(&[500])?;
    let u_list = run.params.u_list(&[0.5, 1.0, 2.0])?;
    let samples = run.params.samples(100_000)?;
    let cap = run.params.cap(DEFAULT_STEP_CAP);
    let lambdas: Vec<f64> = run.params.list("lambdas", &[0.5, 1.0, 2.0])?;
    let m_text: String = run.params.get("m", "asymptotic".to_string())?;
    let laplace_tol: f64 = run.params.get("laplace_tolerance", 0.01)?;
    let band: f64 = run.params.get("band", 0.1)?;
    run.params.finish()?;
    let m_rule = match m_text.as_str() {
        "asymptotic" => MRule::Asymptotic,
        other => MRule::Fixed(
            other
                .parse()
                .map_err(|_| Error::config(format!("'m' must be 'asymptotic' or an integer, got '{other}'")))?,
        ),
    };
    let mut laplace_table = Table::new(
        "fdd-marginal-laplace.csv",
        &["law", "level", "u", "lambda", "empirical", "stderr", "reference"],
    );
    for law in &laws {
        for &n in &levels {
            let m = m_rule.resolve(law, n)?;
            let h_n = h_plus_table(law, n as usize)?.h(n as usize)?;
            let x0 = m as f64 * h_n * law.norming().local_time_scale(n as f64);
            let sim = Simulator::new(law, &field_levels(&u_list, n)?, cap)?;
            let seed = run.batch_seed();
            let fields = replicate(seed, samples, run.workers, |rng, _| {
                rescaled_field(&sim, n, &u_list, m, rng)
            })?;
            run.account(fields.iter().map(|s| s.capped));
            let tag = format!("{} N={n} M={m}", law.name());
            for (i, &u) in u_list.iter().enumerate() {
                let values: Vec<f64> = fields.iter().map(|s| s.values[i]).collect();
                for (&lambda, (mean, se)) in lambdas.iter().zip(empirical_laplace(&values, &lambdas)?) {
                    let reference = field_marginal_laplace(u, lambda, x0);
                    let mut r = TestReport::abs_error(
                        format!("{tag}: Laplace transform at u={u}, lambda={lambda}"),
                        mean,
                        reference,
                        laplace_tol,
                    );
                    r.n = samples;
                    run.report(r.with_seed(seed));
                    laplace_table.push(vec![
                        law.name().into(),
                        n.to_string(),
                        f(u),
                        f(lambda),
                        f(mean),
                        f(se),
                        f(reference),
                    ]);
                }
                let zeros = values.iter().filter(|&&v| v == 0.0).count() as f64 / samples as f64;
                let atom = (-x0 / (2.0 * u)).exp();
                let se = (atom * (1.0 - atom) / samples as f64).sqrt();
                run.report(
                    sigma_report(&format!("{tag}: P(l(u) = 0) at u={u}"), zeros, se, atom, samples).with_seed(seed),
                );
            }
            for i in 0..u_list.len() {
                for j in i + 1..u_list.len() {
                    let (u1, u2) = (u_list[i], u_list[j]);
                    let products: Vec<f64> = fields.iter().map(|s| s.values[i] * s.values[j]).collect();
                    let pred = field_product_moment(u1, u2, x0);
                    let bseed = run.batch_seed();
                    run.report(mean_compare(
                        &format!("{tag}: E[l({u1}) l({u2})]"),
                        &products,
                        pred,
                        SIGMAS,
                        band,
                        bseed,
                    )?);
                }
            }
        }
    }
    run.tables.push(laplace_table);
    Ok(())
}

fn reflected_equivalence(run: &mut Run) -> Result<()> {
    let laws = run.params.laws(&["simple", "lazy"])?;
    let levels = run.params.levels(&[5, 20])?;
    let samples = run.params.samples(100_000)?;
    let cap = run.params.cap(DEFAULT_STEP_CAP);
    let m: u64 = run.params.get("m", 100)?;
    run.params.finish()?;
    let mut table = Table::new("reflected-equivalence.csv", &["law", "level", "k", "direct", "iid"]);
    for law in &laws {
        let sim = Simulator::new(law, &levels, cap)?;
        let direct_seed = run.batch_seed();
        let direct = replicate(direct_seed, samples, run.workers, |rng, _| sim.reflected_direct(m, rng))?;
        let iid_seed = run.batch_seed();
        let iid = replicate(iid_seed, samples, run.workers, |rng, _| sim.reflected_iid(m, rng))?;
        run.account(direct.iter().chain(&iid).map(|s| s.capped));
        for (i, &level) in levels.iter().enumerate() {
            let a: Vec<u64> = direct.iter().map(|s| s.counts[i]).collect();
            let b: Vec<u64> = iid.iter().map(|s| s.counts[i]).collect();
            let name = format!("{} M={m} level {level}: direct against iid sum", law.name());
            run.report(chi_square_two_sample(&name, &a, &b)?.with_seed(direct_seed));
            let mut hist: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
            for &k in &a {
                hist.entry(k).or_default().0 += 1;
            }
            for &k in &b {
                hist.entry(k).or_default().1 += 1;
            }
            for (k, (x, y)) in hist {
                table.push(vec![
                    law.name().into(),
                    level.to_string(),
                    k.to_string(),
                    x.to_string(),
                    y.to_string(),
                ]);
            }
        }
    }
    run.tables.push(table);
    Ok(())
}

fn heavytail_slopes(run: &mut Run) -> Result<()> {
    let laws = run.params.laws(&["power-1.5"])?;
    let levels = run.params.levels(&[100, 200, 400])?;
    let samples = run.params.samples(1_000_000)?;
    let cap = run.params.cap(DEFAULT_STEP_CAP);
    let inv_level: u64 = run.params.get("invariance_level", 100)?;
    let inv_starts: Vec<u64> = run.params.list("invariance_starts", &[2, 10])?;
    let inv_samples: usize = run.params.get("invariance_samples", 200_000)?;
    let slope_tol: f64 = run.params.get("slope_tolerance", 0.1)?;
    let capped_tol: f64 = run.params.get("capped_tolerance", 1e-3)?;
    run.params.finish()?;
    let Some(inv_index) = levels.iter().position(|&l| l == inv_level) else {
        return Err(Error::config(format!(
            "invariance_level {inv_level} must be one of the levels"
        )));
    };
    let mut hit_table = Table::new(
        "heavytail-hitting.csv",
        &["law", "level", "hit_prob", "rel_stderr", "conditioned", "fitted_rate"],
    );
    let mut inv_table = Table::new(
        "heavytail-invariance.csv",
        &["law", "start", "conditioned", "mean_local_time"],
    );
    for law in &laws {
        if law.beta() != 0.0 {
            return Err(Error::Unsupported(format!(
                "the slope -alpha/2 needs a symmetric law, '{}' is not",
                law.name()
            )));
        }
        let capped_before = (run.capped, run.simulated);
        let sim = Simulator::new(law, &levels, cap)?;
        let (raw, seed) = killed_counts(run, &sim, 0, samples)?;
        let mut hit = Vec::new();
        let mut rel = Vec::new();
        for (i, &n) in levels.iter().enumerate() {
            let positive: Vec<u64> = raw.iter().map(|c| c[i]).filter(|&k| k > 0).collect();
            let p = positive.len() as f64 / samples as f64;
            if positive.len() < 2 {
                return Err(Error::InsufficientData(format!(
                    "level {n}: only {} hits",
                    positive.len()
                )));
            }
            hit.push(p);
            rel.push(((1.0 - p) / (samples as f64 * p)).sqrt());
            // exponentiality with a fitted rate
            let (p_fit, _) = fit_geometric(&positive)?;
            let rate = -(-p_fit).ln_1p() * n as f64;
            let jitter_seed = run.batch_seed();
            let x = jitter_lattice(&positive, n as f64, jitter_seed);
            let name = format!(
                "{} level {n}: KS of L/level given L > 0 against fitted exponential",
                law.name()
            );
            run.report(
                ks_one_sample(
                    &name,
                    &x,
                    |t| -(-rate * t).exp_m1(),
                    &format!("Exp(fitted rate {rate:.5})"),
                )?
                .with_seed(seed),
            );
            hit_table.push(vec![
                law.name().into(),
                n.to_string(),
                f(p),
                f(*rel.last().unwrap()),
                positive.len().to_string(),
                f(rate),
            ]);
        }
        let x: Vec<f64> = levels.iter().map(|&l| l as f64).collect();
        let (slope, se) = weighted_tail_slope(&x, &hit, &rel)?;
        let expected = -law.alpha() / 2.0;
        let mut r = TestReport::abs_error(
            format!("{}: log-log slope of P_0(L > 0) (stderr {se:.3})", law.name()),
            slope,
            expected,
            slope_tol,
        );
        r.n = samples;
        run.report(r.with_seed(seed));

        // start invariance of the conditional law at one level
        let sim_inv = Simulator::new(law, &[inv_level], cap)?;
        let mut conditioned: Vec<(u64, Vec<u64>)> =
            vec![(0, raw.iter().map(|c| c[inv_index]).filter(|&k| k > 0).collect())];
        for &start in &inv_starts {
            let (raw, _) = killed_counts(run, &sim_inv, start, inv_samples)?;
            conditioned.push((start, raw.into_iter().map(|c| c[0]).filter(|&k| k > 0).collect()));
        }
        for (start, c) in &conditioned {
            let mean = c.iter().sum::<u64>() as f64 / c.len().max(1) as f64;
            inv_table.push(vec![law.name().into(), start.to_string(), c.len().to_string(), f(mean)]);
        }
        for i in 0..conditioned.len() {
            for j in i + 1..conditioned.len() {
                let name = format!(
                    "{} level {inv_level}: L given L > 0, start {} against start {}",
                    law.name(),
                    conditioned[i].0,
                    conditioned[j].0
                );
                run.report(chi_square_two_sample(&name, &conditioned[i].1, &conditioned[j].1)?);
            }
        }
        let capped = run.capped - capped_before.0;
        let total = run.simulated - capped_before.1;
        let mut r = TestReport::abs_error(
            format!("{}: fraction of samples at the step cap {cap}", law.name()),
            capped as f64 / total as f64,
            0.0,
            capped_tol,
        );
        r.n = total as usize;
        run.report(r);
    }
    run.tables.push(hit_table);
    run.tables.push(inv_table);
    Ok(())
}
