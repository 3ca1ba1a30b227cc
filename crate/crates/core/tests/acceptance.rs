//! Full-scale acceptance run: every experiment in `configs/` at its stated
//! tolerances, one PASS/FAIL line per criterion.
//!
//! `LTLAB_CRITERIA=1,4,10` restricts the run to the listed criteria.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use ltlab::experiment::{emit_report, run_experiment, ExperimentConfig, ExperimentId, ExperimentRecord, ALL_FORMATS};

struct Criterion {
    number: u32,
    title: &'static str,
    experiments: &'static [ExperimentId],
}

const CRITERIA: [Criterion; 9] = [
    Criterion {
        number: 1,
        title: "geometric law of the killed local time",
        experiments: &[ExperimentId::KilledGeometric],
    },
    Criterion {
        number: 2,
        title: "conditional exponential limit",
        experiments: &[ExperimentId::ConditionalExponential],
    },
    Criterion {
        number: 3,
        title: "hitting probabilities and their asymptotics",
        experiments: &[ExperimentId::HittingAsymptotics],
    },
    Criterion {
        number: 4,
        title: "scaled Green function and the potential density",
        experiments: &[ExperimentId::GreenConvergence, ExperimentId::QuadratureAform],
    },
    Criterion {
        number: 5,
        title: "Kac moments",
        experiments: &[ExperimentId::KacMoments],
    },
    Criterion {
        number: 6,
        title: "branching identity for up-crossings",
        experiments: &[ExperimentId::KnightIdentity],
    },
    Criterion {
        number: 7,
        title: "marginals of the rescaled reflected field",
        experiments: &[ExperimentId::FddMarginal],
    },
    Criterion {
        number: 8,
        title: "direct and iid-sum reflected fields agree",
        experiments: &[ExperimentId::ReflectedEquivalence],
    },
    Criterion {
        number: 9,
        title: "heavy-tail property suite",
        experiments: &[ExperimentId::HeavytailSlopes],
    },
];

const REPRODUCIBILITY: u32 = 10;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(id: ExperimentId) -> Result<ExperimentConfig, String> {
    let path = configs_dir().join(format!("{id}.ini"));
    let cfg = ExperimentConfig::from_path(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if cfg.id != id {
        return Err(format!("{} is for '{}'", path.display(), cfg.id));
    }
    Ok(cfg)
}

fn selected() -> Option<Vec<u32>> {
    let text = std::env::var("LTLAB_CRITERIA").ok()?;
    Some(text.split(',').filter_map(|s| s.trim().parse().ok()).collect())
}

fn run_criterion(c: &Criterion) -> (bool, String) {
    let started = Instant::now();
    let mut passed = 0;
    let mut total = 0;
    let mut notes = Vec::new();
    for &id in c.experiments {
        let record = match load(id).and_then(|cfg| run_experiment(&cfg).map_err(|e| format!("{id}: {e}"))) {
            Ok(r) => r,
            Err(e) => {
                notes.push(format!("    error: {e}"));
                total += 1;
                continue;
            }
        };
        total += record.reports.len();
        passed += record.reports.len() - record.failures().count();
        for f in record.failures() {
            notes.push(format!("    {}", f.summary_line()));
        }
    }
    let ok = passed == total && total > 0;
    let ids: Vec<&str> = c.experiments.iter().map(|id| id.as_str()).collect();
    let mut line = format!(
        "{} criterion {}: {} [{}]: {passed} of {total} checks passed ({:.1} s)",
        verdict(ok),
        c.number,
        c.title,
        ids.join(", "),
        started.elapsed().as_secs_f64()
    );
    for n in notes {
        line.push('\n');
        line.push_str(&n);
    }
    (ok, line)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn aggregate_csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .map(|d| d.filter_map(|e| e.ok()).map(|e| e.path()).collect())
        .unwrap_or_else(|_| Vec::new())
        .into_iter()
        .filter(|p: &PathBuf| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap_or_default(),
            )
        })
        .collect();
    files.sort();
    files
}

fn same_statistics(a: &ExperimentRecord, b: &ExperimentRecord) -> bool {
    a.reports == b.reports
        && a.tables.len() == b.tables.len()
        && a.tables.iter().zip(&b.tables).all(|(x, y)| x.to_csv() == y.to_csv())
}

/// Byte-identical aggregate CSVs at one worker and identical statistics at
/// 1, 4 and 8 workers.
fn reproducibility(id: ExperimentId) -> Result<String, String> {
    let cfg = load(id)?;
    let run = |workers: usize| run_experiment(&cfg.clone().with_workers(workers)).map_err(|e| format!("{id}: {e}"));
    let mut serial = Vec::new();
    let mut dirs = Vec::new();
    for _ in 0..2 {
        let mut record = run(1)?;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        emit_report(&mut record, dir.path(), &ALL_FORMATS).map_err(|e| e.to_string())?;
        serial.push(record);
        dirs.push(dir);
    }
    let first = aggregate_csvs(dirs[0].path());
    if first.is_empty() || first != aggregate_csvs(dirs[1].path()) {
        return Err(format!("{id}: aggregate CSVs differ between identical runs"));
    }
    for workers in [4, 8] {
        if !same_statistics(&serial[0], &run(workers)?) {
            return Err(format!("{id}: statistics differ at {workers} workers"));
        }
    }
    Ok(format!(
        "{id}: {} CSV files identical, statistics identical at 1/4/8 workers",
        first.len()
    ))
}

fn main() -> ExitCode {
    let only = selected();
    let wanted = |n: u32| only.as_ref().is_none_or(|v| v.contains(&n));
    let mut all_ok = true;
    let mut lines = Vec::new();
    for c in CRITERIA.iter().filter(|c| wanted(c.number)) {
        let (ok, line) = run_criterion(c);
        println!("{line}");
        all_ok &= ok;
        lines.push(line);
    }
    if wanted(REPRODUCIBILITY) {
        let started = Instant::now();
        let checks: Vec<_> = [ExperimentId::KnightIdentity, ExperimentId::ReflectedEquivalence]
            .into_iter()
            .map(reproducibility)
            .collect();
        let ok = checks.iter().all(|c| c.is_ok());
        let mut line = format!(
            "{} criterion {REPRODUCIBILITY}: reproducibility ({:.1} s)",
            verdict(ok),
            started.elapsed().as_secs_f64()
        );
        for c in checks {
            line.push_str(&format!("\n    {}", c.unwrap_or_else(|e| e)));
        }
        println!("{line}");
        all_ok &= ok;
        lines.push(line);
    }
    println!("\nacceptance summary");
    for l in &lines {
        println!("{}", l.lines().next().unwrap_or_default());
    }
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
