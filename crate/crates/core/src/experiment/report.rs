use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::stats::{write_reports_csv, write_reports_jsonl, TestReport};

/// A plot-ready CSV table held in memory until it is emitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub file_name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file_name: impl Into<String>, header: &[&str]) -> Self {
        Table {
            file_name: file_name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    pub config: ExperimentConfig,
    pub reports: Vec<TestReport>,
    pub tables: Vec<Table>,
    pub wall_clock: Duration,
    pub workers: usize,
    /// Simulated samples that hit the step cap.
    pub capped: u64,
    /// Simulated samples in total.
    pub simulated: u64,
    /// Files written by [`emit_report`].
    pub artifacts: Vec<PathBuf>,
}

impl ExperimentRecord {
    pub fn passed(&self) -> bool {
        !self.reports.is_empty() && self.reports.iter().all(TestReport::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &TestReport> {
        self.reports.iter().filter(|r| !r.passed())
    }

    pub fn capped_fraction(&self) -> f64 {
        if self.simulated == 0 {
            0.0
        } else {
            self.capped as f64 / self.simulated as f64
        }
    }

    /// Aggregate verdict table; depends only on the config and seed.
    pub fn reports_csv(&self) -> String {
        let mut buf = Vec::new();
        write_reports_csv(&mut buf, &self.reports).expect("writing to memory");
        String::from_utf8(buf).expect("reports are utf-8")
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "experiment {} (seed {}, {} workers, {:.2} s)\n",
            self.config.id,
            self.config.seed,
            self.workers,
            self.wall_clock.as_secs_f64()
        );
        if self.simulated > 0 {
            s.push_str(&format!(
                "capped samples: {} of {} ({:.3e})\n",
                self.capped,
                self.simulated,
                self.capped_fraction()
            ));
        }
        for r in &self.reports {
            s.push_str(&r.summary_line());
            s.push('\n');
        }
        let failed = self.failures().count();
        s.push_str(&format!(
            "{}: {} of {} checks passed\n",
            if self.passed() { "PASS" } else { "FAIL" },
            self.reports.len() - failed,
            self.reports.len()
        ));
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    JsonLines,
    SummaryText,
}

#[derive(Serialize)]
struct RecordEcho<'a> {
    experiment: String,
    seed: u64,
    workers: usize,
    wall_clock_seconds: f64,
    capped: u64,
    simulated: u64,
    passed: bool,
    config: String,
    artifacts: &'a [PathBuf],
}

/// Writes the record into `dir`:
/// - `Csv`: `reports.csv` plus every table;
/// - `JsonLines`: `reports.jsonl` and `record.json` (config echo, timing,
///   capped accounting, artifact list);
/// - `SummaryText`: `summary.txt`, one PASS/FAIL line per check.
pub fn emit_report(record: &mut ExperimentRecord, dir: &Path, formats: &[ReportFormat]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| unwritable(dir, e))?;
    let mut written = Vec::new();
    if formats.contains(&ReportFormat::Csv) {
        put(dir, &mut written, "reports.csv", record.reports_csv().as_bytes())?;
        for t in &record.tables {
            put(dir, &mut written, &t.file_name, t.to_csv().as_bytes())?;
        }
    }
    if formats.contains(&ReportFormat::JsonLines) {
        let mut buf = Vec::new();
        write_reports_jsonl(&mut buf, &record.reports)?;
        put(dir, &mut written, "reports.jsonl", &buf)?;
    }
    if formats.contains(&ReportFormat::SummaryText) {
        put(dir, &mut written, "summary.txt", record.summary().as_bytes())?;
    }
    if formats.contains(&ReportFormat::JsonLines) {
        let mut listed = written.clone();
        listed.push(dir.join("record.json"));
        let echo = RecordEcho {
            experiment: record.config.id.to_string(),
            seed: record.config.seed,
            workers: record.workers,
            wall_clock_seconds: record.wall_clock.as_secs_f64(),
            capped: record.capped,
            simulated: record.simulated,
            passed: record.passed(),
            config: record.config.to_ini(),
            artifacts: &listed,
        };
        put(
            dir,
            &mut written,
            "record.json",
            serde_json::to_string_pretty(&echo)?.as_bytes(),
        )?;
    }
    record.artifacts = written;
    Ok(())
}

fn unwritable(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn put(dir: &Path, written: &mut Vec<PathBuf>, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| unwritable(&path, e))?;
    written.push(path);
    Ok(())
}

pub const ALL_FORMATS: [ReportFormat; 3] = [ReportFormat::Csv, ReportFormat::JsonLines, ReportFormat::SummaryText];
