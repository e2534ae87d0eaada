//! Sweep driver: runs the grid (and the optional m* bisection) with cached-row
//! resumption, appends fresh rows as they finish, and rewrites `results.csv`
//! in canonical order at the end so any two runs of the same (config, seed)
//! end with byte-identical files.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Cell, ExperimentConfig, MStarSpec, SuccessPolicy};
use crate::io::{atomic_write, read_cache, record_to_line, ParsedRow, CSV_HEADER};
use crate::trial::{run_trial, TrialOutcome};

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("sweep i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, Serialize)]
pub struct CellSummary {
    pub cell_id: String,
    pub n: usize,
    pub total_points: usize,
    pub num_subspaces: usize,
    pub d: usize,
    pub kappa: f64,
    pub delta: f64,
    pub m: usize,
    pub lambda: f64,
    pub auto_lambda: bool,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean over the trials that produced an error value.
    pub mean_clustering_error: Option<f64>,
    /// Trials that never reached the clustering stage.
    pub failures: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeSummary {
    pub m: usize,
    /// Trials actually consumed; the probe stops as soon as the pass/fail
    /// decision is forced.
    pub trials: usize,
    pub successes: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MStarSummary {
    pub n: usize,
    pub d: usize,
    pub lambda: f64,
    pub target: f64,
    pub trials_per_probe: usize,
    /// Largest missing-entries count whose success frequency still met the
    /// target (resolution 1). Zero with `success_at_zero = false` means even
    /// fully observed data failed.
    pub m_star: usize,
    pub success_at_zero: bool,
    pub probes: Vec<ProbeSummary>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary {
    pub version: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub rows: usize,
    pub cells: Vec<CellSummary>,
    pub m_star: Vec<MStarSummary>,
    pub elapsed_ms: u64,
}

/// Success recomputed from a persisted row, mirroring `TrialOutcome::success`.
fn row_success(row: &ParsedRow, policy: &SuccessPolicy) -> bool {
    if policy.require_detection && row.detection != Some(true) {
        return false;
    }
    if policy.require_nontrivial && row.nontrivial != Some(true) {
        return false;
    }
    match row.clustering_error {
        Some(e) => e <= policy.max_clustering_error,
        None => false,
    }
}

/// One finished (cell, trial) row in memory.
struct Row {
    line: String,
    success: bool,
    clustering_error: Option<f64>,
}

struct Writer {
    file: File,
    /// (cell id, trial) pairs already in the canonical line list.
    emitted: HashSet<(u64, usize)>,
    lines: Vec<String>,
}

impl Writer {
    fn open(path: &Path) -> io::Result<Self> {
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        if file.metadata()?.len() == 0 {
            writeln!(file, "{CSV_HEADER}")?;
        }
        Ok(Self {
            file,
            emitted: HashSet::new(),
            lines: Vec::new(),
        })
    }

    /// Records a finished row in canonical order; appends it to disk only if
    /// freshly computed.
    fn push(&mut self, cell_id: u64, trial: usize, line: &str, fresh: bool) -> io::Result<()> {
        if !self.emitted.insert((cell_id, trial)) {
            return Ok(());
        }
        self.lines.push(line.to_string());
        if fresh {
            writeln!(self.file, "{line}")?;
            self.file.flush()?;
        }
        Ok(())
    }
}

fn trial_row(
    config: &ExperimentConfig,
    cell: &Cell,
    trial: usize,
    cache: &HashMap<(u64, usize), ParsedRow>,
    fresh: Option<&TrialOutcome>,
) -> (Row, bool) {
    if let Some(row) = cache.get(&(cell.id, trial)) {
        (
            Row {
                line: row.line.clone(),
                success: row_success(row, &config.success),
                clustering_error: row.clustering_error,
            },
            false,
        )
    } else {
        let out = fresh.expect("uncached trial was computed");
        if let Some(msg) = &out.failure {
            eprintln!(
                "trial failed (cell {}, trial {trial}): {msg}",
                cell.id_hex()
            );
        }
        (
            Row {
                line: record_to_line(out),
                success: out.success(&config.success),
                clustering_error: out.clustering_error,
            },
            true,
        )
    }
}

fn run_cell(
    config: &ExperimentConfig,
    cell: &Cell,
    trials: usize,
    cache: &HashMap<(u64, usize), ParsedRow>,
    writer: &mut Writer,
) -> io::Result<CellSummary> {
    let pending: Vec<usize> = (0..trials)
        .filter(|t| !cache.contains_key(&(cell.id, *t)))
        .collect();
    let computed: HashMap<usize, TrialOutcome> = pending
        .into_par_iter()
        .map(|t| (t, run_trial(config, cell, t)))
        .collect();

    let mut successes = 0;
    let mut failures = 0;
    let mut error_sum = 0.0;
    let mut error_count = 0usize;
    for t in 0..trials {
        let (row, fresh) = trial_row(config, cell, t, cache, computed.get(&t));
        successes += row.success as usize;
        match row.clustering_error {
            Some(e) => {
                error_sum += e;
                error_count += 1;
            }
            None => failures += 1,
        }
        writer.push(cell.id, t, &row.line, fresh)?;
    }
    Ok(CellSummary {
        cell_id: cell.id_hex(),
        n: cell.n,
        total_points: cell.total_points,
        num_subspaces: cell.num_subspaces,
        d: cell.d,
        kappa: cell.kappa,
        delta: cell.delta,
        m: cell.m,
        lambda: cell.lambda,
        auto_lambda: cell.auto_lambda,
        trials,
        successes,
        success_rate: successes as f64 / trials as f64,
        mean_clustering_error: (error_count > 0).then(|| error_sum / error_count as f64),
        failures,
    })
}

/// Runs one bisection probe. Trials are consumed in index order and the probe
/// stops at the first trial that forces the decision; rows past that point are
/// never persisted, so the persisted prefix is independent of how many trials
/// a parallel chunk computed speculatively.
fn run_probe(
    config: &ExperimentConfig,
    cell: &Cell,
    spec: &MStarSpec,
    cache: &HashMap<(u64, usize), ParsedRow>,
    writer: &mut Writer,
) -> io::Result<ProbeSummary> {
    let trials = spec.trials;
    let need = (spec.target * trials as f64).ceil() as usize;
    let allow_fail = trials - need;

    let mut successes = 0;
    let mut fails = 0;
    let mut used = 0;
    let chunk = rayon::current_num_threads().max(1);
    let mut t = 0;
    'scan: while t < trials {
        let end = (t + chunk).min(trials);
        let computed: HashMap<usize, TrialOutcome> = (t..end)
            .filter(|i| !cache.contains_key(&(cell.id, *i)))
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|i| (i, run_trial(config, cell, i)))
            .collect();
        for i in t..end {
            let (row, fresh) = trial_row(config, cell, i, cache, computed.get(&i));
            if row.success {
                successes += 1;
            } else {
                fails += 1;
            }
            used += 1;
            writer.push(cell.id, i, &row.line, fresh)?;
            if successes >= need || fails > allow_fail {
                break 'scan;
            }
        }
        t = end;
    }
    Ok(ProbeSummary {
        m: cell.m,
        trials: used,
        successes,
        passed: successes >= need,
    })
}

fn bisect_m_star(
    config: &ExperimentConfig,
    base: &Cell,
    spec: &MStarSpec,
    cache: &HashMap<(u64, usize), ParsedRow>,
    writer: &mut Writer,
) -> io::Result<MStarSummary> {
    let probe_cell = |m: usize| config.cell(base.n, base.d, 0.0, m, base.lambda, base.auto_lambda);
    let mut probes = Vec::new();
    let mut probe = |m: usize, probes: &mut Vec<ProbeSummary>| -> io::Result<bool> {
        let cell = probe_cell(m);
        let summary = run_probe(config, &cell, spec, cache, writer)?;
        eprintln!(
            "  m* probe n={} d={} m={m}: {}/{} -> {}",
            base.n,
            base.d,
            summary.successes,
            summary.trials,
            if summary.passed { "pass" } else { "fail" },
        );
        let passed = summary.passed;
        probes.push(summary);
        Ok(passed)
    };

    let mut summary = MStarSummary {
        n: base.n,
        d: base.d,
        lambda: base.lambda,
        target: spec.target,
        trials_per_probe: spec.trials,
        m_star: 0,
        success_at_zero: false,
        probes: Vec::new(),
    };
    if !probe(0, &mut probes)? {
        summary.probes = probes;
        return Ok(summary);
    }
    summary.success_at_zero = true;

    // Invariant: lo passed, hi failed. Bisection only probes inside that
    // bracket, so the observed pass/fail pattern is monotone by construction.
    let mut lo = 0;
    let mut hi = base.n - 1;
    if probe(hi, &mut probes)? {
        summary.m_star = hi;
        summary.probes = probes;
        return Ok(summary);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if probe(mid, &mut probes)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    summary.m_star = lo;
    summary.probes = probes;
    Ok(summary)
}

pub fn results_path(out_dir: &Path) -> PathBuf {
    out_dir.join("results.csv")
}

pub fn summary_path(out_dir: &Path) -> PathBuf {
    out_dir.join("summary.json")
}

pub fn run_sweep(config: &ExperimentConfig, out_dir: &Path) -> Result<SweepSummary, SweepError> {
    let started = Instant::now();
    fs::create_dir_all(out_dir)?;
    let results = results_path(out_dir);
    let cache = read_cache(&results)?;
    let mut writer = Writer::open(&results)?;

    let cells = config.cells();
    let mut cell_summaries = Vec::with_capacity(cells.len());
    for (i, cell) in cells.iter().enumerate() {
        let summary = run_cell(config, cell, config.trials, &cache, &mut writer)?;
        eprintln!(
            "cell {}/{} (n={} d={} delta={} m={} lambda={:.4}): {}/{} ok",
            i + 1,
            cells.len(),
            cell.n,
            cell.d,
            cell.delta,
            cell.m,
            cell.lambda,
            summary.successes,
            summary.trials,
        );
        cell_summaries.push(summary);
    }

    let mut m_star_summaries = Vec::new();
    if let Some(spec) = &config.m_star {
        for cell in &cells {
            m_star_summaries.push(bisect_m_star(config, cell, spec, &cache, &mut writer)?);
        }
    }

    let mut content = String::with_capacity((writer.lines.len() + 1) * 96);
    content.push_str(CSV_HEADER);
    content.push('\n');
    for line in &writer.lines {
        content.push_str(line);
        content.push('\n');
    }
    drop(writer.file);
    atomic_write(&results, &content)?;

    let summary = SweepSummary {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        config: config.clone(),
        rows: writer.lines.len(),
        cells: cell_summaries,
        m_star: m_star_summaries,
        elapsed_ms: started.elapsed().as_millis() as u64,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    atomic_write(&summary_path(out_dir), &json)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct TempDir(PathBuf);

    impl TempDir {
        fn new(name: &str) -> Self {
            let dir =
                std::env::temp_dir().join(format!("lsssc-sweep-{}-{name}", std::process::id()));
            let _ = fs::remove_dir_all(&dir);
            fs::create_dir_all(&dir).unwrap();
            TempDir(dir)
        }
    }

    impl Drop for TempDir {
        fn drop(&mut self) {
            let _ = fs::remove_dir_all(&self.0);
        }
    }

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{
                "ambient_dims": [8],
                "num_subspaces": 2,
                "dims": [1, 2],
                "kappa": 3.0,
                "trials": 2,
                "seed": 31
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn sweep_writes_one_row_per_cell_trial_plus_summary() {
        let dir = TempDir::new("shape");
        let config = tiny_config();
        let summary = run_sweep(&config, &dir.0).unwrap();
        assert_eq!(summary.rows, 4);
        assert_eq!(summary.cells.len(), 2);
        let text = fs::read_to_string(results_path(&dir.0)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], CSV_HEADER);
        assert!(summary_path(&dir.0).exists());
        let recount: f64 = summary.cells.iter().map(|c| c.success_rate).sum();
        assert!(recount <= 2.0);
    }

    #[test]
    fn rerun_and_resume_produce_identical_bytes() {
        let config = tiny_config();
        let full = TempDir::new("full");
        run_sweep(&config, &full.0).unwrap();
        let reference = fs::read(results_path(&full.0)).unwrap();

        // Second full run over the finished directory: all rows cached.
        run_sweep(&config, &full.0).unwrap();
        assert_eq!(fs::read(results_path(&full.0)).unwrap(), reference);

        // Fresh directory from scratch matches too.
        let twin = TempDir::new("twin");
        run_sweep(&config, &twin.0).unwrap();
        assert_eq!(fs::read(results_path(&twin.0)).unwrap(), reference);

        // Interrupt: keep the header, one finished row, and a half row.
        let cut = TempDir::new("cut");
        let text = String::from_utf8(reference.clone()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let partial = format!(
            "{}\n{}\n{}",
            lines[0],
            lines[1],
            &lines[2][..lines[2].len() / 2]
        );
        fs::write(results_path(&cut.0), partial).unwrap();
        run_sweep(&config, &cut.0).unwrap();
        assert_eq!(fs::read(results_path(&cut.0)).unwrap(), reference);
    }

    #[test]
    fn m_star_bisection_reports_a_threshold_per_cell() {
        let dir = TempDir::new("mstar");
        let mut config = tiny_config();
        config.dims = vec![1];
        config.m_star = Some(MStarSpec {
            target: 0.5,
            trials: 4,
        });
        let summary = run_sweep(&config, &dir.0).unwrap();
        assert_eq!(summary.m_star.len(), 1);
        let est = &summary.m_star[0];
        assert!(est.m_star < config.ambient_dims[0]);
        assert!(!est.probes.is_empty());
        assert!(est.probes[0].trials <= 4);
        // Deterministic repeat, including the adaptive probe rows.
        let reference = fs::read(results_path(&dir.0)).unwrap();
        let twin = TempDir::new("mstar-twin");
        run_sweep(&config, &twin.0).unwrap();
        assert_eq!(fs::read(results_path(&twin.0)).unwrap(), reference);
    }
}
