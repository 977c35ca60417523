//! Experiment harness: runs grids of (problem, dimension, noise, bound, seed)
//! cells through the solver and records one [`ResultRow`] per run.
//!
//! Rows are produced in parallel but handed to the caller in grid order, so a
//! CSV written from them is reproducible byte-for-byte apart from timings.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use inexact_lmbm::{
    instantiate, minimize, wrap_noise, NoiseKind, NoiseSpec, ProblemId, SolveReport, SolverConfig, Termination,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub mod range;

/// Smallest error resolved by [`accuracy`].
pub const ACCURACY_FLOOR: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub problems: Vec<ProblemId>,
    pub dims: Vec<usize>,
    pub noise_kinds: Vec<NoiseKind>,
    pub q_bars: Vec<f64>,
    /// Seeds per noisy cell; `N0` is deterministic and always runs once.
    pub repeats: usize,
    pub base_seed: u64,
    pub config: SolverConfig<f64>,
}

impl ExperimentSpec {
    /// A spec with default solver settings and a single seed.
    pub fn new(problems: Vec<ProblemId>, dims: Vec<usize>, noise_kinds: Vec<NoiseKind>, q_bars: Vec<f64>) -> Self {
        Self {
            problems,
            dims,
            noise_kinds,
            q_bars,
            repeats: 1,
            base_seed: 0,
            config: SolverConfig::default(),
        }
    }

    pub fn with_repeats(mut self, repeats: usize) -> Self {
        self.repeats = repeats;
        self
    }

    pub fn with_seed(mut self, base_seed: u64) -> Self {
        self.base_seed = base_seed;
        self
    }

    pub fn with_config(mut self, config: SolverConfig<f64>) -> Self {
        self.config = config;
        self
    }

    /// Every run of the grid, in output order.
    pub fn tasks(&self) -> Vec<Task> {
        let mut tasks = Vec::new();
        for &problem in &self.problems {
            for &n in &self.dims {
                for &noise in &self.noise_kinds {
                    if noise == NoiseKind::N0 {
                        tasks.push(Task {
                            problem,
                            n,
                            noise,
                            q_bar: 0.0,
                            seed: self.base_seed,
                        });
                        continue;
                    }
                    for &q_bar in &self.q_bars {
                        for i in 0..self.repeats {
                            tasks.push(Task {
                                problem,
                                n,
                                noise,
                                q_bar,
                                seed: self.base_seed + i as u64,
                            });
                        }
                    }
                }
            }
        }
        tasks
    }
}

/// One solver run of the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Task {
    pub problem: ProblemId,
    pub n: usize,
    pub noise: NoiseKind,
    pub q_bar: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub problem: String,
    pub n: usize,
    pub noise: String,
    pub q_bar: f64,
    pub seed: u64,
    pub f_final_noisy: f64,
    /// Exact objective re-evaluated at the final point.
    pub f_final_true: f64,
    /// Empty when the best value is unknown.
    pub rel_error: Option<f64>,
    pub accuracy: Option<f64>,
    pub evaluations: usize,
    pub cpu_seconds: f64,
    pub termination: String,
    /// The true value came out below the best known one. Not part of the CSV.
    #[serde(skip)]
    pub below_best: bool,
}

impl ResultRow {
    pub fn is_error(&self) -> bool {
        self.termination == "error"
    }

    /// Equality on everything except the timing.
    pub fn same_outcome(&self, other: &Self) -> bool {
        let bits = |a: f64, b: f64| a.to_bits() == b.to_bits();
        let opt = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => bits(a, b),
            (None, None) => true,
            _ => false,
        };
        self.problem == other.problem
            && self.n == other.n
            && self.noise == other.noise
            && bits(self.q_bar, other.q_bar)
            && self.seed == other.seed
            && bits(self.f_final_noisy, other.f_final_noisy)
            && bits(self.f_final_true, other.f_final_true)
            && opt(self.rel_error, other.rel_error)
            && opt(self.accuracy, other.accuracy)
            && self.evaluations == other.evaluations
            && self.termination == other.termination
    }

    fn failed(task: &Task, message: &str) -> Self {
        log_error(task, message);
        Self {
            problem: task.problem.to_string(),
            n: task.n,
            noise: task.noise.to_string(),
            q_bar: task.q_bar,
            seed: task.seed,
            f_final_noisy: f64::NAN,
            f_final_true: f64::NAN,
            rel_error: None,
            accuracy: None,
            evaluations: 0,
            cpu_seconds: 0.0,
            termination: "error".into(),
            below_best: false,
        }
    }
}

fn log_error(task: &Task, message: &str) {
    eprintln!(
        "run {} n={} {} q_bar={} seed={} failed: {message}",
        task.problem, task.n, task.noise, task.q_bar, task.seed
    );
}

/// `-log10(max(f - f_best, 1e-10))`, so at most 10.
pub fn accuracy(f: f64, f_best: f64) -> f64 {
    -(f - f_best).max(ACCURACY_FLOOR).log10()
}

/// `(f - f_best) / (1 + |f_best|)`, clamped below at 0.
pub fn rel_error(f: f64, f_best: f64) -> f64 {
    ((f - f_best) / (1.0 + f_best.abs())).max(0.0)
}

/// Runs one task. `reference` replaces the instance's minimizer for the
/// vanishing-noise kinds when the minimizer is not known analytically.
pub fn run_task(task: &Task, config: &SolverConfig<f64>, reference: Option<&[f64]>) -> ResultRow {
    run_task_with_report(task, config, reference).0
}

fn run_task_with_report(
    task: &Task,
    config: &SolverConfig<f64>,
    reference: Option<&[f64]>,
) -> (ResultRow, Option<SolveReport<f64>>) {
    let (instance, problem) = match instantiate::<f64>(task.problem, task.n) {
        Ok(v) => v,
        Err(e) => return (ResultRow::failed(task, &e.to_string()), None),
    };
    let mut spec = NoiseSpec::new(task.noise, task.q_bar, task.seed);
    if task.noise.needs_reference() {
        match instance.x_star.as_deref().or(reference) {
            Some(x) => spec = spec.with_reference(x.to_vec()),
            None => {
                return (
                    ResultRow::failed(task, "no reference minimizer for vanishing noise"),
                    None,
                )
            }
        }
    }
    let mut oracle = match wrap_noise(problem, spec.clone()) {
        Ok(o) => o,
        Err(e) => return (ResultRow::failed(task, &e.to_string()), None),
    };
    let config = SolverConfig {
        q_bar: spec.effective_bound(),
        ..config.clone()
    };
    let start = Instant::now();
    let report = match minimize(&mut oracle, &instance.x_start, &config) {
        Ok(r) => r,
        Err(e) => return (ResultRow::failed(task, &e.to_string()), None),
    };
    let cpu_seconds = start.elapsed().as_secs_f64();
    if let Termination::Failed(reason) = &report.termination {
        log_error(task, &format!("{reason:?}"));
    }
    let f_final_true = problem.value(&report.x_final);
    let row = ResultRow {
        problem: task.problem.to_string(),
        n: task.n,
        noise: task.noise.to_string(),
        q_bar: task.q_bar,
        seed: task.seed,
        f_final_noisy: report.f_final,
        f_final_true,
        rel_error: instance.f_best.map(|b| rel_error(f_final_true, b)),
        accuracy: instance.f_best.map(|b| accuracy(f_final_true, b)),
        evaluations: report.evaluations,
        cpu_seconds,
        termination: report.termination.label().into(),
        below_best: instance.f_best.is_some_and(|b| f_final_true < b),
    };
    (row, Some(report))
}

/// Exact-oracle solutions used as `x*` for vanishing noise on problems whose
/// minimizer is only known numerically.
fn references(spec: &ExperimentSpec) -> HashMap<(ProblemId, usize), Vec<f64>> {
    if !spec.noise_kinds.iter().any(|k| k.needs_reference()) {
        return HashMap::new();
    }
    let mut needed = Vec::new();
    for &problem in &spec.problems {
        for &n in &spec.dims {
            if let Ok((instance, _)) = instantiate::<f64>(problem, n) {
                if instance.x_star.is_none() {
                    needed.push((problem, n));
                }
            }
        }
    }
    needed
        .into_par_iter()
        .filter_map(|(problem, n)| {
            let task = Task {
                problem,
                n,
                noise: NoiseKind::N0,
                q_bar: 0.0,
                seed: spec.base_seed,
            };
            let (_, report) = run_task_with_report(&task, &spec.config, None);
            Some(((problem, n), report?.x_final))
        })
        .collect()
}

/// Options for [`run_experiment_with`].
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; 0 picks one per core.
    pub jobs: usize,
    /// Keep running the grid after a failed run.
    pub keep_going: bool,
}

/// Outcome of a grid run.
#[derive(Debug, Default)]
pub struct RunSummary {
    pub rows: usize,
    pub errors: usize,
    /// The grid was cut short after an error.
    pub aborted: bool,
}

impl RunSummary {
    pub fn completed(&self) -> bool {
        !self.aborted && self.errors == 0
    }
}

/// Runs the grid with default options and returns the rows in grid order.
pub fn run_experiment(spec: &ExperimentSpec) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    let options = RunOptions {
        jobs: 0,
        keep_going: true,
    };
    run_experiment_with(spec, options, |row| {
        rows.push(row.clone());
        Ok(())
    })
    .expect("collecting rows cannot fail");
    rows
}

/// Runs the grid, passing every row to `sink` in grid order as soon as all
/// earlier rows are done. Without `keep_going`, no new runs start after the
/// first error row.
pub fn run_experiment_with<F>(spec: &ExperimentSpec, options: RunOptions, mut sink: F) -> anyhow::Result<RunSummary>
where
    F: FnMut(&ResultRow) -> anyhow::Result<()>,
{
    spec.config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(options.jobs).build()?;
    let tasks = spec.tasks();
    let stop = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(usize, ResultRow)>();
    let mut summary = RunSummary::default();
    let mut sink_result = Ok(());
    let refs = pool.install(|| references(spec));

    pool.in_place_scope(|scope| {
        let refs = &refs;
        let stop = &stop;
        let tasks = &tasks;
        scope.spawn(move |_| {
            tasks.par_iter().enumerate().for_each_with(tx, |tx, (i, task)| {
                if stop.load(Ordering::Relaxed) {
                    return;
                }
                let reference = refs.get(&(task.problem, task.n)).map(Vec::as_slice);
                let row = run_task(task, &spec.config, reference);
                if row.is_error() && !options.keep_going {
                    stop.store(true, Ordering::Relaxed);
                }
                // the receiver only hangs up after a sink error
                let _ = tx.send((i, row));
            });
        });

        let mut pending = BTreeMap::new();
        let mut next = 0;
        for (i, row) in rx {
            pending.insert(i, row);
            while let Some(row) = pending.remove(&next) {
                next += 1;
                summary.rows += 1;
                summary.errors += usize::from(row.is_error());
                if let Err(e) = sink(&row) {
                    stop.store(true, Ordering::Relaxed);
                    sink_result = Err(e);
                    return;
                }
            }
        }
        // rows after a gap left by skipped runs
        for row in pending.into_values() {
            summary.rows += 1;
            summary.errors += usize::from(row.is_error());
            if let Err(e) = sink(&row) {
                sink_result = Err(e);
                return;
            }
        }
    });
    sink_result?;
    summary.aborted = summary.rows < tasks.len();
    Ok(summary)
}

/// Writes rows as CSV with a header, including when there are no rows.
pub fn write_csv<W: Write>(out: W, rows: &[ResultRow]) -> anyhow::Result<()> {
    let mut sink = CsvSink::new(out)?;
    for row in rows {
        sink.write(row)?;
    }
    sink.finish()
}

/// A CSV writer whose header row is written even for an empty grid.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(out: W) -> anyhow::Result<Self> {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        writer.write_record(CSV_HEADER)?;
        Ok(Self { writer })
    }

    pub fn write(&mut self, row: &ResultRow) -> anyhow::Result<()> {
        self.writer.serialize(row)?;
        // rows are written incrementally so partial grids survive interruption
        self.writer.flush()?;
        Ok(())
    }

    pub fn finish(mut self) -> anyhow::Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

pub const CSV_HEADER: [&str; 12] = [
    "problem",
    "n",
    "noise",
    "q_bar",
    "seed",
    "f_final_noisy",
    "f_final_true",
    "rel_error",
    "accuracy",
    "evaluations",
    "cpu_seconds",
    "termination",
];

pub fn read_csv<R: std::io::Read>(input: R) -> anyhow::Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let rows = reader.deserialize().collect::<Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

/// Per-cell statistics over seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub problem: String,
    pub n: usize,
    pub noise: String,
    pub q_bar: f64,
    pub runs: usize,
    pub errors: usize,
    pub mean_f: f64,
    /// Sample standard deviation; empty for a single run.
    pub std_f: Option<f64>,
    pub mean_accuracy: Option<f64>,
    pub mean_evaluations: f64,
}

/// Groups rows by (problem, n, noise, q_bar) in order of first appearance.
/// Error rows are counted but excluded from the statistics.
pub fn summarize(rows: &[ResultRow]) -> Vec<CellSummary> {
    let mut order: Vec<(String, usize, String, u64)> = Vec::new();
    let mut cells: HashMap<(String, usize, String, u64), Vec<&ResultRow>> = HashMap::new();
    for row in rows {
        let key = (row.problem.clone(), row.n, row.noise.clone(), row.q_bar.to_bits());
        cells
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(row);
    }
    order
        .into_iter()
        .map(|key| {
            let cell = &cells[&key];
            let ok: Vec<&&ResultRow> = cell.iter().filter(|r| !r.is_error()).collect();
            let values: Vec<f64> = ok.iter().map(|r| r.f_final_true).collect();
            let accuracies: Option<Vec<f64>> = ok.iter().map(|r| r.accuracy).collect();
            let evaluations: Vec<f64> = ok.iter().map(|r| r.evaluations as f64).collect();
            CellSummary {
                problem: key.0,
                n: key.1,
                noise: key.2,
                q_bar: f64::from_bits(key.3),
                runs: ok.len(),
                errors: cell.len() - ok.len(),
                mean_f: mean(&values),
                std_f: sample_std(&values),
                mean_accuracy: accuracies.filter(|a| !a.is_empty()).map(|a| mean(&a)),
                mean_evaluations: mean(&evaluations),
            }
        })
        .collect()
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Standard deviation with divisor `N - 1`; `None` for fewer than two values.
pub fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}
