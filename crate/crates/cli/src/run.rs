// SPDX-License-Identifier: Apache-2.0

//! Grid expansion, execution and output.

use crate::config::{default_groups, EstimatorKind, ExperimentConfig, FamilyKind, Mode};
use crate::error::{io_err, CliError, Result};
use heavydp::optimizer::{iterative_rates, simple_clipping_rates, StepBudget};
use heavydp::privacy::{per_step_cdp_budget, shuffle_amplified_group_budget};
use heavydp::rng::{derive_seed, stream, RNG_ID};
use heavydp::{
    iterative_update_mean, make_quadratic_problem, schedule_iterative, schedule_simple_clipping,
    sgd_loop, simple_clip_mean, ApproxDpBudget, CdpBudget, ClipConfig, Error, GradientEstimator,
    HeavyTailSpec, IterativeConfig, NoiseMode, ProblemInstance, RemainderPolicy, Schedule,
};
use ndarray::Array1;
use rayon::prelude::*;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

pub const SCHEMA_VERSION: u32 = 1;

/// Column order of `results.csv`, schema v1. Frozen.
pub const COLUMNS: [&str; 22] = [
    "run_id", "mode", "estimator", "family", "n", "d", "p", "eps", "delta", "k", "tc", "T", "eta",
    "R", "rho_step", "eps0", "delta0", "seed", "rep", "outcome", "status", "wall_ms",
];

/// One point of the parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub estimator: EstimatorKind,
    pub family: FamilyKind,
    pub n: usize,
    pub d: usize,
    pub p: f64,
    pub eps: f64,
    pub delta: f64,
    /// Group count and iteration count; iterative estimator only.
    pub k: Option<usize>,
    pub tc: Option<usize>,
}

impl Cell {
    /// Stable text identifying the cell; input to seed derivation.
    pub fn key(&self, mode: Mode, radius_mult: f64) -> String {
        let opt = |v: Option<usize>| v.map_or(String::new(), |x| x.to_string());
        format!(
            "{mode};{};{};n={};d={};p={};eps={};delta={};k={};tc={};rmult={radius_mult}",
            self.estimator,
            self.family,
            self.n,
            self.d,
            self.p,
            self.eps,
            self.delta,
            opt(self.k),
            opt(self.tc),
        )
    }
}

/// Cells in a fixed order: estimator, family, n, d, p, eps, delta, with the
/// last varying fastest.
pub fn expand_grid(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &estimator in &cfg.estimator {
        for &family in &cfg.family {
            for &n in &cfg.n {
                for &d in &cfg.d {
                    for &p in &cfg.p {
                        for &eps in &cfg.eps {
                            for &delta in &cfg.delta {
                                let iterative = estimator == EstimatorKind::Iterative;
                                cells.push(Cell {
                                    estimator,
                                    family,
                                    n,
                                    d,
                                    p,
                                    eps,
                                    delta,
                                    k: iterative.then(|| cfg.k.unwrap_or_else(|| default_groups(n))),
                                    tc: iterative.then_some(cfg.tc),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Ok,
    Skipped(String),
    Failed(String),
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Ok => f.write_str("ok"),
            Status::Skipped(r) => write!(f, "skipped: {r}"),
            Status::Failed(r) => write!(f, "failed: {r}"),
        }
    }
}

/// Derived parameters shared by every replication of a cell.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Derived {
    pub steps: Option<usize>,
    pub eta: Option<f64>,
    pub radius: Option<f64>,
    /// zCDP budget of each noisy statistic: per step for simple clipping,
    /// per group (per step in opt-bench) for the iterative estimator.
    pub rho_step: Option<f64>,
    pub eps0: Option<f64>,
    pub delta0: Option<f64>,
}

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_id: usize,
    pub mode: Mode,
    pub cell: Cell,
    pub derived: Derived,
    pub seed: u64,
    pub rep: usize,
    /// ‖μ̂ − μ‖ in mean-bench, F(ŵ) − F(w*) in opt-bench.
    pub outcome: Option<f64>,
    pub status: Status,
    pub wall_ms: f64,
}

impl RunRecord {
    fn fields(&self) -> Vec<String> {
        fn o<T: ToString>(v: Option<T>) -> String {
            v.map_or(String::new(), |x| x.to_string())
        }
        let c = &self.cell;
        let dv = &self.derived;
        vec![
            self.run_id.to_string(),
            self.mode.to_string(),
            c.estimator.to_string(),
            c.family.to_string(),
            c.n.to_string(),
            c.d.to_string(),
            c.p.to_string(),
            c.eps.to_string(),
            c.delta.to_string(),
            o(c.k),
            o(c.tc),
            o(dv.steps),
            o(dv.eta),
            o(dv.radius),
            o(dv.rho_step),
            o(dv.eps0),
            o(dv.delta0),
            self.seed.to_string(),
            self.rep.to_string(),
            o(self.outcome),
            self.status.to_string(),
            self.wall_ms.to_string(),
        ]
    }
}

/// Mean of the benchmark distributions: alternating ±1/2.
fn benchmark_mean(d: usize) -> Array1<f64> {
    (0..d).map(|j| if j % 2 == 0 { 0.5 } else { -0.5 }).collect()
}

enum Prepared {
    Mean {
        spec: HeavyTailSpec,
        radius: f64,
        rho: CdpBudget,
        total: ApproxDpBudget,
    },
    Opt {
        spec: HeavyTailSpec,
        problem: Box<ProblemInstance>,
        schedule: Schedule,
        estimator: GradientEstimator,
    },
}

/// Out-of-regime budgets become skipped rows; anything else is a failure.
fn classify(e: Error) -> Status {
    match e {
        Error::OutOfRegime { .. } => Status::Skipped(e.to_string()),
        _ => Status::Failed(e.to_string()),
    }
}

fn prepare(
    cfg: &ExperimentConfig,
    cell: &Cell,
    key: &str,
) -> std::result::Result<(Prepared, Derived), Status> {
    let spec = HeavyTailSpec::new(
        cell.d,
        cell.p,
        cfg.moment_bound,
        cell.family.family(cell.p),
        benchmark_mean(cell.d),
    )
    .map_err(classify)?;
    let total = ApproxDpBudget::new(cell.eps, cell.delta).map_err(classify)?;
    if let Some(k) = cell.k {
        if k > cell.n {
            return Err(Status::Skipped(format!("k = {k} exceeds n = {}", cell.n)));
        }
    }
    let iterative_config = |k: usize, tc: usize| {
        let mut c = IterativeConfig::new(k, tc);
        c.remainder = RemainderPolicy::DropRandom;
        c
    };
    match cfg.mode {
        Mode::MeanBench => {
            let m = cfg.moment_bound * cfg.radius_mult;
            let (radius, rho, mut derived) = match cell.estimator {
                EstimatorKind::Simple => {
                    let rho = per_step_cdp_budget(cell.eps, cell.delta, 1).map_err(classify)?;
                    let (r, _) =
                        simple_clipping_rates(cell.n, cell.d, cell.p, rho.rho()).map_err(classify)?;
                    (r * m, rho, Derived::default())
                }
                EstimatorKind::Iterative => {
                    let k = cell.k.expect("iterative cells carry k");
                    let rho = shuffle_amplified_group_budget(total, k).map_err(classify)?;
                    let (r, _) = iterative_rates(cell.n, cell.d, cell.p, cell.eps).map_err(classify)?;
                    let derived = Derived {
                        eps0: Some(cell.eps),
                        delta0: Some(cell.delta),
                        ..Derived::default()
                    };
                    (r * m, rho, derived)
                }
            };
            derived.steps = Some(1);
            derived.radius = Some(radius);
            derived.rho_step = Some(rho.rho());
            Ok((
                Prepared::Mean {
                    spec,
                    radius,
                    rho,
                    total,
                },
                derived,
            ))
        }
        Mode::OptBench => {
            let mut rng = stream(derive_seed(cfg.seed, &format!("{key}/problem"), 0));
            let problem =
                make_quadratic_problem(&spec, cfg.diameter, cfg.curvature, &mut rng).map_err(classify)?;
            let (schedule, estimator, rho_step) = match cell.estimator {
                EstimatorKind::Simple => {
                    let s = schedule_simple_clipping(cell.n, &problem, total, cfg.radius_mult)
                        .map_err(classify)?;
                    let e = GradientEstimator::simple_clipping(&s).map_err(classify)?;
                    let rho = match s.step_budget {
                        Some(StepBudget::Cdp(b)) => b.rho(),
                        _ => unreachable!("simple schedule carries a zCDP budget"),
                    };
                    (s, e, rho)
                }
                EstimatorKind::Iterative => {
                    let s = schedule_iterative(cell.n, &problem, total, cfg.radius_mult)
                        .map_err(classify)?;
                    let (k, tc) = (cell.k.expect("k"), cell.tc.expect("tc"));
                    let e = GradientEstimator::iterative(&s, iterative_config(k, tc)).map_err(classify)?;
                    let step = match s.step_budget {
                        Some(StepBudget::ApproxDp(b)) => b,
                        _ => unreachable!("iterative schedule carries an (eps, delta) budget"),
                    };
                    let rho = shuffle_amplified_group_budget(step, k).map_err(classify)?;
                    (s, e, rho.rho())
                }
            };
            let (eps0, delta0) = match schedule.step_budget {
                Some(StepBudget::ApproxDp(b)) => (Some(b.epsilon()), Some(b.delta())),
                _ => (None, None),
            };
            let derived = Derived {
                steps: Some(schedule.steps),
                eta: Some(schedule.learning_rate),
                radius: Some(schedule.clip_radius),
                rho_step: Some(rho_step),
                eps0,
                delta0,
            };
            Ok((
                Prepared::Opt {
                    spec,
                    problem: Box::new(problem),
                    schedule,
                    estimator,
                },
                derived,
            ))
        }
    }
}

fn execute(cell: &Cell, prepared: &Prepared, seed: u64) -> (Option<f64>, Status) {
    let mut rng = stream(seed);
    let result = match prepared {
        Prepared::Mean {
            spec,
            radius,
            rho,
            total,
        } => {
            let x = spec.sample(cell.n, &mut rng);
            ClipConfig::new(*radius)
                .and_then(|clip| match cell.estimator {
                    EstimatorKind::Simple => simple_clip_mean(x.view(), &clip, *rho, NoiseMode::Private, &mut rng),
                    EstimatorKind::Iterative => {
                        let mut c = IterativeConfig::new(cell.k.expect("k"), cell.tc.expect("tc"));
                        c.remainder = RemainderPolicy::DropRandom;
                        iterative_update_mean(x.view(), &clip, *total, &c, NoiseMode::Private, &mut rng)
                    }
                })
                .map(|est| {
                    let e = &est.value - spec.mean();
                    e.dot(&e).sqrt()
                })
        }
        Prepared::Opt {
            spec,
            problem,
            schedule,
            estimator,
        } => {
            let z = spec.sample(cell.n, &mut rng);
            sgd_loop(problem, z.view(), schedule, estimator, problem.default_start().view(), &mut rng)
                .map(|run| run.excess_risk.unwrap_or(f64::NAN))
        }
    };
    match result {
        Ok(v) if v.is_finite() => (Some(v), Status::Ok),
        Ok(v) => (None, Status::Failed(format!("non-finite outcome {v}"))),
        Err(e) => (None, classify(e)),
    }
}

/// Row counts of a finished run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunSummary {
    pub rows: usize,
    pub ok: usize,
    pub skipped: usize,
    pub failed: usize,
}

/// Run every cell × replication and return the records in grid order.
pub fn run_records(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let cells = expand_grid(cfg);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.jobs {
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| CliError::Pool(e.to_string()))?;

    let records = pool.install(|| {
        let prepared: Vec<_> = cells
            .par_iter()
            .map(|cell| {
                let key = cell.key(cfg.mode, cfg.radius_mult);
                let prep = prepare(cfg, cell, &key);
                (key, prep)
            })
            .collect();
        let items: Vec<(usize, usize)> = (0..cells.len())
            .flat_map(|c| (0..cfg.reps).map(move |r| (c, r)))
            .collect();
        items
            .par_iter()
            .map(|&(c, rep)| {
                let cell = &cells[c];
                let (key, prep) = &prepared[c];
                let seed = derive_seed(cfg.seed, key, rep as u64);
                let start = Instant::now();
                let (derived, outcome, status) = match prep {
                    Ok((p, derived)) => {
                        let (outcome, status) = execute(cell, p, seed);
                        (derived.clone(), outcome, status)
                    }
                    Err(status) => (Derived::default(), None, status.clone()),
                };
                let wall_ms = if cfg.record_wall_time {
                    start.elapsed().as_secs_f64() * 1e3
                } else {
                    0.0
                };
                RunRecord {
                    run_id: c * cfg.reps + rep,
                    mode: cfg.mode,
                    cell: cell.clone(),
                    derived,
                    seed,
                    rep,
                    outcome,
                    status,
                    wall_ms,
                }
            })
            .collect::<Vec<_>>()
    });
    Ok(records)
}

fn summary_of(records: &[RunRecord]) -> RunSummary {
    let mut s = RunSummary {
        rows: records.len(),
        ..RunSummary::default()
    };
    for r in records {
        match r.status {
            Status::Ok => s.ok += 1,
            Status::Skipped(_) => s.skipped += 1,
            Status::Failed(_) => s.failed += 1,
        }
    }
    s
}

pub fn write_results(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(COLUMNS)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn write_manifest(path: &Path, cfg: &ExperimentConfig, summary: &RunSummary) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    let text = format!(
        "schema_version = {SCHEMA_VERSION}\n\
         tool = {} {}\n\
         rng = {RNG_ID}\n\
         seed_derivation = FNV-1a 64 over (master seed LE, cell key UTF-8, replication LE), SplitMix64 finalizer\n\
         quantile_convention = linear interpolation between order statistics at position (N-1)q\n\
         columns = {}\n\
         rows = {}\n\
         ok = {}\n\
         skipped = {}\n\
         failed = {}\n\
         wall_time = {}\n\
         \n[config]\n{}",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
        COLUMNS.join(","),
        summary.rows,
        summary.ok,
        summary.skipped,
        summary.failed,
        if cfg.record_wall_time { "measured" } else { "disabled" },
        cfg.echo(),
    );
    f.write_all(text.as_bytes()).map_err(io_err(path))
}

/// Run the experiment and write `results.csv` and `manifest.txt` into
/// `cfg.out`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out).map_err(io_err(&cfg.out))?;
    let results = cfg.out.join("results.csv");
    // Fail on an unwritable directory before doing any work.
    std::fs::File::create(&results).map_err(io_err(&results))?;
    let records = run_records(cfg)?;
    let summary = summary_of(&records);
    write_results(&results, &records)?;
    write_manifest(&cfg.out.join("manifest.txt"), cfg, &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mode: Mode) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(mode);
        c.n = vec![400];
        c.d = vec![2];
        c.reps = 2;
        c.record_wall_time = false;
        c
    }

    #[test]
    fn grid_order_and_keys() {
        let mut c = small(Mode::MeanBench);
        c.n = vec![100, 200];
        c.estimator = vec![EstimatorKind::Simple, EstimatorKind::Iterative];
        let cells = expand_grid(&c);
        assert_eq!(cells.len(), 4);
        assert_eq!(cells[1].n, 200);
        assert_eq!(cells[2].k, Some(50));
        let keys: std::collections::HashSet<_> =
            cells.iter().map(|c| c.key(Mode::MeanBench, 1.0)).collect();
        assert_eq!(keys.len(), 4);
    }

    #[test]
    fn epsilon_above_one_is_skipped_for_simple_clipping() {
        let mut c = small(Mode::MeanBench);
        c.eps = vec![0.5, 2.0];
        let recs = run_records(&c).unwrap();
        assert_eq!(recs.len(), 4);
        assert_eq!(recs[0].status, Status::Ok);
        assert!(matches!(recs[2].status, Status::Skipped(_)));
        assert_eq!(recs[2].outcome, None);
    }

    #[test]
    fn iterative_mean_bench_runs() {
        let mut c = small(Mode::MeanBench);
        c.estimator = vec![EstimatorKind::Iterative];
        c.k = Some(40);
        c.tc = 5;
        let recs = run_records(&c).unwrap();
        assert!(recs.iter().all(|r| r.status == Status::Ok), "{recs:?}");
        assert!(recs[0].derived.rho_step.unwrap() > 0.0);
    }

    #[test]
    fn opt_bench_runs_both_estimators() {
        let mut c = small(Mode::OptBench);
        c.estimator = vec![EstimatorKind::Simple, EstimatorKind::Iterative];
        c.k = Some(20);
        c.tc = 5;
        let recs = run_records(&c).unwrap();
        for r in &recs {
            assert_eq!(r.status, Status::Ok, "{r:?}");
            assert!(r.outcome.unwrap() >= 0.0);
            assert!(r.derived.steps.unwrap() >= 1);
        }
        assert!(recs[2].derived.eps0.is_some());
    }

    #[test]
    fn parallelism_does_not_change_results() {
        let mut c = small(Mode::MeanBench);
        c.reps = 6;
        c.jobs = Some(1);
        let a = run_records(&c).unwrap();
        c.jobs = Some(4);
        let b = run_records(&c).unwrap();
        assert_eq!(a, b);
    }
}
