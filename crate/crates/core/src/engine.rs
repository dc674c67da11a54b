//! Generic SGD loop over pluggable stochastic-gradient oracles, with
//! schedule injection, multi-run averaging, and trace capture.
//!
//! Runs are embarrassingly parallel. Every run owns its RNG stream (seed =
//! master seed ⊕ run index, expanded through the generator's seeding
//! function) and results are reduced in run-index order, so output is
//! bit-identical no matter how many worker threads execute.

use rand::SeedableRng;
use rayon::prelude::*;

use crate::error::Result;
use crate::model::{log_grid, ProblemParams, Schedule, Trace};

/// Per-run generator. Seeded per run; never shared across runs.
pub type RunRng = rand_pcg::Pcg64Mcg;

/// Iterate growth beyond 1e12·(1 + ‖w0‖) aborts a run as divergent.
const DIVERGENCE_FACTOR: f64 = 1e12;

/// Environment variable capping Monte Carlo worker threads (0 = auto).
pub const THREADS_ENV: &str = "STEPSIZE_LAB_THREADS";

pub trait GradientOracle: Sync {
    fn dimension(&self) -> usize;

    /// Writes ∇f(w; ξ) into `out` for a freshly drawn ξ.
    fn stochastic_gradient(&self, w: &[f64], rng: &mut RunRng, out: &mut [f64]);

    /// Exact ∇F(w), when the oracle can evaluate it.
    fn full_gradient(&self, _w: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    /// The minimizer w*, when known; required for the squared-distance metric.
    fn reference_optimum(&self) -> Option<&[f64]> {
        None
    }

    /// F(w), when the oracle can evaluate it.
    fn objective(&self, _w: &[f64]) -> Option<f64> {
        None
    }

    /// Run-specific random initial point; `None` keeps the caller's w0.
    /// Drawn before any gradient sampling on the run's own stream.
    fn sample_start(&self, _rng: &mut RunRng) -> Option<Vec<f64>> {
        None
    }
}

#[derive(Debug, Clone)]
pub enum RecordGrid {
    /// Log-spaced indices, capped per decade (always includes 0 and t_max).
    Log { points_per_decade: u32 },
    /// Every `stride`-th iteration plus the endpoints.
    EveryN(u64),
}

impl RecordGrid {
    fn build(&self, t_max: u64) -> Vec<u64> {
        match *self {
            RecordGrid::Log { points_per_decade } => log_grid(t_max, points_per_decade),
            RecordGrid::EveryN(stride) => {
                let stride = stride.max(1);
                let mut g: Vec<u64> = (0..=t_max).step_by(stride as usize).collect();
                if *g.last().unwrap() != t_max {
                    g.push(t_max);
                }
                g
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Metric {
    /// ‖w_t − w*‖²; requires the oracle to expose its reference optimum.
    SquaredDistance,
    /// F(w_t) − f_star; requires the oracle to evaluate F.
    Suboptimality { f_star: f64 },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: ProblemParams,
    pub schedule: Schedule,
    pub t_max: u64,
    pub runs: u32,
    pub seed: u64,
    pub grid: RecordGrid,
    pub metric: Metric,
}

impl RunConfig {
    pub fn new(
        params: ProblemParams,
        schedule: Schedule,
        t_max: u64,
        runs: u32,
        seed: u64,
    ) -> Self {
        RunConfig {
            params,
            schedule,
            t_max,
            runs: runs.max(1),
            seed,
            grid: RecordGrid::Log {
                points_per_decade: 200,
            },
            metric: Metric::SquaredDistance,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    /// Across-run average of the metric on the recording grid; `stderr` is
    /// the sample standard error when runs > 1.
    pub trace: Trace,
    /// Indices of runs aborted by the divergence guard (their last metric
    /// value is carried to the remaining grid points).
    pub diverged_runs: Vec<u32>,
}

fn metric_value<O: GradientOracle>(oracle: &O, metric: &Metric, w: &[f64]) -> f64 {
    match metric {
        Metric::SquaredDistance => {
            let w_star = oracle
                .reference_optimum()
                .expect("squared-distance metric needs a reference optimum");
            w.iter().zip(w_star).map(|(a, b)| (a - b) * (a - b)).sum()
        }
        Metric::Suboptimality { f_star } => {
            oracle
                .objective(w)
                .expect("suboptimality metric needs an objective")
                - f_star
        }
    }
}

fn single_run<O: GradientOracle>(
    oracle: &O,
    w0: &[f64],
    cfg: &RunConfig,
    grid: &[u64],
    run: u32,
) -> (Vec<f64>, bool) {
    let mut rng = RunRng::seed_from_u64(cfg.seed ^ run as u64);
    let mut w = oracle.sample_start(&mut rng).unwrap_or_else(|| w0.to_vec());
    assert_eq!(w.len(), oracle.dimension());
    let guard = DIVERGENCE_FACTOR * (1.0 + w0.iter().map(|x| x * x).sum::<f64>().sqrt());
    let guard_sq = guard * guard;

    let mut grad = vec![0.0; w.len()];
    let mut eta = cfg.schedule.stream(&cfg.params);
    let mut values = Vec::with_capacity(grid.len());
    let mut next = grid.iter().copied().peekable();
    let mut diverged = false;

    for t in 0..=cfg.t_max {
        if next.peek() == Some(&t) {
            values.push(metric_value(oracle, &cfg.metric, &w));
            next.next();
        }
        if t == cfg.t_max {
            break;
        }
        let step = eta.next_eta();
        // after the guard trips the iterate stays frozen; remaining grid
        // points record its last metric value
        if !diverged {
            oracle.stochastic_gradient(&w, &mut rng, &mut grad);
            for (wi, gi) in w.iter_mut().zip(&grad) {
                *wi -= step * gi;
            }
            if w.iter().map(|x| x * x).sum::<f64>() > guard_sq {
                diverged = true;
            }
        }
    }
    debug_assert_eq!(values.len(), grid.len());
    (values, diverged)
}

/// Runs `cfg.runs` independent SGD trajectories from `w0` (or the oracle's
/// own random start) and returns the metric averaged across runs on the
/// recording grid. Deterministic for a fixed seed, regardless of the worker
/// thread count.
pub fn run_sgd<O: GradientOracle>(oracle: &O, w0: &[f64], cfg: &RunConfig) -> Result<RunReport> {
    let cfg_params = cfg.params.validated()?;
    let _ = cfg_params;
    let grid = cfg.grid.build(cfg.t_max);

    let per_run: Vec<(Vec<f64>, bool)> = thread_pool().install(|| {
        (0..cfg.runs)
            .into_par_iter()
            .map(|run| single_run(oracle, w0, cfg, &grid, run))
            .collect()
    });

    let runs = cfg.runs as f64;
    let mut trace = Trace::new("sgd");
    for (i, &t) in grid.iter().enumerate() {
        let mean = per_run.iter().map(|(v, _)| v[i]).sum::<f64>() / runs;
        let stderr = if cfg.runs > 1 {
            let var = per_run
                .iter()
                .map(|(v, _)| (v[i] - mean) * (v[i] - mean))
                .sum::<f64>()
                / (runs - 1.0);
            Some((var / runs).sqrt())
        } else {
            None
        };
        trace.push_with_stderr(t, mean.max(0.0), stderr);
    }
    let diverged_runs = per_run
        .iter()
        .enumerate()
        .filter(|(_, (_, d))| *d)
        .map(|(i, _)| i as u32)
        .collect();
    Ok(RunReport {
        trace,
        diverged_runs,
    })
}

/// Worker pool honoring `STEPSIZE_LAB_THREADS` (0 or unset = automatic).
pub fn thread_pool() -> rayon::ThreadPool {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("worker pool construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    /// f(w) = ½‖w − c‖², deterministic gradient w − c.
    struct Quadratic {
        center: Vec<f64>,
    }

    impl GradientOracle for Quadratic {
        fn dimension(&self) -> usize {
            self.center.len()
        }
        fn stochastic_gradient(&self, w: &[f64], _rng: &mut RunRng, out: &mut [f64]) {
            for i in 0..w.len() {
                out[i] = w[i] - self.center[i];
            }
        }
        fn full_gradient(&self, w: &[f64], out: &mut [f64]) -> bool {
            for i in 0..w.len() {
                out[i] = w[i] - self.center[i];
            }
            true
        }
        fn reference_optimum(&self) -> Option<&[f64]> {
            Some(&self.center)
        }
        fn objective(&self, w: &[f64]) -> Option<f64> {
            Some(
                0.5 * w
                    .iter()
                    .zip(&self.center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>(),
            )
        }
    }

    fn quadratic_cfg(schedule: Schedule, t_max: u64) -> RunConfig {
        // μ = L = 1 quadratic; N = 0 (deterministic gradient at the optimum)
        let p = ProblemParams::new(1.0, 1.0, 0.0, 4.0).unwrap();
        let mut cfg = RunConfig::new(p, schedule, t_max, 1, 99);
        cfg.grid = RecordGrid::EveryN(1);
        cfg
    }

    #[test]
    fn constant_half_step_contracts_by_quarter() {
        let oracle = Quadratic {
            center: vec![1.0, -2.0],
        };
        let cfg = quadratic_cfg(Schedule::Custom(Arc::new(|_| 0.5)), 8);
        let report = run_sgd(&oracle, &[3.0, 0.0], &cfg).unwrap();
        let pts = &report.trace.points;
        for w in pts.windows(2) {
            assert!((w[1].value - 0.25 * w[0].value).abs() <= 1e-12 * w[0].value.max(1e-300));
        }
        assert!(report.diverged_runs.is_empty());
    }

    #[test]
    fn zero_step_leaves_trace_constant() {
        let oracle = Quadratic { center: vec![1.0] };
        let cfg = quadratic_cfg(Schedule::Custom(Arc::new(|_| 0.0)), 20);
        let report = run_sgd(&oracle, &[5.0], &cfg).unwrap();
        for pt in &report.trace.points {
            assert_eq!(pt.value, 16.0);
        }
    }

    #[test]
    fn deterministic_descent_is_monotone() {
        let oracle = Quadratic {
            center: vec![0.5, 0.5, -1.0],
        };
        let p = ProblemParams::new(1.0, 1.0, 0.0, 1.0).unwrap();
        let mut cfg = RunConfig::new(p, Schedule::ApproxCandidate, 200, 1, 5);
        cfg.grid = RecordGrid::EveryN(1);
        let report = run_sgd(&oracle, &[1.0, 1.0, 1.0], &cfg).unwrap();
        for w in report.trace.points.windows(2) {
            assert!(w[1].value <= w[0].value * (1.0 + 1e-15));
        }
    }

    #[test]
    fn divergence_guard_flags_run() {
        // a huge fixed step on μ = L = 1 doubles the distance each iteration
        let oracle = Quadratic { center: vec![0.0] };
        let cfg = quadratic_cfg(Schedule::Custom(Arc::new(|_| -3.0)), 200);
        let report = run_sgd(&oracle, &[1.0], &cfg).unwrap();
        assert_eq!(report.diverged_runs, vec![0]);
        // values stay finite thanks to the freeze-on-abort rule
        for pt in &report.trace.points {
            assert!(pt.value.is_finite());
        }
    }

    #[test]
    fn seed_determinism_across_thread_counts() {
        struct Noisy;
        impl GradientOracle for Noisy {
            fn dimension(&self) -> usize {
                1
            }
            fn stochastic_gradient(&self, w: &[f64], rng: &mut RunRng, out: &mut [f64]) {
                use rand::Rng;
                out[0] = w[0] + rng.gen_range(-1.0..1.0);
            }
            fn reference_optimum(&self) -> Option<&[f64]> {
                const ZERO: [f64; 1] = [0.0];
                Some(&ZERO)
            }
        }
        let p = ProblemParams::new(0.1, 1.0, 1.0, 1.0).unwrap();
        let cfg = RunConfig::new(p, Schedule::ApproxCandidate, 500, 8, 1234);

        std::env::set_var(THREADS_ENV, "1");
        let a = run_sgd(&Noisy, &[1.0], &cfg).unwrap();
        std::env::set_var(THREADS_ENV, "4");
        let b = run_sgd(&Noisy, &[1.0], &cfg).unwrap();
        std::env::remove_var(THREADS_ENV);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn suboptimality_metric_tracks_objective_gap() {
        // F(w) − F* = ½‖w − c‖² for the quadratic, so the gap also
        // contracts by ¼ per constant-half step
        let oracle = Quadratic {
            center: vec![2.0, -1.0],
        };
        let p = ProblemParams::new(1.0, 1.0, 0.0, 4.0).unwrap();
        let mut cfg = RunConfig::new(p, Schedule::Custom(Arc::new(|_| 0.5)), 6, 1, 3);
        cfg.grid = RecordGrid::EveryN(1);
        cfg.metric = Metric::Suboptimality { f_star: 0.0 };
        let report = run_sgd(&oracle, &[0.0, 0.0], &cfg).unwrap();
        let pts = &report.trace.points;
        assert!((pts[0].value - 2.5).abs() < 1e-12);
        for w in pts.windows(2) {
            assert!((w[1].value - 0.25 * w[0].value).abs() <= 1e-12 * w[0].value.max(1e-300));
        }
    }

    #[test]
    fn stderr_present_only_for_multiple_runs() {
        let oracle = Quadratic { center: vec![0.0] };
        let p = ProblemParams::new(1.0, 1.0, 0.0, 1.0).unwrap();
        let cfg1 = RunConfig::new(p, Schedule::ApproxCandidate, 10, 1, 7);
        let r1 = run_sgd(&oracle, &[1.0], &cfg1).unwrap();
        assert!(r1.trace.points.iter().all(|pt| pt.stderr.is_none()));
        let cfg4 = RunConfig::new(p, Schedule::ApproxCandidate, 10, 4, 7);
        let r4 = run_sgd(&oracle, &[1.0], &cfg4).unwrap();
        assert!(r4.trace.points.iter().all(|pt| pt.stderr.is_some()));
    }
}
