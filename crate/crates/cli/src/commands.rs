use std::path::Path;

use stepsize_lab::approximation::{eta_prime, t_prime, z_prime_bound};
use stepsize_lab::compare::comparison_report;
use stepsize_lab::dataset::{read_libsvm_path, LogRegOracle, LogRegProblem};
use stepsize_lab::engine::{run_sgd, Metric, RecordGrid, RunConfig};
use stepsize_lab::recurrence::{tight_bounds, weak_bounds};
use stepsize_lab::schedule_analysis::{
    big_m, c_of_t, convergence_rate_bound, divergence_test, family_compare, find_crossing,
    ContinuousSchedule,
};
use stepsize_lab::tightness::TightnessModel;
use stepsize_lab::{log_grid, OptimalPlan, ProblemParams, Schedule, Trace};

use crate::output::{emit, Table};
use crate::{OutputArgs, ParamArgs};

/// Mixes the model-construction stream away from the run streams
/// (which use seed ⊕ run_index).
const MODEL_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl From<stepsize_lab::Error> for CliError {
    fn from(e: stepsize_lab::Error) -> Self {
        let code = match e {
            stepsize_lab::Error::Io(_) | stepsize_lab::Error::Parse { .. } => 2,
            _ => 1,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            code: 2,
            message: e.to_string(),
        }
    }
}

fn usage_error(message: impl Into<String>) -> CliError {
    CliError {
        code: 1,
        message: message.into(),
    }
}

type CmdResult = Result<(), CliError>;

fn validated(args: &ParamArgs) -> Result<ProblemParams, CliError> {
    Ok(ProblemParams::new(args.mu, args.l, args.n, args.y0)?)
}

fn warn_regime(p: &ProblemParams) {
    if p.mu / (2.0 * p.l) > 0.05 {
        eprintln!(
            "warning: mu/(2L) = {:.3} > 0.05; the weakened bounds assume this ratio is small",
            p.mu / (2.0 * p.l)
        );
    }
}

pub fn bounds(args: &ParamArgs, t_max: u64, out: &OutputArgs) -> CmdResult {
    let p = validated(args)?;
    warn_regime(&p);
    let plan = OptimalPlan::compute(&p, t_max)?;
    let threshold = t_prime(&p).ceil() as u64;
    let z_w = plan.window.and_then(|w| plan.z_at(w));

    let mut table = Table::new(&[
        "t",
        "Z_iter",
        "Z_tight_lo",
        "Z_tight_hi",
        "Z_weak_lo",
        "Z_weak_hi",
        "Z_prime",
        "eta_opt",
        "eta_prime",
    ]);
    for t in log_grid(t_max, 200) {
        let tight = match (plan.window, z_w) {
            (Some(w), Some(z)) if t >= w && p.n > 0.0 => tight_bounds(&p, w, z, t).ok(),
            _ => None,
        };
        let weak = match plan.window {
            Some(w) if t >= w && p.n > 0.0 => weak_bounds(&p, t).ok(),
            _ => None,
        };
        let z_prime = if p.n > 0.0 && t >= threshold {
            z_prime_bound(&p, t).ok()
        } else {
            None
        };
        table.push_row(vec![
            Some(t as f64),
            plan.z_at(t),
            tight.map(|b| b.0),
            tight.map(|b| b.1),
            weak.map(|b| b.0),
            weak.map(|b| b.1),
            z_prime,
            plan.eta.value_at(t),
            Some(eta_prime(&p, t)),
        ]);
    }
    emit(out.out.as_deref(), &table.render(out.format))?;
    Ok(())
}

fn parse_family(name: &str, q: Option<f64>, p: &ProblemParams) -> Result<Schedule, CliError> {
    let schedule = match name {
        "approx" => Schedule::ApproxCandidate,
        "optimal" => Schedule::Optimal,
        "gower" => Schedule::GowerPiecewise,
        "power" => {
            let q = q.ok_or_else(|| usage_error("--family power requires --q"))?;
            Schedule::power_law(q, p)?
        }
        other => return Err(usage_error(format!("unknown family `{other}`"))),
    };
    schedule.validate(p)?;
    Ok(schedule)
}

#[allow(clippy::too_many_arguments)]
pub fn tightness(
    n: u64,
    d: usize,
    t_max: u64,
    runs: u32,
    seed: u64,
    family: &str,
    q: Option<f64>,
    out: &OutputArgs,
) -> CmdResult {
    let model = TightnessModel::random_uniform(n, d, seed ^ MODEL_SEED_SALT)?;
    let p = model.params();
    let schedule = parse_family(family, q, &p)?;
    let report = model.simulate(&schedule, t_max, runs, seed)?;
    let grid: Vec<u64> = report.trace.points.iter().map(|pt| pt.t).collect();
    let exact = model.exact_trace_on_grid(&grid);
    let upper_from = (20.0 * model.l / model.mu).ceil() as u64;

    let mut table = Table::new(&["t", "Y_sim", "stderr", "Y_exact", "lower", "upper"]);
    let mut in_sandwich = 0usize;
    let mut checked = 0usize;
    for (pt, ex) in report.trace.points.iter().zip(&exact.points) {
        let lower = model.lower_bound(pt.t);
        let upper = model.upper_bound(pt.t).ok();
        if pt.t >= upper_from {
            checked += 1;
            let slack = 3.0 * pt.stderr.unwrap_or(0.0);
            if pt.value >= lower - slack && upper.is_none_or(|u| pt.value <= u + slack) {
                in_sandwich += 1;
            }
        }
        table.push_row(vec![
            Some(pt.t as f64),
            Some(pt.value),
            pt.stderr,
            Some(ex.value),
            Some(lower),
            upper,
        ]);
    }
    emit(out.out.as_deref(), &table.render(out.format))?;
    if checked > 0 {
        eprintln!(
            "sandwich fraction for t ≥ {upper_from}: {:.3} ({in_sandwich}/{checked} grid points, 3-standard-error slack)",
            in_sandwich as f64 / checked as f64
        );
    } else {
        eprintln!(
            "no grid points at or beyond t = {upper_from}; increase --t-max to check the sandwich"
        );
    }
    if !report.diverged_runs.is_empty() {
        eprintln!(
            "warning: divergence guard tripped in runs {:?}",
            report.diverged_runs
        );
    }
    Ok(())
}

fn scale_features_max_abs(problem: &mut LogRegProblem) {
    let dim = problem.dim();
    let mut max_abs = vec![0.0f64; dim];
    for row in &problem.data.rows {
        for &(j, v) in row {
            max_abs[j as usize] = max_abs[j as usize].max(v.abs());
        }
    }
    for row in &mut problem.data.rows {
        for (j, v) in row.iter_mut() {
            if max_abs[*j as usize] > 0.0 {
                *v /= max_abs[*j as usize];
            }
        }
    }
    // smoothness changes with the data
    let lambda = problem.lambda;
    problem.l = problem.data.max_row_norm_sq() / 4.0 + lambda;
}

pub fn logreg(
    dataset: &Path,
    t_max: u64,
    runs: u32,
    seed: u64,
    tol: f64,
    scale_features: bool,
    out: &OutputArgs,
) -> CmdResult {
    if tol <= 0.0 {
        return Err(usage_error("--tol must be positive"));
    }
    let data = read_libsvm_path(dataset)?;
    let mut problem = LogRegProblem::new(data)?;
    if scale_features {
        scale_features_max_abs(&mut problem);
    }
    let reference = problem.solve_reference(tol);
    if !reference.converged {
        eprintln!(
            "warning: reference solve not converged: ‖∇F‖² = {:.3e} after {} iterations",
            reference.grad_norm_sq, reference.iterations
        );
    }
    problem.set_reference(&reference);

    let n_hat = problem.estimate_noise(&reference.w);
    let y0: f64 = reference.w.iter().map(|x| x * x).sum(); // w0 = 0
    let p = ProblemParams::new(problem.mu, problem.l, n_hat, y0)?;
    let threshold = t_prime(&p).ceil() as u64;

    let oracle = LogRegOracle::new(&problem);
    let mut cfg = RunConfig::new(p, Schedule::ApproxCandidate, t_max, runs, seed);
    cfg.metric = Metric::SquaredDistance;
    cfg.grid = RecordGrid::Log {
        points_per_decade: 200,
    };
    let w0 = vec![0.0; problem.dim()];
    let report = run_sgd(&oracle, &w0, &cfg)?;

    let mut table = Table::new(&["t", "Y_sim", "stderr", "Z_prime"]);
    for pt in &report.trace.points {
        let bound = if pt.t >= threshold {
            z_prime_bound(&p, pt.t).ok()
        } else {
            None
        };
        table.push_row(vec![Some(pt.t as f64), Some(pt.value), pt.stderr, bound]);
    }
    emit(out.out.as_deref(), &table.render(out.format))?;

    let regime = n_hat / (p.mu * p.l * y0);
    eprintln!(
        "n = {}, lambda = mu = {:.6e}, L = {:.6e}",
        problem.data.len(),
        problem.mu,
        problem.l
    );
    eprintln!(
        "reference solve: {} iterations, ‖∇F‖² = {:.3e}, converged = {}",
        reference.iterations, reference.grad_norm_sq, reference.converged
    );
    eprintln!("estimated N = {n_hat:.6e}, Y0 = ‖w*‖² = {y0:.6e}, T' = {threshold}");
    eprintln!(
        "N/(mu·L·Y0) = {regime:.4}; inside the ≤ 1 regime typical of real datasets: {}",
        if regime <= 1.0 { "yes" } else { "no" }
    );
    Ok(())
}

pub fn schedule(
    args: &ParamArgs,
    family: &str,
    qs: &[f64],
    k: Option<f64>,
    t_max: u64,
    out: &OutputArgs,
) -> CmdResult {
    let p = validated(args)?;
    warn_regime(&p);
    let continuous = match family {
        "approx" => ContinuousSchedule::approx_candidate(&p),
        "power" => {
            let q = *qs
                .first()
                .ok_or_else(|| usage_error("--family power requires --q"))?;
            if !(q > 0.0 && q <= 1.0) {
                return Err(usage_error("power exponents must lie in (0, 1]"));
            }
            ContinuousSchedule::power_law(p.mu, q, (2.0 * p.l).powf(1.0 / q))
        }
        other => {
            return Err(usage_error(format!(
                "family `{other}` has no continuous density here"
            )))
        }
    };

    let compare_qs: Vec<f64> = if qs.is_empty() {
        vec![1.0, 0.5]
    } else {
        qs.to_vec()
    };
    for &q in &compare_qs {
        if !(q > 0.0 && q <= 1.0) {
            return Err(usage_error("power exponents must lie in (0, 1]"));
        }
    }
    let traces: Vec<Trace> = family_compare(&p, &compare_qs, t_max)?;

    let mut columns = vec![
        "t".to_string(),
        "n".into(),
        "M".into(),
        "C".into(),
        "rate_bound".into(),
    ];
    for tr in &traces {
        columns.push(format!("Z_{}", tr.label));
    }
    let col_refs: Vec<&str> = columns.iter().map(|s| s.as_str()).collect();
    let mut table = Table::new(&col_refs);

    let grid = log_grid(t_max, 200);
    for (i, &t) in grid.iter().enumerate() {
        let tf = t as f64;
        let mut row = vec![Some(tf)];
        if t >= 1 {
            row.push(Some(continuous.n(tf)));
            row.push(big_m(&continuous, tf).ok());
            row.push(c_of_t(&continuous, tf).ok());
            row.push(convergence_rate_bound(&continuous, &p, t).ok());
        } else {
            row.extend([None, None, None, None]);
        }
        for tr in &traces {
            row.push(Some(tr.points[i].value));
        }
        table.push_row(row);
    }
    emit(out.out.as_deref(), &table.render(out.format))?;

    match find_crossing(&continuous, t_max as f64)? {
        Some(x) => eprintln!("C(t) crosses n(t) at t ≈ {x:.6}; C decreases beyond it"),
        None => eprintln!("no C/n crossing before t = {t_max}"),
    }
    if let Some(k) = k {
        let rep = divergence_test(k, 1_000_000.min(t_max.max(3)));
        eprintln!(
            "divergence test for Σ 1/(t·ln^{k} t): integral bound {}, partial sum {:.6}, verdict {}",
            rep.integral_bound, rep.partial_sum, rep.verdict
        );
    }
    Ok(())
}

pub fn compare(d: u32, out: &OutputArgs) -> CmdResult {
    let report = comparison_report(d)?;
    let mut table = Table::new(&[
        "d",
        "our_coefficient",
        "prior_coefficient",
        "gap",
        "schedule_factor",
        "composite",
    ]);
    table.push_row(vec![
        Some(report.d as f64),
        Some(report.our_coefficient),
        Some(report.prior_coefficient),
        Some(report.gap),
        Some(report.schedule_factor),
        Some(report.composite),
    ]);
    emit(out.out.as_deref(), &table.render(out.format))?;
    Ok(())
}
