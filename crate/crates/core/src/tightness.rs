//! The constructive Gaussian example whose exact convergence rate matches
//! the recurrence bounds within constant factors.
//!
//! Data ξ ~ N(m, Σ) with diagonal Σ; component functions
//! f(w; ξ) = s(ξ)·‖w − ξ‖²/2, where the smoothness scale s(ξ) is drawn from
//! a two-part uniform mixture with mean μ and maximum L. The resulting
//! objective is μ-strongly convex with minimizer m, every component is
//! L-smooth, and the noise constant and initial distance come out as
//! N = μL²/(6(L−μ))·Tr(Σ) and Y0 = Tr(Σ).

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::engine::{run_sgd, GradientOracle, RunConfig, RunReport, RunRng};
use crate::error::{Error, Result};
use crate::model::{ProblemParams, Schedule, Trace};

/// The Gaussian model: mean, diagonal covariance, and the (μ, L) pair used
/// to build the scale mixture. Requires μ < L/18.
#[derive(Debug, Clone, Serialize)]
pub struct TightnessModel {
    pub mean: Vec<f64>,
    pub sigma_diag: Vec<f64>,
    pub mu: f64,
    pub l: f64,
}

/// Constants the model determines: noise N, initial distance Y0 = Tr(Σ),
/// the regime selector ω, and the recurrence window estimate
/// W_rec = (2L/μ)·ln(2ωμLY0/N − 1).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DerivedConstants {
    pub n: f64,
    pub y0: f64,
    pub omega: f64,
    pub w_rec: f64,
}

impl TightnessModel {
    pub fn new(mean: Vec<f64>, sigma_diag: Vec<f64>, mu: f64, l: f64) -> Result<Self> {
        if mean.is_empty() || mean.len() != sigma_diag.len() {
            return Err(Error::invalid_param(
                "mean",
                "mean and sigma_diag must share a positive length",
            ));
        }
        if !mu.is_finite() || mu <= 0.0 || !l.is_finite() || l <= 0.0 {
            return Err(Error::invalid_param("mu", "mu and L must be positive"));
        }
        if mu >= l / 18.0 {
            return Err(Error::invalid_param(
                "mu",
                "the construction requires mu < L/18",
            ));
        }
        if sigma_diag.iter().any(|&s| !s.is_finite() || s <= 0.0) {
            return Err(Error::invalid_param(
                "sigma_diag",
                "all variances must be positive",
            ));
        }
        Ok(TightnessModel {
            mean,
            sigma_diag,
            mu,
            l,
        })
    }

    /// Randomized experiment configuration: μ = 1/n, L = 1, mean and
    /// diagonal covariance entries uniform on [0, 1].
    pub fn random_uniform(n: u64, d: usize, seed: u64) -> Result<Self> {
        let mut rng = RunRng::seed_from_u64(seed);
        let mean: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
        let sigma: Vec<f64> = (0..d)
            .map(|_| rng.gen_range(0.0f64..1.0).max(1e-12))
            .collect();
        TightnessModel::new(mean, sigma, 1.0 / n as f64, 1.0)
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    /// Tr(Σ).
    pub fn trace_sigma(&self) -> f64 {
        self.sigma_diag.iter().sum()
    }

    pub fn derived(&self) -> DerivedConstants {
        let tr = self.trace_sigma();
        let n = self.mu * self.l * self.l / (6.0 * (self.l - self.mu)) * tr;
        let y0 = tr;
        let omega = (n / (self.mu * self.l * y0)).max(1.0);
        let w_rec = (2.0 * self.l / self.mu) * (2.0 * omega * self.mu * self.l * y0 / n - 1.0).ln();
        DerivedConstants {
            n,
            y0,
            omega,
            w_rec,
        }
    }

    /// The model as a recurrence parameter set (μ, L, N, Y0).
    pub fn params(&self) -> ProblemParams {
        let d = self.derived();
        ProblemParams {
            mu: self.mu,
            l: self.l,
            n: d.n,
            y0: d.y0,
        }
    }

    /// The step minimizing the exact one-step map given Y_t = `y`:
    /// η = 2μy / (N + μL²y/(6(L−μ))).
    pub fn oracle_step(&self, y: f64) -> f64 {
        debug_assert!(y >= 0.0);
        let n = self.derived().n;
        2.0 * self.mu * y / (n + self.mu * self.l * self.l / (6.0 * (self.l - self.mu)) * y)
    }

    /// Deterministic trace of the oracle-optimal expected rates:
    /// Y_{t+1} = Y_t − 2μ²Y_t² / (N(1 + Y_t/Tr(Σ))), Y_0 = Tr(Σ).
    pub fn exact_trace(&self, t_max: u64) -> Trace {
        let d = self.derived();
        let tr = self.trace_sigma();
        let mut out = Trace::new("Y_exact");
        let mut y = d.y0;
        for t in 0..=t_max {
            out.push(t, y);
            y -= 2.0 * self.mu * self.mu * y * y / (d.n * (1.0 + y / tr));
        }
        out
    }

    /// [`TightnessModel::exact_trace`] evaluated only at the given
    /// (strictly increasing) iteration indices; the recursion still advances
    /// through every step in between.
    pub fn exact_trace_on_grid(&self, grid: &[u64]) -> Trace {
        let d = self.derived();
        let tr = self.trace_sigma();
        let mut out = Trace::new("Y_exact");
        let mut y = d.y0;
        let mut next = grid.iter().copied().peekable();
        let t_max = grid.last().copied().unwrap_or(0);
        for t in 0..=t_max {
            if next.peek() == Some(&t) {
                out.push(t, y);
                next.next();
            }
            y -= 2.0 * self.mu * self.mu * y * y / (d.n * (1.0 + y / tr));
        }
        out
    }

    /// Y_t ≥ (N/(2μ)) / (μt + 2μ·ln(t+1) + W) with W = L²/(12(L−μ)).
    /// Cancels back to exactly Y0 at t = 0.
    pub fn lower_bound(&self, t: u64) -> f64 {
        let d = self.derived();
        let w = self.l * self.l / (12.0 * (self.l - self.mu));
        (d.n / (2.0 * self.mu)) / (self.mu * t as f64 + 2.0 * self.mu * ((t + 1) as f64).ln() + w)
    }

    /// Y_t ≤ (16N/μ) / (μt − 16L) for t ≥ 20L/μ.
    pub fn upper_bound(&self, t: u64) -> Result<f64> {
        let threshold = 20.0 * self.l / self.mu;
        if (t as f64) < threshold {
            return Err(Error::BoundNotYetValid { t, threshold });
        }
        Ok((16.0 * self.derived().n / self.mu) / (self.mu * t as f64 - 16.0 * self.l))
    }

    /// Monte Carlo SGD on the model: per run, w0 = ξ ~ N(m, Σ) and each step
    /// draws a fresh (s_t, ξ_t). Returns the across-run average of
    /// ‖w_t − m‖² on a log grid; deterministic for a fixed seed.
    pub fn simulate(
        &self,
        schedule: &Schedule,
        t_max: u64,
        runs: u32,
        seed: u64,
    ) -> Result<RunReport> {
        let oracle = TightnessOracle { model: self };
        let cfg = RunConfig::new(self.params(), schedule.clone(), t_max, runs, seed);
        run_sgd(&oracle, &self.mean, &cfg)
    }
}

/// Branch weight and small-branch ceiling of the scale mixture.
///
/// The mixture draws uniform on [0, a] with probability 1 − p and uniform
/// on [0, L] with probability p, where (p, a) is the unique pair giving
/// E[s] = μ and E[s²] = μL²/(12(L−μ)) exactly:
///
///   p = (3·m2 − 4μ²) / (L² + 3·m2 − 4μL),   a = (2μ − pL)/(1 − p),
///
/// with m2 = μL²/(12(L−μ)). A naive weight of μ/L with ceilings
/// μ/(1−μ/L) and L would also have mean μ, but its second moment is
/// μL²/(3(L−μ)) — uniforms on [0, c] have second moment c²/3 — which is
/// four times m2 and breaks every constant derived from the model. For
/// μ ≪ L the calibrated pair is p ≈ μ/(4L), a ≈ 7μ/4.
pub fn scale_mixture(mu: f64, l: f64) -> (f64, f64) {
    let m2 = mu * l * l / (12.0 * (l - mu));
    let p = (3.0 * m2 - 4.0 * mu * mu) / (l * l + 3.0 * m2 - 4.0 * mu * l);
    let a = (2.0 * mu - p * l) / (1.0 - p);
    assert!(
        p > 0.0 && p < 1.0 && a > 0.0 && a <= l,
        "scale mixture infeasible for mu = {mu}, L = {l} (needs mu < L/18)"
    );
    (p, a)
}

/// Smoothness-scale sampler: a two-part uniform mixture supported on [0, L]
/// with E[s] = μ and E[s²] = μL²/(12(L−μ)); see [`scale_mixture`] for the
/// branch calibration. Every draw lies in [0, L].
#[derive(Debug, Clone)]
pub struct ScaleSampler {
    pub mu: f64,
    pub l: f64,
    rng: RunRng,
}

impl ScaleSampler {
    pub fn new(mu: f64, l: f64, seed: u64) -> Self {
        assert!(mu > 0.0 && mu < l);
        scale_mixture(mu, l); // feasibility check
        ScaleSampler {
            mu,
            l,
            rng: RunRng::seed_from_u64(seed),
        }
    }

    pub fn sample(&mut self) -> f64 {
        sample_scale(self.mu, self.l, &mut self.rng)
    }
}

/// One draw of the calibrated mixture; consumes exactly two uniforms.
pub fn sample_scale(mu: f64, l: f64, rng: &mut RunRng) -> f64 {
    let (p, a) = scale_mixture(mu, l);
    let branch: f64 = rng.gen_range(0.0..1.0);
    let hi = if branch < 1.0 - p { a } else { l };
    rng.gen_range(0.0..hi)
}

/// Engine adapter: ∇f(w; ξ) = s(ξ)·(w − ξ) with per-step fresh (s, ξ), and
/// the per-run initial point w0 = ξ drawn from N(m, Σ).
pub struct TightnessOracle<'a> {
    pub model: &'a TightnessModel,
}

impl TightnessOracle<'_> {
    fn draw_xi(&self, rng: &mut RunRng, out: &mut [f64]) {
        let m = self.model;
        for ((o, mean), sd) in out.iter_mut().zip(&m.mean).zip(&m.sigma_diag) {
            let z: f64 = rng.sample(StandardNormal);
            *o = mean + sd.sqrt() * z;
        }
    }
}

impl GradientOracle for TightnessOracle<'_> {
    fn dimension(&self) -> usize {
        self.model.dimension()
    }

    fn stochastic_gradient(&self, w: &[f64], rng: &mut RunRng, out: &mut [f64]) {
        let s = sample_scale(self.model.mu, self.model.l, rng);
        self.draw_xi(rng, out);
        for (o, wi) in out.iter_mut().zip(w) {
            *o = s * (wi - *o);
        }
    }

    fn full_gradient(&self, w: &[f64], out: &mut [f64]) -> bool {
        for ((o, wi), mean) in out.iter_mut().zip(w).zip(&self.model.mean) {
            *o = self.model.mu * (wi - mean);
        }
        true
    }

    fn reference_optimum(&self) -> Option<&[f64]> {
        Some(&self.model.mean)
    }

    fn objective(&self, w: &[f64]) -> Option<f64> {
        let dist: f64 = w
            .iter()
            .zip(&self.model.mean)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Some(0.5 * self.model.mu * (dist + self.model.trace_sigma()))
    }

    fn sample_start(&self, rng: &mut RunRng) -> Option<Vec<f64>> {
        let mut w0 = vec![0.0; self.dimension()];
        self.draw_xi(rng, &mut w0);
        Some(w0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn model() -> TightnessModel {
        TightnessModel::new(vec![0.3, -1.0, 2.0], vec![0.5, 1.5, 8.0], 0.01, 1.0).unwrap()
    }

    #[test]
    fn construction_guards() {
        assert!(TightnessModel::new(vec![0.0], vec![1.0], 0.1, 1.0).is_err()); // μ ≥ L/18
        assert!(TightnessModel::new(vec![0.0], vec![0.0], 0.01, 1.0).is_err()); // zero variance
        assert!(TightnessModel::new(vec![], vec![], 0.01, 1.0).is_err());
        model();
    }

    #[test]
    fn derived_constants_identities() {
        let m = model();
        let d = m.derived();
        let tr = 10.0;
        assert_eq!(d.y0, tr);
        assert!((d.n - m.mu * m.l * m.l / (6.0 * (m.l - m.mu)) * tr).abs() < 1e-15);
        // ω = max{L/(6(L−μ)), 1} = 1 in this regime
        assert_eq!(d.omega, 1.0);
        // W_rec ≈ (2L/μ)·ln 11 for μ ≪ L
        let approx = 2.0 * m.l / m.mu * 11.0f64.ln();
        assert!(
            (d.w_rec - approx).abs() / approx < 2e-2,
            "{} vs {approx}",
            d.w_rec
        );
        // N = 2·E[s²]·Tr(Σ): the cancellation behind lower_bound(0) = Y0
        let second_moment = m.mu * m.l * m.l / (12.0 * (m.l - m.mu));
        assert!((d.n / (2.0 * second_moment) - tr).abs() < 1e-12);
    }

    #[test]
    fn scale_mixture_matches_moments_analytically() {
        for &(mu, l) in &[(0.01, 1.0), (1e-4, 1.0), (0.3, 7.0), (5e-3, 0.2)] {
            let (p, a) = scale_mixture(mu, l);
            let mean = (1.0 - p) * a / 2.0 + p * l / 2.0;
            let m2 = (1.0 - p) * a * a / 3.0 + p * l * l / 3.0;
            let target = mu * l * l / (12.0 * (l - mu));
            assert!((mean - mu).abs() <= 1e-14 * mu, "mean {mean} vs {mu}");
            assert!((m2 - target).abs() <= 1e-14 * target, "m2 {m2} vs {target}");
        }
    }

    #[test]
    fn scale_sampler_support_and_moments() {
        let (mu, l) = (0.01, 1.0);
        let mut sampler = ScaleSampler::new(mu, l, 2024);
        let draws = 1_000_000usize;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let mut sum4 = 0.0;
        for _ in 0..draws {
            let s = sampler.sample();
            assert!((0.0..=l).contains(&s));
            sum += s;
            sum2 += s * s;
            sum4 += s * s * s * s;
        }
        let nf = draws as f64;
        let mean = sum / nf;
        let m2 = sum2 / nf;
        // mean within 3 standard errors of μ
        let var = m2 - mean * mean;
        let se_mean = (var / nf).sqrt();
        assert!(
            (mean - mu).abs() <= 3.0 * se_mean,
            "mean {mean} vs {mu} (3se {})",
            3.0 * se_mean
        );
        // second moment within 3 standard errors of μL²/(12(L−μ))
        let expected_m2 = mu * l * l / (12.0 * (l - mu));
        let var_m2 = sum4 / nf - m2 * m2;
        let se_m2 = (var_m2 / nf).sqrt();
        assert!(
            (m2 - expected_m2).abs() <= 3.0 * se_m2,
            "{m2} vs {expected_m2}"
        );
    }

    #[test]
    fn oracle_step_is_one_step_argmin() {
        let m = model();
        let d = m.derived();
        let lambda = m.l * m.l / (m.l - m.mu);
        let one_step = |eta: f64, y: f64| {
            (1.0 - m.mu * eta * (2.0 - eta * lambda / 12.0)) * y + eta * eta * d.n / 2.0
        };
        let mut rng = RunRng::seed_from_u64(9);
        for _ in 0..200 {
            let y = rng.gen_range(0.001..10.0);
            let eta = m.oracle_step(y);
            // central-difference derivative at the returned step is ~0
            let h = 1e-6 * eta.max(1e-9);
            let deriv = (one_step(eta + h, y) - one_step(eta - h, y)) / (2.0 * h);
            let scale = (d.n * eta).abs().max(m.mu * y).max(1e-12);
            assert!(deriv.abs() / scale < 1e-6, "y={y}: deriv {deriv}");
            // grid around the step never improves the map by more than dust
            let base = one_step(eta, y);
            for k in -50..=50 {
                let trial = eta * (1.0 + k as f64 * 1e-4);
                assert!(one_step(trial, y) >= base - 1e-10 * base.abs().max(1.0));
            }
        }
        assert_eq!(m.oracle_step(0.0), 0.0);
        // y = Tr(Σ) gives η = 2μTr/(2N) = μTr/N
        let tr = m.trace_sigma();
        assert!((m.oracle_step(tr) - m.mu * tr / d.n).abs() < 1e-15);
    }

    #[test]
    fn exact_trace_one_step_by_hand() {
        let m = TightnessModel::new(vec![0.0; 10], vec![1.0; 10], 0.01, 1.0).unwrap();
        let d = m.derived();
        let tr = 10.0;
        let trace = m.exact_trace(1);
        // 1 + Y0/Tr = 2 halves the quadratic correction
        let expected = tr - 2.0 * m.mu * m.mu * tr * tr / (d.n * 2.0);
        assert!((trace.value_at(1).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn exact_trace_sandwich() {
        let m = TightnessModel::new(vec![0.0; 4], vec![2.5; 4], 1e-3, 1.0).unwrap();
        let trace = m.exact_trace(100_000);
        let threshold = (20.0 * m.l / m.mu) as u64;
        let mut prev = f64::INFINITY;
        for pt in &trace.points {
            assert!(pt.value > 0.0 && pt.value <= prev);
            prev = pt.value;
            assert!(
                pt.value >= m.lower_bound(pt.t) * (1.0 - 1e-12),
                "lower violated at t={}",
                pt.t
            );
            if pt.t >= threshold {
                let up = m.upper_bound(pt.t).unwrap();
                assert!(
                    pt.value <= up * (1.0 + 1e-12),
                    "upper violated at t={}",
                    pt.t
                );
            }
        }
        // below the threshold the upper bound refuses to evaluate
        assert!(m.upper_bound(threshold - 1).is_err());
    }

    #[test]
    fn lower_bound_at_zero_is_y0() {
        let m = model();
        assert!((m.lower_bound(0) - m.trace_sigma()).abs() <= 1e-12 * m.trace_sigma());
        // asymptotics: lower·2μ²t/N → 1
        let d = m.derived();
        let t = 10u64.pow(12);
        let r = m.lower_bound(t) * 2.0 * m.mu * m.mu * t as f64 / d.n;
        assert!((r - 1.0).abs() < 1e-6);
    }

    #[test]
    fn bound_ratio_approaches_32() {
        let m = TightnessModel::new(vec![0.0; 4], vec![2.5; 4], 1e-3, 1.0).unwrap();
        let t = (1e4 * m.l / m.mu) as u64;
        let ratio = m.upper_bound(t).unwrap() / m.lower_bound(t);
        assert!((ratio - 32.0).abs() <= 0.05 * 32.0, "{ratio}");
    }

    #[test]
    fn simulate_zero_schedule_is_constant_per_run() {
        let m = model();
        let zero = Schedule::Custom(Arc::new(|_| 0.0));
        let rep = m.simulate(&zero, 100, 3, 77).unwrap();
        let first = rep.trace.points[0].value;
        for pt in &rep.trace.points {
            assert!((pt.value - first).abs() <= 1e-12 * first);
        }
    }

    #[test]
    fn simulate_is_seed_deterministic() {
        let m = model();
        let a = m.simulate(&Schedule::ApproxCandidate, 2_000, 4, 5).unwrap();
        let b = m.simulate(&Schedule::ApproxCandidate, 2_000, 4, 5).unwrap();
        assert_eq!(a.trace, b.trace);
        let c = m.simulate(&Schedule::ApproxCandidate, 2_000, 4, 6).unwrap();
        assert_ne!(a.trace, c.trace);
    }

    #[test]
    fn simulate_starts_at_trace_sigma() {
        let m = TightnessModel::new(vec![0.0; 10], vec![0.5; 10], 1e-3, 1.0).unwrap();
        let rep = m.simulate(&Schedule::ApproxCandidate, 1, 64, 31).unwrap();
        let p0 = rep.trace.points[0];
        let se = p0.stderr.unwrap();
        assert!(
            (p0.value - m.trace_sigma()).abs() <= 3.0 * se,
            "start {} vs Tr(Σ) {} (3se {})",
            p0.value,
            m.trace_sigma(),
            3.0 * se
        );
    }

    #[test]
    fn oracle_schedule_reproduces_exact_trace() {
        // feed the deterministic oracle-optimal steps into the simulator and
        // compare with the closed recursion
        let m = TightnessModel::new(vec![0.0; 8], vec![1.0; 8], 1e-3, 1.0).unwrap();
        let t_max = 3_000u64;
        let exact = m.exact_trace(t_max);
        let etas: Vec<f64> = exact
            .points
            .iter()
            .map(|pt| m.oracle_step(pt.value))
            .collect();
        let schedule = Schedule::Custom(Arc::new(move |t| etas[(t as usize).min(etas.len() - 1)]));
        let rep = m.simulate(&schedule, t_max, 48, 404).unwrap();
        for pt in &rep.trace.points {
            let se = pt.stderr.unwrap();
            let y = exact.value_at(pt.t).unwrap();
            assert!(
                (pt.value - y).abs() <= 3.0 * se.max(1e-9 * y),
                "t={}: sim {} vs exact {} (3se {})",
                pt.t,
                pt.value,
                y,
                3.0 * se
            );
        }
    }
}
