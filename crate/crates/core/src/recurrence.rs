//! The minimized distance recurrence Z_{t+1} = (1 − μη_t)Z_t + η_t²N, its
//! per-step optimal step sizes, the cap-phase window W, and closed-form
//! bounds on Z_t.
//!
//! Two phases: while Z_t > N/(μL) the optimal step is the cap 1/(2L) and Z_t
//! contracts linearly; once Z_t ≤ N/(μL) the interior minimizer μZ_t/(2N)
//! takes over and Z_t decays like 4N/(μ²t).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ProblemParams, Trace};

/// Evaluates Σ_{i=1..t} (Π_{j=i+1..t} β_j)·γ_i + (Π_{j=1..t} β_j)·y1 with the
/// empty-product = 1, empty-sum = 0 convention. This is the closed form of
/// unrolling y_{k+1} = β_k y_k + γ_k from y_1.
pub fn unroll_recurrence(beta: &[f64], gamma: &[f64], y1: f64) -> Result<f64> {
    if beta.len() != gamma.len() {
        return Err(Error::LengthMismatch {
            beta: beta.len(),
            gamma: gamma.len(),
        });
    }
    let t = beta.len();
    // suffix[i] = Π_{j=i..t-1} beta[j] (0-based), suffix[t] = 1
    let mut suffix = vec![1.0; t + 1];
    for i in (0..t).rev() {
        suffix[i] = beta[i] * suffix[i + 1];
    }
    let sum: f64 = (0..t).map(|i| suffix[i + 1] * gamma[i]).sum();
    Ok(sum + suffix[0] * y1)
}

/// Number of initial iterations where the optimal step is the cap 1/(2L).
///
/// Zero when N/Y0 ≥ μL (the noise already dominates); otherwise
/// ⌈ln(2μLY0/N − 1) / ln((1 − μ/(2L))⁻¹)⌉. Errors with
/// [`Error::InfiniteWindow`] in the noiseless case N = 0, Y0 > 0 where the
/// cap stays optimal forever.
pub fn window(p: &ProblemParams) -> Result<u64> {
    let p = p.validated()?;
    if p.n == 0.0 {
        if p.y0 > 0.0 {
            return Err(Error::InfiniteWindow);
        }
        return Ok(0); // Y0 = 0: nothing to contract
    }
    if p.n / p.y0 >= p.mu * p.l {
        return Ok(0);
    }
    let num = (2.0 * p.mu * p.l * p.y0 / p.n - 1.0).ln();
    let den = (1.0 - p.mu / (2.0 * p.l)).recip().ln();
    Ok((num / den).ceil() as u64)
}

/// The per-step minimizer min{1/(2L), μ·z/(2N)} of (1 − μη)z + η²N over
/// η ∈ (0, 1/(2L)].
pub fn optimal_eta(p: &ProblemParams, z_t: f64) -> f64 {
    debug_assert!(z_t >= 0.0);
    if p.n == 0.0 {
        return p.eta_cap();
    }
    p.eta_cap().min(p.mu * z_t / (2.0 * p.n))
}

/// Closed form of the cap phase: Z_t = N/(2μL) + (1 − μ/(2L))^t (Y0 − N/(2μL)),
/// valid for 0 ≤ t ≤ W.
pub fn prewindow_z(p: &ProblemParams, t: u64) -> Result<f64> {
    let w = window(p)?;
    if t > w {
        return Err(Error::OutOfRange {
            t,
            reason: format!("closed form only valid up to W = {w}"),
        });
    }
    let floor = p.n / (2.0 * p.mu * p.l);
    Ok(floor + (1.0 - p.mu / (2.0 * p.l)).powi(t as i32) * (p.y0 - floor))
}

/// The minimized bound sequence together with the steps that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct OptimalPlan {
    pub params: ProblemParams,
    /// Cap-phase length; `None` when N = 0 keeps the cap optimal forever.
    pub window: Option<u64>,
    /// Z_0 … Z_{t_max}.
    pub z: Trace,
    /// η_0 … η_{t_max}.
    pub eta: Trace,
}

impl OptimalPlan {
    /// Runs the exact recursion with per-step optimal steps for `t_max` steps.
    /// Both traces have `t_max + 1` points.
    pub fn compute(p: &ProblemParams, t_max: u64) -> Result<OptimalPlan> {
        let p = p.validated()?;
        let win = match window(&p) {
            Ok(w) => Some(w),
            Err(Error::InfiniteWindow) => None,
            Err(e) => return Err(e),
        };
        let mut z_trace = Trace::new("Z_t");
        let mut eta_trace = Trace::new("eta_t");
        let mut z = p.y0;
        for t in 0..=t_max {
            let eta = optimal_eta(&p, z);
            z_trace.push(t, z);
            eta_trace.push(t, eta);
            z = (1.0 - p.mu * eta) * z + eta * eta * p.n;
        }
        Ok(OptimalPlan {
            params: p,
            window: win,
            z: z_trace,
            eta: eta_trace,
        })
    }

    pub fn z_at(&self, t: u64) -> Option<f64> {
        self.z.value_at(t)
    }
}

/// Tight two-sided bounds on Z_t for t ≥ W, anchored at the actual Z_W:
///
/// upper = (4N/μ²) / ((t−W) + c),
/// lower = (4N/μ²) / ((t−W) + c + ln(t−W+c) − ln c),   c = 4N/(μ²·z_W).
///
/// The upper bound is exact (up to floating point). The lower bound replaces
/// a harmonic sum by its integral and can exceed the true iterate by
/// O(1/c²) relative at moderate t−W, so it is a faithful evaluation of the
/// closed form rather than a certified bound; it becomes exact as c → ∞
/// (μ/L → 0) and as t → ∞. Both sides reduce to z_W exactly at t = W.
pub fn tight_bounds(p: &ProblemParams, w: u64, z_w: f64, t: u64) -> Result<(f64, f64)> {
    if t < w {
        return Err(Error::OutOfRange {
            t,
            reason: format!("tight bounds require t ≥ W = {w}"),
        });
    }
    debug_assert!(z_w > 0.0 && z_w <= p.n / (p.mu * p.l) * (1.0 + 1e-12));
    let a = 4.0 * p.n / (p.mu * p.mu);
    let c = a / z_w;
    let dt = (t - w) as f64;
    let upper = a / (dt + c);
    let lower = a / (dt + c + (dt + c).ln() - c.ln());
    Ok((lower, upper))
}

/// Weakened bounds on Z_t that depend on the params only through
/// ω = max{N/(μLY0), 1}:
///
/// upper = (4N/μ) / (μt − 2L·ln(2ωμLY0/N − 1) + 4Lω),
/// lower = (4N/μ) / (μ(t + ln(tμ/(4Lω) + 1)) + 8Lω).
///
/// Derived for μ/(2L) small; both formulas stay evaluable outside that
/// regime. Errors when the upper bound's denominator is not positive.
pub fn weak_bounds(p: &ProblemParams, t: u64) -> Result<(f64, f64)> {
    let omega = p.omega();
    let tf = t as f64;
    let scale = 4.0 * p.n / p.mu;
    let up_den = p.mu * tf - 2.0 * p.l * (2.0 * omega * p.mu * p.l * p.y0 / p.n - 1.0).ln()
        + 4.0 * p.l * omega;
    if up_den <= 0.0 {
        return Err(Error::BelowValidity { t });
    }
    let upper = scale / up_den;
    let lower =
        scale / (p.mu * (tf + (tf * p.mu / (4.0 * p.l * omega) + 1.0).ln()) + 8.0 * p.l * omega);
    Ok((lower, upper))
}

/// Convergence rate of the greedy oracle recursion Y_{t+1} = Y_t − μ²Y_t²/(4N):
/// 4N/(μ²(t+1)). Even with exact knowledge of Y_t at every step, the one-step
/// greedy strategy provably achieves no better order than this.
pub fn greedy_oracle_bound(p: &ProblemParams, t: u64) -> f64 {
    4.0 * p.n / (p.mu * p.mu * (t as f64 + 1.0))
}

/// Start value for the greedy oracle recursion: Y0, clamped just below
/// 4N/μ² when Y0 violates the u_1 > 1 condition the bound's proof needs.
pub fn greedy_oracle_start(p: &ProblemParams) -> f64 {
    let cap = 4.0 * p.n / (p.mu * p.mu);
    if p.y0 >= cap {
        cap * (1.0 - 1e-9)
    } else {
        p.y0
    }
}
