//! Continuous-time diagnostics for diminishing schedules: the step density
//! n(t) = μη_t, its integral M(t), the noise functional
//! C(t) = exp(−M(t))·∫₁ᵗ exp(M(x))·n²(x) dx, the convergence-rate bound
//! built from them, the C/n crossing, and comparisons across power-law
//! families.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{log_grid, ProblemParams, Schedule, Trace};
use crate::quad;

const QUAD_TOL: f64 = 1e-10;
const QUAD_BUDGET: usize = 1_000_000;

/// A positive, nonincreasing step density n(t) on [1, ∞), optionally paired
/// with an analytic antiderivative M(t) = ∫₁ᵗ n(x) dx.
#[derive(Clone)]
pub struct ContinuousSchedule {
    n: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    m_closed: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl ContinuousSchedule {
    /// Wraps a raw density; M(t) falls back to adaptive quadrature.
    pub fn from_fn(n: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ContinuousSchedule {
            n: Arc::new(n),
            m_closed: None,
        }
    }

    /// Density with its analytic antiderivative (must satisfy M(1) = 0).
    pub fn with_closed_form(
        n: impl Fn(f64) -> f64 + Send + Sync + 'static,
        m: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ContinuousSchedule {
            n: Arc::new(n),
            m_closed: Some(Arc::new(m)),
        }
    }

    /// n(x) = a/x with M(t) = a·ln t.
    pub fn reciprocal(a: f64) -> Self {
        assert!(a > 0.0);
        Self::with_closed_form(move |x| a / x, move |t| a * t.ln())
    }

    /// n(x) = μ/(K+x)^q for the power-law step family η_t = 1/(K+t)^q.
    pub fn power_law(mu: f64, q: f64, k: f64) -> Self {
        assert!(mu > 0.0 && q > 0.0);
        if (q - 1.0).abs() < 1e-14 {
            Self::with_closed_form(
                move |x| mu / (k + x),
                move |t| mu * ((k + t).ln() - (k + 1.0).ln()),
            )
        } else {
            Self::with_closed_form(
                move |x| mu / (k + x).powf(q),
                move |t| mu * ((k + t).powf(1.0 - q) - (k + 1.0).powf(1.0 - q)) / (1.0 - q),
            )
        }
    }

    /// Density of the parameter-free candidate η_t = 2/(μt + 4L):
    /// n(x) = 2μ/(μx + 4L), M(t) = 2·ln((μt+4L)/(μ+4L)).
    pub fn approx_candidate(p: &ProblemParams) -> Self {
        let (mu, l) = (p.mu, p.l);
        Self::with_closed_form(
            move |x| 2.0 * mu / (mu * x + 4.0 * l),
            move |t| 2.0 * ((mu * t + 4.0 * l).ln() - (mu + 4.0 * l).ln()),
        )
    }

    pub fn n(&self, t: f64) -> f64 {
        (self.n)(t)
    }
}

/// M(t) = ∫₁ᵗ n(x) dx, via the closed form when present, else adaptive
/// quadrature to 1e-10 absolute.
pub fn big_m(s: &ContinuousSchedule, t: f64) -> Result<f64> {
    assert!(t >= 1.0, "M is defined on [1, ∞), got t = {t}");
    match &s.m_closed {
        Some(m) => Ok(m(t)),
        None => quad::integrate(|x| s.n(x), 1.0, t, QUAD_TOL, QUAD_BUDGET),
    }
}

/// C(t) = exp(−M(t))·∫₁ᵗ exp(M(x))·n²(x) dx, evaluated in the log domain as
/// ∫₁ᵗ exp(M(x) − M(t))·n²(x) dx so exp never overflows.
pub fn c_of_t(s: &ContinuousSchedule, t: f64) -> Result<f64> {
    assert!(t >= 1.0);
    if t == 1.0 {
        return Ok(0.0);
    }
    let m_t = big_m(s, t)?;
    match &s.m_closed {
        Some(m) => {
            let m = m.clone();
            let n = s.n.clone();
            quad::integrate(
                move |x| (m(x) - m_t).exp() * n(x) * n(x),
                1.0,
                t,
                QUAD_TOL,
                QUAD_BUDGET,
            )
        }
        None => {
            // exp(M(x) − M(t)) = exp(−∫ₓᵗ n), with the inner integral by quadrature
            let n = s.n.clone();
            let n2 = s.n.clone();
            quad::integrate(
                move |x| {
                    let tail = quad::integrate(|u| n(u), x, t, QUAD_TOL, QUAD_BUDGET)
                        .expect("inner quadrature for M(t) − M(x)");
                    (-tail).exp() * n2(x) * n2(x)
                },
                1.0,
                t,
                QUAD_TOL,
                QUAD_BUDGET,
            )
        }
    }
}

/// Inverse of the strictly increasing M by doubling bracket + bisection.
/// M⁻¹(0) = 1 since M(1) = 0; negative targets are out of range and error.
pub fn m_inverse(s: &ContinuousSchedule, target: f64) -> Result<f64> {
    if target < 0.0 {
        return Err(Error::BoundInapplicable {
            t: 0,
            reason: format!("M⁻¹ argument {target} outside [0, sup M]"),
        });
    }
    if target == 0.0 {
        return Ok(1.0);
    }
    let mut hi = 2.0;
    let mut tries = 0;
    while big_m(s, hi)? < target {
        hi *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(Error::BoundInapplicable {
                t: 0,
                reason: format!("M never reaches {target}"),
            });
        }
    }
    let mut lo = (hi / 2.0).max(1.0);
    if big_m(s, lo)? > target {
        lo = 1.0;
    }
    while hi - lo > 1e-10 * lo.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if big_m(s, mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Upper bound on E‖w_{t+1} − w*‖² for a diminishing schedule with density n:
///
/// N·exp(n(1))·2·n(M⁻¹(ln(n(t+1)/n(1)) + M(t+1)))
///   + exp(−M(t+1))·(exp(M(2))·n(1)²·N + Y0).
///
/// Errors when the M⁻¹ argument is not positive (bound inapplicable at t).
pub fn convergence_rate_bound(s: &ContinuousSchedule, p: &ProblemParams, t: u64) -> Result<f64> {
    assert!(t >= 1);
    let n1 = s.n(1.0);
    let tf = (t + 1) as f64;
    let m_t1 = big_m(s, tf)?;
    let mut arg = (s.n(tf) / n1).ln() + m_t1;
    // n(x) ∝ 1/x makes the two terms cancel analytically; absorb the
    // float residue of that boundary case rather than rejecting it
    if arg < 0.0 && arg > -1e-9 * (1.0 + m_t1.abs()) {
        arg = 0.0;
    }
    if arg < 0.0 {
        return Err(Error::BoundInapplicable {
            t,
            reason: format!("M⁻¹ argument is {arg}"),
        });
    }
    let y = m_inverse(s, arg)?;
    let noise_part = p.n * n1.exp() * 2.0 * s.n(y);
    let transient = (-m_t1).exp() * (big_m(s, 2.0)?.exp() * n1 * n1 * p.n + p.y0);
    Ok(noise_part + transient)
}

/// Locates the unique T ∈ [1, t_max] with C(T) = n(T), by bisection on
/// C − n to 1e-8. Returns `None` when no crossing occurs before t_max.
/// Requires a strictly decreasing density.
pub fn find_crossing(s: &ContinuousSchedule, t_max: f64) -> Result<Option<f64>> {
    assert!(t_max > 1.0);
    debug_assert!({
        // n' < 0, checked by central differences at a few points
        let mut ok = true;
        for &x in &[1.5, 2.0, 5.0, t_max * 0.5] {
            let h = 1e-6 * x;
            if s.n(x + h) - s.n(x - h) >= 0.0 {
                ok = false;
            }
        }
        ok
    });
    let h = |t: f64| -> Result<f64> { Ok(c_of_t(s, t)? - s.n(t)) };
    // C(1) = 0 < n(1), so the left end is always a valid bracket start
    if h(t_max)? <= 0.0 {
        return Ok(None);
    }
    let (mut lo, mut hi) = (1.0, t_max);
    while hi - lo > 1e-8 {
        let mid = 0.5 * (lo + hi);
        if h(mid)? <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Converges,
    Diverges,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Converges => write!(f, "converges"),
            Verdict::Diverges => write!(f, "diverges"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DivergenceReport {
    /// Analytic tail bound ∫ₑ^∞ dx/(x·lnᵏx) = 1/(k−1); infinite for k ≤ 1.
    pub integral_bound: f64,
    /// Σ_{t=3}^{t_max} 1/(t·lnᵏt).
    pub partial_sum: f64,
    pub verdict: Verdict,
    pub note: String,
}

/// Tests Σ 1/(t·lnᵏt) for convergence. For k > 1 the series converges (so a
/// schedule decaying this fast loses the Ση_t = ∞ guarantee); for k ≤ 1 it
/// diverges by comparison with the harmonic-type integral.
pub fn divergence_test(k: f64, t_max: u64) -> DivergenceReport {
    assert!(t_max >= 3);
    let term = |t: f64| 1.0 / (t * t.ln().powf(k));
    let mut partial = 0.0;
    let mut t = 3u64;
    while t <= t_max {
        partial += term(t as f64);
        t += 1;
    }
    if k <= 1.0 {
        return DivergenceReport {
            integral_bound: f64::INFINITY,
            partial_sum: partial,
            verdict: Verdict::Diverges,
            note: "∫ dx/(x·lnᵏx) diverges for k ≤ 1, like the harmonic series".to_string(),
        };
    }
    let bound = 1.0 / (k - 1.0);
    // partial sums are monotone and capped by the first term plus the
    // integral tail from 3 (≤ the tail from e)
    let cap = term(3.0) + bound;
    let verdict = if partial <= cap {
        Verdict::Converges
    } else {
        Verdict::Diverges
    };
    DivergenceReport {
        integral_bound: bound,
        partial_sum: partial,
        verdict,
        note: format!("partial sum ≤ first term + 1/(k−1) = {cap:.6}"),
    }
}

/// Runs the distance recurrence Z_{t+1} = (1 − μη_{q,t})Z_t + η_{q,t}²N for
/// each power-law exponent q, with K chosen so η_0 = 1/(2L). Traces are
/// recorded on a log grid and labelled `q=…`.
pub fn family_compare(p: &ProblemParams, qs: &[f64], t_max: u64) -> Result<Vec<Trace>> {
    let p = p.validated()?;
    let grid = log_grid(t_max, 200);
    let mut out = Vec::with_capacity(qs.len());
    for &q in qs {
        let schedule = Schedule::power_law(q, &p)?;
        let mut stream = schedule.stream(&p);
        let mut trace = Trace::new(format!("q={q}"));
        let mut z = p.y0;
        let mut next = grid.iter().copied().peekable();
        for t in 0..=t_max {
            if next.peek() == Some(&t) {
                trace.push(t, z);
                next.next();
            }
            if t < t_max {
                let eta = stream.next_eta();
                z = (1.0 - p.mu * eta) * z + eta * eta * p.n;
            }
        }
        out.push(trace);
    }
    Ok(out)
}
