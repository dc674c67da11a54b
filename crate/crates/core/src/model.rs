//! Shared domain types: problem parameters, step-size schedules, and traces.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The quadruple (μ, L, N, Y0) that drives every schedule and bound.
///
/// `mu` is the strong-convexity modulus, `l` the gradient-Lipschitz
/// (smoothness) constant, `n` the noise constant 2·E‖∇f(w*;ξ)‖², and `y0`
/// the initial expected squared distance E‖w0 − w*‖².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub mu: f64,
    pub l: f64,
    pub n: f64,
    pub y0: f64,
}

impl ProblemParams {
    pub fn new(mu: f64, l: f64, n: f64, y0: f64) -> Result<Self> {
        Self { mu, l, n, y0 }.validated()
    }

    /// Checks every field invariant and returns the value unchanged.
    ///
    /// Idempotent: validating an already-valid value is the identity.
    pub fn validated(self) -> Result<Self> {
        if !self.mu.is_finite() || self.mu <= 0.0 {
            return Err(Error::invalid_param("mu", "mu must be positive"));
        }
        if !self.l.is_finite() || self.l <= 0.0 {
            return Err(Error::invalid_param("L", "L must be positive"));
        }
        if self.mu > self.l {
            return Err(Error::invalid_param("mu", "mu ≤ L required"));
        }
        if !self.n.is_finite() || self.n < 0.0 {
            return Err(Error::invalid_param("N", "N must be nonnegative"));
        }
        if !self.y0.is_finite() || self.y0 < 0.0 {
            return Err(Error::invalid_param("Y0", "Y0 must be nonnegative"));
        }
        Ok(self)
    }

    /// The step-size cap 1/(2L) under which the distance recurrence is valid.
    pub fn eta_cap(&self) -> f64 {
        1.0 / (2.0 * self.l)
    }

    /// Condition number L/μ.
    pub fn kappa(&self) -> f64 {
        self.l / self.mu
    }

    /// The regime selector ω = max{N/(μLY0), 1}.
    pub fn omega(&self) -> f64 {
        (self.n / (self.mu * self.l * self.y0)).max(1.0)
    }
}

/// A named diminishing step-size family, evaluable at any iteration.
#[derive(Clone)]
pub enum Schedule {
    /// The per-step minimizer of the distance recurrence: η_t = 1/(2L) while
    /// Z_t > N/(μL), then η_t = μZ_t/(2N). Evaluation walks the recursion, so
    /// point queries cost O(t); use [`Schedule::stream`] inside loops.
    Optimal,
    /// The parameter-free candidate η_t = 2/(μt + 4L).
    ApproxCandidate,
    /// η_t = 1/(K + t)^q with q ∈ (0, 1] and K large enough that η_0 ≤ 1/(2L).
    PowerLaw { q: f64, k: f64 },
    /// η_t = 1/(2L) for t ≤ 4L/μ, then η_t = (2t+1)/((t+1)²μ).
    GowerPiecewise,
    /// Arbitrary user-supplied step sizes. Positivity is the caller's
    /// responsibility; the named families above guarantee it.
    Custom(Arc<dyn Fn(u64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Optimal => write!(f, "Optimal"),
            Schedule::ApproxCandidate => write!(f, "ApproxCandidate"),
            Schedule::PowerLaw { q, k } => write!(f, "PowerLaw {{ q: {q}, k: {k} }}"),
            Schedule::GowerPiecewise => write!(f, "GowerPiecewise"),
            Schedule::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Schedule {
    /// Power law with the smallest admissible offset: K = (2L)^(1/q), so that
    /// η_0 = 1/K^q = 1/(2L) exactly.
    pub fn power_law(q: f64, p: &ProblemParams) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::invalid_param("q", "q must lie in (0, 1]"));
        }
        Ok(Schedule::PowerLaw {
            q,
            k: (2.0 * p.l).powf(1.0 / q),
        })
    }

    pub fn validate(&self, p: &ProblemParams) -> Result<()> {
        match *self {
            Schedule::PowerLaw { q, k } => {
                if !(q > 0.0 && q <= 1.0) {
                    return Err(Error::invalid_param("q", "q must lie in (0, 1]"));
                }
                if k < 0.0 || k.powf(q).recip() > p.eta_cap() * (1.0 + 1e-12) {
                    return Err(Error::invalid_param("K", "K too small: η_0 exceeds 1/(2L)"));
                }
                Ok(())
            }
            Schedule::Optimal if p.n == 0.0 && p.y0 > 0.0 => Ok(()), // cap forever, still valid
            _ => Ok(()),
        }
    }

    /// Step size at iteration `t`. For `Optimal` this replays the recursion
    /// from 0, which costs O(t).
    pub fn eta(&self, p: &ProblemParams, t: u64) -> f64 {
        match self {
            Schedule::Optimal => {
                let mut s = EtaStream::new(self, p);
                for _ in 0..t {
                    s.next_eta();
                }
                s.next_eta()
            }
            _ => self.eta_closed(p, t),
        }
    }

    fn eta_closed(&self, p: &ProblemParams, t: u64) -> f64 {
        let tf = t as f64;
        match self {
            Schedule::Optimal => unreachable!("Optimal has no closed form"),
            Schedule::ApproxCandidate => 2.0 / (p.mu * tf + 4.0 * p.l),
            Schedule::PowerLaw { q, k } => (k + tf).powf(*q).recip(),
            Schedule::GowerPiecewise => {
                if tf <= 4.0 * p.l / p.mu {
                    p.eta_cap()
                } else {
                    (2.0 * tf + 1.0) / ((tf + 1.0) * (tf + 1.0) * p.mu)
                }
            }
            Schedule::Custom(f) => f(t),
        }
    }

    /// Sequential evaluator yielding η_0, η_1, … in O(1) amortized per step.
    pub fn stream<'a>(&'a self, p: &'a ProblemParams) -> EtaStream<'a> {
        EtaStream::new(self, p)
    }
}

/// Iterator-style step-size source; tracks the recursion state for
/// [`Schedule::Optimal`] and falls back to closed forms otherwise.
pub struct EtaStream<'a> {
    schedule: &'a Schedule,
    params: &'a ProblemParams,
    t: u64,
    z: f64,
}

impl<'a> EtaStream<'a> {
    fn new(schedule: &'a Schedule, params: &'a ProblemParams) -> Self {
        EtaStream {
            schedule,
            params,
            t: 0,
            z: params.y0,
        }
    }

    /// Step size for the current iteration; advances the stream.
    pub fn next_eta(&mut self) -> f64 {
        let eta = match self.schedule {
            Schedule::Optimal => {
                let p = self.params;
                let eta = if p.n > 0.0 {
                    p.eta_cap().min(p.mu * self.z / (2.0 * p.n))
                } else {
                    p.eta_cap()
                };
                self.z = (1.0 - p.mu * eta) * self.z + eta * eta * p.n;
                eta
            }
            s => s.eta_closed(self.params, self.t),
        };
        self.t += 1;
        eta
    }
}

/// One recorded point of a trace. `stderr` is present only for
/// across-run-averaged Monte Carlo traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: u64,
    pub value: f64,
    pub stderr: Option<f64>,
}

/// An ordered sequence of (t, value) points with strictly increasing t and
/// finite nonnegative values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub label: String,
    pub points: Vec<TracePoint>,
}

impl Trace {
    pub fn new(label: impl Into<String>) -> Self {
        Trace {
            label: label.into(),
            points: Vec::new(),
        }
    }

    /// Appends a point, enforcing the trace invariants.
    pub fn push(&mut self, t: u64, value: f64) {
        self.push_with_stderr(t, value, None);
    }

    pub fn push_with_stderr(&mut self, t: u64, value: f64, stderr: Option<f64>) {
        assert!(
            value.is_finite() && value >= 0.0,
            "trace value must be finite and ≥ 0, got {value}"
        );
        if let Some(last) = self.points.last() {
            assert!(
                t > last.t,
                "trace t must be strictly increasing ({} after {})",
                t,
                last.t
            );
        }
        self.points.push(TracePoint { t, value, stderr });
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Value at an exact iteration index, if recorded.
    pub fn value_at(&self, t: u64) -> Option<f64> {
        self.points
            .binary_search_by_key(&t, |pt| pt.t)
            .ok()
            .map(|i| self.points[i].value)
    }

    /// CSV rendering with columns `t,value,stderr` (stderr blank when absent)
    /// and 17-significant-digit numeric fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value,stderr\n");
        for pt in &self.points {
            match pt.stderr {
                Some(se) => out.push_str(&format!("{},{:.16e},{:.16e}\n", pt.t, pt.value, se)),
                None => out.push_str(&format!("{},{:.16e},\n", pt.t, pt.value)),
            }
        }
        out
    }
}

/// Log-spaced grid of iteration indices in [0, t_max], capped at
/// `points_per_decade` entries per decade; always contains 0, 1 and t_max.
pub fn log_grid(t_max: u64, points_per_decade: u32) -> Vec<u64> {
    let mut grid = vec![0u64];
    if t_max == 0 {
        return grid;
    }
    let ppd = points_per_decade.max(1) as f64;
    let mut k = 0u32;
    loop {
        let t = 10f64.powf(k as f64 / ppd).round() as u64;
        if t > t_max {
            break;
        }
        if *grid.last().unwrap() != t {
            grid.push(t);
        }
        k += 1;
    }
    if *grid.last().unwrap() != t_max {
        grid.push(t_max);
    }
    grid
}
