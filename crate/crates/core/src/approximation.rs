//! The parameter-free candidate schedule η'_t = 2/(μt + 4L), its convergence
//! bound Z'_t, and the certificate bounding how far Z'_t can sit above the
//! weak lower bound on the optimal Z_t.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ProblemParams;

/// η'_t = 2/(μt + 4L). Needs neither N nor Y0 and never exceeds 1/(2L).
pub fn eta_prime(p: &ProblemParams, t: u64) -> f64 {
    2.0 / (p.mu * t as f64 + 4.0 * p.l)
}

/// The burn-in horizon T' = (4L/μ)·max{LμY0/N, 1} − 4L/μ after which the
/// Z'_t bound applies. Zero whenever LμY0 ≤ N.
pub fn t_prime(p: &ProblemParams) -> f64 {
    let four_l_over_mu = 4.0 * p.l / p.mu;
    four_l_over_mu * (p.l * p.mu * p.y0 / p.n).max(1.0) - four_l_over_mu
}

/// Z'_t = (16N/μ) / (μ(t − T') + 4L), an upper bound on the expected squared
/// distance under η'_t, valid for t ≥ T'.
pub fn z_prime_bound(p: &ProblemParams, t: u64) -> Result<f64> {
    let threshold = t_prime(p);
    if (t as f64) < threshold {
        return Err(Error::BoundNotYetValid { t, threshold });
    }
    Ok((16.0 * p.n / p.mu) / (p.mu * (t as f64 - threshold) + 4.0 * p.l))
}

/// How far the candidate schedule's guarantee can sit above the weak lower
/// bound on the optimal Z_t, once t passes `t_threshold`:
///
/// ratio_bound = 4·(q + 2·max{0, N/(μLY0) − 1})/(q − 1),
/// t_threshold = ⌈(q−2)·(4L/μ)·max{μLY0/N, 1}⌉.
///
/// As q → ∞ with N/(μLY0) ≤ 1 the bound approaches 4.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RatioCertificate {
    pub q: f64,
    pub t_threshold: u64,
    pub ratio_bound: f64,
    pub omega: f64,
}

pub fn ratio_certificate(p: &ProblemParams, q: f64) -> Result<RatioCertificate> {
    if !q.is_finite() || q < 2.0 {
        return Err(Error::invalid_param(
            "q",
            "ratio certificate requires q ≥ 2",
        ));
    }
    let excess = (p.n / (p.mu * p.l * p.y0) - 1.0).max(0.0);
    let ratio_bound = 4.0 * (q + 2.0 * excess) / (q - 1.0);
    let t_threshold = ((q - 2.0) * (4.0 * p.l / p.mu) * (p.mu * p.l * p.y0 / p.n).max(1.0)).ceil();
    Ok(RatioCertificate {
        q,
        t_threshold: t_threshold as u64,
        ratio_bound,
        omega: p.omega(),
    })
}
