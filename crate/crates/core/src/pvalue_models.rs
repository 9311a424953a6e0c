//! Valid p-values for the normal testing problems, null CDFs of those
//! p-values, and numeric checks of uniform conservativeness.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::distributions::{norm_cdf, norm_quantile, norm_sf};
use crate::error::{domain, Result};

/// Smallest p-value fed to log-based combiners.
pub const P_FLOOR: f64 = 1e-300;

/// Clamp a p-value away from zero; the flag reports whether clamping happened.
pub fn clamp_for_log(p: f64) -> (f64, bool) {
    if p < P_FLOOR {
        (P_FLOOR, true)
    } else {
        (p, false)
    }
}

/// One-sided p-value `1 - Φ(y)` for H0: μ ≤ 0 given a z-score.
pub fn one_sided_p(y: f64) -> f64 {
    norm_sf(y)
}

/// p-value for H0: |μ| ≤ η from X ~ N(μ, σ²), evaluated at the boundary
/// μ = η of the folded-normal family.
pub fn practical_importance_p(x: f64, sigma: f64, eta: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(domain(format!("sigma must be positive, got {sigma}")));
    }
    if !(eta >= 0.0) {
        return Err(domain(format!("eta must be non-negative, got {eta}")));
    }
    let a = x.abs() / sigma;
    let e = eta / sigma;
    Ok((norm_cdf(-(a - e)) + norm_cdf(-(a + e))).min(1.0))
}

/// Two-sided p-value under a variance known only up to `sigma_plus`.
pub fn heteroscedastic_p(y: f64, sigma_plus: f64) -> Result<f64> {
    if !(sigma_plus > 0.0) {
        return Err(domain(format!("sigma_plus must be positive, got {sigma_plus}")));
    }
    Ok((2.0 * norm_cdf(-y.abs() / sigma_plus)).min(1.0))
}

/// The CDF u ↦ P(p ≤ u) of a p-value under some data-generating law.
#[derive(Clone)]
pub struct NullCdf {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    description: String,
}

impl fmt::Debug for NullCdf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NullCdf").field("description", &self.description).finish()
    }
}

impl NullCdf {
    pub fn new(description: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        NullCdf {
            eval: Arc::new(f),
            description: description.into(),
        }
    }

    pub fn evaluate(&self, u: f64) -> f64 {
        (self.eval)(u.clamp(0.0, 1.0))
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// Exact p-values.
    pub fn uniform() -> Self {
        NullCdf::new("uniform", |u| u)
    }

    /// CDF of `1 - Φ(Y)` when Y ~ N(μ, 1): u ↦ 1 − Φ(Φ⁻¹(1 − u) − μ).
    pub fn one_sided_normal(mu: f64) -> Self {
        NullCdf::new(format!("one-sided normal, mu = {mu}"), move |u| {
            if u <= 0.0 {
                return 0.0;
            }
            if u >= 1.0 {
                return 1.0;
            }
            // 1 - u is exact for u >= 1/2; use the symmetric form below that
            let z = if u >= 0.5 {
                norm_quantile(1.0 - u).unwrap()
            } else {
                -norm_quantile(u).unwrap()
            };
            norm_sf(z - mu)
        })
    }

    /// CDF of the heteroscedastic p-value when σ₊/σ = κ: u ↦ 2Φ(κΦ⁻¹(u/2)).
    /// κ = 1 is accepted and gives the identity.
    pub fn heteroscedastic(kappa: f64) -> Result<Self> {
        if !(kappa >= 1.0) || !kappa.is_finite() {
            return Err(domain(format!("kappa must be > 1, got {kappa}")));
        }
        if kappa == 1.0 {
            return Ok(NullCdf::new("heteroscedastic, kappa = 1 (identity)", |u| u));
        }
        Ok(NullCdf::new(format!("heteroscedastic, kappa = {kappa}"), move |u| {
            if u <= 0.0 {
                return 0.0;
            }
            if u >= 1.0 {
                return 1.0;
            }
            (2.0 * norm_cdf(kappa * norm_quantile(0.5 * u).unwrap())).min(1.0)
        }))
    }

    /// CDF of [`practical_importance_p`] (σ = 1, threshold η) when the true
    /// mean is `mu`. Inverts the p-value map by bisection on |x|.
    pub fn practical_importance(mu: f64, eta: f64) -> Result<Self> {
        if !(eta >= 0.0) {
            return Err(domain(format!("eta must be non-negative, got {eta}")));
        }
        Ok(NullCdf::new(format!("practical importance, mu = {mu}, eta = {eta}"), move |u| {
            if u <= 0.0 {
                return 0.0;
            }
            if u >= 1.0 {
                return 1.0;
            }
            let p_of = |a: f64| norm_cdf(-(a - eta)) + norm_cdf(-(a + eta));
            // p is decreasing in |x|; find a with p(a) = u
            let (mut lo, mut hi) = (0.0, eta + 40.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if p_of(mid) > u {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let a = 0.5 * (lo + hi);
            // P(|X| >= a) for X ~ N(mu, 1)
            norm_sf(a - mu) + norm_cdf(-a - mu)
        }))
    }
}

/// Outcome of a grid check of F(τx) ≤ x·F(τ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniformityCheck {
    pub passed: bool,
    /// Largest F(τx) − x·F(τ) found; ≤ 0 means no violation.
    pub max_violation: f64,
    pub worst_x: f64,
    pub worst_tau: f64,
}

const UNIFORMITY_TOLERANCE: f64 = 1e-9;

/// Checks uniform conservativeness F(τx) ≤ x·F(τ) over the grid
/// x, τ ∈ {1/g, 2/g, …, 1}.
pub fn check_uniform_conservative(cdf: &NullCdf, grid_size: usize) -> Result<UniformityCheck> {
    if grid_size < 10 {
        return Err(domain(format!("grid_size must be >= 10, got {grid_size}")));
    }
    let g = grid_size as f64;
    let values: Vec<f64> = (1..=grid_size).map(|j| cdf.evaluate(j as f64 / g)).collect();
    let mut check = UniformityCheck {
        passed: true,
        max_violation: f64::NEG_INFINITY,
        worst_x: f64::NAN,
        worst_tau: f64::NAN,
    };
    for (j, &f_tau) in values.iter().enumerate() {
        let tau = (j + 1) as f64 / g;
        for i in 1..=grid_size {
            let x = i as f64 / g;
            let v = cdf.evaluate(tau * x) - x * f_tau;
            if v > check.max_violation {
                check.max_violation = v;
                check.worst_x = x;
                check.worst_tau = tau;
            }
        }
    }
    check.passed = check.max_violation <= UNIFORMITY_TOLERANCE;
    Ok(check)
}

/// ln of the folded-normal density ratio
/// [φ(x−μ₁)+φ(x+μ₁)] / [φ(x−μ₂)+φ(x+μ₂)].
pub fn folded_normal_log_ratio(x: f64, mu1: f64, mu2: f64) -> f64 {
    let log_folded = |mu: f64| -0.5 * (x - mu) * (x - mu) + (-2.0 * x * mu).exp().ln_1p();
    log_folded(mu1) - log_folded(mu2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotonicityCheck {
    pub passed: bool,
    /// Smallest increment between consecutive grid points.
    pub min_increment: f64,
}

/// Checks that the folded-normal likelihood ratio is nondecreasing on the
/// grid x = step, 2·step, …, x_max (requires μ₁ > μ₂ ≥ 0).
pub fn check_folded_normal_mlr(mu1: f64, mu2: f64, step: f64, x_max: f64) -> Result<MonotonicityCheck> {
    if !(mu1 > mu2 && mu2 >= 0.0) {
        return Err(domain("need mu1 > mu2 >= 0"));
    }
    if !(step > 0.0 && x_max > step) {
        return Err(domain("need 0 < step < x_max"));
    }
    let points = (x_max / step).round() as usize;
    let mut prev = folded_normal_log_ratio(step, mu1, mu2);
    let mut min_increment = f64::INFINITY;
    for i in 2..=points {
        let cur = folded_normal_log_ratio(i as f64 * step, mu1, mu2);
        min_increment = min_increment.min(cur - prev);
        prev = cur;
    }
    Ok(MonotonicityCheck {
        passed: min_increment >= -1e-12,
        min_increment,
    })
}
