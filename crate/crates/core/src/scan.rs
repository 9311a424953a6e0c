//! Scan conditional Bonferroni (experimental).
//!
//! Minimizes the conditional Bonferroni p-value over every τ > τ₀ and
//! calibrates the rejection threshold by simulation. The supporting theory
//! is incomplete; treat the calibrated level as an empirical property.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::global_tests::PValueVector;
use crate::rng::{replicate_rng, stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    pub tau0: f64,
    pub alpha: f64,
    pub calib_reps: usize,
    pub seed: u64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            tau0: 0.05,
            alpha: 0.05,
            calib_reps: 10_000,
            seed: 0,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        check_tau0(self.tau0)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.calib_reps < 1000 {
            return Err(Error::Config(format!("calib_reps must be >= 1000, got {}", self.calib_reps)));
        }
        Ok(())
    }
}

fn check_tau0(tau0: f64) -> Result<()> {
    if tau0 > 0.0 && tau0 < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("tau0 must lie in (0, 1), got {tau0}")))
    }
}

/// p_scan = p_min · inf over τ ∈ (τ₀, 1] with S_τ ≠ ∅ of |S_τ|/(τn).
pub fn scan_statistic(pv: &PValueVector, tau0: f64) -> Result<f64> {
    check_tau0(tau0)?;
    let mut s = pv.values().to_vec();
    s.sort_by(f64::total_cmp);
    Ok(scan_sorted(&s, tau0))
}

/// |S_τ|/τ is a right-continuous step count over τ, so on each interval
/// between consecutive distinct values it is smallest just before the next
/// jump. The candidates are therefore the left limit and the closed value
/// at every distinct p-value above τ₀, plus τ = 1.
pub(crate) fn scan_sorted(s: &[f64], tau0: f64) -> f64 {
    let n = s.len() as f64;
    let p_min = s[0];
    let mut best = p_min * (s.len() as f64 / n);
    let mut i = s.partition_point(|&p| p <= tau0);
    while i < s.len() {
        let v = s[i];
        let below = i;
        let mut j = i;
        while j < s.len() && s[j] == v {
            j += 1;
        }
        if below > 0 {
            best = best.min(p_min * (below as f64 / (v * n)));
        }
        best = best.min(p_min * (j as f64 / (v * n)));
        i = j;
    }
    best
}

/// Monte Carlo threshold on n·p_scan with cache per
/// (n, τ₀, α, reps, seed). Reject when n·p_scan < α_scan.
pub fn calibrate_alpha_scan(n: usize, cfg: &ScanConfig) -> Result<f64> {
    cfg.validate()?;
    if n == 0 {
        return Err(domain("n must be positive"));
    }
    type Key = (usize, u64, u64, usize, u64);
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<OnceLock<f64>>>>> = OnceLock::new();
    let key = (n, cfg.tau0.to_bits(), cfg.alpha.to_bits(), cfg.calib_reps, cfg.seed);
    let slot = CACHE.get_or_init(Default::default).lock().unwrap().entry(key).or_default().clone();
    Ok(*slot.get_or_init(|| {
        let mut null = null_scan_draws(n, cfg.tau0, cfg.calib_reps, cfg.seed);
        null.sort_by(f64::total_cmp);
        let k = ((cfg.alpha * cfg.calib_reps as f64).floor() as usize).min(null.len() - 1);
        null[k]
    }))
}

/// n·p_scan for `reps` samples of n iid uniforms.
pub fn null_scan_draws(n: usize, tau0: f64, reps: usize, seed: u64) -> Vec<f64> {
    (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r, stream::SCAN_NULL);
            let mut u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            u.sort_by(f64::total_cmp);
            n as f64 * scan_sorted(&u, tau0)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub p_scan: f64,
    pub n_p_scan: f64,
    pub alpha_scan: f64,
    pub reject: bool,
}

pub fn scan_test(pv: &PValueVector, cfg: &ScanConfig) -> Result<ScanResult> {
    let p_scan = scan_statistic(pv, cfg.tau0)?;
    let alpha_scan = calibrate_alpha_scan(pv.len(), cfg)?;
    let n_p_scan = pv.len() as f64 * p_scan;
    Ok(ScanResult {
        p_scan,
        n_p_scan,
        alpha_scan,
        reject: n_p_scan < alpha_scan,
    })
}

/// sup over τ ∈ (τ₀, 1] of |F̂(τ)/τ − 1| for sorted input.
pub fn max_ratio_deviation(s: &[f64], tau0: f64) -> f64 {
    let n = s.len() as f64;
    let dev = |count: usize, tau: f64| (count as f64 / (n * tau) - 1.0).abs();
    let start = s.partition_point(|&p| p <= tau0);
    let mut worst = dev(start, tau0);
    let mut i = start;
    while i < s.len() {
        let v = s[i];
        let mut j = i;
        while j < s.len() && s[j] == v {
            j += 1;
        }
        worst = worst.max(dev(i, v)).max(dev(j, v));
        i = j;
    }
    worst.max(dev(s.len(), 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleCheck {
    pub empirical: f64,
    pub bound: f64,
    pub mc_se: f64,
    pub reps: usize,
}

impl MartingaleCheck {
    pub fn within_bound(&self) -> bool {
        self.empirical <= self.bound + 3.0 * self.mc_se
    }
}

/// Frequency of sup_{τ>τ₀} |F̂(τ)/τ − 1| > c over uniform samples of size
/// n, next to the maximal-inequality bound 1/(τ₀c²n).
pub fn martingale_check(n: usize, tau0: f64, c: f64, reps: usize, seed: u64) -> Result<MartingaleCheck> {
    check_tau0(tau0)?;
    if !(c > 0.0) || n == 0 || reps == 0 {
        return Err(domain("martingale check needs c > 0, n > 0 and reps > 0"));
    }
    let hits: usize = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r, stream::MARTINGALE);
            let mut u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            u.sort_by(f64::total_cmp);
            usize::from(max_ratio_deviation(&u, tau0) > c)
        })
        .sum();
    let bound = 1.0 / (tau0 * c * c * n as f64);
    let se_p = bound.min(1.0);
    Ok(MartingaleCheck {
        empirical: hits as f64 / reps as f64,
        bound,
        mc_se: (se_p * (1.0 - se_p) / reps as f64).sqrt(),
        reps,
    })
}
