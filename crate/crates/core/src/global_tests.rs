//! Classical global-null combination tests.
//!
//! Every test here is permutation invariant bit-for-bit: inputs are sorted
//! before any floating point accumulation.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{binom_pmf, chisq_sf, gamma_q};
use crate::error::{domain, Error, Result};
use crate::pvalue_models::{clamp_for_log, P_FLOOR};
use crate::rng::{replicate_rng, stream};

/// A nonempty vector of p-values with optional labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueVector {
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl PValueVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(domain("p-value vector must be nonempty"));
        }
        if let Some((i, p)) = values.iter().enumerate().find(|(_, p)| !(**p >= 0.0 && **p <= 1.0)) {
            return Err(domain(format!("p-value #{} = {p} is outside [0, 1]", i + 1)));
        }
        Ok(PValueVector { values, labels: None })
    }

    pub fn with_labels(values: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != values.len() {
            return Err(domain(format!("{} labels for {} p-values", labels.len(), values.len())));
        }
        let mut pv = PValueVector::new(values)?;
        pv.labels = Some(labels);
        Ok(pv)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalMethod {
    Bonferroni,
    Sidak,
    Simes,
    Fisher,
    TruncatedProduct,
    HigherCriticism,
}

impl GlobalMethod {
    pub const ALL: [GlobalMethod; 6] = [
        GlobalMethod::Bonferroni,
        GlobalMethod::Sidak,
        GlobalMethod::Simes,
        GlobalMethod::Fisher,
        GlobalMethod::TruncatedProduct,
        GlobalMethod::HigherCriticism,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GlobalMethod::Bonferroni => "bonferroni",
            GlobalMethod::Sidak => "sidak",
            GlobalMethod::Simes => "simes",
            GlobalMethod::Fisher => "fisher",
            GlobalMethod::TruncatedProduct => "truncated_product",
            GlobalMethod::HigherCriticism => "higher_criticism",
        }
    }
}

impl fmt::Display for GlobalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GlobalMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "bonferroni" | "bonf" => Ok(GlobalMethod::Bonferroni),
            "sidak" => Ok(GlobalMethod::Sidak),
            "simes" => Ok(GlobalMethod::Simes),
            "fisher" => Ok(GlobalMethod::Fisher),
            "truncated_product" | "truncatedp" | "tp" => Ok(GlobalMethod::TruncatedProduct),
            "higher_criticism" | "hc" | "tukey" => Ok(GlobalMethod::HigherCriticism),
            other => Err(domain(format!("unknown method '{other}'"))),
        }
    }
}

/// Tuning knobs shared by the combination tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestOptions {
    /// Truncation point of the truncated product.
    pub trunc: f64,
    /// Upper end of the higher-criticism search range.
    pub q_max: f64,
    /// Null replicates used to calibrate higher criticism.
    pub mc_draws: usize,
    pub seed: u64,
    /// Evaluate higher criticism on the grid {h, 2h, ...} ≤ q_max instead of
    /// at the order statistics.
    pub hc_grid_step: Option<f64>,
}

impl Default for TestOptions {
    fn default() -> Self {
        TestOptions {
            trunc: 0.5,
            q_max: 0.5,
            mc_draws: 10_000,
            seed: 0,
            hc_grid_step: None,
        }
    }
}

impl TestOptions {
    pub fn validate(&self, method: GlobalMethod) -> Result<()> {
        match method {
            GlobalMethod::TruncatedProduct if !(self.trunc > 0.0 && self.trunc <= 1.0) => {
                Err(domain(format!("trunc must lie in (0, 1], got {}", self.trunc)))
            }
            GlobalMethod::HigherCriticism if !(self.q_max > 0.0 && self.q_max < 1.0) => {
                Err(domain(format!("q_max must lie in (0, 1), got {}", self.q_max)))
            }
            GlobalMethod::HigherCriticism if self.mc_draws < 1000 => {
                Err(domain(format!("mc_draws must be >= 1000, got {}", self.mc_draws)))
            }
            GlobalMethod::HigherCriticism
                if self.hc_grid_step.is_some_and(|h| !(h > 0.0 && h <= self.q_max)) =>
            {
                Err(domain(format!(
                    "hc_grid_step must lie in (0, q_max], got {}",
                    self.hc_grid_step.unwrap_or_default()
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Output of a combination test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedResult {
    pub method: GlobalMethod,
    pub p_combined: f64,
    /// p_min (Bonferroni, Šidák), min n·p_(i)/i (Simes), T (Fisher),
    /// T′ = −2 log W (truncated product) or HC* (higher criticism).
    pub statistic: f64,
    pub n_used: usize,
    pub tau: f64,
    pub mc_draws: usize,
    /// Some p-value of 0 was raised to the log floor.
    #[serde(default)]
    pub clamped: bool,
}

impl CombinedResult {
    fn new(method: GlobalMethod, p_combined: f64, statistic: f64, n_used: usize) -> Self {
        CombinedResult {
            method,
            p_combined: p_combined.clamp(0.0, 1.0),
            statistic,
            n_used,
            tau: 1.0,
            mc_draws: 0,
            clamped: false,
        }
    }

    /// Result for an empty input: nothing to combine, p = 1.
    pub(crate) fn empty(method: GlobalMethod) -> Self {
        let statistic = match method {
            GlobalMethod::HigherCriticism => f64::NEG_INFINITY,
            GlobalMethod::Fisher | GlobalMethod::TruncatedProduct => 0.0,
            _ => 1.0,
        };
        CombinedResult::new(method, 1.0, statistic, 0)
    }
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Runs `method` on a slice of p-values. An empty slice yields p = 1.
pub fn combine(method: GlobalMethod, values: &[f64], opts: &TestOptions) -> Result<CombinedResult> {
    opts.validate(method)?;
    if values.is_empty() {
        return Ok(CombinedResult::empty(method));
    }
    let s = sorted(values);
    Ok(match method {
        GlobalMethod::Bonferroni => bonferroni_sorted(&s),
        GlobalMethod::Sidak => sidak_sorted(&s),
        GlobalMethod::Simes => simes_sorted(&s),
        GlobalMethod::Fisher => fisher_sorted(&s),
        GlobalMethod::TruncatedProduct => truncated_product_sorted(&s, opts.trunc),
        GlobalMethod::HigherCriticism => higher_criticism_sorted(&s, HcRange::of(opts), opts.mc_draws, opts.seed),
    })
}

fn bonferroni_sorted(s: &[f64]) -> CombinedResult {
    let p_min = s[0];
    CombinedResult::new(GlobalMethod::Bonferroni, (s.len() as f64 * p_min).min(1.0), p_min, s.len())
}

fn sidak_sorted(s: &[f64]) -> CombinedResult {
    let p_min = s[0];
    let n = s.len() as f64;
    let p = if p_min >= 1.0 { 1.0 } else { -(n * (-p_min).ln_1p()).exp_m1() };
    CombinedResult::new(GlobalMethod::Sidak, p, p_min, s.len())
}

fn simes_sorted(s: &[f64]) -> CombinedResult {
    let n = s.len() as f64;
    let stat = s
        .iter()
        .enumerate()
        .map(|(i, &p)| n * p / (i + 1) as f64)
        .fold(f64::INFINITY, f64::min);
    CombinedResult::new(GlobalMethod::Simes, stat.min(1.0), stat, s.len())
}

fn fisher_sorted(s: &[f64]) -> CombinedResult {
    let mut clamped = false;
    let mut t = 0.0;
    for &p in s {
        let (p, c) = clamp_for_log(p);
        clamped |= c;
        t -= 2.0 * p.ln();
    }
    let t = t.max(0.0);
    let p = chisq_sf(t, 2 * s.len() as u32).expect("df >= 2");
    let mut r = CombinedResult::new(GlobalMethod::Fisher, p, t, s.len());
    r.clamped = clamped;
    r
}

fn truncated_product_sorted(s: &[f64], trunc: f64) -> CombinedResult {
    let mut clamped = false;
    let mut log_w = 0.0;
    for &p in s.iter().take_while(|&&p| p <= trunc) {
        let (p, c) = clamp_for_log(p);
        clamped |= c;
        log_w += p.ln();
    }
    let selected = s.iter().take_while(|&&p| p <= trunc).count();
    let p = if selected == 0 {
        1.0
    } else {
        truncated_product_null_cdf(log_w, s.len(), trunc)
    };
    let mut r = CombinedResult::new(GlobalMethod::TruncatedProduct, p, -2.0 * log_w, s.len());
    r.clamped = clamped;
    r
}

/// P(W ≤ w) for the truncated product of `total` iid uniforms at `trunc`,
/// given ln w.
///
/// With k uniforms below the truncation point, −ln(W/t^k) ~ Gamma(k, 1), so
/// P(W ≤ w) = Σ_k Bin(k; L, t) · Q(k, k ln t − ln w), with Q ≡ 1 once
/// w > t^k. This is the Zaykin et al. closed form with the inner Poisson sum
/// written as a regularized gamma tail.
pub fn truncated_product_null_cdf(log_w: f64, total: usize, trunc: f64) -> f64 {
    if log_w >= 0.0 {
        return 1.0;
    }
    let ln_t = trunc.ln();
    let mut p = 0.0;
    for k in 1..=total as u64 {
        let weight = binom_pmf(k, total as u64, trunc);
        if weight == 0.0 {
            continue;
        }
        let shift = k as f64 * ln_t - log_w;
        p += weight * if shift > 0.0 { gamma_q(k as f64, shift) } else { 1.0 };
    }
    p.min(1.0)
}

/// Where the higher-criticism supremum is taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HcRange {
    /// Order statistics p_(i) ≤ q_max.
    OrderStats { q_max: f64 },
    /// Fixed points step, 2·step, ... ≤ q_max.
    Grid { step: f64, q_max: f64 },
}

impl HcRange {
    pub fn of(opts: &TestOptions) -> Self {
        match opts.hc_grid_step {
            Some(step) => HcRange::Grid { step, q_max: opts.q_max },
            None => HcRange::OrderStats { q_max: opts.q_max },
        }
    }

    pub fn statistic(self, s: &[f64]) -> f64 {
        match self {
            HcRange::OrderStats { q_max } => hc_statistic_sorted(s, q_max),
            HcRange::Grid { step, q_max } => hc_statistic_grid(s, step, q_max),
        }
    }

    fn key(self) -> (u64, u64) {
        match self {
            HcRange::OrderStats { q_max } => (q_max.to_bits(), 0),
            HcRange::Grid { step, q_max } => (q_max.to_bits(), step.to_bits()),
        }
    }
}

fn hc_term(f: f64, q: f64, n: f64) -> f64 {
    (f - q) / (q * (1.0 - q) / n).sqrt()
}

/// HC* = max over q ∈ {p_(i) ≤ q_max} of (F̂(q) − q)/√(q(1−q)/n) for sorted
/// input; −∞ when no order statistic is ≤ q_max.
pub fn hc_statistic_sorted(s: &[f64], q_max: f64) -> f64 {
    let n = s.len() as f64;
    let mut best = f64::NEG_INFINITY;
    for (i, &p) in s.iter().enumerate() {
        if p > q_max {
            break;
        }
        if i + 1 < s.len() && s[i + 1] == p {
            // ties: F̂ counts all of them at q = p
            continue;
        }
        best = best.max(hc_term((i + 1) as f64 / n, p.max(P_FLOOR), n));
    }
    best
}

/// Same standardized excess, evaluated at q = k·step for k = 1, 2, ... while
/// q ≤ q_max.
pub fn hc_statistic_grid(s: &[f64], step: f64, q_max: f64) -> f64 {
    let n = s.len() as f64;
    (1..)
        .map(|k| k as f64 * step)
        .take_while(|&q| q <= q_max + 1e-12)
        .map(|q| hc_term(s.partition_point(|&p| p <= q) as f64 / n, q, n))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn higher_criticism_sorted(s: &[f64], range: HcRange, draws: usize, seed: u64) -> CombinedResult {
    let stat = range.statistic(s);
    let p = if stat == f64::NEG_INFINITY {
        1.0
    } else {
        hc_null_table(s.len(), range, draws, seed).p_value(stat)
    };
    let mut r = CombinedResult::new(GlobalMethod::HigherCriticism, p, stat, s.len());
    r.mc_draws = draws;
    r
}

/// Sorted HC* values of `draws` null replicates of `m` iid uniforms.
#[derive(Debug)]
pub struct HcNullTable {
    pub m: usize,
    pub range: HcRange,
    pub seed: u64,
    stats: Vec<f64>,
}

impl HcNullTable {
    pub fn build(m: usize, range: HcRange, draws: usize, seed: u64) -> Self {
        let draw = |r: u64| {
            let mut rng = replicate_rng(seed, r, stream::HC_NULL);
            let mut u: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            u.sort_by(f64::total_cmp);
            range.statistic(&u)
        };
        // Inside a rayon task another task may block on this table's cache
        // slot; building serially keeps this thread from stealing it.
        let mut stats: Vec<f64> = if rayon::current_thread_index().is_some() {
            (0..draws as u64).map(draw).collect()
        } else {
            (0..draws as u64).into_par_iter().map(draw).collect()
        };
        stats.sort_by(f64::total_cmp);
        HcNullTable { m, range, seed, stats }
    }

    pub fn draws(&self) -> usize {
        self.stats.len()
    }

    /// (1 + #{null ≥ observed}) / (1 + draws).
    pub fn p_value(&self, observed: f64) -> f64 {
        let below = self.stats.partition_point(|&x| x < observed);
        let at_least = self.stats.len() - below;
        (1 + at_least) as f64 / (1 + self.stats.len()) as f64
    }
}

type HcKey = (usize, (u64, u64), usize, u64);
type HcSlot = Arc<OnceLock<Arc<HcNullTable>>>;

/// Process-wide calibration cache, one table per (m, range, draws, seed).
pub fn hc_null_table(m: usize, range: HcRange, draws: usize, seed: u64) -> Arc<HcNullTable> {
    static CACHE: OnceLock<Mutex<HashMap<HcKey, HcSlot>>> = OnceLock::new();
    let key = (m, range.key(), draws, seed);
    let slot = {
        let mut map = CACHE.get_or_init(Default::default).lock().unwrap();
        map.entry(key).or_default().clone()
    };
    slot.get_or_init(|| Arc::new(HcNullTable::build(m, range, draws, seed))).clone()
}

pub fn bonferroni(pv: &PValueVector) -> CombinedResult {
    bonferroni_sorted(&sorted(pv.values()))
}

pub fn sidak(pv: &PValueVector) -> CombinedResult {
    sidak_sorted(&sorted(pv.values()))
}

pub fn simes(pv: &PValueVector) -> CombinedResult {
    simes_sorted(&sorted(pv.values()))
}

pub fn fisher(pv: &PValueVector) -> CombinedResult {
    fisher_sorted(&sorted(pv.values()))
}

pub fn truncated_product(pv: &PValueVector, trunc: f64) -> Result<CombinedResult> {
    combine(GlobalMethod::TruncatedProduct, pv.values(), &TestOptions { trunc, ..Default::default() })
}

pub fn higher_criticism(pv: &PValueVector, q_max: f64, mc_draws: usize, seed: u64) -> Result<CombinedResult> {
    let opts = TestOptions {
        q_max,
        mc_draws,
        seed,
        ..Default::default()
    };
    combine(GlobalMethod::HigherCriticism, pv.values(), &opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn table1() -> PValueVector {
        let mut v = vec![0.001, 0.001];
        v.extend(std::iter::repeat_n(1.0, 98));
        PValueVector::new(v).unwrap()
    }

    fn pv(v: &[f64]) -> PValueVector {
        PValueVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn vector_validation() {
        assert!(PValueVector::new(vec![]).is_err());
        assert!(PValueVector::new(vec![0.5, 1.2]).is_err());
        assert!(PValueVector::new(vec![f64::NAN]).is_err());
        assert!(PValueVector::with_labels(vec![0.1], vec![]).is_err());
    }

    #[test]
    fn bonferroni_examples() {
        assert_eq!(bonferroni(&table1()).p_combined, 0.1);
        assert_eq!(bonferroni(&pv(&[0.37])).p_combined, 0.37);
        assert!((bonferroni(&pv(&[0.3, 0.4])).p_combined - 0.6).abs() < 1e-15);
        assert_eq!(bonferroni(&pv(&[0.7, 0.9])).p_combined, 1.0);
    }

    #[test]
    fn sidak_examples() {
        assert!((sidak(&pv(&[0.37])).p_combined - 0.37).abs() < 1e-15);
        let mut v = vec![0.001];
        v.extend(std::iter::repeat_n(0.5, 99));
        assert!((sidak(&pv(&v)).p_combined - 0.09521).abs() < 1e-5);
        assert_eq!(sidak(&pv(&[0.0, 0.4])).p_combined, 0.0);
    }

    #[test]
    fn simes_examples() {
        assert!((simes(&pv(&[0.01, 0.04])).p_combined - 0.02).abs() < 1e-15);
        assert_eq!(simes(&pv(&[0.42])).p_combined, 0.42);
    }

    #[test]
    fn fisher_examples() {
        assert!(fisher(&table1()).p_combined >= 0.999);
        for n in [1usize, 3, 10] {
            let r = fisher(&pv(&vec![(-0.5f64).exp(); n]));
            assert!((r.statistic - n as f64).abs() < 1e-12);
            assert_eq!(r.p_combined, chisq_sf(r.statistic, 2 * n as u32).unwrap());
        }
        let r = fisher(&pv(&[0.002, 0.002]));
        assert!((r.statistic - 24.8584).abs() < 1e-4);
        assert!((r.p_combined / 5.4e-5 - 1.0).abs() < 0.02);
    }

    #[test]
    fn fisher_clamps_zero() {
        let r = fisher(&pv(&[0.0, 0.5]));
        assert!(r.clamped);
        assert!(r.p_combined.is_finite() && r.p_combined < 1e-290);
    }

    #[test]
    fn truncated_product_examples() {
        // single uniform below the truncation point
        for w in [0.01, 0.2, 0.49] {
            let r = truncated_product(&pv(&[w]), 0.5).unwrap();
            assert!((r.p_combined - w).abs() < 1e-14);
        }
        let cdf = truncated_product_null_cdf(4e-6f64.ln(), 2, 0.5);
        assert!((cdf / 5.22e-5 - 1.0).abs() < 0.01, "{cdf}");
        let r = truncated_product(&table1(), 0.5).unwrap();
        assert!((r.p_combined - 0.999).abs() <= 0.002, "{}", r.p_combined);
        // nothing below the truncation point
        assert_eq!(truncated_product(&pv(&[0.8, 0.9]), 0.5).unwrap().p_combined, 1.0);
        assert!(truncated_product(&pv(&[0.8]), 0.0).is_err());
    }

    #[test]
    fn truncated_product_at_one_is_fisher() {
        let v = pv(&[0.01, 0.2, 0.6, 0.9]);
        let tp = truncated_product(&v, 1.0).unwrap().p_combined;
        let f = fisher(&v).p_combined;
        assert!((tp - f).abs() < 1e-12);
    }

    #[test]
    fn truncated_product_ties_included() {
        let r = truncated_product(&pv(&[0.5, 0.9]), 0.5).unwrap();
        assert!((r.statistic + 2.0 * 0.5f64.ln()).abs() < 1e-15);
    }

    /// Closed form vs simulation of the null product.
    #[test]
    fn truncated_product_closed_form_vs_monte_carlo() {
        let draws = 200_000u64;
        for (n, trunc, w) in [(2usize, 0.5, 0.01), (5, 0.05, 1e-3), (10, 0.5, 1e-4), (5, 0.5, 0.02)] {
            let lw = f64::ln(w);
            let mut rng = replicate_rng(42, n as u64, 0);
            let hits = (0..draws)
                .filter(|_| {
                    let mut s = 0.0;
                    let mut any = false;
                    for _ in 0..n {
                        let u: f64 = rng.random();
                        if u <= trunc {
                            s += u.ln();
                            any = true;
                        }
                    }
                    any && s <= lw
                })
                .count();
            let mc = hits as f64 / draws as f64;
            let exact = truncated_product_null_cdf(lw, n, trunc);
            assert!((mc - exact).abs() < 0.005, "n {n} trunc {trunc}: mc {mc} exact {exact}");
        }
    }

    #[test]
    fn hc_fixture_statistic() {
        let s = sorted(&[0.01, 0.2, 0.3, 0.5, 0.9]);
        // brute force over every candidate q
        let n = 5.0;
        let brute = s
            .iter()
            .filter(|&&q| q <= 0.5)
            .map(|&q| {
                let frac = s.iter().filter(|&&p| p <= q).count() as f64 / n;
                (frac - q) / (q * (1.0 - q) / n).sqrt()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((brute - 4.270).abs() < 1e-3);
        assert!((hc_statistic_sorted(&s, 0.5) - brute).abs() < 1e-12);
    }

    #[test]
    fn hc_empty_range_gives_one() {
        let r = higher_criticism(&pv(&[0.7, 0.8, 0.95]), 0.5, 1000, 1).unwrap();
        assert_eq!(r.p_combined, 1.0);
        assert_eq!(r.statistic, f64::NEG_INFINITY);
        assert!(higher_criticism(&pv(&[0.1]), 0.5, 10, 1).is_err());
        assert!(higher_criticism(&pv(&[0.1]), 1.0, 1000, 1).is_err());
    }

    #[test]
    fn hc_is_seed_deterministic() {
        let v = pv(&[0.001, 0.02, 0.3, 0.4, 0.6, 0.7, 0.8]);
        let a = higher_criticism(&v, 0.5, 2000, 3).unwrap();
        let b = HcNullTable::build(7, HcRange::OrderStats { q_max: 0.5 }, 2000, 3).p_value(a.statistic);
        assert_eq!(a.p_combined, b);
        assert!(a.p_combined > 0.0 && a.p_combined < 0.2);
    }

    fn method_p(m: GlobalMethod, v: &[f64]) -> f64 {
        let opts = TestOptions {
            mc_draws: 1000,
            ..Default::default()
        };
        combine(m, v, &opts).unwrap().p_combined
    }

    const ANALYTIC: [GlobalMethod; 5] = [
        GlobalMethod::Bonferroni,
        GlobalMethod::Sidak,
        GlobalMethod::Simes,
        GlobalMethod::Fisher,
        GlobalMethod::TruncatedProduct,
    ];

    proptest! {
        #[test]
        fn combined_in_unit_interval(v in prop::collection::vec(0.0f64..=1.0, 1..40)) {
            for m in GlobalMethod::ALL {
                let p = method_p(m, &v);
                prop_assert!((0.0..=1.0).contains(&p), "{m}: {p}");
            }
        }

        #[test]
        fn simes_never_exceeds_bonferroni(v in prop::collection::vec(0.0f64..=1.0, 1..60)) {
            prop_assert!(method_p(GlobalMethod::Simes, &v) <= method_p(GlobalMethod::Bonferroni, &v));
        }

        #[test]
        fn monotone_in_each_p(
            v in prop::collection::vec(0.0f64..=1.0, 1..30),
            idx in any::<prop::sample::Index>(),
            shrink in 0.0f64..1.0,
        ) {
            let i = idx.index(v.len());
            let mut w = v.clone();
            w[i] *= shrink;
            for m in ANALYTIC {
                prop_assert!(method_p(m, &w) <= method_p(m, &v), "{m}");
            }
        }

        #[test]
        fn permutation_invariant(v in prop::collection::vec(0.0f64..=1.0, 1..30).prop_shuffle()) {
            let mut sorted_v = v.clone();
            sorted_v.sort_by(f64::total_cmp);
            for m in GlobalMethod::ALL {
                prop_assert_eq!(method_p(m, &v), method_p(m, &sorted_v));
            }
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in GlobalMethod::ALL {
            assert_eq!(m.name().parse::<GlobalMethod>().unwrap(), m);
        }
        assert_eq!("tukey".parse::<GlobalMethod>().unwrap(), GlobalMethod::HigherCriticism);
        assert!("nope".parse::<GlobalMethod>().is_err());
    }
}
