//! Seeded, parallel Monte Carlo studies of power and error rates.
//!
//! Replicate r of a study always draws from `replicate_rng(seed, r, ..)`,
//! and per-replicate outcomes are reduced with integer sums, so results do
//! not depend on the number of worker threads.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::{auto_select_tau_values, AdaptiveConfig};
use crate::conditional::{check_tau, conditional_test_values, select_values, step_rejections, StepProcedure};
use crate::distributions::norm_sf;
use crate::error::{domain, Error, Result};
use crate::global_tests::{GlobalMethod, PValueVector, TestOptions};
use crate::qualint::{gail_simon_from_z, qualint_from_z, TauMode};
use crate::rng::{replicate_rng, stream};

/// Mean vector of the test statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanSpec {
    /// Consecutive runs of (count, mean); the counts must add up to n.
    Blocks(Vec<(usize, f64)>),
    /// n equally spaced values from `from` to `to`, both included.
    Linspace { from: f64, to: f64 },
    Explicit(Vec<f64>),
}

impl MeanSpec {
    pub fn expand(&self, n: usize) -> Result<Vec<f64>> {
        let mu = match self {
            MeanSpec::Blocks(blocks) => blocks
                .iter()
                .flat_map(|&(count, m)| std::iter::repeat_n(m, count))
                .collect::<Vec<_>>(),
            MeanSpec::Linspace { from, to } => match n {
                0 => vec![],
                1 => vec![*from],
                _ => (0..n).map(|i| from + (to - from) * i as f64 / (n - 1) as f64).collect(),
            },
            MeanSpec::Explicit(v) => v.clone(),
        };
        if mu.len() != n {
            return Err(Error::Config(format!("mean spec expands to {} values, expected {n}", mu.len())));
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::Config("means must be finite".into()));
        }
        Ok(mu)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub n: usize,
    pub mu: MeanSpec,
}

impl Scenario {
    pub fn new(name: &str, n: usize, mu: MeanSpec) -> Self {
        Scenario {
            name: name.to_string(),
            n,
            mu,
        }
    }

    fn blocks(name: &str, blocks: &[(usize, f64)]) -> Self {
        let n = blocks.iter().map(|b| b.0).sum();
        Scenario::new(name, n, MeanSpec::Blocks(blocks.to_vec()))
    }
}

/// The five one-sided settings with n = 100.
pub fn global_power_scenarios() -> Vec<Scenario> {
    vec![
        Scenario::blocks("All null", &[(100, 0.0)]),
        Scenario::blocks("1 strong 99 null", &[(1, 4.0), (99, 0.0)]),
        Scenario::blocks("1 strong 99 conservative", &[(1, 4.0), (99, -1.0)]),
        Scenario::blocks("20 weak 80 null", &[(20, 1.0), (80, 0.0)]),
        Scenario::blocks("20 weak 80 conservative", &[(20, 1.0), (80, -1.0)]),
    ]
}

/// Signal detection with 20 strong signals among n = 1000.
pub fn rejection_count_scenarios() -> Vec<Scenario> {
    vec![
        Scenario::blocks("No conservative", &[(20, 4.0), (980, 0.0)]),
        Scenario::blocks("Conservative", &[(20, 4.0), (980, -1.0)]),
    ]
}

/// Qualitative-interaction settings with n = 100.
pub fn qualint_power_scenarios() -> Vec<Scenario> {
    vec![
        Scenario::blocks("1 positive 99 null", &[(1, 4.0), (99, 0.0)]),
        Scenario::blocks("1 positive 1 negative", &[(1, 4.0), (1, -4.0), (98, 0.0)]),
        Scenario::blocks("1 positive 99 negative", &[(1, 4.0), (99, -1.0)]),
        Scenario::blocks("20 positive 80 negative", &[(20, 1.0), (80, -1.0)]),
        Scenario::blocks("50 positive 50 negative", &[(50, 1.0), (50, -1.0)]),
        Scenario::new("Gradual (-1.5 to 2)", 100, MeanSpec::Linspace { from: -1.5, to: 2.0 }),
        Scenario::new("Gradual (-1.5 to 4)", 100, MeanSpec::Linspace { from: -1.5, to: 4.0 }),
    ]
}

/// A test run in a power study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyMethod {
    Global(GlobalMethod),
    /// Šidák on each side of a qualitative-interaction test.
    Ibga,
    /// Gail–Simon likelihood ratio test.
    Lrt,
}

impl StudyMethod {
    pub fn label(&self) -> &'static str {
        match self {
            StudyMethod::Global(GlobalMethod::Bonferroni) => "Bonferroni",
            StudyMethod::Global(GlobalMethod::Sidak) => "Sidak",
            StudyMethod::Global(GlobalMethod::Simes) => "Simes",
            StudyMethod::Global(GlobalMethod::Fisher) => "Fisher",
            StudyMethod::Global(GlobalMethod::HigherCriticism) => "Tukey",
            StudyMethod::Global(GlobalMethod::TruncatedProduct) => "TruncatedP",
            StudyMethod::Ibga => "IBGA",
            StudyMethod::Lrt => "LRT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: StudyMethod,
    pub mode: TauMode,
}

impl MethodSpec {
    pub fn variant_label(&self) -> &'static str {
        match self.mode {
            TauMode::Unconditional => "uncond",
            TauMode::Fixed(_) => "cond",
            TauMode::Adaptive(_) => "adaptive",
        }
    }
}

/// {Bonferroni, Fisher, Tukey, TruncatedP} × {unconditional, τ = 0.5, adaptive}.
pub fn standard_methods() -> Vec<MethodSpec> {
    let tests = [
        GlobalMethod::Bonferroni,
        GlobalMethod::Fisher,
        GlobalMethod::HigherCriticism,
        GlobalMethod::TruncatedProduct,
    ];
    let modes = [
        TauMode::Unconditional,
        TauMode::Fixed(0.5),
        TauMode::Adaptive(AdaptiveConfig::default()),
    ];
    tests
        .iter()
        .flat_map(|&m| {
            modes.iter().map(move |mode| MethodSpec {
                method: StudyMethod::Global(m),
                mode: mode.clone(),
            })
        })
        .collect()
}

/// The standard methods plus unconditional IBGA and LRT.
pub fn qualint_methods() -> Vec<MethodSpec> {
    let mut m = standard_methods();
    for method in [StudyMethod::Ibga, StudyMethod::Lrt] {
        m.push(MethodSpec {
            method,
            mode: TauMode::Unconditional,
        });
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    /// One-sided global null, p_i = 1 − Φ(Y_i).
    Global,
    /// Qualitative interaction on z = Y.
    QualInt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub rho: f64,
    pub reps: usize,
    pub level: f64,
    pub seed: u64,
    pub kind: StudyKind,
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub options: TestOptions,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<Vec<f64>> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be >= 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level must lie in (0, 1), got {}", self.level)));
        }
        check_rho(self.rho, self.scenario.n)?;
        for m in &self.methods {
            if let TauMode::Fixed(t) = m.mode {
                check_tau(t)?;
            }
            if let StudyMethod::Global(g) = m.method {
                self.options.validate(g)?;
            }
        }
        self.scenario.mu.expand(self.scenario.n)
    }
}

fn check_rho(rho: f64, n: usize) -> Result<()> {
    let floor = if n > 1 { -1.0 / (n as f64 - 1.0) } else { 0.0 };
    if rho.is_finite() && rho >= floor - 1e-15 && rho <= 0.99 {
        Ok(())
    } else {
        Err(domain(format!("rho = {rho} must lie in [{floor}, 0.99] for n = {n}")))
    }
}

/// Standard normal noise with common pairwise correlation ρ.
///
/// For ρ ≥ 0 a shared factor is added: √(1−ρ) X_i + √ρ W. For ρ < 0 the
/// sample mean is partly removed, a (X_i − c X̄), with c and a chosen so the
/// correlation is ρ and the variance is 1; at ρ = −1/(n−1) this is the
/// fully centred vector.
pub fn equicorrelated_normals<R: Rng>(rng: &mut R, n: usize, rho: f64) -> Vec<f64> {
    let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    if rho == 0.0 {
        x
    } else if rho > 0.0 {
        let w: f64 = rng.sample(StandardNormal);
        let (a, b) = ((1.0 - rho).sqrt(), rho.sqrt());
        x.into_iter().map(|v| a * v + b * w).collect()
    } else {
        let s = -rho / (1.0 - rho);
        let slack = 1.0 - n as f64 * s;
        // at the lower limit, rounding would otherwise leave c a hair off 1
        let c = if slack < 1e-12 { 1.0 } else { 1.0 - slack.sqrt() };
        let a = 1.0 / (1.0 - s).sqrt();
        let mean = x.iter().sum::<f64>() / n as f64;
        x.into_iter().map(|v| a * (v - c * mean)).collect()
    }
}

/// Test statistics Y for replicate `rep`.
pub fn generate_statistics(cfg: &ScenarioConfig, rep: u64) -> Result<Vec<f64>> {
    let mu = cfg.validate()?;
    Ok(draw_statistics(&mu, cfg.rho, cfg.seed, rep))
}

/// One-sided p-values 1 − Φ(Y) for replicate `rep`.
pub fn generate_pvalues(cfg: &ScenarioConfig, rep: u64) -> Result<PValueVector> {
    let y = generate_statistics(cfg, rep)?;
    PValueVector::new(y.into_iter().map(norm_sf).collect())
}

fn draw_statistics(mu: &[f64], rho: f64, seed: u64, rep: u64) -> Vec<f64> {
    let mut rng = replicate_rng(seed, rep, stream::STATISTICS);
    let noise = equicorrelated_normals(&mut rng, mu.len(), rho);
    mu.iter().zip(noise).map(|(m, e)| m + e).collect()
}

/// Runs `f` on a dedicated pool with `workers` threads, or on the global
/// pool when `workers` is `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub scenario: String,
    pub method: String,
    pub variant: String,
    pub rejections: usize,
    pub reps: usize,
    pub estimate: f64,
    pub mc_se: f64,
}

impl PowerRow {
    fn new(scenario: &str, method: &str, variant: &str, rejections: usize, reps: usize) -> Self {
        let estimate = rejections as f64 / reps as f64;
        PowerRow {
            scenario: scenario.to_string(),
            method: method.to_string(),
            variant: variant.to_string(),
            rejections,
            reps,
            estimate,
            mc_se: (estimate * (1.0 - estimate) / reps as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTable {
    pub title: String,
    pub seed: u64,
    pub level: f64,
    pub rows: Vec<PowerRow>,
}

impl PowerTable {
    pub fn find(&self, scenario: &str, method: &str, variant: &str) -> Option<&PowerRow> {
        self.rows
            .iter()
            .find(|r| r.scenario == scenario && r.method == method && r.variant == variant)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    /// Rows grouped by scenario and method, one column per variant, in %.
    pub fn render_text(&self) -> String {
        let mut variants: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !variants.contains(&r.variant.as_str()) {
                variants.push(&r.variant);
            }
        }
        let mut keys: Vec<(&str, &str)> = Vec::new();
        for r in &self.rows {
            if !keys.contains(&(r.scenario.as_str(), r.method.as_str())) {
                keys.push((&r.scenario, &r.method));
            }
        }
        let sw = keys.iter().map(|k| k.0.len()).max().unwrap_or(0).max(8);
        let mut out = String::new();
        let _ = writeln!(out, "{} (seed {}, level {})", self.title, self.seed, self.level);
        let _ = write!(out, "{:<sw$}  {:<10}", "Setting", "Method");
        for v in &variants {
            let _ = write!(out, " {v:>9}");
        }
        out.push('\n');
        let mut last = "";
        for (s, m) in keys {
            let shown = if s == last { "" } else { s };
            last = s;
            let _ = write!(out, "{shown:<sw$}  {m:<10}");
            for v in &variants {
                match self.find(s, m, v) {
                    Some(r) => {
                        let _ = write!(out, " {:>9.1}", 100.0 * r.estimate);
                    }
                    None => {
                        let _ = write!(out, " {:>9}", "");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

fn study_method_rejects(kind: StudyKind, spec: &MethodSpec, y: &[f64], p: &[f64], level: f64, opts: &TestOptions) -> Result<bool> {
    let pv = match (kind, &spec.method) {
        (StudyKind::Global, StudyMethod::Global(m)) => spec.mode.run(p, *m, opts)?.p_combined,
        (StudyKind::QualInt, StudyMethod::Global(m)) => qualint_from_z(y, *m, &spec.mode, opts)?.p_final,
        (StudyKind::QualInt, StudyMethod::Ibga) => qualint_from_z(y, GlobalMethod::Sidak, &spec.mode, opts)?.p_final,
        (StudyKind::QualInt, StudyMethod::Lrt) => gail_simon_from_z(y).p_value,
        (StudyKind::Global, other) => {
            return Err(Error::Config(format!("{} needs a qualitative-interaction study", other.label())));
        }
    };
    Ok(pv <= level)
}

/// Rejection frequency of every method in one scenario.
pub fn run_power_study(cfg: &ScenarioConfig) -> Result<Vec<PowerRow>> {
    let mu = cfg.validate()?;
    let k = cfg.methods.len();
    let counts = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| -> Result<Vec<usize>> {
            let y = draw_statistics(&mu, cfg.rho, cfg.seed, rep);
            let p: Vec<f64> = y.iter().map(|&v| norm_sf(v)).collect();
            cfg.methods
                .iter()
                .map(|m| study_method_rejects(cfg.kind, m, &y, &p, cfg.level, &cfg.options).map(usize::from))
                .collect()
        })
        .try_reduce(
            || vec![0; k],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    Ok(cfg
        .methods
        .iter()
        .zip(counts)
        .map(|(m, c)| PowerRow::new(&cfg.scenario.name, m.method.label(), m.variant_label(), c, cfg.reps))
        .collect())
}

/// Test settings behind the published power tables: truncation 0.2 for the
/// truncated product and higher criticism on the grid 0.05, 0.10, ..., 0.95.
pub fn table_options(seed: u64) -> TestOptions {
    TestOptions {
        trunc: 0.2,
        q_max: 0.95,
        hc_grid_step: Some(0.05),
        seed,
        ..Default::default()
    }
}

/// Power table over several scenarios sharing the same methods and seed.
pub fn run_power_table(
    title: &str,
    scenarios: &[Scenario],
    kind: StudyKind,
    methods: &[MethodSpec],
    reps: usize,
    seed: u64,
) -> Result<PowerTable> {
    let level = 0.05;
    let options = table_options(seed);
    let mut rows = Vec::new();
    for s in scenarios {
        let cfg = ScenarioConfig {
            scenario: s.clone(),
            rho: 0.0,
            reps,
            level,
            seed,
            kind,
            methods: methods.to_vec(),
            options,
        };
        rows.extend(run_power_study(&cfg)?);
    }
    Ok(PowerTable {
        title: title.to_string(),
        seed,
        level,
        rows,
    })
}

/// Quartiles (linear interpolation) and mean of correct rejections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSummary {
    pub scenario: String,
    pub method: String,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub reps: usize,
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile_linear(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn count_mode_label(mode: &TauMode) -> String {
    match mode {
        TauMode::Unconditional => "Bonferroni".into(),
        TauMode::Fixed(t) => format!("Cond. Bonf. (tau = {t})"),
        TauMode::Adaptive(_) => "Cond. Bonf. (adaptive tau)".into(),
    }
}

/// Per replicate, applies Bonferroni at `level` to the conditional
/// p-values (threshold level/|S_τ|) and counts rejections among the first
/// `signals` hypotheses.
pub fn run_rejection_count_study(
    scenario: &Scenario,
    modes: &[TauMode],
    signals: usize,
    reps: usize,
    level: f64,
    seed: u64,
) -> Result<Vec<CountSummary>> {
    let mu = scenario.mu.expand(scenario.n)?;
    if reps == 0 {
        return Err(Error::Config("reps must be >= 1".into()));
    }
    for m in modes {
        m.check()?;
    }
    let per_rep: Vec<Vec<usize>> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let y = draw_statistics(&mu, 0.0, seed, rep);
            let p: Vec<f64> = y.iter().map(|&v| norm_sf(v)).collect();
            modes
                .iter()
                .map(|mode| {
                    let tau = match mode {
                        TauMode::Unconditional => 1.0,
                        TauMode::Fixed(t) => *t,
                        TauMode::Adaptive(cfg) => auto_select_tau_values(&p, cfg),
                    };
                    let sel = select_values(&p, tau);
                    step_rejections(sel.conditional_values(), StepProcedure::Bonferroni, level)
                        .into_iter()
                        .filter(|&k| sel.indices()[k] < signals)
                        .count()
                })
                .collect()
        })
        .collect();
    Ok(modes
        .iter()
        .enumerate()
        .map(|(j, mode)| {
            let mut c: Vec<f64> = per_rep.iter().map(|r| r[j] as f64).collect();
            c.sort_by(f64::total_cmp);
            CountSummary {
                scenario: scenario.name.clone(),
                method: count_mode_label(mode),
                q1: quantile_linear(&c, 0.25),
                median: quantile_linear(&c, 0.5),
                mean: per_rep.iter().map(|r| r[j]).sum::<usize>() as f64 / reps as f64,
                q3: quantile_linear(&c, 0.75),
                reps,
            }
        })
        .collect())
}

pub fn rejection_count_modes() -> Vec<TauMode> {
    vec![
        TauMode::Unconditional,
        TauMode::Fixed(0.5),
        TauMode::Fixed(0.8),
        TauMode::Adaptive(AdaptiveConfig::default()),
    ]
}

pub fn render_counts_text(rows: &[CountSummary]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:<28} {:>7} {:>7} {:>7} {:>7}",
        "Setting", "Method", "Q1", "Median", "Mean", "Q3"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<16} {:<28} {:>7} {:>7} {:>7.2} {:>7}",
            r.scenario, r.method, r.q1, r.median, r.mean, r.q3
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquicorrRow {
    pub rho: f64,
    pub n: usize,
    pub rejections: usize,
    pub reps: usize,
    pub rate: f64,
    pub mc_se: f64,
}

/// Rejection rate of conditional Bonferroni at τ under an equicorrelated
/// global null, for each ρ.
pub fn equicorr_fwer_experiment(
    rhos: &[f64],
    n: usize,
    reps: usize,
    tau: f64,
    level: f64,
    seed: u64,
) -> Result<Vec<EquicorrRow>> {
    check_tau(tau)?;
    if n == 0 || reps == 0 {
        return Err(Error::Config("n and reps must be positive".into()));
    }
    rhos.iter()
        .map(|&rho| {
            check_rho(rho, n)?;
            let zero = vec![0.0; n];
            let opts = TestOptions::default();
            let rejections: usize = (0..reps as u64)
                .into_par_iter()
                .map(|rep| {
                    let p: Vec<f64> = draw_statistics(&zero, rho, seed, rep).into_iter().map(norm_sf).collect();
                    let r = conditional_test_values(&p, tau, GlobalMethod::Bonferroni, &opts).expect("valid tau");
                    usize::from(r.p_combined <= level)
                })
                .sum();
            let rate = rejections as f64 / reps as f64;
            Ok(EquicorrRow {
                rho,
                n,
                rejections,
                reps,
                rate,
                mc_se: (level * (1.0 - level) / reps as f64).sqrt(),
            })
        })
        .collect()
}
