//! Data-adaptive choice of τ as a backward stopping time.
//!
//! The cutoffs are visited from the largest down. At each cutoff only the
//! p-values strictly above it are visible, and the decision to continue
//! depends on nothing else. That keeps the hidden conditional p-values
//! uniformly distributed under the null, so the final conditional test
//! stays valid.

use serde::{Deserialize, Serialize};

use crate::conditional::conditional_test;
use crate::distributions::{binom_cdf, binom_sf};
use crate::error::{Error, Result};
use crate::global_tests::{combine, CombinedResult, GlobalMethod, PValueVector, TestOptions};

/// Number of equal-width histogram bins over (τ, 1].
pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig", into = "RawConfig")]
pub struct AdaptiveConfig {
    cutoffs: Vec<f64>,
    window: f64,
    test_level: f64,
    rule: StoppingRule,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawConfig {
    cutoffs: Vec<f64>,
    window: f64,
    test_level: f64,
    #[serde(default)]
    rule: StoppingRule,
}

/// How the binomial heuristic decides to move on to the next cutoff.
///
/// All three read only |S_τ| and the window count, both visible at τ.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingRule {
    /// Continue while |S_τ| is significantly below its uniform expectation
    /// n·τ, i.e. binom_cdf(|S_τ|, n, τ) ≤ level: evidence that F(τ)/τ has
    /// dropped below its value 1 at τ = 1.
    #[default]
    HiddenCount,
    /// Continue while the count in [τ, τ + w] is significantly above
    /// n·q·w with q = F̂(τ)/τ: evidence that f(τ)·τ − F(τ) > 0.
    WindowHigh,
    /// Continue while that count is significantly below n·q·w.
    WindowLow,
}

impl std::fmt::Display for StoppingRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StoppingRule::HiddenCount => "hidden_count",
            StoppingRule::WindowHigh => "window_high",
            StoppingRule::WindowLow => "window_low",
        })
    }
}

impl std::str::FromStr for StoppingRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "hidden_count" | "hidden" => Ok(StoppingRule::HiddenCount),
            "window_high" | "high" => Ok(StoppingRule::WindowHigh),
            "window_low" | "low" => Ok(StoppingRule::WindowLow),
            other => Err(Error::Config(format!("unknown stopping rule '{other}'"))),
        }
    }
}

impl TryFrom<RawConfig> for AdaptiveConfig {
    type Error = Error;

    fn try_from(r: RawConfig) -> Result<Self> {
        Ok(AdaptiveConfig::new(r.cutoffs, r.window, r.test_level)?.with_rule(r.rule))
    }
}

impl From<AdaptiveConfig> for RawConfig {
    fn from(c: AdaptiveConfig) -> Self {
        RawConfig {
            cutoffs: c.cutoffs,
            window: c.window,
            test_level: c.test_level,
            rule: c.rule,
        }
    }
}

impl Default for AdaptiveConfig {
    /// Cutoffs 0.90, 0.85, …, 0.10 with a window of 0.1 and level 0.01.
    fn default() -> Self {
        let cutoffs = (0..17).map(|k| (90 - 5 * k) as f64 / 100.0).collect();
        AdaptiveConfig {
            cutoffs,
            window: 0.1,
            test_level: 0.01,
            rule: StoppingRule::default(),
        }
    }
}

impl AdaptiveConfig {
    pub fn new(cutoffs: Vec<f64>, window: f64, test_level: f64) -> Result<Self> {
        let bad = |m: String| Err(Error::Config(m));
        if cutoffs.is_empty() {
            return bad("cutoffs must be nonempty".into());
        }
        if let Some(c) = cutoffs.iter().find(|&&c| !(c > 0.0 && c < 1.0)) {
            return bad(format!("cutoff {c} is outside (0, 1)"));
        }
        if cutoffs.windows(2).any(|w| w[1] >= w[0]) {
            return bad("cutoffs must be strictly decreasing".into());
        }
        if !(window > 0.0 && cutoffs[0] + window <= 1.0 + 1e-12) {
            return bad(format!("window {window} must be positive with cutoffs[0] + window <= 1"));
        }
        if !(test_level > 0.0 && test_level < 1.0) {
            return bad(format!("test level {test_level} is outside (0, 1)"));
        }
        Ok(AdaptiveConfig {
            cutoffs,
            window,
            test_level,
            rule: StoppingRule::default(),
        })
    }

    pub fn with_cutoffs(cutoffs: Vec<f64>) -> Result<Self> {
        let d = AdaptiveConfig::default();
        AdaptiveConfig::new(cutoffs, d.window, d.test_level)
    }

    pub fn cutoffs(&self) -> &[f64] {
        &self.cutoffs
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn test_level(&self) -> f64 {
        self.test_level
    }

    pub fn with_rule(mut self, rule: StoppingRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn rule(&self) -> StoppingRule {
        self.rule
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suggestion {
    Continue,
    Stop,
}

/// Binomial heuristic at cutoff τ from quantities visible above τ.
pub fn heuristic(n: usize, hidden: usize, window_count: usize, tau: f64, cfg: &AdaptiveConfig) -> Suggestion {
    let (n64, level) = (n as u64, cfg.test_level);
    let window_prob = || (hidden as f64 / n as f64 / tau * cfg.window).min(1.0);
    let go = match cfg.rule {
        StoppingRule::HiddenCount => binom_cdf(hidden as u64, n64, tau) <= level,
        StoppingRule::WindowHigh => binom_sf(window_count as u64, n64, window_prob()) <= level,
        StoppingRule::WindowLow => binom_cdf(window_count as u64, n64, window_prob()) <= level,
    };
    if go {
        Suggestion::Continue
    } else {
        Suggestion::Stop
    }
}

/// Everything an analyst may see at one cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedView {
    pub n: usize,
    pub step: usize,
    pub current_tau: f64,
    pub hidden_count: usize,
    /// Values strictly above `current_tau`, ascending.
    pub visible: Vec<f64>,
    pub window_count: usize,
    pub heuristic_suggestion: Suggestion,
}

impl MaskedView {
    fn build(values: &[f64], step: usize, cfg: &AdaptiveConfig) -> Self {
        let tau = cfg.cutoffs[step];
        let mut visible: Vec<f64> = values.iter().copied().filter(|&p| p > tau).collect();
        visible.sort_by(f64::total_cmp);
        MaskedView::from_visible(values.len(), visible, step, cfg)
    }

    /// Builds the view from the visible values alone.
    pub fn from_visible(n: usize, visible: Vec<f64>, step: usize, cfg: &AdaptiveConfig) -> Self {
        let tau = cfg.cutoffs[step];
        let hidden_count = n - visible.len();
        let edge = tau + cfg.window;
        let window_count = visible.iter().filter(|&&p| p <= edge).count();
        MaskedView {
            n,
            step,
            current_tau: tau,
            hidden_count,
            window_count,
            heuristic_suggestion: heuristic(n, hidden_count, window_count, tau, cfg),
            visible,
        }
    }

    /// Counts in `HISTOGRAM_BINS` equal-width bins over (τ, 1].
    pub fn histogram(&self) -> Vec<usize> {
        let mut bins = vec![0usize; HISTOGRAM_BINS];
        let width = (1.0 - self.current_tau) / HISTOGRAM_BINS as f64;
        for &p in &self.visible {
            let k = ((p - self.current_tau) / width).ceil() as usize;
            bins[k.clamp(1, HISTOGRAM_BINS) - 1] += 1;
        }
        bins
    }

    /// Bin edges matching [`MaskedView::histogram`], `HISTOGRAM_BINS + 1` values.
    pub fn bin_edges(&self) -> Vec<f64> {
        let width = (1.0 - self.current_tau) / HISTOGRAM_BINS as f64;
        (0..=HISTOGRAM_BINS)
            .map(|k| if k == HISTOGRAM_BINS { 1.0 } else { self.current_tau + k as f64 * width })
            .collect()
    }
}

/// Walks the cutoffs with the binomial heuristic and returns the first
/// cutoff where it says stop, or the last cutoff.
pub fn auto_select_tau(pv: &PValueVector, cfg: &AdaptiveConfig) -> f64 {
    auto_select_tau_values(pv.values(), cfg)
}

pub(crate) fn auto_select_tau_values(values: &[f64], cfg: &AdaptiveConfig) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    auto_select_tau_sorted(&s, cfg)
}

/// Same rule as the session heuristic, using counts from sorted input.
pub(crate) fn auto_select_tau_sorted(sorted: &[f64], cfg: &AdaptiveConfig) -> f64 {
    let n = sorted.len();
    for &tau in &cfg.cutoffs {
        let hidden = sorted.partition_point(|&p| p <= tau);
        let edge = tau + cfg.window;
        let window_count = sorted.partition_point(|&p| p <= edge) - hidden;
        if heuristic(n, hidden, window_count, tau, cfg) == Suggestion::Stop {
            return tau;
        }
    }
    *cfg.cutoffs.last().expect("nonempty cutoffs")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Stopped,
}

/// Interactive, masked walk down the cutoffs.
#[derive(Debug, Clone)]
pub struct TauSession {
    hidden: PValueVector,
    config: AdaptiveConfig,
    step: usize,
    status: SessionStatus,
    chosen_tau: Option<f64>,
}

impl TauSession {
    pub fn open(pv: PValueVector, config: AdaptiveConfig) -> Self {
        TauSession {
            hidden: pv,
            config,
            step: 0,
            status: SessionStatus::Active,
            chosen_tau: None,
        }
    }

    pub fn n(&self) -> usize {
        self.hidden.len()
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn current_tau(&self) -> f64 {
        self.config.cutoffs[self.step]
    }

    pub fn chosen_tau(&self) -> Option<f64> {
        self.chosen_tau
    }

    pub fn config(&self) -> &AdaptiveConfig {
        &self.config
    }

    fn require_active(&self, what: &str) -> Result<()> {
        match self.status {
            SessionStatus::Active => Ok(()),
            SessionStatus::Stopped => Err(Error::State(format!("cannot {what}: session is stopped"))),
        }
    }

    pub fn view(&self) -> Result<MaskedView> {
        self.require_active("view")?;
        Ok(self.snapshot())
    }

    /// The view at the current cutoff, also once stopped (then at the
    /// chosen τ).
    pub fn snapshot(&self) -> MaskedView {
        MaskedView::build(self.hidden.values(), self.step, &self.config)
    }

    /// Moves to the next cutoff; at the last cutoff the session stops there.
    pub fn advance(&mut self) -> Result<()> {
        self.require_active("advance")?;
        if self.step + 1 < self.config.cutoffs.len() {
            self.step += 1;
        } else {
            self.stop()?;
        }
        Ok(())
    }

    pub fn stop(&mut self) -> Result<f64> {
        self.require_active("stop")?;
        let tau = self.current_tau();
        self.status = SessionStatus::Stopped;
        self.chosen_tau = Some(tau);
        Ok(tau)
    }

    /// The conditional test at the chosen τ.
    pub fn finalize(&self, method: GlobalMethod, opts: &TestOptions) -> Result<CombinedResult> {
        let tau = self
            .chosen_tau
            .ok_or_else(|| Error::State("cannot finalize: session is still active".into()))?;
        conditional_test(&self.hidden, tau, method, opts)
    }

    /// The same test on all p-values, for comparison with [`TauSession::finalize`].
    pub fn unconditional(&self, method: GlobalMethod, opts: &TestOptions) -> Result<CombinedResult> {
        self.chosen_tau
            .ok_or_else(|| Error::State("cannot compare: session is still active".into()))?;
        combine(method, self.hidden.values(), opts)
    }
}
