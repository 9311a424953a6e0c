//! Conditional global tests: keep the p-values at or below a threshold τ,
//! rescale them by 1/τ and hand them to any combination test or step
//! procedure.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::global_tests::{combine, CombinedResult, GlobalMethod, PValueVector, TestOptions};

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(domain(format!("tau must lie in (0, 1], got {tau}")))
    }
}

/// The p-values at or below τ, as original positions and rescaled values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSet {
    tau: f64,
    indices: Vec<usize>,
    conditional_values: Vec<f64>,
}

impl SelectionSet {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Zero-based positions in the original vector, ascending.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// p_i / τ for each selected index, in the same order.
    pub fn conditional_values(&self) -> &[f64] {
        &self.conditional_values
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn select(pv: &PValueVector, tau: f64) -> Result<SelectionSet> {
    check_tau(tau)?;
    Ok(select_values(pv.values(), tau))
}

pub(crate) fn select_values(values: &[f64], tau: f64) -> SelectionSet {
    let (indices, conditional_values) = values
        .iter()
        .enumerate()
        .filter(|(_, &p)| p <= tau)
        .map(|(i, &p)| (i, p / tau))
        .unzip();
    SelectionSet {
        tau,
        indices,
        conditional_values,
    }
}

/// Runs `method` on {p_i/τ : p_i ≤ τ}. An empty selection gives p = 1.
pub fn conditional_test(pv: &PValueVector, tau: f64, method: GlobalMethod, opts: &TestOptions) -> Result<CombinedResult> {
    conditional_test_values(pv.values(), tau, method, opts)
}

pub(crate) fn conditional_test_values(
    values: &[f64],
    tau: f64,
    method: GlobalMethod,
    opts: &TestOptions,
) -> Result<CombinedResult> {
    check_tau(tau)?;
    let sel = select_values(values, tau);
    let mut r = combine(method, &sel.conditional_values, opts)?;
    r.tau = tau;
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepProcedure {
    /// Single-step Bonferroni: reject when p ≤ level/m.
    Bonferroni,
    Holm,
    Hochberg,
    /// Benjamini–Hochberg (FDR).
    Bh,
}

impl fmt::Display for StepProcedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepProcedure::Bonferroni => "bonferroni",
            StepProcedure::Holm => "holm",
            StepProcedure::Hochberg => "hochberg",
            StepProcedure::Bh => "bh",
        })
    }
}

impl FromStr for StepProcedure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bonferroni" => Ok(StepProcedure::Bonferroni),
            "holm" => Ok(StepProcedure::Holm),
            "hochberg" => Ok(StepProcedure::Hochberg),
            "bh" | "benjamini_hochberg" | "fdr" => Ok(StepProcedure::Bh),
            other => Err(domain(format!("unknown procedure '{other}'"))),
        }
    }
}

/// Positions in `values` rejected by `procedure` at `level`, ascending.
pub fn step_rejections(values: &[f64], procedure: StepProcedure, level: f64) -> Vec<usize> {
    let m = values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mf = m as f64;
    let count = match procedure {
        StepProcedure::Bonferroni => order.iter().take_while(|&&i| values[i] <= level / mf).count(),
        StepProcedure::Holm => order
            .iter()
            .enumerate()
            .take_while(|&(k, &i)| values[i] <= level / (m - k) as f64)
            .count(),
        StepProcedure::Hochberg => (0..m)
            .rev()
            .find(|&k| values[order[k]] <= level / (m - k) as f64)
            .map_or(0, |k| k + 1),
        StepProcedure::Bh => (0..m)
            .rev()
            .find(|&k| values[order[k]] <= (k + 1) as f64 * level / mf)
            .map_or(0, |k| k + 1),
    };
    let mut rejected: Vec<usize> = order[..count].to_vec();
    rejected.sort_unstable();
    rejected
}

/// Runs a step procedure on the conditional p-values with m = |S_τ| and
/// reports rejections as original positions.
pub fn conditional_multiplicity(
    pv: &PValueVector,
    tau: f64,
    procedure: StepProcedure,
    level: f64,
) -> Result<Vec<usize>> {
    check_tau(tau)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(domain(format!("level must lie in (0, 1), got {level}")));
    }
    let sel = select_values(pv.values(), tau);
    Ok(step_rejections(&sel.conditional_values, procedure, level)
        .into_iter()
        .map(|k| sel.indices[k])
        .collect())
}

/// p^CB / p^B = |S_τ| / (τ n).
pub fn power_ratio(pv: &PValueVector, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let selected = pv.values().iter().filter(|&&p| p <= tau).count();
    if selected == 0 {
        return Err(domain(format!("no p-value is <= {tau}; the ratio is undefined")));
    }
    Ok(selected as f64 / (tau * pv.len() as f64))
}
