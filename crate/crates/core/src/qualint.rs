//! Testing for qualitative interaction.
//!
//! The null "no effect of opposite signs" is the union of H0⁺ (all μ_i ≥ 0)
//! and H0⁻ (all μ_i ≤ 0). Each side is a one-sided global null; rejecting
//! both at level α rejects the union, so the final p-value is the larger of
//! the two combined p-values.

use serde::{Deserialize, Serialize};

use crate::adaptive::{auto_select_tau_values, AdaptiveConfig};
use crate::conditional::{check_tau, conditional_test_values};
use crate::distributions::{binom_pmf, chisq_sf, norm_sf};
use crate::error::{domain, Result};
use crate::global_tests::{combine, CombinedResult, GlobalMethod, PValueVector, TestOptions};

/// One subgroup estimate with its known standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub id: String,
    #[serde(default)]
    pub group: Option<String>,
    pub estimate: f64,
    pub std_err: f64,
}

impl StudyRecord {
    pub fn new(id: impl Into<String>, group: Option<String>, estimate: f64, std_err: f64) -> Result<Self> {
        let r = StudyRecord {
            id: id.into(),
            group,
            estimate,
            std_err,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.estimate.is_finite() {
            return Err(domain(format!("{}: estimate must be finite", self.id)));
        }
        if !(self.std_err > 0.0 && self.std_err.is_finite()) {
            return Err(domain(format!("{}: std_err must be positive", self.id)));
        }
        Ok(())
    }

    pub fn z(&self) -> f64 {
        self.estimate / self.std_err
    }
}

/// One-sided p-values (Φ(z), 1 − Φ(z)) for H0⁺ and H0⁻.
///
/// Both come from the same tail probability so they sum to exactly 1 and
/// negating z swaps them exactly.
pub fn split_z(z: f64) -> (f64, f64) {
    let s = norm_sf(z.abs());
    if z >= 0.0 {
        (1.0 - s, s)
    } else {
        (s, 1.0 - s)
    }
}

fn z_scores(data: &[StudyRecord]) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(domain("no study records"));
    }
    data.iter()
        .map(|r| {
            r.validate()?;
            Ok(r.z())
        })
        .collect()
}

fn split_all(z: &[f64]) -> (Vec<f64>, Vec<f64>) {
    z.iter().map(|&z| split_z(z)).unzip()
}

pub fn split_pvalues(data: &[StudyRecord]) -> Result<(PValueVector, PValueVector)> {
    let (plus, minus) = split_all(&z_scores(data)?);
    Ok((PValueVector::new(plus)?, PValueVector::new(minus)?))
}

/// How τ is picked on each side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauMode {
    Unconditional,
    Fixed(f64),
    /// τ chosen separately on each side from that side's own p-values.
    Adaptive(AdaptiveConfig),
}

impl TauMode {
    pub(crate) fn check(&self) -> Result<()> {
        match self {
            TauMode::Fixed(t) => check_tau(*t),
            _ => Ok(()),
        }
    }

    /// Combined p-value of one side under this mode.
    pub fn run(&self, values: &[f64], method: GlobalMethod, opts: &TestOptions) -> Result<CombinedResult> {
        match self {
            TauMode::Unconditional => combine(method, values, opts),
            TauMode::Fixed(tau) => conditional_test_values(values, *tau, method, opts),
            TauMode::Adaptive(cfg) => {
                let tau = auto_select_tau_values(values, cfg);
                conditional_test_values(values, tau, method, opts)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            TauMode::Unconditional => "unconditional".into(),
            TauMode::Fixed(t) => format!("conditional({t})"),
            TauMode::Adaptive(_) => "adaptive".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualIntResult {
    pub method: GlobalMethod,
    pub tau_mode: String,
    /// Test of H0⁺: every μ_i ≥ 0.
    pub p_plus: CombinedResult,
    /// Test of H0⁻: every μ_i ≤ 0.
    pub p_minus: CombinedResult,
    pub p_final: f64,
}

pub fn qualitative_interaction_test(
    data: &[StudyRecord],
    method: GlobalMethod,
    mode: &TauMode,
    opts: &TestOptions,
) -> Result<QualIntResult> {
    qualint_from_z(&z_scores(data)?, method, mode, opts)
}

/// Same as [`qualitative_interaction_test`] on raw z-statistics.
pub fn qualint_from_z(z: &[f64], method: GlobalMethod, mode: &TauMode, opts: &TestOptions) -> Result<QualIntResult> {
    if z.is_empty() {
        return Err(domain("no z-statistics"));
    }
    mode.check()?;
    let (plus, minus) = split_all(z);
    let p_plus = mode.run(&plus, method, opts)?;
    let p_minus = mode.run(&minus, method, opts)?;
    Ok(QualIntResult {
        method,
        tau_mode: mode.label(),
        p_final: p_plus.p_combined.max(p_minus.p_combined),
        p_plus,
        p_minus,
    })
}

/// Interval based graphical approach, which is Šidák on each side.
pub fn ibga(data: &[StudyRecord]) -> Result<QualIntResult> {
    qualitative_interaction_test(data, GlobalMethod::Sidak, &TauMode::Unconditional, &TestOptions::default())
}

/// Gail–Simon likelihood ratio statistic and p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GailSimon {
    /// min(Q⁺, Q⁻) with Q± the sum of squared positive/negative z.
    pub statistic: f64,
    pub p_value: f64,
}

pub fn gail_simon_lrt(data: &[StudyRecord]) -> Result<GailSimon> {
    Ok(gail_simon_from_z(&z_scores(data)?))
}

/// Gail and Simon bound the null rejection probability of
/// min(Q⁺, Q⁻) ≥ c by Σ_{h=1}^{n−1} Bin(h; n, ½) P(χ²_h ≥ c). At μ = 0 the
/// sum is P(Q⁺ ≥ c and the signs are mixed); pushing the other side's
/// means away from zero drives the second condition to certainty, so the
/// bound holds over the whole null.
pub fn gail_simon_from_z(z: &[f64]) -> GailSimon {
    let (mut q_plus, mut q_minus) = (0.0, 0.0);
    for &v in z {
        if v > 0.0 {
            q_plus += v * v;
        } else if v < 0.0 {
            q_minus += v * v;
        }
    }
    let c = q_plus.min(q_minus);
    GailSimon {
        statistic: c,
        p_value: gail_simon_p(c, z.len()),
    }
}

pub fn gail_simon_p(c: f64, n: usize) -> f64 {
    if c <= 0.0 {
        return 1.0;
    }
    let n64 = n as u64;
    let p: f64 = (1..n as u32)
        .map(|h| {
            binom_pmf(h as u64, n64, 0.5) * chisq_sf(c, h).expect("valid df")
        })
        .sum();
    p.min(1.0)
}

/// Inverse-variance pooling of records sharing a group label. Records
/// without a group are kept as they are. Output order follows the first
/// appearance of each group.
pub fn pool_groups(data: &[StudyRecord]) -> Result<Vec<StudyRecord>> {
    let mut out: Vec<(StudyRecord, f64, f64)> = Vec::new();
    let mut slot: std::collections::HashMap<&str, usize> = Default::default();
    for r in data {
        r.validate()?;
        let w = 1.0 / (r.std_err * r.std_err);
        match r.group.as_deref() {
            Some(g) if !g.is_empty() => {
                if let Some(&k) = slot.get(g) {
                    out[k].1 += w;
                    out[k].2 += w * r.estimate;
                } else {
                    slot.insert(g, out.len());
                    let rec = StudyRecord {
                        id: g.to_string(),
                        group: Some(g.to_string()),
                        estimate: r.estimate,
                        std_err: r.std_err,
                    };
                    out.push((rec, w, w * r.estimate));
                }
            }
            _ => out.push((r.clone(), f64::NAN, f64::NAN)),
        }
    }
    Ok(out
        .into_iter()
        .map(|(mut rec, w, we)| {
            if w.is_finite() {
                rec.estimate = we / w;
                rec.std_err = w.recip().sqrt();
            }
            rec
        })
        .collect())
}
