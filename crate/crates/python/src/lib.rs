//! Python bindings: `import pycondmt`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use condmt::adaptive::{StoppingRule, Suggestion};
use condmt::global_tests::{GlobalMethod, TestOptions};
use condmt::qualint::{StudyRecord, TauMode};
use condmt::scan::ScanConfig;
use condmt::{AdaptiveConfig, PValueVector};

fn err(e: condmt::Error) -> PyErr {
    match e {
        condmt::Error::State(m) => PyRuntimeError::new_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn method(name: &str) -> PyResult<GlobalMethod> {
    name.parse().map_err(err)
}

fn pvalues(values: Vec<f64>) -> PyResult<PValueVector> {
    PValueVector::new(values).map_err(err)
}

fn options(trunc: f64, q_max: f64, mc_draws: usize, seed: u64, hc_grid_step: Option<f64>) -> TestOptions {
    TestOptions {
        trunc,
        q_max,
        mc_draws,
        seed,
        hc_grid_step,
    }
}

fn adaptive_config(cutoffs: Option<Vec<f64>>, window: f64, level: f64, rule: &str) -> PyResult<AdaptiveConfig> {
    let rule: StoppingRule = rule.parse().map_err(err)?;
    let cutoffs = cutoffs.unwrap_or_else(|| AdaptiveConfig::default().cutoffs().to_vec());
    Ok(AdaptiveConfig::new(cutoffs, window, level).map_err(err)?.with_rule(rule))
}

/// Result of a (conditional) combination test.
#[pyclass(frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
pub struct CombinedResult {
    pub method: String,
    pub p_combined: f64,
    pub statistic: f64,
    pub n_used: usize,
    pub tau: f64,
}

impl From<condmt::CombinedResult> for CombinedResult {
    fn from(r: condmt::CombinedResult) -> Self {
        CombinedResult {
            method: r.method.name().to_string(),
            p_combined: r.p_combined,
            statistic: r.statistic,
            n_used: r.n_used,
            tau: r.tau,
        }
    }
}

#[pymethods]
impl CombinedResult {
    fn __repr__(&self) -> String {
        format!(
            "CombinedResult(method='{}', tau={}, n_used={}, p_combined={}, statistic={})",
            self.method, self.tau, self.n_used, self.p_combined, self.statistic
        )
    }
}

/// Combined p-value of all inputs.
#[pyfunction]
#[pyo3(signature = (pvalues, method, trunc=0.5, q_max=0.5, mc_draws=10_000, seed=0, hc_grid_step=None))]
fn combine(
    pvalues: Vec<f64>,
    method: &str,
    trunc: f64,
    q_max: f64,
    mc_draws: usize,
    seed: u64,
    hc_grid_step: Option<f64>,
) -> PyResult<CombinedResult> {
    let opts = options(trunc, q_max, mc_draws, seed, hc_grid_step);
    let pv = self::pvalues(pvalues)?;
    Ok(condmt::combine(self::method(method)?, pv.values(), &opts).map_err(err)?.into())
}

/// Global test on {p/τ : p ≤ τ}.
#[pyfunction]
#[pyo3(signature = (pvalues, tau, method, trunc=0.5, q_max=0.5, mc_draws=10_000, seed=0, hc_grid_step=None))]
#[allow(clippy::too_many_arguments)]
fn conditional_test(
    pvalues: Vec<f64>,
    tau: f64,
    method: &str,
    trunc: f64,
    q_max: f64,
    mc_draws: usize,
    seed: u64,
    hc_grid_step: Option<f64>,
) -> PyResult<CombinedResult> {
    let opts = options(trunc, q_max, mc_draws, seed, hc_grid_step);
    let pv = self::pvalues(pvalues)?;
    Ok(condmt::conditional_test(&pv, tau, self::method(method)?, &opts)
        .map_err(err)?
        .into())
}

/// τ picked by walking the cutoffs with the binomial heuristic.
#[pyfunction]
#[pyo3(signature = (pvalues, cutoffs=None, window=0.1, level=0.01, rule="hidden_count"))]
fn auto_select_tau(pvalues: Vec<f64>, cutoffs: Option<Vec<f64>>, window: f64, level: f64, rule: &str) -> PyResult<f64> {
    let cfg = adaptive_config(cutoffs, window, level, rule)?;
    Ok(condmt::auto_select_tau(&self::pvalues(pvalues)?, &cfg))
}

fn records(estimates: Vec<f64>, std_errs: Vec<f64>) -> PyResult<Vec<StudyRecord>> {
    if estimates.len() != std_errs.len() {
        return Err(PyValueError::new_err("estimates and std_errs differ in length"));
    }
    estimates
        .into_iter()
        .zip(std_errs)
        .enumerate()
        .map(|(i, (e, s))| StudyRecord::new(format!("{}", i + 1), None, e, s).map_err(err))
        .collect()
}

/// Test for qualitative interaction; `tau` is None (unconditional), a
/// number, or "adaptive". Returns a dict with p_plus, p_minus, p_final.
#[pyfunction]
#[pyo3(signature = (estimates, std_errs, method="fisher", tau=None, seed=0))]
fn qualitative_interaction_test<'py>(
    py: Python<'py>,
    estimates: Vec<f64>,
    std_errs: Vec<f64>,
    method: &str,
    tau: Option<Bound<'py, PyAny>>,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let data = records(estimates, std_errs)?;
    let r = match method.to_ascii_lowercase().as_str() {
        "ibga" => condmt::ibga(&data).map_err(err)?,
        m => {
            let mode = match tau {
                None => TauMode::Unconditional,
                Some(t) if t.extract::<String>().is_ok_and(|s| s == "adaptive") => {
                    TauMode::Adaptive(AdaptiveConfig::default())
                }
                Some(t) => TauMode::Fixed(t.extract::<f64>()?),
            };
            let opts = TestOptions {
                seed,
                ..TestOptions::default()
            };
            condmt::qualitative_interaction_test(&data, self::method(m)?, &mode, &opts).map_err(err)?
        }
    };
    let d = PyDict::new(py);
    d.set_item("method", r.method.name())?;
    d.set_item("tau_mode", r.tau_mode)?;
    d.set_item("p_plus", CombinedResult::from(r.p_plus))?;
    d.set_item("p_minus", CombinedResult::from(r.p_minus))?;
    d.set_item("p_final", r.p_final)?;
    Ok(d)
}

/// Gail–Simon likelihood ratio test; returns (statistic, p_value).
#[pyfunction]
fn gail_simon_lrt(estimates: Vec<f64>, std_errs: Vec<f64>) -> PyResult<(f64, f64)> {
    let g = condmt::gail_simon_lrt(&records(estimates, std_errs)?).map_err(err)?;
    Ok((g.statistic, g.p_value))
}

/// Calibrated scan test; returns a dict with p_scan, n_p_scan, alpha_scan, reject.
#[pyfunction]
#[pyo3(signature = (pvalues, tau0=0.05, alpha=0.05, calib_reps=10_000, seed=0))]
fn scan_test<'py>(
    py: Python<'py>,
    pvalues: Vec<f64>,
    tau0: f64,
    alpha: f64,
    calib_reps: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ScanConfig {
        tau0,
        alpha,
        calib_reps,
        seed,
    };
    let r = condmt::scan::scan_test(&self::pvalues(pvalues)?, &cfg).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("p_scan", r.p_scan)?;
    d.set_item("n_p_scan", r.n_p_scan)?;
    d.set_item("alpha_scan", r.alpha_scan)?;
    d.set_item("reject", r.reject)?;
    Ok(d)
}

/// Reads an `id,group,estimate,std_err` CSV into a list of dicts.
#[pyfunction]
fn read_csv<'py>(py: Python<'py>, path: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let data = condmt::parse_csv(path).map_err(err)?;
    data.records
        .into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("id", r.id)?;
            d.set_item("group", r.group)?;
            d.set_item("estimate", r.estimate)?;
            d.set_item("std_err", r.std_err)?;
            Ok(d)
        })
        .collect()
}

/// Interactive walk down the cutoffs that only ever shows the values
/// above the current cutoff.
#[pyclass]
pub struct TauSession {
    inner: condmt::TauSession,
}

#[pymethods]
impl TauSession {
    #[new]
    #[pyo3(signature = (pvalues, cutoffs=None, window=0.1, level=0.01, rule="hidden_count"))]
    fn new(pvalues: Vec<f64>, cutoffs: Option<Vec<f64>>, window: f64, level: f64, rule: &str) -> PyResult<Self> {
        let cfg = adaptive_config(cutoffs, window, level, rule)?;
        Ok(TauSession {
            inner: condmt::TauSession::open(self::pvalues(pvalues)?, cfg),
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn current_tau(&self) -> f64 {
        self.inner.current_tau()
    }

    #[getter]
    fn chosen_tau(&self) -> Option<f64> {
        self.inner.chosen_tau()
    }

    #[getter]
    fn stopped(&self) -> bool {
        self.inner.chosen_tau().is_some()
    }

    /// The masked view: counts, histogram and the visible values (> τ).
    fn view<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let v = self.inner.snapshot();
        let d = PyDict::new(py);
        d.set_item("n", v.n)?;
        d.set_item("step", v.step)?;
        d.set_item("current_tau", v.current_tau)?;
        d.set_item("hidden_count", v.hidden_count)?;
        d.set_item("window_count", v.window_count)?;
        d.set_item("histogram", v.histogram())?;
        d.set_item("bin_edges", v.bin_edges())?;
        d.set_item(
            "suggestion",
            match v.heuristic_suggestion {
                Suggestion::Continue => "continue",
                Suggestion::Stop => "stop",
            },
        )?;
        d.set_item("visible", v.visible)?;
        Ok(d)
    }

    fn advance(&mut self) -> PyResult<()> {
        self.inner.advance().map_err(err)
    }

    fn stop(&mut self) -> PyResult<f64> {
        self.inner.stop().map_err(err)
    }

    #[pyo3(signature = (method, trunc=0.5, q_max=0.5, mc_draws=10_000, seed=0))]
    fn finalize(&self, method: &str, trunc: f64, q_max: f64, mc_draws: usize, seed: u64) -> PyResult<CombinedResult> {
        let opts = options(trunc, q_max, mc_draws, seed, None);
        Ok(self.inner.finalize(self::method(method)?, &opts).map_err(err)?.into())
    }
}

#[pymodule]
fn pycondmt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<CombinedResult>()?;
    m.add_class::<TauSession>()?;
    m.add_function(wrap_pyfunction!(combine, m)?)?;
    m.add_function(wrap_pyfunction!(conditional_test, m)?)?;
    m.add_function(wrap_pyfunction!(auto_select_tau, m)?)?;
    m.add_function(wrap_pyfunction!(qualitative_interaction_test, m)?)?;
    m.add_function(wrap_pyfunction!(gail_simon_lrt, m)?)?;
    m.add_function(wrap_pyfunction!(scan_test, m)?)?;
    m.add_function(wrap_pyfunction!(read_csv, m)?)?;
    Ok(())
}
