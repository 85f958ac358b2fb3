//! Python bindings.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList, PyString};
use serde_json::Value;

use fastsplit_core::blockwise::{blockwise_split_with, BlockwiseOptions};
use fastsplit_core::delay::{training_delay as delay_of, NetParams, Partition, WeightMode};
use fastsplit_core::edgesim::sim::summarize;
use fastsplit_core::edgesim::{parse_scenario, simulate_all, Band, ChannelCondition, Scenario, Strategy};
use fastsplit_core::profile::{parse_model_profile, validate_profile, ModelProfile};
use fastsplit_core::{fixtures, oracle, splitter};

fn err(e: fastsplit_core::Error) -> PyErr {
    PyValueError::new_err(format!("[{}] {e}", e.module()))
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.into_pyobject(py)?.into_any(),
            (None, Some(i)) => i.into_pyobject(py)?.into_any(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => PyString::new(py, s).into_any(),
        Value::Array(a) => {
            let items = a.iter().map(|x| to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        Value::Object(o) => {
            let d = PyDict::new(py);
            for (k, x) in o {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

#[pyclass(name = "Profile", module = "fastsplit", frozen)]
struct PyProfile(ModelProfile);

#[pymethods]
impl PyProfile {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        parse_model_profile(text).map(Self).map_err(err)
    }

    #[getter]
    fn name(&self) -> &str {
        self.0.name()
    }

    #[getter]
    fn num_layers(&self) -> usize {
        self.0.num_layers()
    }

    #[getter]
    fn num_blocks(&self) -> usize {
        self.0.blocks().len()
    }

    #[getter]
    fn layer_ids(&self) -> Vec<String> {
        self.0.layers().iter().map(|l| l.id.clone()).collect()
    }

    /// Diagnostics as (subject, rule, message) tuples; empty when valid.
    fn validate(&self) -> Vec<(String, String, String)> {
        validate_profile(&self.0)
            .into_iter()
            .map(|d| {
                let rule = serde_json::to_value(d.rule).ok().and_then(|v| v.as_str().map(String::from));
                (d.subject, rule.unwrap_or_default(), d.message)
            })
            .collect()
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn __repr__(&self) -> String {
        format!("Profile({:?}, layers={}, blocks={})", self.0.name(), self.0.num_layers(), self.0.blocks().len())
    }
}

#[pyclass(name = "SplitDecision", module = "fastsplit", frozen, get_all)]
struct PyDecision {
    device: Vec<String>,
    server: Vec<String>,
    cut_value_us: u64,
    delay_us: u64,
    method: String,
    abstracted_blocks: Option<Vec<String>>,
}

#[pymethods]
impl PyDecision {
    fn __repr__(&self) -> String {
        format!(
            "SplitDecision(method={:?}, delay_us={}, device={:?})",
            self.method, self.delay_us, self.device
        )
    }
}

fn decision(p: &ModelProfile, d: splitter::SplitDecision, abstracted: Option<Vec<String>>) -> PyDecision {
    PyDecision {
        device: d.partition.device_ids(p).into_iter().map(String::from).collect(),
        server: d.partition.server_ids(p).into_iter().map(String::from).collect(),
        cut_value_us: d.cut_value_us,
        delay_us: d.delay_us,
        method: d.method.to_string(),
        abstracted_blocks: abstracted,
    }
}

fn net(rate_up: u64, rate_down: u64, iters: u64, mode: &str, input_cost: bool) -> PyResult<NetParams> {
    let mode = match mode {
        "consistent" => WeightMode::Consistent,
        "paper-literal" => WeightMode::PaperLiteral,
        other => return Err(PyValueError::new_err(format!("unknown mode `{other}`"))),
    };
    Ok(NetParams::new(rate_up, rate_down, iters).map_err(err)?.with_mode(mode).with_input_cost(input_cost))
}

#[pyfunction]
fn parse_profile(text: &str) -> PyResult<PyProfile> {
    PyProfile::from_json(text)
}

#[pyfunction]
fn fixture(name: &str) -> PyResult<PyProfile> {
    fixtures::fixture(name).map(PyProfile).map_err(err)
}

#[pyfunction]
fn fixture_names() -> Vec<&'static str> {
    fixtures::FIXTURE_NAMES.to_vec()
}

#[pyfunction]
#[pyo3(signature = (profile, rate_up, rate_down, iters=1, mode="consistent", input_cost=true))]
fn optimal_split(profile: &PyProfile, rate_up: u64, rate_down: u64, iters: u64, mode: &str, input_cost: bool) -> PyResult<PyDecision> {
    let n = net(rate_up, rate_down, iters, mode, input_cost)?;
    let d = splitter::optimal_split(&profile.0, &n).map_err(err)?;
    Ok(decision(&profile.0, d, None))
}

#[pyfunction]
#[pyo3(signature = (profile, rate_up, rate_down, iters=1, mode="consistent", input_cost=true, strict_alg3=false))]
#[allow(clippy::too_many_arguments)]
fn blockwise_split(
    profile: &PyProfile,
    rate_up: u64,
    rate_down: u64,
    iters: u64,
    mode: &str,
    input_cost: bool,
    strict_alg3: bool,
) -> PyResult<PyDecision> {
    let p = &profile.0;
    let n = net(rate_up, rate_down, iters, mode, input_cost)?;
    let o = blockwise_split_with(p, &n, BlockwiseOptions { strict_alg3 }).map_err(err)?;
    let ids = o.abstracted.iter().map(|&i| p.blocks()[i].annotation.block_id.clone()).collect();
    Ok(decision(p, o.decision, Some(ids)))
}

#[pyfunction]
#[pyo3(signature = (profile, rate_up, rate_down, iters=1))]
fn oracle_optimal(profile: &PyProfile, rate_up: u64, rate_down: u64, iters: u64) -> PyResult<PyDecision> {
    let n = net(rate_up, rate_down, iters, "consistent", true)?;
    let d = oracle::oracle_optimal(&profile.0, &n).map_err(err)?;
    Ok(decision(&profile.0, d, None))
}

/// Delay of the partition that keeps `device` (layer ids) on the device.
#[pyfunction]
#[pyo3(signature = (profile, device, rate_up, rate_down, iters=1, input_cost=true))]
fn training_delay(profile: &PyProfile, device: Vec<String>, rate_up: u64, rate_down: u64, iters: u64, input_cost: bool) -> PyResult<u64> {
    let n = net(rate_up, rate_down, iters, "consistent", input_cost)?;
    let part = Partition::from_device_ids(&profile.0, &device).map_err(err)?;
    delay_of(&profile.0, &part, &n).map_err(err)
}

/// Returns (matched, seeds, mismatch descriptions).
#[pyfunction]
#[pyo3(signature = (seeds=1000, max_layers=12))]
fn oracle_check(py: Python<'_>, seeds: u64, max_layers: usize) -> PyResult<(u64, u64, Vec<String>)> {
    let c = py.detach(|| oracle::oracle_check(seeds, max_layers)).map_err(err)?;
    Ok((c.matched, c.seeds, c.mismatches))
}

/// Scenario preset as a JSON document.
#[pyfunction]
#[pyo3(signature = (band="mmwave", condition="normal", seed=0))]
fn scenario_preset(band: &str, condition: &str, seed: u64) -> PyResult<String> {
    let band: Band = serde_json::from_value(Value::String(band.into())).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let cond: ChannelCondition =
        serde_json::from_value(Value::String(condition.into())).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(Scenario::preset(band, cond, seed).to_json())
}

/// Runs the simulator. `scenario` is a config document; returns the
/// per-epoch rows and the summary.
#[pyfunction]
#[pyo3(signature = (profile, scenario, strategies=None))]
fn simulate<'py>(
    py: Python<'py>,
    profile: &PyProfile,
    scenario: &str,
    strategies: Option<Vec<String>>,
) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
    let sc = parse_scenario(scenario).map_err(err)?;
    let strategies: Vec<Strategy> = match strategies {
        None => Strategy::ALL.to_vec(),
        Some(names) => names
            .iter()
            .map(|s| s.parse::<Strategy>())
            .collect::<Result<_, _>>()
            .map_err(err)?,
    };
    let p = &profile.0;
    let runs = py.detach(|| simulate_all(&sc, p, &strategies)).map_err(err)?;
    let rows: Vec<Value> = runs
        .iter()
        .flat_map(|(_, r)| r)
        .map(|r| {
            serde_json::json!({
                "epoch": r.epoch,
                "device": r.device,
                "R_D": r.rate_up_bps,
                "R_S": r.rate_down_bps,
                "strategy": r.strategy.name(),
                "cut_size": r.cut_size(),
                "delay_us": r.delay_us,
            })
        })
        .collect();
    let summary = serde_json::to_value(summarize(&sc, p, &runs)).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((to_py(py, &Value::Array(rows))?, to_py(py, &summary)?))
}

#[pymodule]
fn fastsplit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProfile>()?;
    m.add_class::<PyDecision>()?;
    m.add_function(wrap_pyfunction!(parse_profile, m)?)?;
    m.add_function(wrap_pyfunction!(fixture, m)?)?;
    m.add_function(wrap_pyfunction!(fixture_names, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_split, m)?)?;
    m.add_function(wrap_pyfunction!(blockwise_split, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_optimal, m)?)?;
    m.add_function(wrap_pyfunction!(training_delay, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_check, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_preset, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
