//! Python bindings: structures, diffraction, the tool registry and parity
//! statistics. JSON-shaped values cross the boundary as Python dicts.

use std::sync::OnceLock;

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use atomflow_bench::{parity_stats as parity, speedup_table as speedups, ModelSpeed};
use atomflow_core::structure::{parse_poscar as parse, serialize_poscar};
use atomflow_core::toolkit::{default_registry, Registry};
use atomflow_core::xrd::{simulate_pxrd as simulate, PatternSettings, RadiationSource};

create_exception!(atomflow, ToolError, PyValueError);

fn registry() -> &'static Registry {
    static REGISTRY: OnceLock<Registry> = OnceLock::new();
    REGISTRY.get_or_init(default_registry)
}

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (v.to_string(),))
}

fn from_py(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<serde_json::Value> {
    let text: String = py.import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(value_error)
}

/// Names of the registered tools in registration order.
#[pyfunction]
fn tool_names() -> Vec<String> {
    registry().descriptors().map(|d| d.name.clone()).collect()
}

/// Parameter schema of a tool as a dict.
#[pyfunction]
fn tool_schema<'py>(py: Python<'py>, name: &str) -> PyResult<Bound<'py, PyAny>> {
    let d = registry().get(name).ok_or_else(|| ToolError::new_err(format!("unknown tool '{name}'")))?;
    to_py(py, &d.params.to_json())
}

/// Runs a tool. Failures raise ToolError carrying "code: message".
#[pyfunction]
fn invoke_tool<'py>(py: Python<'py>, name: &str, arguments: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let args = from_py(py, arguments)?;
    let result = py.detach(|| registry().invoke(name, &args)).map_err(|e| {
        let hint = e.hint().map(|h| format!(" ({h})")).unwrap_or_default();
        ToolError::new_err(format!("{}: {e}{hint}", e.code()))
    })?;
    to_py(py, &result)
}

/// Parses POSCAR text and writes it back in canonical form.
#[pyfunction]
fn normalize_poscar(text: &str) -> PyResult<String> {
    parse(text).map(|s| serialize_poscar(&s)).map_err(value_error)
}

/// Formula, site count, lattice rows and fractional sites of a POSCAR.
#[pyfunction]
fn parse_poscar<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    let s = parse(text).map_err(value_error)?;
    let sites: Vec<serde_json::Value> =
        s.sites().iter().map(|x| serde_json::json!({"element": x.element(), "frac": x.frac()})).collect();
    let v = serde_json::json!({
        "formula": s.formula(),
        "num_sites": s.num_sites(),
        "volume": s.volume(),
        "lattice": s.lattice().matrix(),
        "sites": sites,
    });
    to_py(py, &v)
}

/// Peaks of a simulated powder pattern as (two_theta, intensity) pairs.
#[pyfunction]
#[pyo3(signature = (poscar, wavelength = 1.5406, two_theta_min = 10.0, two_theta_max = 90.0))]
fn simulate_pxrd(poscar: &str, wavelength: f64, two_theta_min: f64, two_theta_max: f64) -> PyResult<Vec<(f64, f64)>> {
    let s = parse(poscar).map_err(value_error)?;
    let src = RadiationSource::new("custom", wavelength).map_err(value_error)?;
    let settings = PatternSettings { min_two_theta: two_theta_min, max_two_theta: two_theta_max, ..PatternSettings::default() };
    let p = simulate(&s, &src, settings).map_err(value_error)?;
    Ok(p.peaks.iter().map(|x| (x.two_theta, x.intensity)).collect())
}

/// MAE and R² of predictions against a reference.
#[pyfunction]
fn parity_stats<'py>(py: Python<'py>, predicted: Vec<f64>, reference: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    let stats = parity(&predicted, &reference).map_err(value_error)?;
    to_py(py, &serde_json::to_value(stats).map_err(value_error)?)
}

/// Speedup of each (model, tokens/s) pair over the baseline, 2 decimals.
#[pyfunction]
fn speedup_table(baseline: (String, f64), others: Vec<(String, f64)>) -> PyResult<Vec<(String, f64, f64)>> {
    let others: Vec<ModelSpeed> = others.into_iter().map(|(m, t)| ModelSpeed::new(m, t)).collect();
    let rows = speedups(&ModelSpeed::new(baseline.0, baseline.1), &others).map_err(value_error)?;
    Ok(rows.into_iter().map(|r| (r.model, r.mean_tps, r.speedup)).collect())
}

#[pymodule]
fn atomflow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("ToolError", m.py().get_type::<ToolError>())?;
    m.add_function(wrap_pyfunction!(tool_names, m)?)?;
    m.add_function(wrap_pyfunction!(tool_schema, m)?)?;
    m.add_function(wrap_pyfunction!(invoke_tool, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_poscar, m)?)?;
    m.add_function(wrap_pyfunction!(parse_poscar, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_pxrd, m)?)?;
    m.add_function(wrap_pyfunction!(parity_stats, m)?)?;
    m.add_function(wrap_pyfunction!(speedup_table, m)?)?;
    Ok(())
}
