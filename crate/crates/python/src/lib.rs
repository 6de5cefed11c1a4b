//! Python bindings. Configs cross the boundary as JSON text, sweeps come
//! back as the same versioned CSV the CLI writes, and solves return a dict.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use aris_mec_core::channel::{self, ChannelSet};
use aris_mec_core::config::{ScenarioConfig, UserTask};
use aris_mec_core::experiments::{self, Variant};
use aris_mec_core::{compute, rates, CVector, C64};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_config(config_json: Option<&str>) -> PyResult<ScenarioConfig> {
    match config_json {
        Some(text) => ScenarioConfig::from_json(text).map_err(value_error),
        None => Ok(ScenarioConfig::baseline()),
    }
}

fn parse_variants(names: Option<Vec<String>>) -> PyResult<Vec<Variant>> {
    match names {
        None => Ok(Variant::ALL.to_vec()),
        Some(names) => names
            .iter()
            .map(|n| n.parse().map_err(value_error))
            .collect(),
    }
}

fn csv_text(write: impl FnOnce(&mut Vec<u8>) -> aris_mec_core::Result<()>) -> PyResult<String> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(value_error)?;
    String::from_utf8(buf).map_err(value_error)
}

/// Default scenario as JSON.
#[pyfunction]
fn default_config() -> String {
    ScenarioConfig::baseline().to_json()
}

/// Validates a JSON config and returns its derived quantities.
#[pyfunction]
#[pyo3(signature = (config_json=None))]
fn validate_config<'py>(
    py: Python<'py>,
    config_json: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = parse_config(config_json)?;
    let passive_cap = cfg.passive_element_cap();
    let scenario = cfg.validate().map_err(value_error)?;
    let out = PyDict::new(py);
    out.set_item("ris_budget_w", scenario.ris_budget_w())?;
    out.set_item("passive_element_cap", passive_cap)?;
    out.set_item("num_users", scenario.num_users())?;
    out.set_item("num_antennas", scenario.num_antennas())?;
    out.set_item("num_elements", scenario.num_elements())?;
    Ok(out)
}

#[pyfunction]
fn path_loss_db(distance_m: f64, exponent: f64) -> PyResult<f64> {
    channel::path_loss_db(distance_m, exponent).map_err(value_error)
}

#[pyfunction]
fn mmse_rate(weight: f64, mse: f64, bandwidth_hz: f64) -> PyResult<f64> {
    rates::mmse_rate(weight, mse, bandwidth_hz).map_err(value_error)
}

/// Returns `(relaxed_bits, integer_bits)`.
#[pyfunction]
fn optimal_offload_volume(
    task_bits: u64,
    local_cpu_hz: f64,
    cycles_per_bit: f64,
    rate_bps: f64,
    edge_cpu_hz: f64,
) -> (f64, u64) {
    let task = UserTask {
        task_bits,
        local_cpu_hz,
        cycles_per_bit,
    };
    compute::optimal_offload_volume(&task, rate_bps, edge_cpu_hz)
}

#[pyfunction]
#[pyo3(signature = (theta, levels=4))]
fn quantize_phases(theta: Vec<C64>, levels: usize) -> PyResult<Vec<C64>> {
    let q = experiments::quantize_phases(&CVector::from_vec(theta), levels).map_err(value_error)?;
    Ok(q.iter().copied().collect())
}

/// Solves one drop. Channels are drawn from `seed` unless `channels_json`
/// (a channel dump) is given.
#[pyfunction]
#[pyo3(signature = (config_json=None, seed=None, variant="active", channels_json=None))]
fn solve<'py>(
    py: Python<'py>,
    config_json: Option<&str>,
    seed: Option<u64>,
    variant: &str,
    channels_json: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = parse_config(config_json)?;
    if let Some(seed) = seed {
        cfg.rng_seed = seed;
    }
    let variant: Variant = variant.parse().map_err(value_error)?;
    let scenario = cfg.validate().map_err(value_error)?;
    let channels = match channels_json {
        Some(text) => ChannelSet::from_json(text).map_err(value_error)?,
        None => {
            channel::draw(scenario.config(), scenario.config().rng_seed)
                .map_err(value_error)?
                .1
        }
    };
    let result = py
        .detach(|| experiments::solve_variant(&scenario, &channels, variant))
        .map_err(value_error)?;
    let out = PyDict::new(py);
    out.set_item("variant", variant.as_str())?;
    out.set_item("mcl_s", result.mcl())?;
    out.set_item("converged", result.trace.converged)?;
    out.set_item("iterations", result.trace.iterations())?;
    out.set_item("objective", result.trace.objective())?;
    out.set_item("user_latency_s", result.latency.totals())?;
    out.set_item("rates_bps", result.rates.clone())?;
    out.set_item("offload_bits", result.state.offload_bits.clone())?;
    out.set_item("edge_cpu_hz", result.state.edge_cpu.clone())?;
    out.set_item("power_w", result.state.power.clone())?;
    out.set_item(
        "theta",
        result.state.theta.iter().copied().collect::<Vec<C64>>(),
    )?;
    Ok(out)
}

/// Convergence traces as CSV text.
#[pyfunction]
#[pyo3(signature = (config_json=None, elements=None, seeds=None))]
fn run_convergence(
    py: Python<'_>,
    config_json: Option<&str>,
    elements: Option<Vec<usize>>,
    seeds: Option<Vec<u64>>,
) -> PyResult<String> {
    let cfg = parse_config(config_json)?;
    let elements = elements.unwrap_or_else(|| experiments::CONVERGENCE_ELEMENTS.to_vec());
    let seeds = seeds.unwrap_or_else(|| (0..experiments::DEFAULT_SEEDS).collect());
    let runs = py
        .detach(|| experiments::run_convergence(&cfg, &elements, &seeds))
        .map_err(value_error)?;
    csv_text(|buf| experiments::write_convergence_csv(buf, &runs, cfg.num_users()))
}

/// MCL versus the number of elements as CSV text.
#[pyfunction]
#[pyo3(signature = (config_json=None, elements=None, total_power_w=None, seeds=None, variants=None))]
fn sweep_m(
    py: Python<'_>,
    config_json: Option<&str>,
    elements: Option<Vec<usize>>,
    total_power_w: Option<Vec<f64>>,
    seeds: Option<Vec<u64>>,
    variants: Option<Vec<String>>,
) -> PyResult<String> {
    let cfg = parse_config(config_json)?;
    let elements = elements.unwrap_or_else(|| experiments::SWEEP_ELEMENTS.to_vec());
    let p_tot = total_power_w.unwrap_or_else(|| experiments::SWEEP_TOTAL_POWER_W.to_vec());
    let seeds = seeds.unwrap_or_else(|| (0..experiments::DEFAULT_SEEDS).collect());
    let variants = parse_variants(variants)?;
    let rows = py
        .detach(|| experiments::sweep_m(&cfg, &elements, &p_tot, &seeds, &variants))
        .map_err(value_error)?;
    csv_text(|buf| experiments::write_sweep_m_csv(buf, &rows))
}

/// MCL versus the RIS x coordinate as CSV text.
#[pyfunction]
#[pyo3(signature = (config_json=None, x_ris_m=None, seeds=None, variants=None))]
fn sweep_location(
    py: Python<'_>,
    config_json: Option<&str>,
    x_ris_m: Option<Vec<f64>>,
    seeds: Option<Vec<u64>>,
    variants: Option<Vec<String>>,
) -> PyResult<String> {
    let cfg = parse_config(config_json)?;
    let xs = x_ris_m.unwrap_or_else(|| experiments::SWEEP_RIS_X_M.to_vec());
    let seeds = seeds.unwrap_or_else(|| (0..experiments::DEFAULT_SEEDS).collect());
    let variants = parse_variants(variants)?;
    let rows = py
        .detach(|| experiments::sweep_location(&cfg, &xs, &seeds, &variants))
        .map_err(value_error)?;
    csv_text(|buf| experiments::write_sweep_loc_csv(buf, &rows, cfg.num_users()))
}

#[pymodule]
fn aris_mec(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CSV_SCHEMA_VERSION", experiments::CSV_SCHEMA_VERSION)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(path_loss_db, m)?)?;
    m.add_function(wrap_pyfunction!(mmse_rate, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_offload_volume, m)?)?;
    m.add_function(wrap_pyfunction!(quantize_phases, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(run_convergence, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_m, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_location, m)?)?;
    Ok(())
}
