//! Python bindings for the simulator core: hash functions, locality
//! statistics, byte accounting, the movement ledger, the reference
//! renderer/trainer, and the full simulation pipelines.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nmpsim::config::ExperimentConfig;
use nmpsim::error::SimError;
use nmpsim::hashgrid::{self, HashGridConfig, HashKind, VertexCoord};
use nmpsim::nerf::{self, RenderSample, TrainRay, TrainState};
use nmpsim::parallelism::{default_strategies, derive_step_specs, plan, Strategy};
use nmpsim::report::neighbor_distance_histogram;
use nmpsim::{experiment, workload};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn err(e: SimError) -> PyErr {
    match e {
        SimError::Io(_) | SimError::Parse(_) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_kind(s: &str) -> PyResult<HashKind> {
    match s {
        "morton" => Ok(HashKind::Morton),
        "xor" => Ok(HashKind::XorSpatial),
        other => Err(PyValueError::new_err(format!(
            "hash kind must be 'morton' or 'xor', got '{other}'"
        ))),
    }
}

/// Bit-expand a coordinate (one bit to every third position).
#[pyfunction]
fn morton_expand(x: u32) -> PyResult<u64> {
    hashgrid::morton_expand(x).map_err(err)
}

/// Morton (Z-order) table index of a lattice vertex.
#[pyfunction]
fn morton_hash(x: u32, y: u32, z: u32, table_size: u64) -> PyResult<u64> {
    hashgrid::morton_hash(VertexCoord { v: [x, y, z] }, table_size).map_err(err)
}

/// XOR spatial-hash table index of a lattice vertex.
#[pyfunction]
fn xor_hash(x: u32, y: u32, z: u32, table_size: u64) -> u64 {
    hashgrid::xor_hash(
        VertexCoord { v: [x, y, z] },
        hashgrid::DEFAULT_XOR_PRIMES,
        table_size,
    )
}

/// Per-level grid resolutions at the default geometric growth.
#[pyfunction]
#[pyo3(signature = (levels=16, base_resolution=16, max_resolution=2048))]
fn grid_resolutions(levels: u32, base_resolution: u32, max_resolution: u32) -> PyResult<Vec<u32>> {
    let grid = HashGridConfig { levels, base_resolution, max_resolution, ..Default::default() };
    grid.validate().map_err(err)?;
    Ok(grid.level_configs().iter().map(|l| l.resolution).collect())
}

/// Neighbor index-distance bucket fractions (<=16, 17..5000, >5000) for
/// uniformly sampled cubes at the default grid's hashed levels.
#[pyfunction]
#[pyo3(signature = (hash_kind, n_points=2000, seed=0))]
fn neighbor_histogram(hash_kind: &str, n_points: usize, seed: u64) -> PyResult<(f64, f64, f64)> {
    let kind = parse_kind(hash_kind)?;
    let grid = HashGridConfig::default();
    let pts = experiment::uniform_points(n_points, seed);
    let h = neighbor_distance_histogram(&grid, &pts, kind).map_err(err)?;
    Ok((
        h.fraction_within_16(),
        h.mid_range as f64 / h.total() as f64,
        h.fraction_beyond_5000(),
    ))
}

/// Analytic per-step byte accounting for one training iteration.
#[pyfunction]
fn step_spec_bytes(py: Python<'_>, batch_points: u64) -> PyResult<PyObject> {
    let specs = derive_step_specs(&HashGridConfig::default(), &Default::default(), batch_points)
        .map_err(err)?;
    let out = PyDict::new_bound(py);
    for s in specs {
        let d = PyDict::new_bound(py);
        d.set_item("param_bytes", s.param_bytes)?;
        d.set_item("input_bytes", s.input_bytes)?;
        d.set_item("output_bytes", s.output_bytes)?;
        d.set_item("intermediate_bytes", s.intermediate_bytes)?;
        out.set_item(format!("{:?}", s.step), d)?;
    }
    Ok(out.into())
}

/// Inter-bank movement totals for the three parallelism plans.
#[pyfunction]
#[pyo3(signature = (batch_points=262144, n_banks=16))]
fn ledger_totals(py: Python<'_>, batch_points: u64, n_banks: u32) -> PyResult<PyObject> {
    let specs = derive_step_specs(&HashGridConfig::default(), &Default::default(), batch_points)
        .map_err(err)?;
    let out = PyDict::new_bound(py);
    for (name, strategies) in [
        ("heterogeneous", default_strategies()),
        ("pure_data_parallel", [Strategy::DataParallel; 4]),
        ("pure_parameter_parallel", [Strategy::ParameterParallel; 4]),
    ] {
        let p = plan(&strategies, &specs, n_banks).map_err(err)?;
        out.set_item(name, p.ledger.total())?;
    }
    Ok(out.into())
}

/// Volume-render a ray from (sigma, rgb, t) samples.
#[pyfunction]
fn volume_render(
    sigmas: Vec<f64>,
    colors: Vec<(f64, f64, f64)>,
    ts: Vec<f64>,
    far_cap: f64,
) -> PyResult<(f64, f64, f64)> {
    if sigmas.len() != colors.len() || sigmas.len() != ts.len() {
        return Err(PyValueError::new_err("sigmas, colors, ts must have equal length"));
    }
    let samples: Vec<RenderSample> = sigmas
        .iter()
        .zip(&colors)
        .zip(&ts)
        .map(|((s, c), t)| RenderSample { sigma: *s, color: [c.0, c.1, c.2], t: *t })
        .collect();
    let c = nerf::volume_render(&samples, far_cap);
    Ok((c[0], c[1], c[2]))
}

/// Run the single-scenario simulation; returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (config_toml=""))]
fn run_sim(config_toml: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_toml_str(config_toml).map_err(err)?;
    experiment::run_sim(&cfg).map_err(err)?.to_json().map_err(err)
}

/// Run the scenario sweep; returns the combined report as JSON.
#[pyfunction]
#[pyo3(signature = (config_toml=""))]
fn run_sweep(config_toml: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_toml_str(config_toml).map_err(err)?;
    experiment::run_sweep(&cfg).map_err(err)?.to_json().map_err(err)
}

/// Generate the default HT trace; returns summary counts.
#[pyfunction]
#[pyo3(signature = (config_toml=""))]
fn trace_summary(py: Python<'_>, config_toml: &str) -> PyResult<PyObject> {
    let cfg = ExperimentConfig::from_toml_str(config_toml).map_err(err)?;
    let spec = experiment::ScenarioSpec::from_config(&cfg, "trace");
    let run = experiment::run_ht_pipeline(&cfg, &spec).map_err(err)?;
    let d = PyDict::new_bound(py);
    d.set_item("points", run.ht_stats.points)?;
    d.set_item("requests", run.trace.requests.len())?;
    d.set_item("read_bytes", run.trace.read_bytes())?;
    d.set_item("register_hits", run.ht_stats.register_hits)?;
    d.set_item("row_requests", run.row_stats.row_requests)?;
    d.set_item("rows_per_cube", run.row_stats.mean_rows_per_cube())?;
    let _ = workload::Kernel::Ht; // keep the workload types reachable
    Ok(d.into())
}

/// Train the reference model on a toy batch; returns per-step losses.
#[pyfunction]
#[pyo3(signature = (steps=20, seed=0, learning_rate=0.05))]
fn train_demo(steps: usize, seed: u64, learning_rate: f64) -> PyResult<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = HashGridConfig {
        levels: 2,
        table_size: 64,
        base_resolution: 4,
        max_resolution: 8,
        ..Default::default()
    };
    let mlp = nmpsim::nerf::MlpConfig {
        density_hidden: 8,
        density_out: 4,
        view_dim: 16,
        color_hidden: 8,
    };
    let input_dim = grid.levels * grid.feature_dim;
    let mut state = TrainState {
        table: nerf::EmbeddingTable::random(&grid, 0.1, &mut rng),
        params: nerf::MlpParams::random(input_dim, &mlp, 0.3, &mut rng),
        grid,
        mlp_config: mlp,
        far_cap: 1.0,
    };
    let batch: Vec<TrainRay> = (0..4)
        .map(|i| TrainRay {
            ray: nerf::sample_ray([0.2 + 0.1 * i as f64, 0.3, 0.1], [0.1, 0.2, 0.9], 4, 0.05, 0.6),
            target: [0.6, 0.4, 0.5],
        })
        .collect();
    let mut losses = Vec::with_capacity(steps);
    for _ in 0..steps {
        losses.push(nerf::train_step(&mut state, &batch, learning_rate).map_err(err)?);
    }
    Ok(losses)
}

#[pymodule]
fn nmpsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(morton_expand, m)?)?;
    m.add_function(wrap_pyfunction!(morton_hash, m)?)?;
    m.add_function(wrap_pyfunction!(xor_hash, m)?)?;
    m.add_function(wrap_pyfunction!(grid_resolutions, m)?)?;
    m.add_function(wrap_pyfunction!(neighbor_histogram, m)?)?;
    m.add_function(wrap_pyfunction!(step_spec_bytes, m)?)?;
    m.add_function(wrap_pyfunction!(ledger_totals, m)?)?;
    m.add_function(wrap_pyfunction!(volume_render, m)?)?;
    m.add_function(wrap_pyfunction!(run_sim, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(trace_summary, m)?)?;
    m.add_function(wrap_pyfunction!(train_demo, m)?)?;
    Ok(())
}
