//! Per-bank compute engine cycle model: INT32 and FP32 PE groups with
//! one lane-op per cycle, a fixed per-step controller setup cost, and a
//! double-buffered overlap rule against DRAM service time.

use serde::{Deserialize, Serialize};

use crate::dram::{service_trace, AddressMap, DramTimingParams, Scheduler};
use crate::error::{Result, SimError};
use crate::workload::{AccessTrace, Kernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub int32_lanes: u64,
    pub fp32_lanes: u64,
    pub scratchpad_bytes: u64,
    pub clock_mhz: u64,
    pub hash_register_count: u32,
    /// Controller overhead per step (instruction fetch/decode).
    pub step_setup_cycles: u64,
    /// Integer ops to produce one vertex index (3 coordinate expansions
    /// plus combine at the default hash).
    pub hash_ops_per_vertex: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            int32_lanes: 256,
            fp32_lanes: 256,
            scratchpad_bytes: 2048,
            clock_mhz: 200,
            hash_register_count: 64,
            step_setup_cycles: 16,
            hash_ops_per_vertex: 17,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self, row_bytes: u64) -> Result<()> {
        if self.int32_lanes == 0 || self.fp32_lanes == 0 {
            return Err(SimError::Config("lane counts must be > 0".into()));
        }
        // Double-buffered row tiles must fit the scratchpad.
        if self.scratchpad_bytes < 2 * row_bytes {
            return Err(SimError::Config(format!(
                "scratchpad {} B cannot double-buffer {} B row tiles",
                self.scratchpad_bytes, row_bytes
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelWorkItem {
    pub kernel: Kernel,
    pub points: u64,
    pub levels: u64,
    pub feature_dim: u64,
    /// Chained (in, out) layer shapes for the MLP kernels.
    pub layer_dims: Vec<(u64, u64)>,
}

fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// Integer cycles to compute all vertex indices.
pub fn int_cycles_hash_index(points: u64, levels: u64, lanes: u64, ops_per_vertex: u64) -> u64 {
    ceil_div(points * levels * 8 * ops_per_vertex, lanes)
}

/// FP cycles for trilinear interpolation: 8F MACs plus 7 weight-combine
/// ops per point-level.
pub fn fp_cycles_interp(points: u64, levels: u64, feature_dim: u64, lanes: u64) -> u64 {
    ceil_div(points * levels * (8 * feature_dim + 7), lanes)
}

/// FP cycles for the MLP kernels; weights stream row-by-row from the
/// local bank (accounted as a DRAM read stream in the MLP trace).
pub fn fp_cycles_mlp(points: u64, layer_dims: &[(u64, u64)], lanes: u64) -> u64 {
    let macs: u64 = layer_dims.iter().map(|(i, o)| i * o).sum::<u64>() * points;
    ceil_div(macs, lanes)
}

pub fn compute_cycles(work: &KernelWorkItem, cfg: &EngineConfig) -> u64 {
    match work.kernel {
        Kernel::Ht | Kernel::HtB => {
            int_cycles_hash_index(work.points, work.levels, cfg.int32_lanes, cfg.hash_ops_per_vertex)
                + fp_cycles_interp(work.points, work.levels, work.feature_dim, cfg.fp32_lanes)
        }
        Kernel::Mlp | Kernel::MlpB => fp_cycles_mlp(work.points, &work.layer_dims, cfg.fp32_lanes),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StepResult {
    pub total_cycles: u64,
    pub compute_cycles: u64,
    pub memory_cycles: u64,
    pub overlap_cycles: u64,
}

/// Combine compute and memory time under double buffering: the slower
/// side hides the faster one, leaving only the controller setup and the
/// first tile's fill latency exposed (both capped by the hidden side).
pub fn combine_overlap(compute: u64, memory: u64, params: &DramTimingParams, cfg: &EngineConfig) -> StepResult {
    let fill = params.t_rcd + params.t_cl + params.row_transfer;
    let exposed = (cfg.step_setup_cycles + fill).min(compute.min(memory));
    let total = compute.max(memory) + exposed;
    StepResult {
        total_cycles: total,
        compute_cycles: compute,
        memory_cycles: memory,
        // Cycles saved relative to running the two phases back to back.
        overlap_cycles: (compute + memory).saturating_sub(total),
    }
}

/// Run one kernel step on one bank's trace slice.
pub fn execute_step(
    work: &KernelWorkItem,
    trace: &AccessTrace,
    map: &AddressMap,
    params: &DramTimingParams,
    cfg: &EngineConfig,
    scheduler: Scheduler,
) -> Result<StepResult> {
    cfg.validate(map.geometry.row_bytes)?;
    let compute = compute_cycles(work, cfg);
    let memory = if trace.requests.is_empty() {
        0
    } else {
        service_trace(trace, map, params, scheduler, false)?.stats.total_cycles
    };
    Ok(combine_overlap(compute, memory, params, cfg))
}
