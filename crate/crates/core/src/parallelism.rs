//! Inter-bank parallelism planning: per-step strategy selection, the
//! four-category inter-bank movement ledger, and the iteration schedule
//! HT -> MLP -> MLP_b -> HT_b across banks.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::hashgrid::HashGridConfig;
use crate::nerf::MlpConfig;
use crate::workload::Kernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    ParameterParallel,
    DataParallel,
}

/// Which parameter set a step touches; steps sharing a set reuse one
/// duplication under data parallelism.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamSet {
    Table,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepSpec {
    pub step: Kernel,
    pub param_bytes: u64,
    pub param_elems: u64,
    pub input_bytes: u64,
    pub output_bytes: u64,
    pub intermediate_bytes: u64,
    /// True when the step's input is already sliced the same way as its
    /// parameters, so parameter parallelism needs no input broadcast
    /// (the table-gradient step: each bank takes its own levels' slice).
    pub input_partitioned_with_params: bool,
}

impl StepSpec {
    pub fn param_set(&self) -> ParamSet {
        match self.step {
            Kernel::Ht | Kernel::HtB => ParamSet::Table,
            Kernel::Mlp | Kernel::MlpB => ParamSet::Mlp,
        }
    }

    pub fn is_backward(&self) -> bool {
        matches!(self.step, Kernel::HtB | Kernel::MlpB)
    }
}

/// Analytic byte counts for one training iteration at a given batch.
pub fn derive_step_specs(
    grid: &HashGridConfig,
    mlp: &MlpConfig,
    batch_points: u64,
) -> Result<[StepSpec; 4]> {
    grid.validate()?;
    let bpf = grid.bytes_per_feature as u64;
    let feat = grid.levels * grid.feature_dim;
    let table_bytes = grid.total_entries() * grid.feature_dim as u64 * bpf;
    let table_elems = grid.total_entries() * grid.feature_dim as u64;
    let mlp_elems = mlp.weight_count(feat);
    let mlp_bytes = mlp_elems * bpf;
    let coords = batch_points * 3 * 4; // fp32 sample coordinates
    let features = batch_points * feat as u64 * bpf;
    let hidden = batch_points * mlp.density_hidden.max(mlp.color_hidden) as u64 * bpf;
    let rgb = batch_points * 3 * bpf;
    let ht = StepSpec {
        step: Kernel::Ht,
        param_bytes: table_bytes,
        param_elems: table_elems,
        input_bytes: coords,
        output_bytes: features,
        intermediate_bytes: 0,
        input_partitioned_with_params: false,
    };
    let mlp_f = StepSpec {
        step: Kernel::Mlp,
        param_bytes: mlp_bytes,
        param_elems: mlp_elems,
        input_bytes: features,
        output_bytes: rgb,
        intermediate_bytes: hidden,
        input_partitioned_with_params: false,
    };
    let mlp_b = StepSpec {
        step: Kernel::MlpB,
        param_bytes: mlp_bytes,
        param_elems: mlp_elems,
        input_bytes: rgb,
        output_bytes: features,
        intermediate_bytes: hidden,
        input_partitioned_with_params: false,
    };
    let ht_b = StepSpec {
        step: Kernel::HtB,
        param_bytes: table_bytes,
        param_elems: table_elems,
        input_bytes: features,
        output_bytes: 0,
        intermediate_bytes: 0,
        input_partitioned_with_params: true,
    };
    Ok([ht, mlp_f, mlp_b, ht_b])
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MovementLedger {
    pub cat1_duplication_bytes: u64,
    pub cat2_interstep_bytes: u64,
    pub cat3_intrastep_bytes: u64,
    pub cat4_gradient_reduce_bytes: u64,
}

impl MovementLedger {
    pub fn total(&self) -> u64 {
        self.cat1_duplication_bytes
            + self.cat2_interstep_bytes
            + self.cat3_intrastep_bytes
            + self.cat4_gradient_reduce_bytes
    }

    fn add(&mut self, other: &MovementLedger) {
        self.cat1_duplication_bytes += other.cat1_duplication_bytes;
        self.cat2_interstep_bytes += other.cat2_interstep_bytes;
        self.cat3_intrastep_bytes += other.cat3_intrastep_bytes;
        self.cat4_gradient_reduce_bytes += other.cat4_gradient_reduce_bytes;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlannedStep {
    pub step: Kernel,
    pub strategy: Strategy,
    pub ledger: MovementLedger,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParallelismPlan {
    pub n_banks: u32,
    pub steps: Vec<PlannedStep>,
    pub ledger: MovementLedger,
}

/// Heterogeneous default: parameter parallelism for the table kernels,
/// data parallelism for the MLP kernels.
pub fn default_strategies() -> [Strategy; 4] {
    [
        Strategy::ParameterParallel,
        Strategy::DataParallel,
        Strategy::DataParallel,
        Strategy::ParameterParallel,
    ]
}

/// Gradient partial sums move at full precision (4 B per element).
pub const GRAD_ELEM_BYTES: u64 = 4;

/// Build the movement ledger for one iteration.
///
/// Category 1: duplication forced by the strategy (input broadcast for
/// parameter parallelism, parameter copies for data parallelism, counted
/// once per shared parameter set). Category 2: producer-to-consumer
/// tensors that change banks at step boundaries. Category 3:
/// intermediates crossing banks within a step (parameter parallelism
/// only). Category 4: gradient partial-sum reduction for data-parallel
/// backward steps.
pub fn plan(
    strategies: &[Strategy; 4],
    specs: &[StepSpec; 4],
    n_banks: u32,
) -> Result<ParallelismPlan> {
    if n_banks == 0 {
        return Err(SimError::Config("need at least one bank".into()));
    }
    let n = n_banks as u64;
    let mut steps = Vec::with_capacity(4);
    let mut total = MovementLedger::default();
    let mut duplicated: Vec<ParamSet> = Vec::new();
    for (i, (spec, strat)) in specs.iter().zip(strategies).enumerate() {
        let mut led = MovementLedger::default();
        match strat {
            Strategy::ParameterParallel => {
                if !spec.input_partitioned_with_params {
                    led.cat1_duplication_bytes += spec.input_bytes * (n - 1);
                }
                led.cat3_intrastep_bytes += spec.intermediate_bytes * (n - 1) / n;
            }
            Strategy::DataParallel => {
                let set = spec.param_set();
                if !duplicated.contains(&set) {
                    led.cat1_duplication_bytes += spec.param_bytes * (n - 1);
                    duplicated.push(set);
                }
                if spec.is_backward() {
                    led.cat4_gradient_reduce_bytes += spec.param_elems * GRAD_ELEM_BYTES * (n - 1);
                }
            }
        }
        // Step-boundary transfer of the producer's output tensor.
        if i > 0 {
            let both_data = strategies[i - 1] == Strategy::DataParallel
                && *strat == Strategy::DataParallel;
            let broadcast_consumer =
                *strat == Strategy::ParameterParallel && !spec.input_partitioned_with_params;
            if !both_data && !broadcast_consumer {
                led.cat2_interstep_bytes += spec.input_bytes * (n - 1) / n;
            }
        }
        total.add(&led);
        steps.push(PlannedStep { step: spec.step, strategy: *strat, ledger: led });
    }
    Ok(ParallelismPlan { n_banks, steps, ledger: total })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepTiming {
    pub step: Kernel,
    pub compute_cycles: u64,
    pub movement_cycles: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationResult {
    pub steps: Vec<StepTiming>,
    pub total_cycles: u64,
}

/// Combine per-bank step times with the plan's movement ledger. Within a
/// step banks run concurrently (step time = max over banks); ledger
/// bytes cross the shared I/O path at `link_bytes_per_cycle` between
/// steps.
pub fn schedule_iteration(
    plan: &ParallelismPlan,
    per_step_bank_cycles: &[Vec<u64>],
    link_bytes_per_cycle: f64,
) -> Result<IterationResult> {
    if per_step_bank_cycles.len() != plan.steps.len() {
        return Err(SimError::Config(format!(
            "plan has {} steps but {} cycle vectors supplied",
            plan.steps.len(),
            per_step_bank_cycles.len()
        )));
    }
    if link_bytes_per_cycle <= 0.0 {
        return Err(SimError::Config("link bandwidth must be positive".into()));
    }
    let mut steps = Vec::new();
    let mut total = 0u64;
    for (planned, banks) in plan.steps.iter().zip(per_step_bank_cycles) {
        if banks.is_empty() {
            return Err(SimError::Config("each step needs at least one bank time".into()));
        }
        let compute = *banks.iter().max().unwrap();
        let movement =
            (planned.ledger.total() as f64 / link_bytes_per_cycle).ceil() as u64;
        total += compute + movement;
        steps.push(StepTiming { step: planned.step, compute_cycles: compute, movement_cycles: movement });
    }
    Ok(IterationResult { steps, total_cycles: total })
}
