//! End-to-end pipelines gluing the modules together: synthetic scenes,
//! trace generation, DRAM simulation, iteration scheduling, and report
//! assembly. This is what the CLI subcommands call.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::dram::{
    peak_and_effective_bandwidth, service_trace, AddressMap, ServiceResult,
};
use crate::engine::{combine_overlap, compute_cycles, KernelWorkItem};
use crate::error::{Result, SimError};
use crate::hashgrid::{HashGridConfig, HashKind, Point3};
use crate::mapping::MappingPolicy;
use crate::nerf::sample_ray;
use crate::parallelism::{
    derive_step_specs, plan, schedule_iteration, IterationResult, ParallelismPlan, Strategy,
};
use crate::report::{
    improvement_ratio, neighbor_distance_histogram, Comparison, ExperimentReport, LedgerEntry,
    ScenarioReport,
};
use crate::workload::{
    coalesce_to_rows, generate_ht_trace, generate_mlp_trace, order_points, AccessTrace,
    AddressLayout, HtTraceStats, Kernel, MlpTraceSpec, RayBatch, RowStats, StreamOrder,
};

/// Deterministic synthetic camera-ray scenes. Each produces
/// `rays × samples_per_ray` candidate points inside the unit cube.
pub fn builtin_scene(name: &str, rays: u32, samples_per_ray: u32, seed: u64) -> Result<RayBatch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut batch = RayBatch::default();
    for i in 0..rays {
        let (origin, dir) = match name {
            // Axis-aligned forward-facing camera: a grid of rays marching +z.
            "forward" => {
                let side = (rays as f64).sqrt().ceil() as u32;
                let (gx, gy) = (i % side, i / side);
                let o = [
                    0.1 + 0.8 * gx as f64 / side.max(1) as f64,
                    0.1 + 0.8 * gy as f64 / side.max(1) as f64,
                    0.02,
                ];
                let d = [rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05), 1.0];
                (o, d)
            }
            // Cameras on a circle around the cube center, looking inward.
            "orbit" => {
                let theta = 2.0 * std::f64::consts::PI * i as f64 / rays as f64;
                let o = [
                    0.5 + 0.45 * theta.cos(),
                    0.5 + 0.45 * theta.sin(),
                    0.1 + 0.8 * rng.gen_range(0.0..1.0),
                ];
                let d = [0.5 - o[0], 0.5 - o[1], 0.5 - o[2] + rng.gen_range(-0.1..0.1)];
                (o, d)
            }
            // Rays entering near one corner, marching along the diagonal.
            "diagonal" => {
                let o = [
                    rng.gen_range(0.02..0.25),
                    rng.gen_range(0.02..0.25),
                    rng.gen_range(0.02..0.25),
                ];
                let d = [
                    1.0 + rng.gen_range(-0.1..0.1),
                    1.0 + rng.gen_range(-0.1..0.1),
                    1.0 + rng.gen_range(-0.1..0.1),
                ];
                (o, d)
            }
            other => {
                return Err(SimError::Config(format!(
                    "unknown scene '{other}' (expected forward, orbit, or diagonal)"
                )))
            }
        };
        let ray = sample_ray(origin, dir, samples_per_ray as usize, 0.01, 0.85);
        let pts: Vec<Point3> = ray.scene_points().into_iter().map(|(_, p)| p).collect();
        if !pts.is_empty() {
            batch.rays.push(pts);
        }
    }
    Ok(batch)
}

/// One HT-pipeline variant: overrides applied on top of the base config.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub name: String,
    pub hash_kind: HashKind,
    pub order: StreamOrder,
    pub register_model: bool,
    pub mapping: MappingPolicy,
}

impl ScenarioSpec {
    pub fn from_config(cfg: &ExperimentConfig, name: &str) -> Self {
        ScenarioSpec {
            name: name.to_string(),
            hash_kind: cfg.grid.hash_kind,
            order: cfg.workload.order,
            register_model: cfg.workload.register_model,
            mapping: cfg.mapping.policy,
        }
    }
}

pub struct HtRun {
    pub trace: AccessTrace,
    pub ht_stats: HtTraceStats,
    pub row_trace: AccessTrace,
    pub row_stats: RowStats,
    pub service: ServiceResult,
    /// Payload bytes the kernel actually consumes (table entries).
    pub demand_bytes: u64,
    pub grid: HashGridConfig,
    pub map: AddressMap,
}

/// Generate the HT trace for a scenario and replay it through DRAM.
pub fn run_ht_pipeline(cfg: &ExperimentConfig, spec: &ScenarioSpec) -> Result<HtRun> {
    cfg.validate()?;
    let grid = HashGridConfig { hash_kind: spec.hash_kind, ..cfg.grid.clone() };
    let batch = builtin_scene(
        &cfg.workload.scene,
        cfg.workload.rays,
        cfg.workload.samples_per_ray,
        cfg.workload.seed,
    )?;
    let stream = order_points(&batch, spec.order, cfg.workload.seed);
    let layout = AddressLayout::new(&grid, &cfg.mlp);
    let (mut trace, ht_stats) = generate_ht_trace(
        &stream,
        &grid,
        &layout,
        spec.register_model,
        cfg.workload.register_capacity as usize,
        Kernel::Ht,
    )?;
    trace.meta.order = Some(spec.order);
    trace.meta.seed = cfg.workload.seed;
    let (row_trace, row_stats) = coalesce_to_rows(&trace, cfg.geometry.row_bytes)?;
    let map = AddressMap::new(
        &grid,
        layout,
        cfg.geometry,
        spec.mapping,
        cfg.mapping.bank_assignment,
    )?;
    let service = service_trace(&row_trace, &map, &cfg.timing, cfg.mapping.scheduler, false)?;
    let demand_bytes = ht_stats.points
        * grid.levels as u64
        * 8
        * grid.entry_bytes() as u64;
    Ok(HtRun {
        trace,
        ht_stats,
        row_trace,
        row_stats,
        service,
        demand_bytes,
        grid,
        map,
    })
}

pub fn scenario_report(cfg: &ExperimentConfig, spec: &ScenarioSpec) -> Result<ScenarioReport> {
    let run = run_ht_pipeline(cfg, spec)?;
    let bw = peak_and_effective_bandwidth(
        &run.service.stats,
        run.demand_bytes,
        &cfg.geometry,
        &cfg.timing,
    )?;
    let reg_rate = if run.ht_stats.cube_lookups == 0 {
        0.0
    } else {
        run.ht_stats.register_hits as f64 / run.ht_stats.cube_lookups as f64
    };
    Ok(ScenarioReport::from_parts(
        &spec.name,
        spec.hash_kind,
        spec.order,
        spec.register_model,
        spec.mapping,
        run.ht_stats.points,
        &run.service.stats,
        &bw,
        reg_rate,
        run.row_stats.mean_rows_per_cube(),
    ))
}

/// Cycles a conventional 16-bit-I/O host path would need to move the
/// same rows out of DRAM (2 bytes per engine cycle).
pub fn io_baseline_cycles(row_requests: u64, row_bytes: u64, link_bytes_per_cycle: f64) -> u64 {
    (row_requests as f64 * row_bytes as f64 / link_bytes_per_cycle).ceil() as u64
}

/// Full-iteration schedule HT -> MLP -> MLP_b -> HT_b under the
/// configured strategies.
pub fn iteration(cfg: &ExperimentConfig) -> Result<(ParallelismPlan, IterationResult)> {
    cfg.validate()?;
    let n = cfg.geometry.banks_per_chip;
    let points = cfg.workload.batch_points;
    let specs = derive_step_specs(&cfg.grid, &cfg.mlp, points)?;
    let p = plan(&cfg.parallelism.strategies, &specs, n)?;

    let spec0 = ScenarioSpec::from_config(cfg, "iteration");
    let ht = run_ht_pipeline(cfg, &spec0)?;
    let layout = AddressLayout::new(&cfg.grid, &cfg.mlp);
    let owners = &ht.map.assignment;
    let feat_dims = crate::nerf::mlp_layer_dims(&cfg.mlp, cfg.grid.levels * cfg.grid.feature_dim);

    let mut per_step: Vec<Vec<u64>> = Vec::new();
    for (planned, spec) in p.steps.iter().zip(&specs) {
        let banks: Vec<u64> = match (planned.strategy, spec.step) {
            (Strategy::ParameterParallel, Kernel::Ht | Kernel::HtB) => {
                // Each bank computes all points over its own levels; its
                // memory time is its slice of the serviced trace.
                let mut owned = vec![0u64; n as usize];
                for (lvl, bank) in owners.level_bank.iter().enumerate() {
                    let _ = lvl;
                    owned[*bank as usize] += 1;
                }
                (0..n as usize)
                    .map(|b| {
                        let work = KernelWorkItem {
                            kernel: spec.step,
                            points: ht.ht_stats.points,
                            levels: owned[b],
                            feature_dim: cfg.grid.feature_dim as u64,
                            layer_dims: vec![],
                        };
                        let c = compute_cycles(&work, &cfg.engine);
                        let m = ht.service.per_bank_cycles[b];
                        combine_overlap(c, m, &cfg.timing, &cfg.engine).total_cycles
                    })
                    .collect()
            }
            _ => {
                // Data parallel: each bank takes points/n and streams its
                // slice of the MLP tensors locally.
                let share = points.div_ceil(n as u64);
                let work = KernelWorkItem {
                    kernel: spec.step,
                    points: share,
                    levels: cfg.grid.levels as u64,
                    feature_dim: cfg.grid.feature_dim as u64,
                    layer_dims: feat_dims.clone(),
                };
                let c = compute_cycles(&work, &cfg.engine);
                let slice = MlpTraceSpec {
                    input_bytes: spec.input_bytes / n as u64,
                    param_bytes: spec.param_bytes,
                    output_bytes: spec.output_bytes / n as u64,
                    intermediate_bytes: spec.intermediate_bytes / n as u64,
                };
                let t = generate_mlp_trace(&slice, &layout, spec.step, cfg.geometry.row_bytes);
                let svc = service_trace(&t, &ht.map, &cfg.timing, cfg.mapping.scheduler, false)?;
                let m = svc.stats.total_cycles;
                vec![combine_overlap(c, m, &cfg.timing, &cfg.engine).total_cycles; n as usize]
            }
        };
        per_step.push(banks);
    }
    let result = schedule_iteration(&p, &per_step, cfg.parallelism.link_bytes_per_cycle)?;
    Ok((p, result))
}

/// Single-scenario simulation report (the `sim` subcommand).
pub fn run_sim(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(cfg.fingerprint());
    let spec = ScenarioSpec::from_config(cfg, "default");
    report.scenarios.push(scenario_report(cfg, &spec)?);

    let pts = uniform_points(2000, cfg.workload.seed);
    for kind in [HashKind::Morton, HashKind::XorSpatial] {
        let h = neighbor_distance_histogram(&cfg.grid, &pts, kind)?;
        report.histograms.push((format!("{kind:?}"), h));
    }
    let (p, _) = iteration(cfg)?;
    report.ledgers.push(LedgerEntry::new("configured", &p.ledger));
    Ok(report)
}

/// The four-corner sweep: hash kind × ordering/register, plus mapping
/// comparisons (the `sweep` subcommand).
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(cfg.fingerprint());
    let variants = [
        ("morton_rayfirst_reg", HashKind::Morton, StreamOrder::RayFirst, true),
        ("morton_random_noreg", HashKind::Morton, StreamOrder::RandomShuffle, false),
        ("xor_rayfirst_reg", HashKind::XorSpatial, StreamOrder::RayFirst, true),
        ("xor_random_noreg", HashKind::XorSpatial, StreamOrder::RandomShuffle, false),
    ];
    for (name, kind, order, reg) in variants {
        let spec = ScenarioSpec {
            name: name.into(),
            hash_kind: kind,
            order,
            register_model: reg,
            mapping: cfg.mapping.policy,
        };
        report.scenarios.push(scenario_report(cfg, &spec)?);
    }
    // All pairwise effective-bandwidth ratios over the 2x2 corner grid.
    for i in 0..4 {
        for j in (i + 1)..4 {
            let (a, b) = (&report.scenarios[i], &report.scenarios[j]);
            report.comparisons.push(Comparison {
                metric: "effective_bandwidth".into(),
                scenario_a: a.name.clone(),
                scenario_b: b.name.clone(),
                ratio: improvement_ratio(
                    a.effective_bytes_per_cycle,
                    b.effective_bytes_per_cycle,
                ),
            });
        }
    }
    // Mapping axis on the default scenario.
    for (name, policy) in [
        ("map_intra_level", MappingPolicy::IntraLevel),
        ("map_row_major", MappingPolicy::RowMajor),
    ] {
        let spec = ScenarioSpec {
            mapping: policy,
            ..ScenarioSpec::from_config(cfg, name)
        };
        report.scenarios.push(scenario_report(cfg, &spec)?);
    }
    // Strategy axis: analytic ledgers for the three plans.
    let specs = derive_step_specs(&cfg.grid, &cfg.mlp, cfg.workload.batch_points)?;
    let n = cfg.geometry.banks_per_chip;
    for (name, strategies) in [
        ("heterogeneous", crate::parallelism::default_strategies()),
        ("pure_data_parallel", [Strategy::DataParallel; 4]),
        ("pure_parameter_parallel", [Strategy::ParameterParallel; 4]),
    ] {
        let p = plan(&strategies, &specs, n)?;
        report.ledgers.push(LedgerEntry::new(name, &p.ledger));
    }
    Ok(report)
}

pub fn uniform_points(n: usize, seed: u64) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            Point3::new([
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.0..1.0),
            ])
            .unwrap()
        })
        .collect()
}
