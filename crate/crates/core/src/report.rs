//! Metric aggregation and machine-readable reports.

use serde::Serialize;

use crate::dram::{BandwidthReport, DramStats};
use crate::error::{Result, SimError};
use crate::hashgrid::{
    cube_entry_indices, cube_vertices, scale_point, HashGridConfig, HashKind, Point3,
};
use crate::parallelism::MovementLedger;

/// Index-distance histogram between neighboring vertices of sampled
/// cubes, bucketed at the 16 and 5000 boundaries. Distances are the
/// gaps between consecutive sorted entry indices of each cube (seven
/// gaps per cube), taken over hashed levels only.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct NeighborHistogram {
    pub within_16: u64,
    pub mid_range: u64,
    pub beyond_5000: u64,
}

impl NeighborHistogram {
    pub fn total(&self) -> u64 {
        self.within_16 + self.mid_range + self.beyond_5000
    }

    pub fn fraction_within_16(&self) -> f64 {
        self.within_16 as f64 / self.total() as f64
    }

    pub fn fraction_beyond_5000(&self) -> f64 {
        self.beyond_5000 as f64 / self.total() as f64
    }
}

pub fn neighbor_distance_histogram(
    grid: &HashGridConfig,
    sample_points: &[Point3],
    hash_kind: HashKind,
) -> Result<NeighborHistogram> {
    let grid = HashGridConfig { hash_kind, ..grid.clone() };
    let hashed: Vec<_> = grid
        .level_configs()
        .into_iter()
        .filter(|l| l.storage == crate::hashgrid::LevelStorage::Hashed)
        .collect();
    if hashed.is_empty() {
        return Err(SimError::Config("grid has no hashed levels".into()));
    }
    let mut h = NeighborHistogram::default();
    for p in sample_points {
        for lvl in &hashed {
            let (base, fracs) = scale_point(*p, lvl);
            let cube = cube_vertices(base, fracs);
            let mut idx = cube_entry_indices(&cube, lvl, &grid)?;
            idx.sort_unstable();
            for w in idx.windows(2) {
                let d = w[1] - w[0];
                if d <= 16 {
                    h.within_16 += 1;
                } else if d <= 5000 {
                    h.mid_range += 1;
                } else {
                    h.beyond_5000 += 1;
                }
            }
        }
    }
    Ok(h)
}

/// metric_a / metric_b; `None` when the denominator is zero.
pub fn improvement_ratio(metric_a: f64, metric_b: f64) -> Option<f64> {
    if metric_b == 0.0 || !metric_b.is_finite() || !metric_a.is_finite() {
        None
    } else {
        Some(metric_a / metric_b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub hash_kind: HashKind,
    pub order: crate::workload::StreamOrder,
    pub register_model: bool,
    pub mapping: crate::mapping::MappingPolicy,
    pub points: u64,
    pub total_cycles: u64,
    pub row_hits: u64,
    pub row_misses: u64,
    pub bank_conflicts: u64,
    pub subarray_switches: u64,
    pub row_hit_rate: f64,
    pub register_hit_rate: f64,
    pub rows_per_cube: f64,
    pub peak_bytes_per_cycle: f64,
    pub effective_bytes_per_cycle: f64,
    pub utilization: f64,
}

impl ScenarioReport {
    pub fn from_parts(
        name: &str,
        hash_kind: HashKind,
        order: crate::workload::StreamOrder,
        register_model: bool,
        mapping: crate::mapping::MappingPolicy,
        points: u64,
        stats: &DramStats,
        bw: &BandwidthReport,
        register_hit_rate: f64,
        rows_per_cube: f64,
    ) -> Self {
        ScenarioReport {
            name: name.to_string(),
            hash_kind,
            order,
            register_model,
            mapping,
            points,
            total_cycles: stats.total_cycles,
            row_hits: stats.row_hits,
            row_misses: stats.row_misses,
            bank_conflicts: stats.bank_conflicts,
            subarray_switches: stats.subarray_switches,
            row_hit_rate: if stats.requests == 0 {
                0.0
            } else {
                stats.row_hits as f64 / stats.requests as f64
            },
            register_hit_rate,
            rows_per_cube,
            peak_bytes_per_cycle: bw.peak_bytes_per_cycle,
            effective_bytes_per_cycle: bw.effective_bytes_per_cycle,
            utilization: bw.utilization,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub metric: String,
    pub scenario_a: String,
    pub scenario_b: String,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerEntry {
    pub plan: String,
    pub cat1_duplication_bytes: u64,
    pub cat2_interstep_bytes: u64,
    pub cat3_intrastep_bytes: u64,
    pub cat4_gradient_reduce_bytes: u64,
    pub total_bytes: u64,
}

impl LedgerEntry {
    pub fn new(plan: &str, l: &MovementLedger) -> Self {
        LedgerEntry {
            plan: plan.to_string(),
            cat1_duplication_bytes: l.cat1_duplication_bytes,
            cat2_interstep_bytes: l.cat2_interstep_bytes,
            cat3_intrastep_bytes: l.cat3_intrastep_bytes,
            cat4_gradient_reduce_bytes: l.cat4_gradient_reduce_bytes,
            total_bytes: l.total(),
        }
    }
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config_fingerprint: String,
    pub scenarios: Vec<ScenarioReport>,
    pub comparisons: Vec<Comparison>,
    pub ledgers: Vec<LedgerEntry>,
    pub histograms: Vec<(String, NeighborHistogram)>,
}

impl ExperimentReport {
    pub fn new(fingerprint: String) -> Self {
        ExperimentReport {
            schema_version: REPORT_SCHEMA_VERSION,
            config_fingerprint: fingerprint,
            scenarios: Vec::new(),
            comparisons: Vec::new(),
            ledgers: Vec::new(),
            histograms: Vec::new(),
        }
    }

    /// Deterministic JSON: field order is struct order, no maps involved.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| SimError::Parse(format!("report serialization: {e}")))
    }

    /// Flat CSV export of the per-scenario metrics.
    pub fn scenarios_csv(&self) -> String {
        let mut s = String::from(
            "name,hash_kind,order,register_model,mapping,points,total_cycles,row_hits,row_misses,\
             bank_conflicts,subarray_switches,row_hit_rate,register_hit_rate,rows_per_cube,\
             peak_bytes_per_cycle,effective_bytes_per_cycle,utilization\n",
        );
        for r in &self.scenarios {
            s.push_str(&format!(
                "{},{:?},{:?},{},{:?},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.name,
                r.hash_kind,
                r.order,
                r.register_model,
                r.mapping,
                r.points,
                r.total_cycles,
                r.row_hits,
                r.row_misses,
                r.bank_conflicts,
                r.subarray_switches,
                r.row_hit_rate,
                r.register_hit_rate,
                r.rows_per_cube,
                r.peak_bytes_per_cycle,
                r.effective_bytes_per_cycle,
                r.utilization
            ));
        }
        s
    }

    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("name,within_16,mid_range,beyond_5000\n");
        for (name, h) in &self.histograms {
            s.push_str(&format!("{},{},{},{}\n", name, h.within_16, h.mid_range, h.beyond_5000));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform_points(n: usize, seed: u64) -> Vec<Point3> {
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

    #[test]
    fn histogram_bounds_match_hash_locality() {
        let grid = HashGridConfig::default();
        let pts = uniform_points(3000, 7);
        let morton = neighbor_distance_histogram(&grid, &pts, HashKind::Morton).unwrap();
        let xor = neighbor_distance_histogram(&grid, &pts, HashKind::XorSpatial).unwrap();
        assert!(morton.fraction_within_16() >= 0.75, "{}", morton.fraction_within_16());
        assert!(morton.fraction_beyond_5000() <= 0.05, "{}", morton.fraction_beyond_5000());
        assert!(xor.fraction_within_16() <= 0.65, "{}", xor.fraction_within_16());
        assert!(xor.fraction_beyond_5000() >= 0.10, "{}", xor.fraction_beyond_5000());
        assert!(morton.fraction_within_16() - xor.fraction_within_16() >= 0.15);
    }

    #[test]
    fn histogram_fractions_sum_to_one() {
        let grid = HashGridConfig::default();
        let pts = uniform_points(200, 1);
        let h = neighbor_distance_histogram(&grid, &pts, HashKind::Morton).unwrap();
        let sum = h.fraction_within_16()
            + h.mid_range as f64 / h.total() as f64
            + h.fraction_beyond_5000();
        assert!((sum - 1.0).abs() < 1e-12);
        // 7 gaps per cube per hashed level (11 at defaults).
        assert_eq!(h.total(), 200 * 11 * 7);
    }

    #[test]
    fn single_cube_distances_by_hand() {
        // One cube at a fine hashed level: gaps computed directly from
        // the sorted entry indices must reproduce the histogram.
        let grid = HashGridConfig { levels: 1, base_resolution: 256, max_resolution: 256, ..Default::default() };
        let p = Point3::new([0.301, 0.502, 0.703]).unwrap();
        let lvl = &grid.level_configs()[0];
        let (base, fracs) = scale_point(p, lvl);
        let mut idx = cube_entry_indices(&cube_vertices(base, fracs), lvl, &grid).unwrap();
        idx.sort_unstable();
        let mut expect = NeighborHistogram::default();
        for w in idx.windows(2) {
            match w[1] - w[0] {
                0..=16 => expect.within_16 += 1,
                17..=5000 => expect.mid_range += 1,
                _ => expect.beyond_5000 += 1,
            }
        }
        let h = neighbor_distance_histogram(&grid, &[p], HashKind::Morton).unwrap();
        assert_eq!(h, expect);
        assert_eq!(h.total(), 7);
    }

    #[test]
    fn improvement_ratio_guards() {
        assert_eq!(improvement_ratio(3.0, 3.0), Some(1.0));
        assert_eq!(improvement_ratio(1.0, 0.0), None);
        assert_eq!(improvement_ratio(6.0, 2.0), Some(3.0));
    }

    #[test]
    fn report_json_is_deterministic() {
        let mut r = ExperimentReport::new("abc".into());
        r.histograms.push((
            "m".into(),
            NeighborHistogram { within_16: 5, mid_range: 1, beyond_5000: 0 },
        ));
        let a = r.to_json().unwrap();
        let b = r.to_json().unwrap();
        assert_eq!(a, b);
        assert!(a.contains("\"schema_version\": 1"));
        assert!(r.histogram_csv().contains("m,5,1,0"));
    }
}
