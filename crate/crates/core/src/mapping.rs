//! Logical-to-physical address mapping: the baseline row-major decode,
//! the intra-level subarray interleave, and the level-to-bank grouping.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::hashgrid::HashGridConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DramGeometry {
    pub channels: u32,
    pub ranks_per_channel: u32,
    pub banks_per_chip: u32,
    pub subarrays_per_bank: u32,
    pub row_bytes: u64,
    pub rows_per_subarray: u64,
}

impl Default for DramGeometry {
    fn default() -> Self {
        DramGeometry {
            channels: 1,
            ranks_per_channel: 1,
            banks_per_chip: 16,
            subarrays_per_bank: 8,
            row_bytes: 1024,
            rows_per_subarray: 16384,
        }
    }
}

impl DramGeometry {
    pub fn bank_capacity_bytes(&self) -> u64 {
        self.subarrays_per_bank as u64 * self.rows_per_subarray * self.row_bytes
    }

    pub fn total_capacity_bytes(&self) -> u64 {
        self.bank_capacity_bytes()
            * self.banks_per_chip as u64
            * self.ranks_per_channel as u64
            * self.channels as u64
    }

    pub fn validate(&self) -> Result<()> {
        let pow2 = |name: &str, v: u64| {
            if v == 0 || !v.is_power_of_two() {
                Err(SimError::Config(format!("{name} must be a nonzero power of two, got {v}")))
            } else {
                Ok(())
            }
        };
        pow2("channels", self.channels as u64)?;
        pow2("ranks_per_channel", self.ranks_per_channel as u64)?;
        pow2("banks_per_chip", self.banks_per_chip as u64)?;
        pow2("row_bytes", self.row_bytes)?;
        pow2("rows_per_subarray", self.rows_per_subarray)?;
        if ![1u32, 2, 4, 8, 16, 32, 64].contains(&self.subarrays_per_bank) {
            return Err(SimError::Config(format!(
                "subarrays_per_bank must be one of 1,2,4,8,16,32,64, got {}",
                self.subarrays_per_bank
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct PhysicalAddress {
    pub channel: u32,
    pub bank: u32,
    pub subarray: u32,
    pub row: u64,
    pub column_byte: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingPolicy {
    RowMajor,
    IntraLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankAssignPolicy {
    AllOneBank,
    GroupedBalanced,
}

fn check_range(addr: u64, geom: &DramGeometry) -> Result<()> {
    if addr >= geom.total_capacity_bytes() {
        return Err(SimError::Domain(format!(
            "address {addr} outside capacity {}",
            geom.total_capacity_bytes()
        )));
    }
    Ok(())
}

/// Baseline decode: column bits lowest, then row, then subarray, then
/// bank, then channel.
pub fn decode_rowmajor(addr: u64, geom: &DramGeometry) -> Result<PhysicalAddress> {
    check_range(addr, geom)?;
    let column_byte = addr % geom.row_bytes;
    let mut rest = addr / geom.row_bytes;
    let row = rest % geom.rows_per_subarray;
    rest /= geom.rows_per_subarray;
    let subarray = (rest % geom.subarrays_per_bank as u64) as u32;
    rest /= geom.subarrays_per_bank as u64;
    let bank = (rest % geom.banks_per_chip as u64) as u32;
    rest /= geom.banks_per_chip as u64;
    let channel = (rest % geom.channels as u64) as u32;
    Ok(PhysicalAddress { channel, bank, subarray, row, column_byte })
}

/// Intra-level decode for a region-relative offset: consecutive rows
/// stripe round-robin across the subarrays of one bank.
pub fn decode_intra_level(
    region_offset: u64,
    bank: u32,
    geom: &DramGeometry,
) -> Result<PhysicalAddress> {
    if region_offset >= geom.bank_capacity_bytes() {
        return Err(SimError::Domain(format!(
            "region offset {region_offset} outside bank capacity {}",
            geom.bank_capacity_bytes()
        )));
    }
    let column_byte = region_offset % geom.row_bytes;
    let row_index = region_offset / geom.row_bytes;
    let subarray = (row_index % geom.subarrays_per_bank as u64) as u32;
    let row = row_index / geom.subarrays_per_bank as u64;
    Ok(PhysicalAddress { channel: 0, bank, subarray, row, column_byte })
}

/// Inverse of `decode_rowmajor` (used to verify bijectivity).
pub fn encode_rowmajor(pa: &PhysicalAddress, geom: &DramGeometry) -> u64 {
    let mut addr = pa.channel as u64;
    addr = addr * geom.banks_per_chip as u64 + pa.bank as u64;
    addr = addr * geom.subarrays_per_bank as u64 + pa.subarray as u64;
    addr = addr * geom.rows_per_subarray + pa.row;
    addr * geom.row_bytes + pa.column_byte
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LevelGroupAssignment {
    /// Bank owning each level, indexed by level.
    pub level_bank: Vec<u32>,
    /// Level sets per owner, in owner order.
    pub owners: Vec<Vec<u32>>,
}

impl LevelGroupAssignment {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,bank\n");
        for (lvl, bank) in self.level_bank.iter().enumerate() {
            s.push_str(&format!("{lvl},{bank}\n"));
        }
        s
    }
}

/// Assign hash-table levels to banks. GroupedBalanced clusters coarse
/// levels ({0-4}, {5-8}, {9-10}) and gives each remaining level its own
/// bank, round-robin over the available banks.
pub fn assign_levels_to_banks(
    grid: &HashGridConfig,
    geom: &DramGeometry,
    policy: BankAssignPolicy,
) -> Result<LevelGroupAssignment> {
    let levels = grid.levels;
    let owners: Vec<Vec<u32>> = match policy {
        BankAssignPolicy::AllOneBank => vec![(0..levels).collect()],
        BankAssignPolicy::GroupedBalanced => {
            let mut owners: Vec<Vec<u32>> = Vec::new();
            let groups: [(u32, u32); 3] = [(0, 4), (5, 8), (9, 10)];
            for (lo, hi) in groups {
                let set: Vec<u32> = (lo..=hi.min(levels.saturating_sub(1))).collect();
                if !set.is_empty() {
                    owners.push(set);
                }
            }
            for l in 11..levels {
                owners.push(vec![l]);
            }
            owners
        }
    };
    if owners.len() > geom.banks_per_chip as usize {
        return Err(SimError::Config(format!(
            "{} level owners need more than the {} available banks",
            owners.len(),
            geom.banks_per_chip
        )));
    }
    let mut level_bank = vec![0u32; levels as usize];
    for (i, set) in owners.iter().enumerate() {
        for &l in set {
            level_bank[l as usize] = (i as u32) % geom.banks_per_chip;
        }
    }
    Ok(LevelGroupAssignment { level_bank, owners })
}
