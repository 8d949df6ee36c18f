//! Multiresolution hash-grid geometry and the two hash index functions:
//! the original XOR spatial hash and the locality-preserving Morton
//! (Z-order) hash, plus cube-vertex enumeration and trilinear weights.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Coordinates are capped at 12 bits so the interleaved code fits
/// comfortably in 36 bits and covers the default max resolution of 2048.
pub const COORD_BITS: u32 = 12;
pub const MAX_COORD: u32 = (1 << COORD_BITS) - 1;

/// Default primes of the XOR spatial hash. The first prime is 1 so a
/// single-axis coordinate maps to itself.
pub const DEFAULT_XOR_PRIMES: [u32; 3] = [1, 2_654_435_761, 805_459_861];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HashKind {
    XorSpatial,
    Morton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LevelStorage {
    Dense,
    Hashed,
}

/// Geometry of a single resolution level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelConfig {
    pub level_index: u32,
    /// Grid cells per axis (N_l); the lattice has N_l + 1 vertices per axis.
    pub resolution: u32,
    pub storage: LevelStorage,
    pub entries: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HashGridConfig {
    pub levels: u32,
    /// Hash table entries per hashed level; must be a power of two.
    pub table_size: u64,
    pub feature_dim: u32,
    pub bytes_per_feature: u32,
    pub base_resolution: u32,
    pub max_resolution: u32,
    pub hash_kind: HashKind,
    pub xor_primes: [u32; 3],
}

impl Default for HashGridConfig {
    fn default() -> Self {
        Self {
            levels: 16,
            table_size: 1 << 19,
            feature_dim: 2,
            bytes_per_feature: 2,
            base_resolution: 16,
            max_resolution: 2048,
            hash_kind: HashKind::Morton,
            xor_primes: DEFAULT_XOR_PRIMES,
        }
    }
}

impl HashGridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(SimError::Config("levels must be >= 1".into()));
        }
        if !self.table_size.is_power_of_two() {
            return Err(SimError::Config("table_size must be a power of two".into()));
        }
        if self.feature_dim == 0 || self.bytes_per_feature == 0 {
            return Err(SimError::Config("feature_dim and bytes_per_feature must be >= 1".into()));
        }
        if self.base_resolution == 0 || self.base_resolution > self.max_resolution {
            return Err(SimError::Config("need 1 <= base_resolution <= max_resolution".into()));
        }
        if self.max_resolution > MAX_COORD {
            return Err(SimError::Config(format!(
                "max_resolution {} exceeds the {}-bit coordinate cap",
                self.max_resolution, COORD_BITS
            )));
        }
        Ok(())
    }

    /// Per-level growth factor b, with b = 1 for a single level.
    pub fn growth_factor(&self) -> f64 {
        if self.levels <= 1 {
            1.0
        } else {
            (((self.max_resolution as f64).ln() - (self.base_resolution as f64).ln())
                / (self.levels - 1) as f64)
                .exp()
        }
    }

    pub fn level(&self, level_index: u32) -> LevelConfig {
        let b = self.growth_factor();
        let res = ((self.base_resolution as f64) * b.powi(level_index as i32) + 1e-9).floor() as u32;
        let vertices = (res as u64 + 1).pow(3);
        let (storage, entries) = if vertices <= self.table_size {
            (LevelStorage::Dense, vertices)
        } else {
            (LevelStorage::Hashed, self.table_size)
        };
        LevelConfig { level_index, resolution: res, storage, entries }
    }

    pub fn level_configs(&self) -> Vec<LevelConfig> {
        (0..self.levels).map(|l| self.level(l)).collect()
    }

    /// Bytes of one hash-table entry (F features).
    pub fn entry_bytes(&self) -> u32 {
        self.feature_dim * self.bytes_per_feature
    }

    /// Total trainable table entries across all levels.
    pub fn total_entries(&self) -> u64 {
        self.level_configs().iter().map(|l| l.entries).sum()
    }
}

/// A normalized scene point, each component in [0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub coords: [f64; 3],
}

impl Point3 {
    pub fn new(coords: [f64; 3]) -> Result<Self> {
        for c in coords {
            if !(0.0..1.0).contains(&c) {
                return Err(SimError::Domain(format!("point component {c} outside [0,1)")));
            }
        }
        Ok(Self { coords })
    }
}

/// Integer lattice coordinates of one vertex at one level, 0 <= v_i <= N_l.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VertexCoord {
    pub v: [u32; 3],
}

/// The 8 corners of one axis-aligned lattice cell with trilinear weights.
///
/// Vertex k uses the bit convention k = b2 b1 b0 where b_i is the offset
/// along axis i; this ordering is fixed project-wide so traces replay
/// identically.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeVertices {
    pub vertices: [VertexCoord; 8],
    pub weights: [f64; 8],
}

/// Scale a point into the level's lattice: base_i = floor(p_i * N_l),
/// frac_i = p_i * N_l - base_i.
pub fn scale_point(p: Point3, lvl: &LevelConfig) -> (VertexCoord, [f64; 3]) {
    let n = lvl.resolution as f64;
    let mut base = [0u32; 3];
    let mut fracs = [0.0f64; 3];
    for i in 0..3 {
        let s = p.coords[i] * n;
        let b = s.floor();
        base[i] = (b as u32).min(lvl.resolution.saturating_sub(1));
        fracs[i] = s - base[i] as f64;
    }
    (VertexCoord { v: base }, fracs)
}

/// Enumerate the 8 corners of the cell at `base` with trilinear weights.
pub fn cube_vertices(base: VertexCoord, fracs: [f64; 3]) -> CubeVertices {
    let mut vertices = [VertexCoord { v: [0; 3] }; 8];
    let mut weights = [0.0f64; 8];
    for k in 0..8usize {
        let mut v = base.v;
        let mut w = 1.0;
        for axis in 0..3 {
            if (k >> axis) & 1 == 1 {
                v[axis] += 1;
                w *= fracs[axis];
            } else {
                w *= 1.0 - fracs[axis];
            }
        }
        vertices[k] = VertexCoord { v };
        weights[k] = w;
    }
    CubeVertices { vertices, weights }
}

/// Insert two zero bits between adjacent bits of `x`: bit i of the input
/// lands at bit 3*i of the output. Inputs must fit in 12 bits.
pub fn morton_expand(x: u32) -> Result<u64> {
    if x > MAX_COORD {
        return Err(SimError::Domain(format!("morton_expand input {x} exceeds {MAX_COORD}")));
    }
    let mut v = x as u64;
    v = (v | (v << 32)) & 0x001F_0000_0000_FFFF;
    v = (v | (v << 16)) & 0x001F_0000_FF00_00FF;
    v = (v | (v << 8)) & 0x100F_00F0_0F00_F00F;
    v = (v | (v << 4)) & 0x10C3_0C30_C30C_30C3;
    v = (v | (v << 2)) & 0x1249_2492_4924_9249;
    Ok(v)
}

/// The four multiply-and-mask stages of the 10-bit bit-expansion pipeline;
/// equivalent to [`morton_expand`] for inputs below 2^10.
pub fn morton_expand_stages10(x: u32) -> u32 {
    const P: [u32; 4] = [0x0001_0001, 0x0000_0101, 0x0000_0011, 0x0000_0005];
    const Q: [u32; 4] = [0xFF00_00FF, 0x0F00_F00F, 0xC30C_30C3, 0x4924_9249];
    let mut v = x;
    for n in 0..4 {
        v = v.wrapping_mul(P[n]) & Q[n];
    }
    v
}

/// Full 3D Morton code before the table-size reduction; bijective over
/// the coordinate cube.
pub fn morton_code(v: VertexCoord) -> Result<u64> {
    Ok(morton_expand(v.v[0])? + (morton_expand(v.v[1])? << 1) + (morton_expand(v.v[2])? << 2))
}

/// Morton hash: the interleaved code reduced modulo the table size.
pub fn morton_hash(v: VertexCoord, table_size: u64) -> Result<u64> {
    debug_assert!(table_size.is_power_of_two());
    Ok(morton_code(v)? & (table_size - 1))
}

/// XOR spatial hash with wrap-around 32-bit products.
pub fn xor_hash(v: VertexCoord, primes: [u32; 3], table_size: u64) -> u64 {
    debug_assert!(table_size.is_power_of_two());
    let h = primes[0].wrapping_mul(v.v[0])
        ^ primes[1].wrapping_mul(v.v[1])
        ^ primes[2].wrapping_mul(v.v[2]);
    (h as u64) & (table_size - 1)
}

/// Table index of one vertex at one level. Dense levels index row-major
/// without hashing; hashed levels use the configured hash function.
pub fn entry_index(v: VertexCoord, lvl: &LevelConfig, grid: &HashGridConfig) -> Result<u64> {
    match lvl.storage {
        LevelStorage::Dense => {
            let n1 = lvl.resolution as u64 + 1;
            Ok(v.v[0] as u64 + v.v[1] as u64 * n1 + v.v[2] as u64 * n1 * n1)
        }
        LevelStorage::Hashed => match grid.hash_kind {
            HashKind::Morton => morton_hash(v, grid.table_size),
            HashKind::XorSpatial => Ok(xor_hash(v, grid.xor_primes, grid.table_size)),
        },
    }
}

/// The eight table indices of one cube, in the fixed vertex order.
pub fn cube_entry_indices(
    cube: &CubeVertices,
    lvl: &LevelConfig,
    grid: &HashGridConfig,
) -> Result<[u64; 8]> {
    let mut idx = [0u64; 8];
    for (k, vtx) in cube.vertices.iter().enumerate() {
        idx[k] = entry_index(*vtx, lvl, grid)?;
    }
    Ok(idx)
}
