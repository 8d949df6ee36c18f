//! Functional reference model of the hash-grid NeRF bottleneck pipeline:
//! table lookup + trilinear interpolation, the density and color MLPs,
//! volume rendering, loss, and all backward passes.
//!
//! Reference arithmetic is 64-bit throughout; reduced precisions only
//! matter for byte accounting elsewhere.

mod backward;

pub use backward::{loss_and_backward, train_step, Gradients, TrainRay, TrainState};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::hashgrid::{
    cube_entry_indices, cube_vertices, scale_point, HashGridConfig, Point3,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpConfig {
    pub density_hidden: u32,
    pub density_out: u32,
    pub view_dim: u32,
    pub color_hidden: u32,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self { density_hidden: 64, density_out: 16, view_dim: 16, color_hidden: 64 }
    }
}

impl MlpConfig {
    pub fn color_input_dim(&self) -> u32 {
        self.density_out + self.view_dim
    }

    /// Total weight count for a grid embedding of `input_dim` values.
    pub fn weight_count(&self, input_dim: u32) -> u64 {
        let d = input_dim as u64 * self.density_hidden as u64
            + self.density_hidden as u64 * self.density_out as u64;
        let c = self.color_hidden as u64 * self.color_input_dim() as u64
            + self.color_hidden as u64 * self.color_hidden as u64
            + 3 * self.color_hidden as u64;
        d + c
    }

    /// Chained (in, out) layer shapes across both MLPs, for cycle models.
    pub fn layer_dims(&self, input_dim: u32) -> Vec<(u64, u64)> {
        vec![
            (input_dim as u64, self.density_hidden as u64),
            (self.density_hidden as u64, self.density_out as u64),
            (self.color_input_dim() as u64, self.color_hidden as u64),
            (self.color_hidden as u64, self.color_hidden as u64),
            (self.color_hidden as u64, 3),
        ]
    }
}

/// Free-function alias used by the scheduling pipeline.
pub fn mlp_layer_dims(cfg: &MlpConfig, input_dim: u32) -> Vec<(u64, u64)> {
    cfg.layer_dims(input_dim)
}

/// Dense row-major matrix; just enough linear algebra for the reference MLPs.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn random<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
        Self { rows, cols, data }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            out[r] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// y = A^T x
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * x[r];
            }
        }
        out
    }

    /// self += scale * outer(u, v)
    pub fn add_outer(&mut self, u: &[f64], v: &[f64], scale: f64) {
        assert_eq!(u.len(), self.rows);
        assert_eq!(v.len(), self.cols);
        for r in 0..self.rows {
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (e, b) in row.iter_mut().zip(v) {
                *e += scale * u[r] * b;
            }
        }
    }

    pub fn axpy(&mut self, scale: f64, other: &Matrix) {
        assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }
}

/// Weights of the density and color MLPs (no biases).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    /// density hidden layer, [density_hidden x input_dim]
    pub w1: Matrix,
    /// density output layer, [density_out x density_hidden]
    pub w2: Matrix,
    /// color hidden 1, [color_hidden x (density_out + view_dim)]
    pub v1: Matrix,
    /// color hidden 2, [color_hidden x color_hidden]
    pub v2: Matrix,
    /// color output, [3 x color_hidden]
    pub v3: Matrix,
}

impl MlpParams {
    pub fn zeros(input_dim: u32, cfg: &MlpConfig) -> Self {
        Self {
            w1: Matrix::zeros(cfg.density_hidden as usize, input_dim as usize),
            w2: Matrix::zeros(cfg.density_out as usize, cfg.density_hidden as usize),
            v1: Matrix::zeros(cfg.color_hidden as usize, cfg.color_input_dim() as usize),
            v2: Matrix::zeros(cfg.color_hidden as usize, cfg.color_hidden as usize),
            v3: Matrix::zeros(3, cfg.color_hidden as usize),
        }
    }

    pub fn random<R: Rng>(input_dim: u32, cfg: &MlpConfig, scale: f64, rng: &mut R) -> Self {
        Self {
            w1: Matrix::random(cfg.density_hidden as usize, input_dim as usize, scale, rng),
            w2: Matrix::random(cfg.density_out as usize, cfg.density_hidden as usize, scale, rng),
            v1: Matrix::random(cfg.color_hidden as usize, cfg.color_input_dim() as usize, scale, rng),
            v2: Matrix::random(cfg.color_hidden as usize, cfg.color_hidden as usize, scale, rng),
            v3: Matrix::random(3, cfg.color_hidden as usize, scale, rng),
        }
    }

    pub fn check_dims(&self, input_dim: u32, cfg: &MlpConfig) -> Result<()> {
        let ok = self.w1.rows == cfg.density_hidden as usize
            && self.w1.cols == input_dim as usize
            && self.w2.rows == cfg.density_out as usize
            && self.w2.cols == cfg.density_hidden as usize
            && self.v1.rows == cfg.color_hidden as usize
            && self.v1.cols == cfg.color_input_dim() as usize
            && self.v2.rows == cfg.color_hidden as usize
            && self.v2.cols == cfg.color_hidden as usize
            && self.v3.rows == 3
            && self.v3.cols == cfg.color_hidden as usize;
        if ok {
            Ok(())
        } else {
            Err(SimError::Config("MLP weight shapes do not chain".into()))
        }
    }

    pub fn matrices_mut(&mut self) -> [&mut Matrix; 5] {
        [&mut self.w1, &mut self.w2, &mut self.v1, &mut self.v2, &mut self.v3]
    }

    pub fn matrices(&self) -> [&Matrix; 5] {
        [&self.w1, &self.w2, &self.v1, &self.v2, &self.v3]
    }
}

/// Per-level trainable embedding storage, entries x F per level.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub feature_dim: usize,
    pub levels: Vec<Vec<f64>>,
}

impl EmbeddingTable {
    pub fn zeros(grid: &HashGridConfig) -> Self {
        let f = grid.feature_dim as usize;
        let levels = grid
            .level_configs()
            .iter()
            .map(|l| vec![0.0; l.entries as usize * f])
            .collect();
        Self { feature_dim: f, levels }
    }

    pub fn random<R: Rng>(grid: &HashGridConfig, scale: f64, rng: &mut R) -> Self {
        let mut t = Self::zeros(grid);
        for lvl in &mut t.levels {
            for e in lvl.iter_mut() {
                *e = rng.gen_range(-scale..scale);
            }
        }
        t
    }

    #[inline]
    pub fn entry(&self, level: usize, index: u64) -> &[f64] {
        let f = self.feature_dim;
        &self.levels[level][index as usize * f..(index as usize + 1) * f]
    }
}

/// A ray with sorted sample distances.
#[derive(Debug, Clone, PartialEq)]
pub struct Ray {
    pub origin: [f64; 3],
    pub direction: [f64; 3],
    pub t_samples: Vec<f64>,
}

/// Uniform samples in [t_near, t_far]; a single sample sits at the
/// midpoint. The direction is normalized internally.
pub fn sample_ray(origin: [f64; 3], direction: [f64; 3], n: usize, t_near: f64, t_far: f64) -> Ray {
    let norm = (direction.iter().map(|d| d * d).sum::<f64>()).sqrt();
    let dir = [direction[0] / norm, direction[1] / norm, direction[2] / norm];
    let t_samples = if n == 1 {
        vec![0.5 * (t_near + t_far)]
    } else {
        (0..n)
            .map(|i| t_near + (t_far - t_near) * i as f64 / (n - 1) as f64)
            .collect()
    };
    Ray { origin, direction: dir, t_samples }
}

impl Ray {
    /// Sample points that land inside the [0,1)^3 scene box, with their
    /// sample indices. A ray that misses the box yields an empty list.
    pub fn scene_points(&self) -> Vec<(usize, Point3)> {
        self.t_samples
            .iter()
            .enumerate()
            .filter_map(|(i, t)| {
                let p = [
                    self.origin[0] + t * self.direction[0],
                    self.origin[1] + t * self.direction[1],
                    self.origin[2] + t * self.direction[2],
                ];
                Point3::new(p).ok().map(|p| (i, p))
            })
            .collect()
    }
}

/// One shaded sample along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSample {
    pub sigma: f64,
    pub color: [f64; 3],
    pub t: f64,
}

/// Embedding of a point: per level, interpolate the 8 vertex entries and
/// concatenate in level order (L x F values).
pub fn ht_forward(p: Point3, grid: &HashGridConfig, table: &EmbeddingTable) -> Result<Vec<f64>> {
    let f = grid.feature_dim as usize;
    let mut out = Vec::with_capacity(grid.levels as usize * f);
    for lvl in &grid.level_configs() {
        let (base, fracs) = scale_point(p, lvl);
        let cube = cube_vertices(base, fracs);
        let idx = cube_entry_indices(&cube, lvl, grid)?;
        for fi in 0..f {
            let mut acc = 0.0;
            for k in 0..8 {
                acc += cube.weights[k] * table.entry(lvl.level_index as usize, idx[k])[fi];
            }
            out.push(acc);
        }
    }
    Ok(out)
}

/// Fixed 16-dim view-direction featurizer: the monomial basis
/// {1, x, y, z, xy, xz, yz, x^2, y^2, z^2, x^3, y^3, z^3, xyz, x^2 y, y^2 z}
/// of the unit direction.
pub fn view_encoding(d: [f64; 3]) -> Vec<f64> {
    let [x, y, z] = d;
    vec![
        1.0,
        x,
        y,
        z,
        x * y,
        x * z,
        y * z,
        x * x,
        y * y,
        z * z,
        x * x * x,
        y * y * y,
        z * z * z,
        x * y * z,
        x * x * y,
        y * y * z,
    ]
}

#[inline]
fn relu(x: f64) -> f64 {
    x.max(0.0)
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Intermediate activations of one point's MLP evaluation, kept for the
/// backward pass.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    pub embedding: Vec<f64>,
    pub h_pre: Vec<f64>,
    pub h: Vec<f64>,
    pub density_feat: Vec<f64>,
    pub color_in: Vec<f64>,
    pub g1_pre: Vec<f64>,
    pub g1: Vec<f64>,
    pub g2_pre: Vec<f64>,
    pub g2: Vec<f64>,
    pub rgb: [f64; 3],
    pub sigma: f64,
}

/// Density + color MLP forward pass. Sigma uses an exponential map, rgb a
/// logistic squash.
pub fn mlp_forward(
    embedding: &[f64],
    view_enc: &[f64],
    params: &MlpParams,
    cfg: &MlpConfig,
) -> Result<MlpTrace> {
    if embedding.len() != params.w1.cols {
        return Err(SimError::Config(format!(
            "embedding dim {} does not match MLP input {}",
            embedding.len(),
            params.w1.cols
        )));
    }
    if view_enc.len() != cfg.view_dim as usize {
        return Err(SimError::Config("view encoding dim mismatch".into()));
    }
    let h_pre = params.w1.matvec(embedding);
    let h: Vec<f64> = h_pre.iter().copied().map(relu).collect();
    let density_feat = params.w2.matvec(&h);
    let sigma = density_feat[0].exp();

    let mut color_in = density_feat.clone();
    color_in.extend_from_slice(view_enc);
    let g1_pre = params.v1.matvec(&color_in);
    let g1: Vec<f64> = g1_pre.iter().copied().map(relu).collect();
    let g2_pre = params.v2.matvec(&g1);
    let g2: Vec<f64> = g2_pre.iter().copied().map(relu).collect();
    let rgb_pre = params.v3.matvec(&g2);
    let rgb = [sigmoid(rgb_pre[0]), sigmoid(rgb_pre[1]), sigmoid(rgb_pre[2])];

    Ok(MlpTrace {
        embedding: embedding.to_vec(),
        h_pre,
        h,
        density_feat: density_feat,
        color_in,
        g1_pre,
        g1,
        g2_pre,
        g2,
        rgb,
        sigma,
    })
}

/// Per-sample compositing weights w_i = T_i (1 - exp(-sigma_i delta_i)),
/// with delta_i = t_{i+1} - t_i and the last delta capped at
/// `far_cap - t_N`.
pub fn render_weights(samples: &[RenderSample], far_cap: f64) -> Vec<f64> {
    let n = samples.len();
    let mut weights = vec![0.0; n];
    let mut transmittance = 1.0;
    for i in 0..n {
        let delta = if i + 1 < n {
            samples[i + 1].t - samples[i].t
        } else {
            (far_cap - samples[i].t).max(0.0)
        };
        let alpha = 1.0 - (-samples[i].sigma * delta).exp();
        weights[i] = transmittance * alpha;
        transmittance *= (-samples[i].sigma * delta).exp();
    }
    weights
}

/// Volume-rendered pixel color.
pub fn volume_render(samples: &[RenderSample], far_cap: f64) -> [f64; 3] {
    let w = render_weights(samples, far_cap);
    let mut c = [0.0; 3];
    for (wi, s) in w.iter().zip(samples) {
        for ch in 0..3 {
            c[ch] += wi * s.color[ch];
        }
    }
    c
}
