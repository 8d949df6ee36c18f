//! Reverse-mode gradients through volume rendering, both MLPs, and the
//! trilinear table lookup, plus a plain gradient-descent training step.

use crate::error::{Result, SimError};
use crate::hashgrid::{cube_entry_indices, cube_vertices, scale_point, HashGridConfig, Point3};

use super::{
    mlp_forward, render_weights, view_encoding, EmbeddingTable, MlpConfig, MlpParams, MlpTrace,
    Ray, RenderSample,
};

/// Gradients with the same shapes as the trainable state.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub table: EmbeddingTable,
    pub mlp: MlpParams,
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub grid: HashGridConfig,
    pub mlp_config: MlpConfig,
    pub table: EmbeddingTable,
    pub params: MlpParams,
    /// Far cap for the last compositing interval.
    pub far_cap: f64,
}

/// One training ray paired with its ground-truth color.
#[derive(Debug, Clone)]
pub struct TrainRay {
    pub ray: Ray,
    pub target: [f64; 3],
}

struct SampleRecord {
    point: Point3,
    trace: MlpTrace,
}

/// Squared-error loss over the ray batch and its full gradient with
/// respect to the embedding table and MLP weights. Hash collisions
/// accumulate gradients additively into the shared entry.
pub fn loss_and_backward(
    batch: &[TrainRay],
    grid: &HashGridConfig,
    mlp_config: &MlpConfig,
    table: &EmbeddingTable,
    params: &MlpParams,
    far_cap: f64,
) -> Result<(f64, Gradients)> {
    let input_dim = grid.levels * grid.feature_dim;
    params.check_dims(input_dim, mlp_config)?;
    let mut grads = Gradients {
        table: EmbeddingTable::zeros(grid),
        mlp: MlpParams::zeros(input_dim, mlp_config),
    };
    let mut loss = 0.0;
    let levels = grid.level_configs();
    let f = grid.feature_dim as usize;

    for train_ray in batch {
        let view = view_encoding(train_ray.ray.direction);
        let mut records: Vec<SampleRecord> = Vec::new();
        let mut samples: Vec<RenderSample> = Vec::new();
        for (i, p) in train_ray.ray.scene_points() {
            let embedding = super::ht_forward(p, grid, table)?;
            let trace = mlp_forward(&embedding, &view, params, mlp_config)?;
            samples.push(RenderSample {
                sigma: trace.sigma,
                color: trace.rgb,
                t: train_ray.ray.t_samples[i],
            });
            records.push(SampleRecord { point: p, trace });
        }
        let weights = render_weights(&samples, far_cap);
        let mut rendered = [0.0f64; 3];
        for (w, s) in weights.iter().zip(&samples) {
            for ch in 0..3 {
                rendered[ch] += w * s.color[ch];
            }
        }
        let mut d_rendered = [0.0f64; 3];
        for ch in 0..3 {
            let diff = rendered[ch] - train_ray.target[ch];
            loss += diff * diff;
            d_rendered[ch] = 2.0 * diff;
        }

        // Suffix sums over w_i * c_i for the transmittance path.
        let n = samples.len();
        let mut suffix = vec![[0.0f64; 3]; n + 1];
        for i in (0..n).rev() {
            for ch in 0..3 {
                suffix[i][ch] = suffix[i + 1][ch] + weights[i] * samples[i].color[ch];
            }
        }
        let mut transmittance = 1.0;
        for (i, rec) in records.iter().enumerate() {
            let delta = if i + 1 < n {
                samples[i + 1].t - samples[i].t
            } else {
                (far_cap - samples[i].t).max(0.0)
            };
            let sig_delta = samples[i].sigma * delta;
            let mut d_sigma = 0.0;
            let mut d_color = [0.0f64; 3];
            for ch in 0..3 {
                d_color[ch] = d_rendered[ch] * weights[i];
                d_sigma += d_rendered[ch]
                    * (transmittance * delta * (-sig_delta).exp() * samples[i].color[ch]
                        - delta * suffix[i + 1][ch]);
            }
            transmittance *= (-sig_delta).exp();
            backprop_sample(
                rec,
                d_sigma,
                d_color,
                &view,
                params,
                mlp_config,
                grid,
                &levels,
                f,
                &mut grads,
            )?;
        }
    }
    Ok((loss, grads))
}

#[allow(clippy::too_many_arguments)]
fn backprop_sample(
    rec: &SampleRecord,
    d_sigma: f64,
    d_color: [f64; 3],
    _view: &[f64],
    params: &MlpParams,
    mlp_config: &MlpConfig,
    grid: &HashGridConfig,
    levels: &[crate::hashgrid::LevelConfig],
    f: usize,
    grads: &mut Gradients,
) -> Result<()> {
    let tr = &rec.trace;

    // Color head: rgb = sigmoid(v3 g2).
    let mut dz3 = [0.0f64; 3];
    for ch in 0..3 {
        dz3[ch] = d_color[ch] * tr.rgb[ch] * (1.0 - tr.rgb[ch]);
    }
    grads.mlp.v3.add_outer(&dz3, &tr.g2, 1.0);
    let dg2 = params.v3.matvec_t(&dz3);
    let dg2_pre: Vec<f64> = dg2
        .iter()
        .zip(&tr.g2_pre)
        .map(|(g, pre)| if *pre > 0.0 { *g } else { 0.0 })
        .collect();
    grads.mlp.v2.add_outer(&dg2_pre, &tr.g1, 1.0);
    let dg1 = params.v2.matvec_t(&dg2_pre);
    let dg1_pre: Vec<f64> = dg1
        .iter()
        .zip(&tr.g1_pre)
        .map(|(g, pre)| if *pre > 0.0 { *g } else { 0.0 })
        .collect();
    grads.mlp.v1.add_outer(&dg1_pre, &tr.color_in, 1.0);
    let d_color_in = params.v1.matvec_t(&dg1_pre);

    // Density features receive gradient from the color input slice and
    // from sigma = exp(d[0]).
    let dout = mlp_config.density_out as usize;
    let mut dd: Vec<f64> = d_color_in[..dout].to_vec();
    dd[0] += d_sigma * tr.sigma;

    grads.mlp.w2.add_outer(&dd, &tr.h, 1.0);
    let dh = params.w2.matvec_t(&dd);
    let dh_pre: Vec<f64> = dh
        .iter()
        .zip(&tr.h_pre)
        .map(|(g, pre)| if *pre > 0.0 { *g } else { 0.0 })
        .collect();
    grads.mlp.w1.add_outer(&dh_pre, &tr.embedding, 1.0);
    let d_embedding = params.w1.matvec_t(&dh_pre);

    // Table lookup: gradient of each vertex entry = weight x upstream.
    for lvl in levels {
        let (base, fracs) = scale_point(rec.point, lvl);
        let cube = cube_vertices(base, fracs);
        let idx = cube_entry_indices(&cube, lvl, grid)?;
        let l = lvl.level_index as usize;
        let up = &d_embedding[l * f..(l + 1) * f];
        for k in 0..8 {
            let slot =
                &mut grads.table.levels[l][idx[k] as usize * f..(idx[k] as usize + 1) * f];
            for (s, u) in slot.iter_mut().zip(up) {
                *s += cube.weights[k] * u;
            }
        }
    }
    Ok(())
}

/// One plain gradient-descent step: params <- params - lr * grad.
/// Aborts with a diagnostic if the loss goes non-finite.
pub fn train_step(state: &mut TrainState, batch: &[TrainRay], learning_rate: f64) -> Result<f64> {
    let (loss, grads) = loss_and_backward(
        batch,
        &state.grid,
        &state.mlp_config,
        &state.table,
        &state.params,
        state.far_cap,
    )?;
    if !loss.is_finite() {
        return Err(SimError::Invariant(format!("non-finite loss {loss} in train_step")));
    }
    for (lvl, g_lvl) in state.table.levels.iter_mut().zip(&grads.table.levels) {
        for (p, g) in lvl.iter_mut().zip(g_lvl) {
            *p -= learning_rate * g;
        }
    }
    let g_mats = grads.mlp.matrices();
    for (p, g) in state.params.matrices_mut().into_iter().zip(g_mats) {
        p.axpy(-learning_rate, g);
    }
    Ok(loss)
}
