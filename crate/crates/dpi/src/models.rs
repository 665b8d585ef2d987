//! Tiny differentiable model zoo with exact hand-derived gradients and a
//! finite-difference oracle.
//!
//! Three kinds are enough to exercise the pipeline on convex and non-convex
//! losses: a linear map, a one-hidden-layer MLP, and a toy single-head
//! attention block. Regression batches use mean squared error, classification
//! batches softmax cross-entropy. All parameters live in one flat `f64`
//! vector with a fixed layout per kind, so the rest of the pipeline never
//! needs to know about layers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param_core::{ParamVector, TaskId};
use crate::rng::{fnv1a64, rng_from};

/// MLP activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed from pre-activation `x` and activation `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Architecture description. Parameter counts and the stable hash are pure
/// functions of the fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Linear {
        input_dim: usize,
        output_dim: usize,
    },
    Mlp1 {
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        activation: Activation,
    },
    /// Single-head scaled dot-product attention over two tokens: the input is
    /// split into halves, attended, mean-pooled, and projected to the output.
    AttnToy {
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
    },
}

impl ModelSpec {
    pub fn input_dim(&self) -> usize {
        match *self {
            ModelSpec::Linear { input_dim, .. }
            | ModelSpec::Mlp1 { input_dim, .. }
            | ModelSpec::AttnToy { input_dim, .. } => input_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        match *self {
            ModelSpec::Linear { output_dim, .. }
            | ModelSpec::Mlp1 { output_dim, .. }
            | ModelSpec::AttnToy { output_dim, .. } => output_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim() == 0 {
            return Err(Error::config("input_dim", "must be positive"));
        }
        if self.output_dim() == 0 {
            return Err(Error::config("output_dim", "must be positive"));
        }
        match *self {
            ModelSpec::Linear { .. } => Ok(()),
            ModelSpec::Mlp1 { hidden_dim, .. } => {
                if hidden_dim == 0 {
                    Err(Error::config("hidden_dim", "must be positive"))
                } else {
                    Ok(())
                }
            }
            ModelSpec::AttnToy {
                input_dim,
                hidden_dim,
                ..
            } => {
                if hidden_dim == 0 {
                    Err(Error::config("hidden_dim", "must be positive"))
                } else if input_dim % 2 != 0 {
                    Err(Error::config(
                        "input_dim",
                        "attn_toy splits the input into two tokens; input_dim must be even",
                    ))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Total number of flat parameters.
    pub fn param_count(&self) -> usize {
        match *self {
            ModelSpec::Linear {
                input_dim,
                output_dim,
            } => output_dim * input_dim + output_dim,
            ModelSpec::Mlp1 {
                input_dim,
                hidden_dim,
                output_dim,
                ..
            } => hidden_dim * input_dim + hidden_dim + output_dim * hidden_dim + output_dim,
            ModelSpec::AttnToy {
                input_dim,
                hidden_dim,
                output_dim,
            } => {
                let e = input_dim / 2;
                3 * hidden_dim * e + output_dim * hidden_dim + output_dim
            }
        }
    }

    /// Stable 64-bit hash of the architecture, identical across runs and
    /// platforms for equal fields.
    pub fn stable_hash(&self) -> u64 {
        let canon = match *self {
            ModelSpec::Linear {
                input_dim,
                output_dim,
            } => format!("linear({input_dim},{output_dim})"),
            ModelSpec::Mlp1 {
                input_dim,
                hidden_dim,
                output_dim,
                activation,
            } => format!("mlp1({input_dim},{hidden_dim},{output_dim},{activation:?})"),
            ModelSpec::AttnToy {
                input_dim,
                hidden_dim,
                output_dim,
            } => format!("attn_toy({input_dim},{hidden_dim},{output_dim})"),
        };
        fnv1a64(canon.as_bytes())
    }

    /// Flat weight layout: `(offset, rows, cols, fan_in)` per weight block,
    /// followed by bias segments handled separately in `init_params`.
    fn weight_blocks(&self) -> Vec<(usize, usize, usize)> {
        match *self {
            ModelSpec::Linear {
                input_dim,
                output_dim,
            } => vec![(0, output_dim * input_dim, input_dim)],
            ModelSpec::Mlp1 {
                input_dim,
                hidden_dim,
                output_dim,
                ..
            } => {
                let w1 = hidden_dim * input_dim;
                vec![
                    (0, w1, input_dim),
                    (w1 + hidden_dim, output_dim * hidden_dim, hidden_dim),
                ]
            }
            ModelSpec::AttnToy {
                input_dim,
                hidden_dim,
                output_dim,
            } => {
                let e = input_dim / 2;
                let wq = hidden_dim * e;
                vec![
                    (0, wq, e),
                    (wq, wq, e),
                    (2 * wq, wq, e),
                    (3 * wq, output_dim * hidden_dim, hidden_dim),
                ]
            }
        }
    }
}

/// Row-major dense matrix used for batch inputs and regression targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Batch targets: a real matrix for regression, class labels for
/// classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Targets {
    Regression(Matrix),
    Labels(Vec<usize>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Regression(m) => m.rows(),
            Targets::Labels(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A batch of samples for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub inputs: Matrix,
    pub targets: Targets,
    pub task_id: TaskId,
}

impl Batch {
    pub fn new(inputs: Matrix, targets: Targets, task_id: TaskId) -> Result<Self> {
        if inputs.rows() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.rows(),
                got: targets.len(),
            });
        }
        Ok(Batch {
            inputs,
            targets,
            task_id,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Deterministic initialization: each weight block uniform in
/// `(-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases exactly zero.
pub fn init_params(spec: &ModelSpec, seed: u64) -> Result<ParamVector> {
    spec.validate()?;
    let mut values = vec![0.0; spec.param_count()];
    let mut rng = rng_from(seed);
    for (offset, len, fan_in) in spec.weight_blocks() {
        let s = 1.0 / (fan_in as f64).sqrt();
        for v in &mut values[offset..offset + len] {
            *v = rng.gen_range(-s..s);
        }
    }
    ParamVector::new(values)
}

use rand::Rng;

fn check_params(spec: &ModelSpec, params: &ParamVector) -> Result<()> {
    if params.dim() != spec.param_count() {
        return Err(Error::DimensionMismatch {
            expected: spec.param_count(),
            got: params.dim(),
        });
    }
    Ok(())
}

fn check_batch(spec: &ModelSpec, batch: &Batch) -> Result<()> {
    if batch.inputs.cols() != spec.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim(),
            got: batch.inputs.cols(),
        });
    }
    if batch.is_empty() {
        return Err(Error::config("batch", "batch is empty"));
    }
    if let Targets::Regression(t) = &batch.targets {
        if t.cols() != spec.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.output_dim(),
                got: t.cols(),
            });
        }
    }
    if let Targets::Labels(labels) = &batch.targets {
        if let Some(&bad) = labels.iter().find(|&&l| l >= spec.output_dim()) {
            return Err(Error::config(
                "labels",
                format!("label {bad} out of range for output_dim {}", spec.output_dim()),
            ));
        }
    }
    Ok(())
}

/// Per-sample forward pass; returns the output vector and (for the backward
/// pass) whatever intermediate activations the kind needs.
struct Forward {
    out: Vec<f64>,
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    attn: Option<AttnCache>,
}

struct AttnCache {
    q: [Vec<f64>; 2],
    k: [Vec<f64>; 2],
    v: [Vec<f64>; 2],
    attn_weights: [[f64; 2]; 2],
    pooled: Vec<f64>,
}

fn forward_sample(spec: &ModelSpec, params: &[f64], x: &[f64]) -> Forward {
    match *spec {
        ModelSpec::Linear {
            input_dim,
            output_dim,
        } => {
            let b_off = output_dim * input_dim;
            let mut out = vec![0.0; output_dim];
            for o in 0..output_dim {
                let w = &params[o * input_dim..(o + 1) * input_dim];
                let mut acc = params[b_off + o];
                for i in 0..input_dim {
                    acc += w[i] * x[i];
                }
                out[o] = acc;
            }
            Forward {
                out,
                hidden_pre: Vec::new(),
                hidden: Vec::new(),
                attn: None,
            }
        }
        ModelSpec::Mlp1 {
            input_dim,
            hidden_dim,
            output_dim,
            activation,
        } => {
            let w1_off = 0;
            let b1_off = hidden_dim * input_dim;
            let w2_off = b1_off + hidden_dim;
            let b2_off = w2_off + output_dim * hidden_dim;

            let mut hidden_pre = vec![0.0; hidden_dim];
            let mut hidden = vec![0.0; hidden_dim];
            for h in 0..hidden_dim {
                let w = &params[w1_off + h * input_dim..w1_off + (h + 1) * input_dim];
                let mut acc = params[b1_off + h];
                for i in 0..input_dim {
                    acc += w[i] * x[i];
                }
                hidden_pre[h] = acc;
                hidden[h] = activation.apply(acc);
            }
            let mut out = vec![0.0; output_dim];
            for o in 0..output_dim {
                let w = &params[w2_off + o * hidden_dim..w2_off + (o + 1) * hidden_dim];
                let mut acc = params[b2_off + o];
                for h in 0..hidden_dim {
                    acc += w[h] * hidden[h];
                }
                out[o] = acc;
            }
            Forward {
                out,
                hidden_pre,
                hidden,
                attn: None,
            }
        }
        ModelSpec::AttnToy {
            input_dim,
            hidden_dim,
            output_dim,
        } => {
            let e = input_dim / 2;
            let dk = hidden_dim;
            let wq_off = 0;
            let wk_off = dk * e;
            let wv_off = 2 * dk * e;
            let wo_off = 3 * dk * e;
            let bo_off = wo_off + output_dim * dk;
            let tokens = [&x[0..e], &x[e..2 * e]];

            let project = |w_off: usize, t: &[f64]| -> Vec<f64> {
                let mut v = vec![0.0; dk];
                for d in 0..dk {
                    let w = &params[w_off + d * e..w_off + (d + 1) * e];
                    let mut acc = 0.0;
                    for i in 0..e {
                        acc += w[i] * t[i];
                    }
                    v[d] = acc;
                }
                v
            };
            let q = [project(wq_off, tokens[0]), project(wq_off, tokens[1])];
            let k = [project(wk_off, tokens[0]), project(wk_off, tokens[1])];
            let v = [project(wv_off, tokens[0]), project(wv_off, tokens[1])];

            let scale = 1.0 / (dk as f64).sqrt();
            let mut attn_weights = [[0.0; 2]; 2];
            for r in 0..2 {
                let s0 = dot(&q[r], &k[0]) * scale;
                let s1 = dot(&q[r], &k[1]) * scale;
                let m = s0.max(s1);
                let e0 = (s0 - m).exp();
                let e1 = (s1 - m).exp();
                let z = e0 + e1;
                attn_weights[r][0] = e0 / z;
                attn_weights[r][1] = e1 / z;
            }

            let mut pooled = vec![0.0; dk];
            for d in 0..dk {
                let z0 = attn_weights[0][0] * v[0][d] + attn_weights[0][1] * v[1][d];
                let z1 = attn_weights[1][0] * v[0][d] + attn_weights[1][1] * v[1][d];
                pooled[d] = 0.5 * (z0 + z1);
            }

            let mut out = vec![0.0; output_dim];
            for o in 0..output_dim {
                let w = &params[wo_off + o * dk..wo_off + (o + 1) * dk];
                let mut acc = params[bo_off + o];
                for d in 0..dk {
                    acc += w[d] * pooled[d];
                }
                out[o] = acc;
            }
            Forward {
                out,
                hidden_pre: Vec::new(),
                hidden: Vec::new(),
                attn: Some(AttnCache {
                    q,
                    k,
                    v,
                    attn_weights,
                    pooled,
                }),
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss gradient with respect to the model outputs for one sample, already
/// scaled by `1/N`. Also returns the sample's loss contribution (unscaled).
fn output_grad(out: &[f64], targets: &Targets, sample: usize, inv_n: f64) -> (Vec<f64>, f64) {
    match targets {
        Targets::Regression(y) => {
            let yrow = y.row(sample);
            let mut g = vec![0.0; out.len()];
            let mut loss = 0.0;
            for o in 0..out.len() {
                let r = out[o] - yrow[o];
                loss += r * r;
                g[o] = 2.0 * r * inv_n;
            }
            (g, loss)
        }
        Targets::Labels(labels) => {
            let label = labels[sample];
            let m = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = out.iter().map(|&z| (z - m).exp()).collect();
            let z: f64 = exps.iter().sum();
            let loss = -(out[label] - m - z.ln());
            let mut g = vec![0.0; out.len()];
            for o in 0..out.len() {
                let p = exps[o] / z;
                g[o] = (p - if o == label { 1.0 } else { 0.0 }) * inv_n;
            }
            (g, loss)
        }
    }
}

/// Mean loss over the batch: MSE (summed over outputs) for regression,
/// softmax cross-entropy for classification.
pub fn loss(spec: &ModelSpec, params: &ParamVector, batch: &Batch) -> Result<f64> {
    check_params(spec, params)?;
    check_batch(spec, batch)?;
    let n = batch.len();
    let inv_n = 1.0 / n as f64;
    let mut total = 0.0;
    for s in 0..n {
        let fwd = forward_sample(spec, params.values(), batch.inputs.row(s));
        if let Some(idx) = fwd.out.iter().position(|v| !v.is_finite()) {
            return Err(Error::non_finite("forward output", idx));
        }
        let (_, sample_loss) = output_grad(&fwd.out, &batch.targets, s, inv_n);
        total += sample_loss;
    }
    Ok(total * inv_n)
}

/// Model outputs for every sample in the batch; used by evaluation.
pub fn forward_outputs(
    spec: &ModelSpec,
    params: &ParamVector,
    batch: &Batch,
) -> Result<Vec<Vec<f64>>> {
    check_params(spec, params)?;
    check_batch(spec, batch)?;
    let mut out = Vec::with_capacity(batch.len());
    for s in 0..batch.len() {
        let fwd = forward_sample(spec, params.values(), batch.inputs.row(s));
        if let Some(idx) = fwd.out.iter().position(|v| !v.is_finite()) {
            return Err(Error::non_finite("forward output", idx));
        }
        out.push(fwd.out);
    }
    Ok(out)
}

/// Exact analytic gradient of [`loss`] with respect to every parameter.
pub fn grad(spec: &ModelSpec, params: &ParamVector, batch: &Batch) -> Result<Vec<f64>> {
    loss_and_grad(spec, params, batch).map(|(_, g)| g)
}

/// One backward pass returning both the batch loss and the full gradient.
/// The loss value is bit-identical to [`loss`] on the same inputs.
pub fn loss_and_grad(
    spec: &ModelSpec,
    params: &ParamVector,
    batch: &Batch,
) -> Result<(f64, Vec<f64>)> {
    check_params(spec, params)?;
    check_batch(spec, batch)?;
    let n = batch.len();
    let inv_n = 1.0 / n as f64;
    let p = params.values();
    let mut g = vec![0.0; params.dim()];
    let mut total_loss = 0.0;

    for s in 0..n {
        let x = batch.inputs.row(s);
        let fwd = forward_sample(spec, p, x);
        if let Some(idx) = fwd.out.iter().position(|v| !v.is_finite()) {
            return Err(Error::non_finite("forward output", idx));
        }
        let (dout, sample_loss) = output_grad(&fwd.out, &batch.targets, s, inv_n);
        total_loss += sample_loss;

        match *spec {
            ModelSpec::Linear {
                input_dim,
                output_dim,
            } => {
                let b_off = output_dim * input_dim;
                for o in 0..output_dim {
                    let go = dout[o];
                    if go == 0.0 {
                        continue;
                    }
                    let row = &mut g[o * input_dim..(o + 1) * input_dim];
                    for i in 0..input_dim {
                        row[i] += go * x[i];
                    }
                    g[b_off + o] += go;
                }
            }
            ModelSpec::Mlp1 {
                input_dim,
                hidden_dim,
                output_dim,
                activation,
            } => {
                let b1_off = hidden_dim * input_dim;
                let w2_off = b1_off + hidden_dim;
                let b2_off = w2_off + output_dim * hidden_dim;

                let mut dhidden = vec![0.0; hidden_dim];
                for o in 0..output_dim {
                    let go = dout[o];
                    let w2 = &p[w2_off + o * hidden_dim..w2_off + (o + 1) * hidden_dim];
                    for h in 0..hidden_dim {
                        g[w2_off + o * hidden_dim + h] += go * fwd.hidden[h];
                        dhidden[h] += go * w2[h];
                    }
                    g[b2_off + o] += go;
                }
                for h in 0..hidden_dim {
                    let dpre =
                        dhidden[h] * activation.derivative(fwd.hidden_pre[h], fwd.hidden[h]);
                    if dpre == 0.0 {
                        continue;
                    }
                    let row = &mut g[h * input_dim..(h + 1) * input_dim];
                    for i in 0..input_dim {
                        row[i] += dpre * x[i];
                    }
                    g[b1_off + h] += dpre;
                }
            }
            ModelSpec::AttnToy {
                input_dim,
                hidden_dim,
                output_dim,
            } => {
                let e = input_dim / 2;
                let dk = hidden_dim;
                let wq_off = 0;
                let wk_off = dk * e;
                let wv_off = 2 * dk * e;
                let wo_off = 3 * dk * e;
                let bo_off = wo_off + output_dim * dk;
                let cache = fwd.attn.as_ref().expect("attn cache");
                let tokens = [&x[0..e], &x[e..2 * e]];
                let scale = 1.0 / (dk as f64).sqrt();

                // Output projection.
                let mut dpooled = vec![0.0; dk];
                for o in 0..output_dim {
                    let go = dout[o];
                    let w = &p[wo_off + o * dk..wo_off + (o + 1) * dk];
                    for d in 0..dk {
                        g[wo_off + o * dk + d] += go * cache.pooled[d];
                        dpooled[d] += go * w[d];
                    }
                    g[bo_off + o] += go;
                }

                // Mean pooling: dz_r = dpooled / 2 for both token rows.
                let mut dv = [vec![0.0; dk], vec![0.0; dk]];
                let mut dscore = [[0.0; 2]; 2];
                for r in 0..2 {
                    // da_{rs} = dz_r . v_s
                    let mut da = [0.0; 2];
                    for s_tok in 0..2 {
                        let mut acc = 0.0;
                        for d in 0..dk {
                            acc += 0.5 * dpooled[d] * cache.v[s_tok][d];
                        }
                        da[s_tok] = acc;
                        for d in 0..dk {
                            dv[s_tok][d] += 0.5 * dpooled[d] * cache.attn_weights[r][s_tok];
                        }
                    }
                    // Softmax backward per row.
                    let a = cache.attn_weights[r];
                    let inner = a[0] * da[0] + a[1] * da[1];
                    dscore[r][0] = a[0] * (da[0] - inner);
                    dscore[r][1] = a[1] * (da[1] - inner);
                }

                let mut dq = [vec![0.0; dk], vec![0.0; dk]];
                let mut dkk = [vec![0.0; dk], vec![0.0; dk]];
                for r in 0..2 {
                    for s_tok in 0..2 {
                        let ds = dscore[r][s_tok] * scale;
                        if ds == 0.0 {
                            continue;
                        }
                        for d in 0..dk {
                            dq[r][d] += ds * cache.k[s_tok][d];
                            dkk[s_tok][d] += ds * cache.q[r][d];
                        }
                    }
                }

                // Projection weights: dW += dvec ⊗ token.
                for t in 0..2 {
                    for d in 0..dk {
                        let (gq, gk, gv) = (dq[t][d], dkk[t][d], dv[t][d]);
                        let tok = tokens[t];
                        for i in 0..e {
                            g[wq_off + d * e + i] += gq * tok[i];
                            g[wk_off + d * e + i] += gk * tok[i];
                            g[wv_off + d * e + i] += gv * tok[i];
                        }
                    }
                }
            }
        }
    }
    Ok((total_loss * inv_n, g))
}

/// Central-difference gradient estimate, coordinate by coordinate. Test
/// oracle; deliberately a straight-line independent path from [`grad`].
pub fn finite_diff_grad(
    spec: &ModelSpec,
    params: &ParamVector,
    batch: &Batch,
    h: f64,
) -> Result<Vec<f64>> {
    if h <= 0.0 {
        return Err(Error::config("h", "step must be positive"));
    }
    check_params(spec, params)?;
    let mut out = Vec::with_capacity(params.dim());
    let mut work = params.values().to_vec();
    for j in 0..params.dim() {
        let orig = work[j];
        work[j] = orig + h;
        let plus = loss(spec, &ParamVector::new(work.clone())?, batch)?;
        work[j] = orig - h;
        let minus = loss(spec, &ParamVector::new(work.clone())?, batch)?;
        work[j] = orig;
        out.push((plus - minus) / (2.0 * h));
    }
    Ok(out)
}
