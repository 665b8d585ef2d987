//! Mask-aware optimizers and the probe / staged training loops. The only
//! module that produces new parameter vectors.
//!
//! Freezing is exact by construction: gradients on frozen coordinates are
//! zeroed before any moment update, the optimizer skips their state entirely,
//! and the final application goes through the masked update, so a frozen
//! coordinate's bits never change — not approximately, bitwise.
//!
//! Batch streams are deterministic. Each training call derives one stream
//! seed from `(config seed, the set of participating task seeds)`; per epoch
//! every task contributes one full pass of its data as minibatches, and the
//! combined list is shuffled into a uniform interleaving. Deriving from the
//! task *set* makes single-group runs line up bit-exactly regardless of which
//! pipeline invoked them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{loss_and_grad, Batch, Matrix, ModelSpec, Targets};
use crate::param_core::{apply_masked_update, FreezeMask, ParamVector, TaskId};
use crate::rng::{derive_seed, fnv1a64, rng_from};
use crate::tasks::{TaskData, TaskSpec};

const SALT_FIT: u64 = 0xF17;
const SALT_PERM: u64 = 0x9E2;
const SALT_MIX: u64 = 0x3D1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Training hyperparameters shared by probes and stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub epochs_probe: usize,
    pub epochs_stage: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            optimizer: OptimizerKind::Adam,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 32,
            epochs_probe: 3,
            epochs_stage: 8,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("lr", "must be positive and finite"));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(Error::config("beta1", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("beta2", "must lie in [0, 1)"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::config("eps", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        Ok(())
    }
}

/// Optimizer state. Adam keeps first/second moment vectors; moments of
/// frozen coordinates are never advanced, so they stay exactly zero while
/// the coordinate is frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step_count: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, dim: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => OptimizerState {
                step_count: 0,
                m: Vec::new(),
                v: Vec::new(),
            },
            OptimizerKind::Adam => OptimizerState {
                step_count: 0,
                m: vec![0.0; dim],
                v: vec![0.0; dim],
            },
        }
    }
}

/// One optimizer step. Frozen coordinates keep their parameter bits and
/// their Adam moments untouched; the proposed update is additionally masked
/// on application.
pub fn optimizer_step(
    state: &mut OptimizerState,
    params: &ParamVector,
    grad_vec: &[f64],
    mask: &FreezeMask,
    cfg: &TrainingConfig,
) -> Result<ParamVector> {
    let dim = params.dim();
    if grad_vec.len() != dim || mask.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: if grad_vec.len() != dim {
                grad_vec.len()
            } else {
                mask.dim()
            },
        });
    }
    if let Some(idx) = grad_vec.iter().position(|g| !g.is_finite()) {
        return Err(Error::non_finite("gradient", idx));
    }

    let mut delta = vec![0.0; dim];
    match cfg.optimizer {
        OptimizerKind::Sgd => {
            for j in 0..dim {
                if mask.is_trainable(j) {
                    delta[j] = -cfg.lr * grad_vec[j];
                }
            }
        }
        OptimizerKind::Adam => {
            if state.m.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: state.m.len(),
                });
            }
            state.step_count += 1;
            let t = state.step_count as i32;
            let bc1 = 1.0 - cfg.beta1.powi(t);
            let bc2 = 1.0 - cfg.beta2.powi(t);
            for j in 0..dim {
                if !mask.is_trainable(j) {
                    continue;
                }
                let g = grad_vec[j];
                state.m[j] = cfg.beta1 * state.m[j] + (1.0 - cfg.beta1) * g;
                state.v[j] = cfg.beta2 * state.v[j] + (1.0 - cfg.beta2) * g * g;
                let m_hat = state.m[j] / bc1;
                let v_hat = state.v[j] / bc2;
                delta[j] = -cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
    }
    apply_masked_update(params, &delta, mask)
}

/// One logged training step: minibatch loss before the update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub stage: usize,
    pub task_id: TaskId,
    pub loss: f64,
}

/// Result of a training call: final parameters, final optimizer state, and
/// the per-step log.
#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub params: ParamVector,
    pub opt_state: OptimizerState,
    pub steps: Vec<StepRecord>,
}

/// Stable salt for a set of tasks: independent of ordering.
fn task_set_salt(task_seeds: &[u64]) -> u64 {
    let mut seeds = task_seeds.to_vec();
    seeds.sort_unstable();
    let mut bytes = Vec::with_capacity(seeds.len() * 8);
    for s in seeds {
        bytes.extend_from_slice(&s.to_le_bytes());
    }
    fnv1a64(&bytes)
}

struct TrainItem<'a> {
    task: &'a TaskSpec,
    inputs: &'a Matrix,
    targets: &'a Targets,
}

fn gather_batch(item: &TrainItem<'_>, rows: &[usize]) -> Result<Batch> {
    let cols = item.inputs.cols();
    let mut inputs = Matrix::zeros(rows.len(), cols);
    for (bi, &r) in rows.iter().enumerate() {
        inputs.row_mut(bi).copy_from_slice(item.inputs.row(r));
    }
    let targets = match item.targets {
        Targets::Regression(t) => {
            let mut sel = Matrix::zeros(rows.len(), t.cols());
            for (bi, &r) in rows.iter().enumerate() {
                sel.row_mut(bi).copy_from_slice(t.row(r));
            }
            Targets::Regression(sel)
        }
        Targets::Labels(l) => Targets::Labels(rows.iter().map(|&r| l[r]).collect()),
    };
    Batch::new(inputs, targets, item.task.id.clone())
}

fn shuffle<T, R: rand::Rng>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

/// Runs `epochs` passes over the uniform mixture of the given tasks' data,
/// every step masked. Tasks must arrive in suite order; the stream seed
/// depends only on `(cfg.seed, set of task seeds)`.
fn run_epochs(
    model: &ModelSpec,
    start: &ParamVector,
    items: &[TrainItem<'_>],
    mask: &FreezeMask,
    cfg: &TrainingConfig,
    epochs: usize,
    stage: usize,
) -> Result<StageOutcome> {
    cfg.validate()?;
    if items.is_empty() {
        return Err(Error::config("tasks", "training needs at least one task"));
    }
    let mut params = start.clone();
    let mut state = OptimizerState::new(cfg.optimizer, params.dim());
    let mut steps = Vec::new();
    if epochs == 0 {
        return Ok(StageOutcome {
            params,
            opt_state: state,
            steps,
        });
    }

    let seeds: Vec<u64> = items.iter().map(|it| it.task.seed).collect();
    let stream_seed = derive_seed(cfg.seed, &[SALT_FIT, task_set_salt(&seeds)]);
    let mut perm_rngs: Vec<_> = items
        .iter()
        .map(|it| rng_from(derive_seed(stream_seed, &[SALT_PERM, it.task.seed])))
        .collect();
    let mut mix_rng = rng_from(derive_seed(stream_seed, &[SALT_MIX]));

    let mut step = 0usize;
    for _epoch in 0..epochs {
        // One full pass per task, minibatches over a fresh permutation.
        let mut batches: Vec<(usize, Vec<usize>)> = Vec::new();
        for (ti, item) in items.iter().enumerate() {
            let n = item.inputs.rows();
            let mut perm: Vec<usize> = (0..n).collect();
            shuffle(&mut perm, &mut perm_rngs[ti]);
            for chunk in perm.chunks(cfg.batch_size) {
                batches.push((ti, chunk.to_vec()));
            }
        }
        shuffle(&mut batches, &mut mix_rng);

        for (ti, rows) in batches {
            let batch = gather_batch(&items[ti], &rows)?;
            let (batch_loss, grad_vec) = loss_and_grad(model, &params, &batch)?;
            if !batch_loss.is_finite() {
                return Err(Error::Diverged {
                    step,
                    loss: batch_loss,
                });
            }
            params = optimizer_step(&mut state, &params, &grad_vec, mask, cfg)?;
            steps.push(StepRecord {
                step,
                stage,
                task_id: items[ti].task.id.clone(),
                loss: batch_loss,
            });
            step += 1;
        }
    }
    Ok(StageOutcome {
        params,
        opt_state: state,
        steps,
    })
}

/// Probe fine-tuning: `epochs_probe` unmasked epochs on one task's data,
/// starting from a copy of `theta0` (which is never modified). With
/// `epochs_probe == 0` the result equals `theta0` exactly.
pub fn probe_finetune(
    theta0: &ParamVector,
    model: &ModelSpec,
    task: &TaskSpec,
    data: &TaskData,
    cfg: &TrainingConfig,
) -> Result<ParamVector> {
    probe_finetune_logged(theta0, model, task, data, cfg).map(|o| o.params)
}

/// [`probe_finetune`] with the optimizer state and step log attached.
/// Probe steps are logged with stage 0.
pub fn probe_finetune_logged(
    theta0: &ParamVector,
    model: &ModelSpec,
    task: &TaskSpec,
    data: &TaskData,
    cfg: &TrainingConfig,
) -> Result<StageOutcome> {
    let items = [TrainItem {
        task,
        inputs: &data.train_inputs,
        targets: &data.train_targets,
    }];
    let mask = FreezeMask::all_trainable(theta0.dim());
    run_epochs(model, theta0, &items, &mask, cfg, cfg.epochs_probe, 0)
}

/// Trains `epochs_stage` epochs on the uniform mixture of the stage's tasks,
/// every step masked. `stage_tasks` are `(spec, data)` pairs in suite order.
pub fn train_stage(
    theta: &ParamVector,
    model: &ModelSpec,
    stage_tasks: &[(&TaskSpec, &TaskData)],
    mask: &FreezeMask,
    cfg: &TrainingConfig,
    stage: usize,
) -> Result<StageOutcome> {
    let items: Vec<TrainItem<'_>> = stage_tasks
        .iter()
        .map(|(task, data)| TrainItem {
            task,
            inputs: &data.train_inputs,
            targets: &data.train_targets,
        })
        .collect();
    run_epochs(model, theta, &items, mask, cfg, cfg.epochs_stage, stage)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{grad, init_params};
    use crate::param_core::mask_from_frozen;
    use crate::rng::standard_normal;
    use crate::tasks::{generate_task, Block, TaskFamily};

    fn block_task(seed: u64, block: Block, n_train: usize) -> TaskSpec {
        TaskSpec {
            id: TaskId::new(format!("task{seed}")),
            family: TaskFamily::BlockRegression,
            block,
            seed,
            n_train,
            n_eval: 16,
            noise_std: 0.0,
            ambient_scale: 0.0,
            ambient_frac: 0.0,
            symmetrize: false,
        }
    }

    fn sgd_cfg(lr: f64, batch_size: usize, epochs: usize) -> TrainingConfig {
        TrainingConfig {
            optimizer: OptimizerKind::Sgd,
            lr,
            batch_size,
            epochs_probe: epochs,
            epochs_stage: epochs,
            seed: 77,
            ..TrainingConfig::default()
        }
    }

    #[test]
    fn sgd_step_examples() {
        let cfg = sgd_cfg(0.1, 8, 1);
        let params = ParamVector::new(vec![0.0, 0.0]).unwrap();
        let grad_vec = [1.0, -2.0];

        let mut state = OptimizerState::new(OptimizerKind::Sgd, 2);
        let mask = FreezeMask::all_trainable(2);
        let out = optimizer_step(&mut state, &params, &grad_vec, &mask, &cfg).unwrap();
        assert!((out.get(0) + 0.1).abs() < 1e-15 && (out.get(1) - 0.2).abs() < 1e-15);

        let mut state = OptimizerState::new(OptimizerKind::Sgd, 2);
        let mask = mask_from_frozen(&[0], 2).unwrap();
        let out = optimizer_step(&mut state, &params, &grad_vec, &mask, &cfg).unwrap();
        assert_eq!(out.get(0), 0.0);
        assert!((out.get(1) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_aborts_step() {
        let cfg = sgd_cfg(0.1, 8, 1);
        let params = ParamVector::new(vec![0.0]).unwrap();
        let mut state = OptimizerState::new(OptimizerKind::Sgd, 1);
        let mask = FreezeMask::all_trainable(1);
        let err = optimizer_step(&mut state, &params, &[f64::INFINITY], &mask, &cfg).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn adam_keeps_frozen_coordinates_and_moments_bit_unchanged() {
        let cfg = TrainingConfig {
            seed: 5,
            ..TrainingConfig::default()
        };
        let dim = 6;
        let frozen = [1usize, 4];
        let mask = mask_from_frozen(&frozen, dim).unwrap();
        let mut params = ParamVector::new(vec![0.3, -0.7, 0.1, 0.9, -0.2, 0.5]).unwrap();
        let before = params.clone();
        let mut state = OptimizerState::new(OptimizerKind::Adam, dim);
        let mut rng = rng_from(11);
        for _ in 0..100 {
            let g: Vec<f64> = (0..dim).map(|_| standard_normal(&mut rng)).collect();
            params = optimizer_step(&mut state, &params, &g, &mask, &cfg).unwrap();
        }
        for &j in &frozen {
            assert_eq!(params.get(j).to_bits(), before.get(j).to_bits());
            assert_eq!(state.m[j], 0.0);
            assert_eq!(state.v[j], 0.0);
        }
        // Trainable coordinates did move.
        assert_ne!(params.get(0).to_bits(), before.get(0).to_bits());
        assert_eq!(state.step_count, 100);
    }

    #[test]
    fn probe_with_zero_epochs_is_identity() {
        let task = block_task(3, Block::new(0, 4), 32);
        let data = generate_task(&task, 8, 1).unwrap();
        let model = ModelSpec::Linear {
            input_dim: 8,
            output_dim: 1,
        };
        let theta0 = init_params(&model, 1).unwrap();
        let cfg = TrainingConfig {
            epochs_probe: 0,
            ..TrainingConfig::default()
        };
        let out = probe_finetune(&theta0, &model, &task, &data, &cfg).unwrap();
        assert!(out.bits_eq(&theta0));
        let mags = crate::param_core::delta_magnitude(&out, &theta0).unwrap();
        assert!(mags.values().iter().all(|&m| m == 0.0));
    }

    #[test]
    fn single_fullbatch_sgd_probe_matches_analytic_gradient() {
        let task = block_task(9, Block::new(0, 4), 24);
        let input_dim = 10;
        let data = generate_task(&task, input_dim, 1).unwrap();
        let model = ModelSpec::Linear {
            input_dim,
            output_dim: 1,
        };
        let theta0 = init_params(&model, 2).unwrap();
        let lr = 0.05;
        let cfg = sgd_cfg(lr, task.n_train, 1);
        let out = probe_finetune(&theta0, &model, &task, &data, &cfg).unwrap();

        let full = Batch::new(
            data.train_inputs.clone(),
            data.train_targets.clone(),
            task.id.clone(),
        )
        .unwrap();
        let g = grad(&model, &theta0, &full).unwrap();
        let mags = crate::param_core::delta_magnitude(&out, &theta0).unwrap();
        for j in 0..theta0.dim() {
            let expect = lr * g[j].abs();
            assert!(
                (mags.values()[j] - expect).abs() <= 1e-12 * (1.0 + expect),
                "coord {j}: {} vs {}",
                mags.values()[j],
                expect
            );
        }
    }

    #[test]
    fn probe_is_pure_and_deterministic() {
        let task = block_task(4, Block::new(2, 6), 40);
        let data = generate_task(&task, 8, 2).unwrap();
        let model = ModelSpec::Linear {
            input_dim: 8,
            output_dim: 2,
        };
        let theta0 = init_params(&model, 5).unwrap();
        let snapshot = theta0.clone();
        let cfg = TrainingConfig {
            seed: 42,
            ..TrainingConfig::default()
        };
        let a = probe_finetune(&theta0, &model, &task, &data, &cfg).unwrap();
        let b = probe_finetune(&theta0, &model, &task, &data, &cfg).unwrap();
        assert!(theta0.bits_eq(&snapshot));
        assert!(a.bits_eq(&b));
        assert!(!a.bits_eq(&theta0));
    }

    #[test]
    fn probe_mass_concentrates_on_block_weights() {
        // Probing a block task puts nearly all |delta| mass on the weights
        // fed by the block's features.
        let task = block_task(21, Block::new(0, 4), 64);
        let input_dim = 12;
        let data = generate_task(&task, input_dim, 1).unwrap();
        let model = ModelSpec::Linear {
            input_dim,
            output_dim: 1,
        };
        let theta0 = init_params(&model, 3).unwrap();
        let cfg = sgd_cfg(0.05, 16, 3);
        let out = probe_finetune(&theta0, &model, &task, &data, &cfg).unwrap();
        let mags = crate::param_core::delta_magnitude(&out, &theta0).unwrap();
        let block_idx = crate::tasks::linear_block_weight_indices(&model, task.block);
        let total: f64 = mags.values().iter().sum();
        let on_block: f64 = block_idx.iter().map(|&j| mags.values()[j]).sum();
        assert!(
            on_block / total >= 0.9,
            "block mass fraction {}",
            on_block / total
        );
    }

    #[test]
    fn train_stage_with_all_frozen_is_identity() {
        let task = block_task(6, Block::new(0, 4), 32);
        let data = generate_task(&task, 8, 1).unwrap();
        let model = ModelSpec::Linear {
            input_dim: 8,
            output_dim: 1,
        };
        let theta = init_params(&model, 7).unwrap();
        let mask = mask_from_frozen(&(0..theta.dim()).collect::<Vec<_>>(), theta.dim()).unwrap();
        let cfg = TrainingConfig::default();
        let out = train_stage(&theta, &model, &[(&task, &data)], &mask, &cfg, 1).unwrap();
        assert!(out.params.bits_eq(&theta));
    }

    #[test]
    fn single_task_stage_equals_probe_with_same_epochs() {
        let task = block_task(8, Block::new(0, 4), 48);
        let data = generate_task(&task, 8, 1).unwrap();
        let model = ModelSpec::Linear {
            input_dim: 8,
            output_dim: 1,
        };
        let theta = init_params(&model, 9).unwrap();
        let cfg = TrainingConfig {
            epochs_probe: 5,
            epochs_stage: 5,
            seed: 13,
            ..TrainingConfig::default()
        };
        let mask = FreezeMask::all_trainable(theta.dim());
        let staged = train_stage(&theta, &model, &[(&task, &data)], &mask, &cfg, 2).unwrap();
        let probed = probe_finetune(&theta, &model, &task, &data, &cfg).unwrap();
        assert!(staged.params.bits_eq(&probed));
    }

    #[test]
    fn frozen_region_survives_a_full_stage_bit_exactly() {
        let t0 = block_task(31, Block::new(0, 4), 40);
        let mut t1 = block_task(32, Block::new(4, 8), 40);
        // Pollute so the stage's gradients actually touch foreign coordinates.
        t1.ambient_scale = 0.8;
        t1.ambient_frac = 1.0;
        let input_dim = 8;
        let model = ModelSpec::Linear {
            input_dim,
            output_dim: 1,
        };
        let d1 = generate_task(&t1, input_dim, 1).unwrap();
        let theta = init_params(&model, 1).unwrap();

        let frozen = crate::tasks::linear_block_weight_indices(&model, t0.block);
        let mask = mask_from_frozen(&frozen, theta.dim()).unwrap();
        let cfg = TrainingConfig {
            seed: 3,
            ..TrainingConfig::default()
        };
        let out = train_stage(&theta, &model, &[(&t1, &d1)], &mask, &cfg, 1).unwrap();
        for &j in &frozen {
            assert_eq!(out.params.get(j).to_bits(), theta.get(j).to_bits());
        }
        // The stage did learn something on its own block.
        let own = crate::tasks::linear_block_weight_indices(&model, t1.block);
        assert!(own.iter().any(|&j| out.params.get(j) != theta.get(j)));
    }

    #[test]
    fn fullbatch_sgd_loss_is_non_increasing_on_convex_task() {
        for seed in [1u64, 2, 3] {
            let task = block_task(seed, Block::new(0, 4), 32);
            let data = generate_task(&task, 8, 1).unwrap();
            let model = ModelSpec::Linear {
                input_dim: 8,
                output_dim: 1,
            };
            let theta = init_params(&model, seed).unwrap();
            let cfg = sgd_cfg(1e-2, task.n_train, 30);
            let mask = FreezeMask::all_trainable(theta.dim());
            let out = train_stage(&theta, &model, &[(&task, &data)], &mask, &cfg, 1).unwrap();
            let losses: Vec<f64> = out.steps.iter().map(|s| s.loss).collect();
            assert_eq!(losses.len(), 30);
            for w in losses.windows(2) {
                assert!(w[1] <= w[0] + 1e-15, "loss increased: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn mixture_interleaving_is_deterministic_and_covers_all_tasks() {
        let t0 = block_task(41, Block::new(0, 4), 24);
        let t1 = block_task(42, Block::new(4, 8), 24);
        let model = ModelSpec::Linear {
            input_dim: 8,
            output_dim: 1,
        };
        let d0 = generate_task(&t0, 8, 1).unwrap();
        let d1 = generate_task(&t1, 8, 1).unwrap();
        let theta = init_params(&model, 2).unwrap();
        let mask = FreezeMask::all_trainable(theta.dim());
        let cfg = TrainingConfig {
            batch_size: 8,
            epochs_stage: 2,
            seed: 19,
            ..TrainingConfig::default()
        };
        let a = train_stage(&theta, &model, &[(&t0, &d0), (&t1, &d1)], &mask, &cfg, 1).unwrap();
        let b = train_stage(&theta, &model, &[(&t0, &d0), (&t1, &d1)], &mask, &cfg, 1).unwrap();
        assert!(a.params.bits_eq(&b.params));
        assert_eq!(a.steps, b.steps);
        // 24/8 = 3 batches per task per epoch, 2 epochs.
        assert_eq!(a.steps.len(), 12);
        let t0_steps = a.steps.iter().filter(|s| s.task_id == t0.id).count();
        assert_eq!(t0_steps, 6);
        // Interleaved, not two monolithic runs.
        let first_six_same_task = a.steps[..6]
            .iter()
            .all(|s| s.task_id == a.steps[0].task_id);
        assert!(!first_six_same_task);
    }
}
