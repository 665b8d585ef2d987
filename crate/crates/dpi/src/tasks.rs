//! Synthetic heterogeneous task suites with known ground-truth parameter
//! usage.
//!
//! Every task depends on a contiguous *block* of input features: regression
//! targets are a hidden linear map of the block, classification labels the
//! sign of a hidden separator over the block. Because the generating function
//! ignores all other coordinates, a linear model's analytic gradients vanish
//! exactly outside the block's weights (biases aside) whenever those
//! coordinates are zero in the data — which turns core-region claims into
//! checkable oracles.
//!
//! Two knobs control cross-task interference for benchmark suites:
//! `ambient_scale` puts i.i.d. noise on a seeded subset (`ambient_frac`) of
//! each task's off-block coordinates in its *training* data. Training on such
//! a task then drags other tasks' weights toward zero unless they are frozen,
//! which is precisely the failure mode isolation is meant to prevent. Eval
//! batches stay clean (off-block zero, noiseless targets) so metrics measure
//! the task itself.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Batch, Matrix, ModelSpec, Targets};
use crate::param_core::TaskId;
use crate::rng::{derive_seed, fnv1a64, rng_from, standard_normal};

const SALT_SUPPORT: u64 = 0x5150;
const SALT_TRAIN: u64 = 0x7121;
const SALT_EVAL: u64 = 0xE7A1;

/// Contiguous half-open range of input features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub start: usize,
    pub end: usize,
}

impl Block {
    pub fn new(start: usize, end: usize) -> Self {
        Block { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn contains(&self, j: usize) -> bool {
        j >= self.start && j < self.end
    }
}

/// Task family. `SharedBlockPair` marks regression tasks that deliberately
/// share their block with another task; it behaves like `BlockRegression`
/// sample-wise and counts as a regression family for heuristic grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskFamily {
    BlockRegression,
    BlockClassification,
    SharedBlockPair,
}

impl TaskFamily {
    pub fn is_classification(self) -> bool {
        matches!(self, TaskFamily::BlockClassification)
    }
}

/// Full description of one synthetic task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: TaskId,
    pub family: TaskFamily,
    pub block: Block,
    pub seed: u64,
    pub n_train: usize,
    pub n_eval: usize,
    pub noise_std: f64,
    /// Scale of i.i.d. inputs on polluted off-block coordinates in training
    /// data; 0 keeps all off-block training inputs exactly zero.
    pub ambient_scale: f64,
    /// Fraction of off-block coordinates that get polluted (seeded subset).
    pub ambient_frac: f64,
    /// Emit samples in (x, -x) mirror pairs. Under full-batch gradient
    /// descent on a linear model the bias gradient is then exactly zero, so
    /// probe deltas stay confined to the block weights — the exact-oracle
    /// configuration.
    pub symmetrize: bool,
}

impl TaskSpec {
    pub fn validate(&self, input_dim: usize) -> Result<()> {
        if self.block.is_empty() || self.block.end > input_dim {
            return Err(Error::config(
                "block",
                format!(
                    "block [{}, {}) out of range for input_dim {input_dim}",
                    self.block.start, self.block.end
                ),
            ));
        }
        if self.n_train == 0 {
            return Err(Error::config("n_train", "must be positive"));
        }
        if self.n_eval == 0 {
            return Err(Error::config("n_eval", "must be positive"));
        }
        if self.noise_std < 0.0 {
            return Err(Error::config("noise_std", "must be non-negative"));
        }
        if self.ambient_scale < 0.0 {
            return Err(Error::config("ambient_scale", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.ambient_frac) {
            return Err(Error::config("ambient_frac", "must lie in [0, 1]"));
        }
        if self.symmetrize && (self.n_train % 2 != 0 || self.n_eval % 2 != 0) {
            return Err(Error::config(
                "symmetrize",
                "mirrored sampling needs even n_train and n_eval",
            ));
        }
        Ok(())
    }
}

/// Generated data for one task: the full training set plus a held-out eval
/// batch. The trainer slices the training set into minibatches.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub train_inputs: Matrix,
    pub train_targets: Targets,
    pub eval: Batch,
}

impl TaskData {
    pub fn n_train(&self) -> usize {
        self.train_inputs.rows()
    }
}

/// Hidden generating function: a `(output_dim x block)` map for regression
/// families, a separator over the block for classification.
enum Generator {
    Regression(Matrix),
    Classification(Vec<f64>),
}

fn make_generator(
    spec: &TaskSpec,
    output_dim: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Generator {
    let bl = spec.block.len();
    if spec.family.is_classification() {
        Generator::Classification((0..bl).map(|_| standard_normal(rng)).collect())
    } else {
        let mut w = Matrix::zeros(output_dim, bl);
        for o in 0..output_dim {
            for v in w.row_mut(o) {
                *v = standard_normal(rng);
            }
        }
        Generator::Regression(w)
    }
}

/// Generates the task's data. Deterministic given `(spec, input_dim,
/// output_dim)`; training inputs carry ambient pollution if configured,
/// eval inputs are clean (off-block exactly zero) with noiseless targets.
pub fn generate_task(spec: &TaskSpec, input_dim: usize, output_dim: usize) -> Result<TaskData> {
    spec.validate(input_dim)?;
    if spec.family.is_classification() && output_dim < 2 {
        return Err(Error::config(
            "output_dim",
            "classification tasks need at least 2 model outputs",
        ));
    }

    let mut gen_rng = rng_from(spec.seed);
    let generator = make_generator(spec, output_dim, &mut gen_rng);

    // Seeded pollution support over off-block coordinates.
    let mut support = vec![false; input_dim];
    if spec.ambient_scale > 0.0 && spec.ambient_frac > 0.0 {
        let mut srng = rng_from(derive_seed(spec.seed, &[SALT_SUPPORT]));
        for (j, s) in support.iter_mut().enumerate() {
            if !spec.block.contains(j) {
                *s = rand::Rng::gen::<f64>(&mut srng) < spec.ambient_frac;
            }
        }
    }

    let fill = |n: usize,
                rng: &mut rand_chacha::ChaCha8Rng,
                polluted: bool,
                noise_std: f64|
     -> (Matrix, Targets) {
        let mut inputs = Matrix::zeros(n, input_dim);
        for s in 0..n {
            if spec.symmetrize && s % 2 == 1 {
                let prev = inputs.row(s - 1).to_vec();
                for (v, p) in inputs.row_mut(s).iter_mut().zip(prev) {
                    *v = -p;
                }
                continue;
            }
            let row = inputs.row_mut(s);
            for j in spec.block.start..spec.block.end {
                row[j] = standard_normal(rng);
            }
            if polluted {
                for (j, v) in row.iter_mut().enumerate() {
                    if support[j] {
                        *v = standard_normal(rng) * spec.ambient_scale;
                    }
                }
            }
        }
        let targets = match &generator {
            Generator::Regression(w) => {
                let mut t = Matrix::zeros(n, output_dim);
                for s in 0..n {
                    let x = inputs.row(s).to_vec();
                    for o in 0..output_dim {
                        let wrow = w.row(o);
                        let mut acc = 0.0;
                        for (bi, j) in (spec.block.start..spec.block.end).enumerate() {
                            acc += wrow[bi] * x[j];
                        }
                        if noise_std > 0.0 {
                            acc += noise_std * standard_normal(rng);
                        }
                        t.row_mut(s)[o] = acc;
                    }
                }
                Targets::Regression(t)
            }
            Generator::Classification(w) => {
                let labels = (0..n)
                    .map(|s| {
                        let x = inputs.row(s);
                        let mut margin = 0.0;
                        for (bi, j) in (spec.block.start..spec.block.end).enumerate() {
                            margin += w[bi] * x[j];
                        }
                        if noise_std > 0.0 {
                            margin += noise_std * standard_normal(rng);
                        }
                        usize::from(margin > 0.0)
                    })
                    .collect();
                Targets::Labels(labels)
            }
        };
        (inputs, targets)
    };

    let mut train_rng = rng_from(derive_seed(spec.seed, &[SALT_TRAIN]));
    let (train_inputs, train_targets) = fill(spec.n_train, &mut train_rng, true, spec.noise_std);

    let mut eval_rng = rng_from(derive_seed(spec.seed, &[SALT_EVAL]));
    let (eval_inputs, eval_targets) = fill(spec.n_eval, &mut eval_rng, false, 0.0);
    let eval = Batch::new(eval_inputs, eval_targets, spec.id.clone())?;

    Ok(TaskData {
        train_inputs,
        train_targets,
        eval,
    })
}

/// Suite profile shorthand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteProfile {
    /// Pairwise non-overlapping blocks, all regression.
    Disjoint,
    /// All tasks on the same block with different target functions.
    Overlapping,
    /// A shared pair on block 0 plus disjoint singles (one classification);
    /// the layout the benchmark runs use.
    Mixed,
}

/// Knobs for suite construction beyond the profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    /// Block width; `None` partitions the input evenly across the blocks.
    pub block_size: Option<usize>,
    pub noise_std: f64,
    pub ambient_scale: f64,
    pub ambient_frac: f64,
    pub n_train: usize,
    pub n_eval: usize,
    /// Mirror-pair sampling for exact-oracle configurations.
    pub symmetrize: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            block_size: None,
            noise_std: 0.05,
            ambient_scale: 0.0,
            ambient_frac: 0.0,
            n_train: 256,
            n_eval: 512,
            symmetrize: false,
        }
    }
}

impl SuiteOptions {
    /// Settings for the interference benchmark: small blocks leave room for
    /// an ambient zone, and every task's training data pollutes other
    /// coordinates hard enough that unprotected weights decay.
    pub fn adversarial() -> Self {
        SuiteOptions {
            block_size: Some(8),
            noise_std: 0.05,
            ambient_scale: 0.8,
            ambient_frac: 0.35,
            n_train: 512,
            n_eval: 512,
            symmetrize: false,
        }
    }

    /// Noiseless, pollution-free settings for analytic oracles.
    pub fn clean() -> Self {
        SuiteOptions {
            noise_std: 0.0,
            ..SuiteOptions::default()
        }
    }
}

/// A set of tasks sharing one model, plus the ground-truth grouping the
/// block layout implies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSuite {
    pub tasks: Vec<TaskSpec>,
    pub input_dim: usize,
    pub model: ModelSpec,
    /// Expected grouping by construction (suite indices, each sorted).
    pub expected_groups: Vec<Vec<usize>>,
}

impl TaskSuite {
    pub fn new(
        tasks: Vec<TaskSpec>,
        model: ModelSpec,
        expected_groups: Vec<Vec<usize>>,
    ) -> Result<Self> {
        model.validate()?;
        let input_dim = model.input_dim();
        if tasks.is_empty() {
            return Err(Error::config("tasks", "suite has no tasks"));
        }
        for t in &tasks {
            t.validate(input_dim)?;
            if t.family.is_classification() && model.output_dim() < 2 {
                return Err(Error::config(
                    "output_dim",
                    format!(
                        "task {} is classification but the model has {} output(s)",
                        t.id,
                        model.output_dim()
                    ),
                ));
            }
        }
        let mut ids: Vec<&TaskId> = tasks.iter().map(|t| &t.id).collect();
        ids.sort();
        ids.dedup();
        if ids.len() != tasks.len() {
            return Err(Error::config("tasks", "task ids must be unique"));
        }
        Ok(TaskSuite {
            tasks,
            input_dim,
            model,
            expected_groups,
        })
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn task_ids(&self) -> Vec<TaskId> {
        self.tasks.iter().map(|t| t.id.clone()).collect()
    }

    /// Generates data for every task, in suite order.
    pub fn generate_all(&self) -> Result<Vec<TaskData>> {
        self.tasks
            .iter()
            .map(|t| generate_task(t, self.input_dim, self.model.output_dim()))
            .collect()
    }

    /// Stable identity of the suite configuration; used to refuse merging
    /// reports from different suites.
    pub fn fingerprint(&self) -> u64 {
        let mut canon = format!(
            "suite(input_dim={},model_hash={:x};",
            self.input_dim,
            self.model.stable_hash()
        );
        for t in &self.tasks {
            canon.push_str(&format!(
                "task({},{:?},[{},{}),seed={},n={},{},noise={},amb={},{});",
                t.id,
                t.family,
                t.block.start,
                t.block.end,
                t.seed,
                t.n_train,
                t.n_eval,
                t.noise_std,
                t.ambient_scale,
                t.ambient_frac
            ));
        }
        fnv1a64(canon.as_bytes())
    }
}

/// Builds a benchmark suite with a linear 2-output model and profile
/// defaults. See [`make_benchmark_suite_with`] for the knobs.
pub fn make_benchmark_suite(
    profile: SuiteProfile,
    n_tasks: usize,
    input_dim: usize,
    seed: u64,
) -> Result<TaskSuite> {
    let model = ModelSpec::Linear {
        input_dim,
        output_dim: 2,
    };
    make_benchmark_suite_with(profile, n_tasks, seed, model, &SuiteOptions::default())
}

/// Builds a suite for the given profile, model, and options.
///
/// Block layout:
/// - `disjoint`: task `i` owns block `i`; `n_tasks` blocks.
/// - `overlapping`: every task owns block 0.
/// - `mixed`: tasks 0 and 1 share block 0; task `i >= 2` owns block `i - 1`
///   (`n_tasks - 1` blocks, task 3 classification when present).
pub fn make_benchmark_suite_with(
    profile: SuiteProfile,
    n_tasks: usize,
    seed: u64,
    model: ModelSpec,
    opts: &SuiteOptions,
) -> Result<TaskSuite> {
    if n_tasks < 2 {
        return Err(Error::config("n_tasks", "suite needs at least 2 tasks"));
    }
    let input_dim = model.input_dim();
    let n_blocks = match profile {
        SuiteProfile::Disjoint => n_tasks,
        SuiteProfile::Overlapping => 1,
        SuiteProfile::Mixed => n_tasks - 1,
    };
    let block_size = match opts.block_size {
        Some(bs) => {
            if bs == 0 {
                return Err(Error::config("block_size", "must be positive"));
            }
            bs
        }
        None => {
            // Even partition; `overlapping` mirrors `disjoint` width.
            let divisor = match profile {
                SuiteProfile::Overlapping => n_tasks,
                _ => n_blocks,
            };
            if input_dim % divisor != 0 {
                return Err(Error::config(
                    "input_dim",
                    format!("input_dim {input_dim} is not divisible into {divisor} equal blocks"),
                ));
            }
            input_dim / divisor
        }
    };
    if n_blocks * block_size > input_dim {
        return Err(Error::config(
            "block_size",
            format!("{n_blocks} blocks of {block_size} do not fit into input_dim {input_dim}"),
        ));
    }

    let block = |b: usize| Block::new(b * block_size, (b + 1) * block_size);
    let mut tasks = Vec::with_capacity(n_tasks);
    let mut expected: Vec<Vec<usize>> = Vec::new();
    for i in 0..n_tasks {
        let (family, blk) = match profile {
            SuiteProfile::Disjoint => (TaskFamily::BlockRegression, block(i)),
            SuiteProfile::Overlapping => (TaskFamily::SharedBlockPair, block(0)),
            SuiteProfile::Mixed => {
                if i < 2 {
                    (TaskFamily::SharedBlockPair, block(0))
                } else if i == 3 {
                    (TaskFamily::BlockClassification, block(i - 1))
                } else {
                    (TaskFamily::BlockRegression, block(i - 1))
                }
            }
        };
        tasks.push(TaskSpec {
            id: TaskId::new(format!("t{i}")),
            family,
            block: blk,
            seed: derive_seed(seed, &[i as u64]),
            n_train: opts.n_train,
            n_eval: opts.n_eval,
            noise_std: opts.noise_std,
            ambient_scale: opts.ambient_scale,
            ambient_frac: opts.ambient_frac,
            symmetrize: opts.symmetrize,
        });
    }
    match profile {
        SuiteProfile::Disjoint => {
            expected.extend((0..n_tasks).map(|i| vec![i]));
        }
        SuiteProfile::Overlapping => {
            expected.push((0..n_tasks).collect());
        }
        SuiteProfile::Mixed => {
            expected.push(vec![0, 1]);
            expected.extend((2..n_tasks).map(|i| vec![i]));
        }
    }
    TaskSuite::new(tasks, model, expected)
}

/// The fixed interference benchmark: mixed profile, 5 tasks, a linear model
/// with exactly 2000 parameters (999 inputs x 2 outputs + 2 biases), small
/// signal blocks, and ambient training pollution.
pub fn make_adversarial_suite(seed: u64) -> Result<TaskSuite> {
    let model = ModelSpec::Linear {
        input_dim: 999,
        output_dim: 2,
    };
    make_benchmark_suite_with(
        SuiteProfile::Mixed,
        5,
        seed,
        model,
        &SuiteOptions::adversarial(),
    )
}

/// Flat indices of the weights fed by a feature block, for a linear model.
/// Test oracle for gradient-support claims.
pub fn linear_block_weight_indices(model: &ModelSpec, block: Block) -> Vec<usize> {
    match *model {
        ModelSpec::Linear {
            input_dim,
            output_dim,
        } => {
            let mut out = Vec::with_capacity(output_dim * block.len());
            for o in 0..output_dim {
                for j in block.start..block.end {
                    out.push(o * input_dim + j);
                }
            }
            out
        }
        _ => panic!("block weight indices are defined for linear models only"),
    }
}

/// Flat indices of a linear model's biases.
pub fn linear_bias_indices(model: &ModelSpec) -> Vec<usize> {
    match *model {
        ModelSpec::Linear {
            input_dim,
            output_dim,
        } => (0..output_dim)
            .map(|o| output_dim * input_dim + o)
            .collect(),
        _ => panic!("bias indices are defined for linear models only"),
    }
}

/// Dumps an eval batch to CSV (`x0..x{I-1},y0...` or `...,label`).
pub fn eval_batch_to_csv(batch: &Batch) -> String {
    let cols = batch.inputs.cols();
    let mut out = String::new();
    out.push_str(
        &(0..cols)
            .map(|j| format!("x{j}"))
            .collect::<Vec<_>>()
            .join(","),
    );
    match &batch.targets {
        Targets::Regression(t) => {
            for o in 0..t.cols() {
                out.push_str(&format!(",y{o}"));
            }
        }
        Targets::Labels(_) => out.push_str(",label"),
    }
    out.push('\n');
    for s in 0..batch.len() {
        let row = batch
            .inputs
            .row(s)
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&row);
        match &batch.targets {
            Targets::Regression(t) => {
                for v in t.row(s) {
                    out.push_str(&format!(",{v}"));
                }
            }
            Targets::Labels(l) => out.push_str(&format!(",{}", l[s])),
        }
        out.push('\n');
    }
    out
}
