//! End-to-end pipelines: the isolation run (probe, group, staged training
//! with dynamic freezing), the three baselines, and the core-percentage
//! sweep.
//!
//! All pipelines share one executor, so reductions hold bit-exactly: a
//! random-stages run with K = 1 is the full multi-task run, and a single-task
//! isolation run is plain fine-tuning. Probes may run in parallel (each
//! starts from its own copy of the initial parameters); results do not
//! depend on the schedule.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalreport::{evaluate, MethodName, RunTimeline, TaskMetric};
use crate::isolation::{
    build_grouping, frozen_set, order_stages, similarity_matrix, verify_plan, GroupingPlan,
};
use crate::models::init_params;
use crate::param_core::{
    delta_magnitude, mask_from_frozen, top_k_region, Checkpoint, CoreRegion, ParamVector,
};
use crate::rng::{derive_seed, rng_from};
use crate::tasks::{TaskData, TaskSuite};
use crate::trainer::{probe_finetune_logged, train_stage, OptimizerState, StepRecord};

const SALT_RANDOM_GROUPS: u64 = 0x6A0;

/// Which pipeline a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dpi,
    FullMultitask,
    RandomStages { k: usize },
    HeuristicStages,
}

impl Method {
    pub fn name(&self) -> MethodName {
        match self {
            Method::Dpi => MethodName::Dpi,
            Method::FullMultitask => MethodName::FullMultitask,
            Method::RandomStages { .. } => MethodName::RandomStages,
            Method::HeuristicStages => MethodName::HeuristicStages,
        }
    }
}

/// Everything a pipeline needs: the suite, training hyperparameters, the
/// core percentage and similarity threshold, the method, and the master
/// seed (parameter init and baseline partitioning).
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub suite: TaskSuite,
    pub training: crate::trainer::TrainingConfig,
    pub p: f64,
    pub tau: f64,
    pub method: Method,
    pub seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.training.validate()?;
        if !(self.p > 0.0 && self.p <= 100.0) {
            return Err(Error::config(
                "p",
                format!("core percentage must lie in (0, 100], got {}", self.p),
            ));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::config(
                "tau",
                format!("similarity threshold must lie in [0, 1], got {}", self.tau),
            ));
        }
        if let Method::RandomStages { k } = self.method {
            if k == 0 {
                return Err(Error::config("stages", "K must be positive"));
            }
            if k > self.suite.n_tasks() {
                return Err(Error::config(
                    "stages",
                    format!(
                        "K = {k} exceeds the number of tasks {}",
                        self.suite.n_tasks()
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// Per-stage artifacts kept in memory for inspection and persistence.
#[derive(Debug, Clone)]
pub struct StageArtifacts {
    /// Suite indices of the tasks trained in this stage.
    pub task_indices: Vec<usize>,
    /// Frozen coordinates entering the stage.
    pub frozen: Vec<usize>,
    /// Parameters at the end of the stage.
    pub checkpoint: Checkpoint,
    /// Optimizer state at the end of the stage.
    pub opt_state: OptimizerState,
}

/// Outcome of one pipeline run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub method: MethodName,
    pub seed: u64,
    pub suite_fingerprint: u64,
    pub theta0: ParamVector,
    pub final_params: ParamVector,
    /// Present for isolation runs only.
    pub plan: Option<GroupingPlan>,
    /// Probe endpoints, in suite order (isolation runs only).
    pub probe_params: Vec<ParamVector>,
    pub stages: Vec<StageArtifacts>,
    pub timeline: RunTimeline,
    pub train_log: Vec<StepRecord>,
}

fn eval_all(
    cfg: &RunConfig,
    data: &[TaskData],
    params: &ParamVector,
    boundary: usize,
) -> Result<Vec<TaskMetric>> {
    cfg.suite
        .tasks
        .iter()
        .zip(data)
        .map(|(task, d)| evaluate(&cfg.suite.model, params, task, &d.eval, boundary))
        .collect()
}

/// Shared stage executor. `plan` drives the freeze masks when present;
/// baselines train every stage fully unmasked.
fn execute_stages(
    cfg: &RunConfig,
    data: &[TaskData],
    theta0: ParamVector,
    stage_sets: Vec<Vec<usize>>,
    plan: Option<GroupingPlan>,
    probe_params: Vec<ParamVector>,
    probe_log: Vec<StepRecord>,
) -> Result<RunResult> {
    let model = &cfg.suite.model;
    let dim = theta0.dim();
    let mut train_log = probe_log;
    let mut boundaries = vec![eval_all(cfg, data, &theta0, 0)?];
    let mut stages = Vec::with_capacity(stage_sets.len());
    let mut params = theta0.clone();

    for (idx, set) in stage_sets.iter().enumerate() {
        let stage_no = idx + 1;
        let frozen = match &plan {
            Some(p) => frozen_set(p, stage_no)?.indices,
            None => Vec::new(),
        };
        let mask = mask_from_frozen(&frozen, dim)?;
        if mask.trainable_count() * 10 < dim {
            log::warn!(
                "stage {stage_no}: only {} of {dim} coordinates trainable (frozen fraction {:.1}%)",
                mask.trainable_count(),
                100.0 * frozen.len() as f64 / dim as f64
            );
        }
        let stage_tasks: Vec<_> = set
            .iter()
            .map(|&i| (&cfg.suite.tasks[i], &data[i]))
            .collect();
        let outcome = train_stage(&params, model, &stage_tasks, &mask, &cfg.training, stage_no)?;
        params = outcome.params;
        let base = train_log.len();
        train_log.extend(outcome.steps.into_iter().map(|mut s| {
            s.step += base;
            s
        }));
        boundaries.push(eval_all(cfg, data, &params, stage_no)?);
        stages.push(StageArtifacts {
            task_indices: set.clone(),
            frozen,
            checkpoint: Checkpoint::new(
                params.clone(),
                model.stable_hash(),
                cfg.seed,
                stage_no as u32,
            ),
            opt_state: outcome.opt_state,
        });
    }

    let mut task_stage = vec![0usize; cfg.suite.n_tasks()];
    for (idx, set) in stage_sets.iter().enumerate() {
        for &t in set {
            task_stage[t] = idx + 1;
        }
    }
    let timeline = RunTimeline {
        task_ids: cfg.suite.task_ids(),
        task_stage,
        boundaries,
    };
    debug_assert!(timeline.is_complete());

    Ok(RunResult {
        method: cfg.method.name(),
        seed: cfg.seed,
        suite_fingerprint: cfg.suite.fingerprint(),
        theta0,
        final_params: params,
        plan,
        probe_params,
        stages,
        timeline,
        train_log,
    })
}

/// Probe outcome shared between the isolation run and the sweep.
pub struct ProbePhase {
    pub theta0: ParamVector,
    pub probe_params: Vec<ParamVector>,
    pub probe_log: Vec<StepRecord>,
}

/// Probe fine-tunes every task from the shared initial parameters, in
/// parallel. Deterministic regardless of scheduling.
pub fn probe_phase(cfg: &RunConfig, data: &[TaskData]) -> Result<ProbePhase> {
    let theta0 = init_params(&cfg.suite.model, cfg.seed)?;
    let outcomes: Vec<_> = cfg
        .suite
        .tasks
        .par_iter()
        .zip(data.par_iter())
        .map(|(task, d)| probe_finetune_logged(&theta0, &cfg.suite.model, task, d, &cfg.training))
        .collect::<Result<Vec<_>>>()?;
    let mut probe_params = Vec::with_capacity(outcomes.len());
    let mut probe_log = Vec::new();
    for outcome in outcomes {
        let base = probe_log.len();
        probe_log.extend(outcome.steps.into_iter().map(|mut s| {
            s.step += base;
            s
        }));
        probe_params.push(outcome.params);
    }
    Ok(ProbePhase {
        theta0,
        probe_params,
        probe_log,
    })
}

/// Builds the grouping plan from probe results at a given core percentage.
pub fn plan_from_probes(
    cfg: &RunConfig,
    probes: &ProbePhase,
    p: f64,
) -> Result<(Vec<CoreRegion>, GroupingPlan)> {
    let regions: Vec<CoreRegion> = cfg
        .suite
        .tasks
        .iter()
        .zip(&probes.probe_params)
        .map(|(task, theta_i)| {
            let mags = delta_magnitude(theta_i, &probes.theta0)?;
            top_k_region(&mags, p, task.id.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    let similarity = similarity_matrix(&regions)?;
    let groups = build_grouping(&similarity, cfg.tau)?;
    let plan = order_stages(groups, &regions, similarity, cfg.tau, p);
    verify_plan(&plan)?;
    Ok((regions, plan))
}

/// The full isolation pipeline: probe each task, extract core regions,
/// group by overlap, order stages, train with accumulated freezing.
pub fn run_dpi(cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    if cfg.method != Method::Dpi {
        return Err(Error::config("method", "run_dpi requires method = dpi"));
    }
    let data = cfg.suite.generate_all()?;
    let probes = probe_phase(cfg, &data)?;
    run_dpi_with_probes(cfg, &data, probes, cfg.p)
}

fn run_dpi_with_probes(
    cfg: &RunConfig,
    data: &[TaskData],
    probes: ProbePhase,
    p: f64,
) -> Result<RunResult> {
    let (_, plan) = plan_from_probes(cfg, &probes, p)?;
    let stage_sets = plan.stages.clone();
    execute_stages(
        cfg,
        data,
        probes.theta0,
        stage_sets,
        Some(plan),
        probes.probe_params,
        probes.probe_log,
    )
}

/// Baseline: one stage over the uniform mixture of all tasks, no masking.
pub fn run_full_multitask(cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    let data = cfg.suite.generate_all()?;
    let theta0 = init_params(&cfg.suite.model, cfg.seed)?;
    let all: Vec<usize> = (0..cfg.suite.n_tasks()).collect();
    execute_stages(cfg, &data, theta0, vec![all], None, Vec::new(), Vec::new())
}

/// Baseline: tasks shuffled by seed into K near-equal groups, trained
/// sequentially with full parameters.
pub fn run_random_stages(cfg: &RunConfig, k: usize) -> Result<RunResult> {
    cfg.validate()?;
    let n = cfg.suite.n_tasks();
    if k == 0 {
        return Err(Error::config("stages", "K must be positive"));
    }
    if k > n {
        return Err(Error::config(
            "stages",
            format!("K = {k} exceeds the number of tasks {n}"),
        ));
    }
    let data = cfg.suite.generate_all()?;
    let theta0 = init_params(&cfg.suite.model, cfg.seed)?;

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_from(derive_seed(cfg.seed, &[SALT_RANDOM_GROUPS]));
    for i in (1..n).rev() {
        let j = rand::Rng::gen_range(&mut rng, 0..=i);
        order.swap(i, j);
    }
    // Round-robin split of the shuffled order.
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, task) in order.into_iter().enumerate() {
        sets[i % k].push(task);
    }
    for set in &mut sets {
        set.sort_unstable();
    }
    execute_stages(cfg, &data, theta0, sets, None, Vec::new(), Vec::new())
}

/// Baseline: two stages grouped by task family, regression families first,
/// full-parameter training. A single-family suite collapses to one stage.
pub fn run_heuristic_stages(cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    let data = cfg.suite.generate_all()?;
    let theta0 = init_params(&cfg.suite.model, cfg.seed)?;
    let regression: Vec<usize> = (0..cfg.suite.n_tasks())
        .filter(|&i| !cfg.suite.tasks[i].family.is_classification())
        .collect();
    let classification: Vec<usize> = (0..cfg.suite.n_tasks())
        .filter(|&i| cfg.suite.tasks[i].family.is_classification())
        .collect();
    let sets: Vec<Vec<usize>> = [regression, classification]
        .into_iter()
        .filter(|s| !s.is_empty())
        .collect();
    execute_stages(cfg, &data, theta0, sets, None, Vec::new(), Vec::new())
}

/// Dispatches on the configured method.
pub fn run(cfg: &RunConfig) -> Result<RunResult> {
    match cfg.method {
        Method::Dpi => run_dpi(cfg),
        Method::FullMultitask => run_full_multitask(cfg),
        Method::RandomStages { k } => run_random_stages(cfg, k),
        Method::HeuristicStages => run_heuristic_stages(cfg),
    }
}

/// Core-percentage sweep: probes once, then runs the isolation pipeline for
/// each `p` against the shared probe checkpoints.
pub fn ablate_p(cfg: &RunConfig, p_values: &[f64]) -> Result<Vec<(f64, RunResult)>> {
    cfg.validate()?;
    if cfg.method != Method::Dpi {
        return Err(Error::config("method", "ablate_p requires method = dpi"));
    }
    if p_values.is_empty() {
        return Err(Error::config("p_values", "sweep needs at least one p"));
    }
    for &p in p_values {
        if !(p > 0.0 && p <= 100.0) {
            return Err(Error::config(
                "p_values",
                format!("core percentage must lie in (0, 100], got {p}"),
            ));
        }
    }
    let data = cfg.suite.generate_all()?;
    let probes = probe_phase(cfg, &data)?;
    let mut out = Vec::with_capacity(p_values.len());
    for &p in p_values {
        let probes_for_p = ProbePhase {
            theta0: probes.theta0.clone(),
            probe_params: probes.probe_params.clone(),
            probe_log: probes.probe_log.clone(),
        };
        out.push((p, run_dpi_with_probes(cfg, &data, probes_for_p, p)?));
    }
    Ok(out)
}
