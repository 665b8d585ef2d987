//! Shows the overlap-driven grouping machinery on two suites: the clean
//! oracle suite (exact block structure, SGD probes) and the interference
//! benchmark (Adam probes with ambient pollution). Prints the similarity
//! matrices and the resulting stage plans.
//!
//! Run with: cargo run --release --example task_grouping

use dpi::isolation::SimilarityMatrix;
use dpi::models::ModelSpec;
use dpi::scheduler::{plan_from_probes, probe_phase, Method, RunConfig};
use dpi::tasks::{
    make_adversarial_suite, Block, TaskFamily, TaskSpec, TaskSuite,
};
use dpi::trainer::{OptimizerKind, TrainingConfig};

fn print_matrix(m: &SimilarityMatrix) {
    print!("{:>6}", "");
    for id in &m.task_ids {
        print!(" {:>6}", id.as_str());
    }
    println!();
    for (i, id) in m.task_ids.iter().enumerate() {
        print!("{:>6}", id.as_str());
        for j in 0..m.n() {
            print!(" {:>6.3}", m.get(i, j));
        }
        println!();
    }
}

/// Clean oracle suite: a shared regression pair plus three disjoint
/// regression tasks, no noise, no pollution. D = 160, so p = 5 gives k = 8,
/// exactly one block's weight count.
fn oracle_suite(seed: u64) -> dpi::Result<TaskSuite> {
    let model = ModelSpec::Linear {
        input_dim: 159,
        output_dim: 1,
    };
    let mut tasks = Vec::new();
    for i in 0..5usize {
        let block = match i {
            0 | 1 => Block::new(0, 8),
            _ => Block::new((i - 1) * 8, i * 8),
        };
        tasks.push(TaskSpec {
            id: dpi::param_core::TaskId::new(format!("t{i}")),
            family: if i < 2 {
                TaskFamily::SharedBlockPair
            } else {
                TaskFamily::BlockRegression
            },
            block,
            seed: seed.wrapping_mul(31).wrapping_add(i as u64),
            n_train: 256,
            n_eval: 256,
            noise_std: 0.0,
            ambient_scale: 0.0,
            ambient_frac: 0.0,
            symmetrize: true,
        });
    }
    TaskSuite::new(
        tasks,
        model,
        vec![vec![0, 1], vec![2], vec![3], vec![4]],
    )
}

fn show(cfg: &RunConfig, label: &str) -> dpi::Result<()> {
    let data = cfg.suite.generate_all()?;
    let probes = probe_phase(cfg, &data)?;
    let (_, plan) = plan_from_probes(cfg, &probes, cfg.p)?;
    println!("== {label} (p = {}, tau = {}) ==", plan.p, plan.tau);
    print_matrix(&plan.similarity);
    for (k, ids) in plan.stage_ids().iter().enumerate() {
        let names: Vec<&str> = ids.iter().map(|t| t.as_str()).collect();
        println!("stage {}: {}", k + 1, names.join(", "));
    }
    println!();
    Ok(())
}

fn main() -> dpi::Result<()> {
    let clean = RunConfig {
        suite: oracle_suite(7)?,
        training: TrainingConfig {
            optimizer: OptimizerKind::Sgd,
            lr: 0.05,
            batch_size: 256,
            epochs_probe: 3,
            seed: 7,
            ..TrainingConfig::default()
        },
        p: 5.0,
        tau: 0.1,
        method: Method::Dpi,
        seed: 7,
    };
    show(&clean, "clean oracle suite (SGD probes)")?;

    let bench = RunConfig {
        suite: make_adversarial_suite(11)?,
        training: TrainingConfig {
            lr: 0.01,
            batch_size: 16,
            epochs_probe: 3,
            epochs_stage: 12,
            seed: 11,
            ..TrainingConfig::default()
        },
        p: 1.0,
        tau: 0.1,
        method: Method::Dpi,
        seed: 11,
    };
    show(&bench, "interference benchmark (Adam probes)")?;
    Ok(())
}
