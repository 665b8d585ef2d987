//! Probe fine-tunes every task of the interference benchmark, extracts the
//! core parameter regions, and shows where each task's update mass landed.
//!
//! Run with: cargo run --release --example probe_regions

use dpi::param_core::{delta_magnitude, top_k_region};
use dpi::scheduler::{probe_phase, Method, RunConfig};
use dpi::tasks::{linear_block_weight_indices, make_adversarial_suite};
use dpi::trainer::TrainingConfig;

fn main() -> dpi::Result<()> {
    let seed = 11;
    let suite = make_adversarial_suite(seed)?;
    let cfg = RunConfig {
        suite: suite.clone(),
        training: TrainingConfig {
            lr: 0.01,
            batch_size: 16,
            epochs_probe: 3,
            epochs_stage: 12,
            seed,
            ..TrainingConfig::default()
        },
        p: 1.0,
        tau: 0.1,
        method: Method::Dpi,
        seed,
    };

    let data = suite.generate_all()?;
    let probes = probe_phase(&cfg, &data)?;
    let dim = probes.theta0.dim();
    println!(
        "suite: {} tasks, D = {dim}, p = {} (k = {})",
        suite.n_tasks(),
        cfg.p,
        dpi::param_core::core_region_size(cfg.p, dim)
    );
    println!(
        "\n{:<6} {:<12} {:>10} {:>14} {:>16}",
        "task", "block", "|region|", "block coverage", "own-block mass"
    );

    for (task, theta_i) in suite.tasks.iter().zip(&probes.probe_params) {
        let mags = delta_magnitude(theta_i, &probes.theta0)?;
        let region = top_k_region(&mags, cfg.p, task.id.clone())?;
        let block_idx = linear_block_weight_indices(&suite.model, task.block);

        let covered = block_idx.iter().filter(|j| region.contains(**j)).count();
        let total_mass: f64 = mags.values().iter().sum();
        let block_mass: f64 = block_idx.iter().map(|&j| mags.values()[j]).sum();

        println!(
            "{:<6} [{:>3}, {:>3}) {:>10} {:>11}/{:<2} {:>15.1}%",
            task.id.to_string(),
            task.block.start,
            task.block.end,
            region.len(),
            covered,
            block_idx.len(),
            100.0 * block_mass / total_mass
        );
    }
    Ok(())
}
