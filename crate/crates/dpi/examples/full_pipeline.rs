//! Runs the whole isolation pipeline once on the interference benchmark:
//! probes, regions, grouping, staged training with accumulated freezing —
//! then prints the plan, the per-stage score timeline, and the final
//! scoreboard row.
//!
//! Run with: cargo run --release --example full_pipeline

use dpi::evalreport::score_row;
use dpi::scheduler::{run_dpi, Method, RunConfig};
use dpi::tasks::make_adversarial_suite;
use dpi::trainer::TrainingConfig;

fn main() -> dpi::Result<()> {
    let seed = 11;
    let cfg = RunConfig {
        suite: make_adversarial_suite(seed)?,
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

    let result = run_dpi(&cfg)?;
    let plan = result.plan.as_ref().unwrap();

    println!(
        "plan: {} stages at p = {}, tau = {}",
        plan.n_stages(),
        plan.p,
        plan.tau
    );
    for (k, ids) in plan.stage_ids().iter().enumerate() {
        let names: Vec<&str> = ids.iter().map(|t| t.as_str()).collect();
        let frozen = result.stages[k].frozen.len();
        println!(
            "  stage {}: tasks [{}], {} coordinates frozen on entry",
            k + 1,
            names.join(", "),
            frozen
        );
    }

    println!("\nnormalized scores after each stage (boundary 0 = untrained):");
    print!("{:>9}", "boundary");
    for id in &result.timeline.task_ids {
        print!(" {:>8}", id.as_str());
    }
    println!();
    for b in 0..result.timeline.boundaries.len() {
        print!("{b:>9}");
        for t in 0..result.timeline.task_ids.len() {
            print!(" {:>8.3}", result.timeline.score_at(t, b)?);
        }
        println!();
    }

    let row = score_row(result.method, seed, &result.timeline)?;
    println!("\nfinal avg_norm = {:.4}", row.avg_norm);
    println!(
        "total training steps = {} (probes logged as stage 0)",
        result.train_log.len()
    );
    Ok(())
}
