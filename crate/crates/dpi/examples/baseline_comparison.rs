//! Runs the isolation method against all three baselines on the
//! interference benchmark over a fixed set of seeds and prints the combined
//! scoreboard, mean normalized scores, and mean forgetting per method.
//!
//! Run with: cargo run --release --example baseline_comparison

use dpi::evalreport::{build_scoreboard, forgetting, score_row, MethodName};
use dpi::scheduler::{run, Method, RunConfig};
use dpi::tasks::make_adversarial_suite;
use dpi::trainer::TrainingConfig;

fn main() -> dpi::Result<()> {
    let seeds = [11u64, 12, 13, 14, 15];
    let methods = [
        Method::Dpi,
        Method::FullMultitask,
        Method::RandomStages { k: 3 },
        Method::HeuristicStages,
    ];

    let mut rows = Vec::new();
    let mut avg: Vec<(MethodName, Vec<f64>)> =
        methods.iter().map(|m| (m.name(), Vec::new())).collect();
    let mut forget: Vec<(MethodName, Vec<f64>)> =
        methods.iter().map(|m| (m.name(), Vec::new())).collect();

    let mut fingerprint = 0;
    let mut task_ids = Vec::new();
    for &seed in &seeds {
        let suite = make_adversarial_suite(seed)?;
        fingerprint = suite.fingerprint();
        task_ids = suite.task_ids();
        for (mi, &method) in methods.iter().enumerate() {
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
                method,
                seed,
            };
            let result = run(&cfg)?;
            let row = score_row(result.method, seed, &result.timeline)?;
            avg[mi].1.push(row.avg_norm);
            let mean_f: f64 = result
                .timeline
                .task_ids
                .iter()
                .map(|t| forgetting(&result.timeline, t))
                .collect::<dpi::Result<Vec<_>>>()?
                .iter()
                .sum::<f64>()
                / result.timeline.task_ids.len() as f64;
            forget[mi].1.push(mean_f);
            rows.push(row);
        }
        println!("seed {seed} done");
    }

    let board = build_scoreboard(fingerprint, task_ids, rows);
    println!("\n{}", board.render_table());

    println!("method             mean avg_norm   mean forgetting");
    for ((m, avgs), (_, forgets)) in avg.iter().zip(&forget) {
        let mean_avg = avgs.iter().sum::<f64>() / avgs.len() as f64;
        let mean_forget = forgets.iter().sum::<f64>() / forgets.len() as f64;
        println!("{:<18} {:>13.4} {:>17.4}", m.to_string(), mean_avg, mean_forget);
    }
    Ok(())
}
