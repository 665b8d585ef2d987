//! Sweeps the core percentage p on the interference benchmark and prints an
//! ASCII curve of the average normalized score per p, per seed. The probe
//! checkpoints are shared across the sweep; p only changes region
//! extraction.
//!
//! Run with: cargo run --release --example p_sweep

use dpi::evalreport::score_row;
use dpi::scheduler::{ablate_p, Method, RunConfig};
use dpi::tasks::make_adversarial_suite;
use dpi::trainer::TrainingConfig;

fn main() -> dpi::Result<()> {
    let seeds = [11u64, 12, 13, 14, 15];
    let p_values = [0.1, 0.5, 1.0, 5.0, 10.0];

    println!("{:>6} {}", "p", seeds.map(|s| format!("seed{s:>3}")).join("  "));
    let mut per_p: Vec<Vec<f64>> = vec![Vec::new(); p_values.len()];
    for (si, &seed) in seeds.iter().enumerate() {
        let suite = make_adversarial_suite(seed)?;
        let cfg = RunConfig {
            suite,
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
        let sweep = ablate_p(&cfg, &p_values)?;
        for (pi, (_, result)) in sweep.iter().enumerate() {
            let row = score_row(result.method, seed, &result.timeline)?;
            per_p[pi].push(row.avg_norm);
        }
        let _ = si;
    }

    for (pi, &p) in p_values.iter().enumerate() {
        let cells: Vec<String> = per_p[pi].iter().map(|v| format!("{v:7.3}")).collect();
        let mean = per_p[pi].iter().sum::<f64>() / per_p[pi].len() as f64;
        let bar = "#".repeat((mean * 4.0).round() as usize);
        println!("{p:>6} {}  mean {mean:6.3} {bar}", cells.join("  "));
    }
    Ok(())
}
