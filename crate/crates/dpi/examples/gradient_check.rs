//! Checks every model kind's analytic gradients against central finite
//! differences on random parameters and batches, for both loss types.
//!
//! Run with: cargo run --release --example gradient_check

use dpi::models::{
    finite_diff_grad, grad, Activation, Batch, Matrix, ModelSpec, Targets,
};
use dpi::param_core::{ParamVector, TaskId};

fn random_batch(spec: &ModelSpec, n: usize, classification: bool, seed: u64) -> Batch {
    use rand::Rng;
    let mut rng = dpi::rng::rng_from(seed);
    let mut inputs = Matrix::zeros(n, spec.input_dim());
    for s in 0..n {
        for v in inputs.row_mut(s) {
            *v = dpi::rng::standard_normal(&mut rng);
        }
    }
    let targets = if classification {
        Targets::Labels((0..n).map(|_| rng.gen_range(0..spec.output_dim())).collect())
    } else {
        let mut t = Matrix::zeros(n, spec.output_dim());
        for s in 0..n {
            for v in t.row_mut(s) {
                *v = dpi::rng::standard_normal(&mut rng);
            }
        }
        Targets::Regression(t)
    };
    Batch::new(inputs, targets, TaskId::new("check")).unwrap()
}

fn random_params(spec: &ModelSpec, seed: u64) -> ParamVector {
    let mut rng = dpi::rng::rng_from(seed);
    ParamVector::new(
        (0..spec.param_count())
            .map(|_| dpi::rng::standard_normal(&mut rng) * 0.5)
            .collect(),
    )
    .unwrap()
}

fn main() -> dpi::Result<()> {
    let kinds = [
        (
            "linear",
            ModelSpec::Linear {
                input_dim: 5,
                output_dim: 2,
            },
        ),
        (
            "mlp1/tanh",
            ModelSpec::Mlp1 {
                input_dim: 6,
                hidden_dim: 5,
                output_dim: 3,
                activation: Activation::Tanh,
            },
        ),
        (
            "mlp1/relu",
            ModelSpec::Mlp1 {
                input_dim: 6,
                hidden_dim: 5,
                output_dim: 3,
                activation: Activation::Relu,
            },
        ),
        (
            "attn_toy",
            ModelSpec::AttnToy {
                input_dim: 8,
                hidden_dim: 4,
                output_dim: 2,
            },
        ),
    ];

    println!(
        "{:<10} {:>6} {:>8} {:>14}",
        "kind", "D", "trials", "max rel err"
    );
    for (name, spec) in &kinds {
        let mut worst: f64 = 0.0;
        for trial in 0..50u64 {
            let params = random_params(spec, 1000 + trial);
            let batch = random_batch(spec, 4, trial % 2 == 0, 2000 + trial);
            let g = grad(spec, &params, &batch)?;
            let fd = finite_diff_grad(spec, &params, &batch, 1e-5)?;
            for j in 0..g.len() {
                let rel = (g[j] - fd[j]).abs() / (1.0 + fd[j].abs());
                worst = worst.max(rel);
            }
        }
        println!(
            "{:<10} {:>6} {:>8} {:>14.3e}",
            name,
            spec.param_count(),
            50,
            worst
        );
        assert!(worst < 1e-6);
    }
    println!("\nall kinds match central differences below 1e-6 relative error");
    Ok(())
}
