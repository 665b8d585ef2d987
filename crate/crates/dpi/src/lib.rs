//! Dynamic parameter isolation (DPI) fine-tuning on small deterministic models.
//!
//! The library identifies, for each task in a multi-task suite, the *core
//! parameter region*: the top fraction of model parameters by absolute update
//! magnitude after a short probe fine-tuning run. Tasks whose core regions
//! overlap (Jaccard index above a threshold) are grouped for joint training;
//! the groups are then trained sequentially, and each stage freezes the union
//! of all earlier stages' core regions so later tasks cannot overwrite them.
//!
//! The crate ships:
//!
//! - [`param_core`]: flat parameter vectors, update magnitudes, top-k core
//!   regions, freeze masks, masked updates, and checkpoint/region file I/O;
//! - [`models`]: a tiny differentiable model zoo (linear, one-hidden-layer
//!   MLP, toy single-head attention) with exact analytic gradients and a
//!   finite-difference oracle;
//! - [`tasks`]: synthetic block-structured task suites whose ground-truth
//!   parameter usage is known, so isolation claims are testable;
//! - [`trainer`]: mask-aware SGD/Adam and the probe / staged training loops;
//! - [`isolation`]: Jaccard similarity, threshold grouping via connected
//!   components, stage ordering, and frozen-set accumulation;
//! - [`scheduler`]: end-to-end pipelines for the isolation method, three
//!   baselines (full multi-task, random stages, heuristic stages), and the
//!   core-percentage sweep;
//! - [`evalreport`]: normalized 0-10 scoring, forgetting measures, and
//!   report/scoreboard emission;
//! - [`config`] / [`commands`]: the config file format and the `probe`,
//!   `run`, `ablate`, `report` commands behind the `dpi` binary.
//!
//! Every operation is deterministic given its seeds; repeated runs produce
//! bit-identical parameters, metrics, and report files on one platform.
//!
//! See the crate `examples/` directory for one runnable example per major
//! capability:
//!
//! ```text
//! cargo run --release --example gradient_check       # model zoo vs finite differences
//! cargo run --release --example probe_regions        # probe fine-tuning and core regions
//! cargo run --release --example task_grouping        # similarity matrices and grouping
//! cargo run --release --example masked_training      # freeze masks and exact retention
//! cargo run --release --example full_pipeline        # the whole isolation pipeline
//! cargo run --release --example baseline_comparison  # scoreboard vs the baselines
//! cargo run --release --example p_sweep              # core-percentage ablation curve
//! ```

pub mod commands;
pub mod config;
pub mod error;
pub mod evalreport;
pub mod isolation;
pub mod models;
pub mod param_core;
pub mod rng;
pub mod scheduler;
pub mod tasks;
pub mod trainer;

pub use error::{Error, Result};
