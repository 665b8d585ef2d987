//! Declarative run configuration: a line-based `key = value` format with
//! `[suite]`, `[model]`, `[training]`, and `[run]` sections.
//!
//! Unknown sections or keys are rejected by name; every knob can also be
//! overridden on the command line (`--set section.key=value`), with the flag
//! winning. The snapshot written into a run directory serializes every field
//! explicitly and parses back to an equivalent configuration.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::models::{Activation, ModelSpec};
use crate::scheduler::{Method, RunConfig};
use crate::tasks::{make_benchmark_suite_with, SuiteOptions, SuiteProfile};
use crate::trainer::{OptimizerKind, TrainingConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSection {
    pub profile: SuiteProfile,
    pub n_tasks: usize,
    pub input_dim: usize,
    pub block_size: Option<usize>,
    pub noise_std: f64,
    pub ambient_scale: f64,
    pub ambient_frac: f64,
    pub n_train: usize,
    pub n_eval: usize,
    /// Mirror-pair sampling for exact-oracle configurations.
    pub symmetrize: bool,
    /// Task-data seed; `None` follows `run.seed`.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSection {
    pub kind: String,
    pub output_dim: usize,
    pub hidden_dim: Option<usize>,
    pub activation: Option<Activation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSection {
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub epochs_probe: usize,
    pub epochs_stage: usize,
    /// Batch-stream seed; `None` follows `run.seed`.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub method: Option<Method>,
    pub p: f64,
    pub tau: f64,
    /// K for `random_stages`.
    pub stages: usize,
    pub seed: u64,
    pub out_dir: Option<String>,
}

/// The parsed configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub suite: SuiteSection,
    pub model: ModelSection,
    pub training: TrainingSection,
    pub run: RunSection,
}

impl Default for CliConfig {
    /// The interference benchmark defaults: mixed 5-task suite on a linear
    /// 999x2 model (2000 parameters), ambient training pollution on, Adam.
    fn default() -> Self {
        CliConfig {
            suite: SuiteSection {
                profile: SuiteProfile::Mixed,
                n_tasks: 5,
                input_dim: 999,
                block_size: Some(8),
                noise_std: 0.05,
                ambient_scale: 0.8,
                ambient_frac: 0.35,
                n_train: 512,
                n_eval: 512,
                symmetrize: false,
                seed: None,
            },
            model: ModelSection {
                kind: "linear".into(),
                output_dim: 2,
                hidden_dim: None,
                activation: None,
            },
            training: TrainingSection {
                optimizer: OptimizerKind::Adam,
                lr: 0.01,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                batch_size: 16,
                epochs_probe: 3,
                epochs_stage: 12,
                seed: None,
            },
            run: RunSection {
                method: None,
                p: 1.0,
                tau: 0.1,
                stages: 3,
                seed: 42,
                out_dir: None,
            },
        }
    }
}

fn parse_num<T: std::str::FromStr>(field: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| Error::config(field, format!("cannot parse `{value}`: {e}")))
}

impl CliConfig {
    /// Applies one `section.key = value` assignment; rejects unknown keys by
    /// name.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let field = format!("{section}.{key}");
        let f = field.as_str();
        match (section, key) {
            ("suite", "profile") => {
                self.suite.profile = match value {
                    "disjoint" => SuiteProfile::Disjoint,
                    "overlapping" => SuiteProfile::Overlapping,
                    "mixed" => SuiteProfile::Mixed,
                    _ => {
                        return Err(Error::config(
                            f,
                            format!("unknown profile `{value}` (disjoint|overlapping|mixed)"),
                        ))
                    }
                }
            }
            ("suite", "n_tasks") => self.suite.n_tasks = parse_num(f, value)?,
            ("suite", "input_dim") => self.suite.input_dim = parse_num(f, value)?,
            ("suite", "block_size") => {
                self.suite.block_size = if value == "auto" {
                    None
                } else {
                    Some(parse_num(f, value)?)
                }
            }
            ("suite", "noise_std") => self.suite.noise_std = parse_num(f, value)?,
            ("suite", "ambient_scale") => self.suite.ambient_scale = parse_num(f, value)?,
            ("suite", "ambient_frac") => self.suite.ambient_frac = parse_num(f, value)?,
            ("suite", "n_train") => self.suite.n_train = parse_num(f, value)?,
            ("suite", "n_eval") => self.suite.n_eval = parse_num(f, value)?,
            ("suite", "symmetrize") => self.suite.symmetrize = parse_num(f, value)?,
            ("suite", "seed") => self.suite.seed = Some(parse_num(f, value)?),
            ("model", "kind") => {
                if !["linear", "mlp1", "attn_toy"].contains(&value) {
                    return Err(Error::config(
                        f,
                        format!("unknown model kind `{value}` (linear|mlp1|attn_toy)"),
                    ));
                }
                self.model.kind = value.to_string();
            }
            ("model", "output_dim") => self.model.output_dim = parse_num(f, value)?,
            ("model", "hidden_dim") => self.model.hidden_dim = Some(parse_num(f, value)?),
            ("model", "activation") => {
                self.model.activation = Some(match value {
                    "tanh" => Activation::Tanh,
                    "relu" => Activation::Relu,
                    _ => {
                        return Err(Error::config(
                            f,
                            format!("unknown activation `{value}` (tanh|relu)"),
                        ))
                    }
                })
            }
            ("training", "optimizer") => {
                self.training.optimizer = match value {
                    "sgd" => OptimizerKind::Sgd,
                    "adam" => OptimizerKind::Adam,
                    _ => {
                        return Err(Error::config(
                            f,
                            format!("unknown optimizer `{value}` (sgd|adam)"),
                        ))
                    }
                }
            }
            ("training", "lr") => self.training.lr = parse_num(f, value)?,
            ("training", "beta1") => self.training.beta1 = parse_num(f, value)?,
            ("training", "beta2") => self.training.beta2 = parse_num(f, value)?,
            ("training", "eps") => self.training.eps = parse_num(f, value)?,
            ("training", "batch_size") => self.training.batch_size = parse_num(f, value)?,
            ("training", "epochs_probe") => self.training.epochs_probe = parse_num(f, value)?,
            ("training", "epochs_stage") => self.training.epochs_stage = parse_num(f, value)?,
            ("training", "seed") => self.training.seed = Some(parse_num(f, value)?),
            ("run", "method") => {
                self.run.method = Some(match value {
                    "dpi" => Method::Dpi,
                    "full_multitask" => Method::FullMultitask,
                    "random_stages" => Method::RandomStages { k: self.run.stages },
                    "heuristic_stages" => Method::HeuristicStages,
                    _ => {
                        return Err(Error::config(
                            f,
                            format!(
                                "unknown method `{value}` \
                                 (dpi|full_multitask|random_stages|heuristic_stages)"
                            ),
                        ))
                    }
                })
            }
            ("run", "p") => self.run.p = parse_num(f, value)?,
            ("run", "tau") => self.run.tau = parse_num(f, value)?,
            ("run", "stages") => {
                self.run.stages = parse_num(f, value)?;
                if let Some(Method::RandomStages { ref mut k }) = self.run.method {
                    *k = self.run.stages;
                }
            }
            ("run", "seed") => self.run.seed = parse_num(f, value)?,
            ("run", "out_dir") => self.run.out_dir = Some(value.to_string()),
            _ => return Err(Error::config(f, "unknown configuration key")),
        }
        Ok(())
    }

    /// Parses the text format on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = CliConfig::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                if !["suite", "model", "training", "run"].contains(&name) {
                    return Err(Error::config(
                        name,
                        format!("unknown section at line {}", lineno + 1),
                    ));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(
                    format!("line {}", lineno + 1),
                    format!("expected `key = value`, got `{line}`"),
                )
            })?;
            if section.is_empty() {
                return Err(Error::config(
                    key.trim(),
                    format!("key outside any section at line {}", lineno + 1),
                ));
            }
            cfg.set(&section, key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Applies `section.key=value` command-line overrides (flag wins).
    pub fn apply_overrides(&mut self, overrides: &[(String, String)]) -> Result<()> {
        for (key, value) in overrides {
            let (section, k) = key.split_once('.').ok_or_else(|| {
                Error::config(key, "override key must look like `section.key`")
            })?;
            self.set(section, k, value)?;
        }
        Ok(())
    }

    /// Canonical text form with every field explicit; parses back to an
    /// equivalent configuration.
    pub fn snapshot(&self) -> String {
        let mut out = String::new();
        out.push_str("[suite]\n");
        out.push_str(&format!(
            "profile = {}\n",
            match self.suite.profile {
                SuiteProfile::Disjoint => "disjoint",
                SuiteProfile::Overlapping => "overlapping",
                SuiteProfile::Mixed => "mixed",
            }
        ));
        out.push_str(&format!("n_tasks = {}\n", self.suite.n_tasks));
        out.push_str(&format!("input_dim = {}\n", self.suite.input_dim));
        match self.suite.block_size {
            Some(bs) => out.push_str(&format!("block_size = {bs}\n")),
            None => out.push_str("block_size = auto\n"),
        }
        out.push_str(&format!("noise_std = {}\n", self.suite.noise_std));
        out.push_str(&format!("ambient_scale = {}\n", self.suite.ambient_scale));
        out.push_str(&format!("ambient_frac = {}\n", self.suite.ambient_frac));
        out.push_str(&format!("n_train = {}\n", self.suite.n_train));
        out.push_str(&format!("n_eval = {}\n", self.suite.n_eval));
        out.push_str(&format!("symmetrize = {}\n", self.suite.symmetrize));
        if let Some(seed) = self.suite.seed {
            out.push_str(&format!("seed = {seed}\n"));
        }
        out.push_str("\n[model]\n");
        out.push_str(&format!("kind = {}\n", self.model.kind));
        out.push_str(&format!("output_dim = {}\n", self.model.output_dim));
        if let Some(h) = self.model.hidden_dim {
            out.push_str(&format!("hidden_dim = {h}\n"));
        }
        if let Some(a) = self.model.activation {
            out.push_str(&format!(
                "activation = {}\n",
                match a {
                    Activation::Tanh => "tanh",
                    Activation::Relu => "relu",
                }
            ));
        }
        out.push_str("\n[training]\n");
        out.push_str(&format!(
            "optimizer = {}\n",
            match self.training.optimizer {
                OptimizerKind::Sgd => "sgd",
                OptimizerKind::Adam => "adam",
            }
        ));
        out.push_str(&format!("lr = {}\n", self.training.lr));
        out.push_str(&format!("beta1 = {}\n", self.training.beta1));
        out.push_str(&format!("beta2 = {}\n", self.training.beta2));
        out.push_str(&format!("eps = {}\n", self.training.eps));
        out.push_str(&format!("batch_size = {}\n", self.training.batch_size));
        out.push_str(&format!("epochs_probe = {}\n", self.training.epochs_probe));
        out.push_str(&format!("epochs_stage = {}\n", self.training.epochs_stage));
        if let Some(seed) = self.training.seed {
            out.push_str(&format!("seed = {seed}\n"));
        }
        out.push_str("\n[run]\n");
        if let Some(method) = self.run.method {
            out.push_str(&format!(
                "method = {}\n",
                match method {
                    Method::Dpi => "dpi",
                    Method::FullMultitask => "full_multitask",
                    Method::RandomStages { .. } => "random_stages",
                    Method::HeuristicStages => "heuristic_stages",
                }
            ));
        }
        out.push_str(&format!("p = {}\n", self.run.p));
        out.push_str(&format!("tau = {}\n", self.run.tau));
        out.push_str(&format!("stages = {}\n", self.run.stages));
        out.push_str(&format!("seed = {}\n", self.run.seed));
        if let Some(dir) = &self.run.out_dir {
            out.push_str(&format!("out_dir = {dir}\n"));
        }
        out
    }

    fn model_spec(&self) -> Result<ModelSpec> {
        let spec = match self.model.kind.as_str() {
            "linear" => ModelSpec::Linear {
                input_dim: self.suite.input_dim,
                output_dim: self.model.output_dim,
            },
            "mlp1" => ModelSpec::Mlp1 {
                input_dim: self.suite.input_dim,
                hidden_dim: self.model.hidden_dim.ok_or_else(|| {
                    Error::config("model.hidden_dim", "required for mlp1")
                })?,
                output_dim: self.model.output_dim,
                activation: self.model.activation.unwrap_or(Activation::Tanh),
            },
            "attn_toy" => ModelSpec::AttnToy {
                input_dim: self.suite.input_dim,
                hidden_dim: self.model.hidden_dim.ok_or_else(|| {
                    Error::config("model.hidden_dim", "required for attn_toy")
                })?,
                output_dim: self.model.output_dim,
            },
            other => {
                return Err(Error::config(
                    "model.kind",
                    format!("unknown model kind `{other}`"),
                ))
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Materializes the executable run configuration. Fails with the field
    /// name when a required key is missing or invalid.
    pub fn to_run_config(&self) -> Result<RunConfig> {
        let model = self.model_spec()?;
        let opts = SuiteOptions {
            block_size: self.suite.block_size,
            noise_std: self.suite.noise_std,
            ambient_scale: self.suite.ambient_scale,
            ambient_frac: self.suite.ambient_frac,
            n_train: self.suite.n_train,
            n_eval: self.suite.n_eval,
            symmetrize: self.suite.symmetrize,
        };
        let suite_seed = self.suite.seed.unwrap_or(self.run.seed);
        let suite = make_benchmark_suite_with(
            self.suite.profile,
            self.suite.n_tasks,
            suite_seed,
            model,
            &opts,
        )?;
        let training = TrainingConfig {
            optimizer: self.training.optimizer,
            lr: self.training.lr,
            beta1: self.training.beta1,
            beta2: self.training.beta2,
            eps: self.training.eps,
            batch_size: self.training.batch_size,
            epochs_probe: self.training.epochs_probe,
            epochs_stage: self.training.epochs_stage,
            seed: self.training.seed.unwrap_or(self.run.seed),
        };
        let method = self
            .run
            .method
            .ok_or_else(|| Error::config("run.method", "missing required key"))?;
        let cfg = RunConfig {
            suite,
            training,
            p: self.run.p,
            tau: self.run.tau,
            method,
            seed: self.run.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn require_out_dir(&self) -> Result<&str> {
        self.run
            .out_dir
            .as_deref()
            .ok_or_else(|| Error::config("run.out_dir", "missing required key"))
    }
}

/// A fully commented sample configuration (the benchmark defaults).
pub fn default_config_text() -> String {
    let mut cfg = CliConfig::default();
    cfg.run.method = Some(Method::Dpi);
    cfg.run.out_dir = Some("runs/demo".into());
    format!(
        "# Run configuration. All keys optional unless noted; values shown are\n\
         # the defaults. Override any key on the command line with\n\
         #   --set section.key=value\n\
         {}",
        cfg.snapshot()
    )
}
