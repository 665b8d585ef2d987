//! Metrics, normalized 0-10 scoring, forgetting measures, and report
//! emission.
//!
//! Scores anchor to the untrained model: a regression task scores
//! `10 * max(0, 1 - loss / loss_ref)` against the starting parameters' eval
//! loss, a classification task `10 * accuracy`. Forgetting is the standard
//! continual-learning gap: best normalized score at or after the task's own
//! training stage minus the final score.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{forward_outputs, loss, Batch, ModelSpec, Targets};
use crate::param_core::{ParamVector, TaskId};
use crate::tasks::TaskSpec;

/// Raw evaluation outcome: eval loss for regression tasks, accuracy in
/// [0, 1] for classification tasks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum MetricValue {
    Loss(f64),
    Accuracy(f64),
}

impl MetricValue {
    pub fn value(&self) -> f64 {
        match *self {
            MetricValue::Loss(v) | MetricValue::Accuracy(v) => v,
        }
    }
}

/// One task's metric at one stage boundary (0 = untrained reference).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetric {
    pub task_id: TaskId,
    pub raw: MetricValue,
    pub measured_at: usize,
}

/// Deterministic eval on the task's held-out batch.
pub fn evaluate(
    model: &ModelSpec,
    params: &ParamVector,
    task: &TaskSpec,
    eval_batch: &Batch,
    measured_at: usize,
) -> Result<TaskMetric> {
    let raw = if task.family.is_classification() {
        let labels = match &eval_batch.targets {
            Targets::Labels(l) => l,
            Targets::Regression(_) => {
                return Err(Error::config(
                    "eval",
                    "classification task with regression targets",
                ))
            }
        };
        let outputs = forward_outputs(model, params, eval_batch)?;
        let correct = outputs
            .iter()
            .zip(labels)
            .filter(|(out, &label)| argmax(out) == label)
            .count();
        MetricValue::Accuracy(correct as f64 / eval_batch.len() as f64)
    } else {
        MetricValue::Loss(loss(model, params, eval_batch)?)
    };
    Ok(TaskMetric {
        task_id: task.id.clone(),
        raw,
        measured_at,
    })
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Normalizes a metric to the 0-10 scale against the untrained reference.
pub fn normalize_score(metric: &TaskMetric, reference: &TaskMetric) -> Result<f64> {
    if metric.task_id != reference.task_id {
        return Err(Error::config(
            "reference",
            format!(
                "reference is for task {}, metric for {}",
                reference.task_id, metric.task_id
            ),
        ));
    }
    let score = match (metric.raw, reference.raw) {
        (MetricValue::Accuracy(acc), _) => 10.0 * acc,
        (MetricValue::Loss(l), MetricValue::Loss(l_ref)) => {
            if l_ref == 0.0 {
                // Degenerate task: the untrained model is already perfect.
                if l == 0.0 {
                    10.0
                } else {
                    0.0
                }
            } else {
                10.0 * (1.0 - l / l_ref).max(0.0)
            }
        }
        (MetricValue::Loss(_), MetricValue::Accuracy(_)) => {
            return Err(Error::config(
                "reference",
                "loss metric with accuracy reference",
            ))
        }
    };
    Ok(score.clamp(0.0, 10.0))
}

/// Per-task metrics at every stage boundary of one run. Boundary 0 holds the
/// untrained reference used for normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTimeline {
    pub task_ids: Vec<TaskId>,
    /// 1-based stage each task trained in.
    pub task_stage: Vec<usize>,
    /// `boundaries[b][t]` = metric of task `t` after stage `b` (0 = before
    /// any training).
    pub boundaries: Vec<Vec<TaskMetric>>,
}

impl RunTimeline {
    pub fn n_stages(&self) -> usize {
        self.boundaries.len().saturating_sub(1)
    }

    pub fn task_index(&self, task_id: &TaskId) -> Result<usize> {
        self.task_ids
            .iter()
            .position(|t| t == task_id)
            .ok_or_else(|| Error::config("task_id", format!("unknown task {task_id}")))
    }

    /// Every (task, boundary) pair present with consistent ids.
    pub fn is_complete(&self) -> bool {
        !self.boundaries.is_empty()
            && self.boundaries.iter().all(|b| {
                b.len() == self.task_ids.len()
                    && b.iter().zip(&self.task_ids).all(|(m, t)| &m.task_id == t)
            })
    }

    /// Normalized score of task `t` at boundary `b`.
    pub fn score_at(&self, task_index: usize, boundary: usize) -> Result<f64> {
        normalize_score(
            &self.boundaries[boundary][task_index],
            &self.boundaries[0][task_index],
        )
    }

    pub fn final_score(&self, task_index: usize) -> Result<f64> {
        self.score_at(task_index, self.boundaries.len() - 1)
    }
}

/// Forgetting for one task: best normalized score at or after its own
/// training stage, minus the final normalized score. Non-negative.
pub fn forgetting(timeline: &RunTimeline, task_id: &TaskId) -> Result<f64> {
    let t = timeline.task_index(task_id)?;
    let own_stage = timeline.task_stage[t];
    if own_stage == 0 || own_stage > timeline.n_stages() {
        return Err(Error::config(
            "task_id",
            format!("task {task_id} was never trained in this run"),
        ));
    }
    let mut best = f64::NEG_INFINITY;
    for b in own_stage..timeline.boundaries.len() {
        best = best.max(timeline.score_at(t, b)?);
    }
    let final_score = timeline.final_score(t)?;
    Ok(best - final_score)
}

/// Method labels in fixed scoreboard order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Dpi,
    FullMultitask,
    RandomStages,
    HeuristicStages,
}

impl MethodName {
    pub fn rank(self) -> usize {
        match self {
            MethodName::Dpi => 0,
            MethodName::FullMultitask => 1,
            MethodName::RandomStages => 2,
            MethodName::HeuristicStages => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MethodName::Dpi => "dpi",
            MethodName::FullMultitask => "full_multitask",
            MethodName::RandomStages => "random_stages",
            MethodName::HeuristicStages => "heuristic_stages",
        }
    }
}

impl fmt::Display for MethodName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One task's cell in a scoreboard row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task_id: TaskId,
    pub raw: MetricValue,
    pub score: f64,
    pub forgetting: f64,
}

/// One method's row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub method: MethodName,
    pub seed: u64,
    pub per_task: Vec<TaskScore>,
    pub avg_norm: f64,
}

/// The full methods-by-tasks scoreboard of one or more runs on one suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scoreboard {
    pub schema_version: u32,
    pub suite_fingerprint: u64,
    pub task_ids: Vec<TaskId>,
    pub rows: Vec<ScoreRow>,
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Builds one scoreboard row from a finished run's timeline.
pub fn score_row(method: MethodName, seed: u64, timeline: &RunTimeline) -> Result<ScoreRow> {
    let mut per_task = Vec::with_capacity(timeline.task_ids.len());
    let last = timeline.boundaries.len() - 1;
    let mut sum = 0.0;
    for (t, task_id) in timeline.task_ids.iter().enumerate() {
        let score = timeline.final_score(t)?;
        sum += score;
        per_task.push(TaskScore {
            task_id: task_id.clone(),
            raw: timeline.boundaries[last][t].raw,
            score,
            forgetting: forgetting(timeline, task_id)?,
        });
    }
    Ok(ScoreRow {
        method,
        seed,
        per_task,
        avg_norm: sum / timeline.task_ids.len() as f64,
    })
}

/// Assembles rows into a scoreboard, sorted by the fixed method order then
/// seed.
pub fn build_scoreboard(
    suite_fingerprint: u64,
    task_ids: Vec<TaskId>,
    mut rows: Vec<ScoreRow>,
) -> Scoreboard {
    rows.sort_by_key(|r| (r.method.rank(), r.seed));
    Scoreboard {
        schema_version: REPORT_SCHEMA_VERSION,
        suite_fingerprint,
        task_ids,
        rows,
    }
}

impl Scoreboard {
    /// Human-readable table, one row per method.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<18} {:>6}", "method", "seed"));
        for t in &self.task_ids {
            out.push_str(&format!(" {:>8}", t.as_str()));
        }
        out.push_str(&format!(" {:>9}\n", "avg_norm"));
        for row in &self.rows {
            out.push_str(&format!("{:<18} {:>6}", row.method.to_string(), row.seed));
            for cell in &row.per_task {
                out.push_str(&format!(" {:>8.3}", cell.score));
            }
            out.push_str(&format!(" {:>9.4}\n", row.avg_norm));
        }
        out
    }
}

/// Writes `report.json` (the scoreboard, schema-versioned).
pub fn write_report(scoreboard: &Scoreboard, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(scoreboard)?;
    fs::write(path, json)?;
    Ok(())
}

/// Reads a `report.json` back into a scoreboard.
pub fn read_report(path: &Path) -> Result<Scoreboard> {
    let text = fs::read_to_string(path)?;
    let board: Scoreboard = serde_json::from_str(&text)?;
    if board.schema_version != REPORT_SCHEMA_VERSION {
        return Err(Error::ReportFormat(format!(
            "unsupported report schema version {}",
            board.schema_version
        )));
    }
    Ok(board)
}

/// Writes `scoreboard.csv`: one line per (method row, task).
pub fn write_scoreboard_csv(scoreboard: &Scoreboard, path: &Path) -> Result<()> {
    let mut out =
        String::from("method,seed,task_id,raw_kind,raw_value,score,forgetting,avg_norm\n");
    for row in &scoreboard.rows {
        for cell in &row.per_task {
            let (kind, value) = match cell.raw {
                MetricValue::Loss(v) => ("loss", v),
                MetricValue::Accuracy(v) => ("accuracy", v),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                row.method,
                row.seed,
                cell.task_id,
                kind,
                value,
                cell.score,
                cell.forgetting,
                row.avg_norm
            ));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Parses `scoreboard.csv` back into `(method, seed, task, score, forgetting,
/// avg)` tuples; round-trip support for the CSV format.
pub fn parse_scoreboard_csv(text: &str) -> Result<Vec<(String, u64, String, f64, f64, f64)>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::ReportFormat(format!(
                "scoreboard line {i} has {} fields",
                fields.len()
            )));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::ReportFormat(format!("bad float `{s}`: {e}")))
        };
        rows.push((
            fields[0].to_string(),
            fields[1]
                .parse::<u64>()
                .map_err(|e| Error::ReportFormat(format!("bad seed: {e}")))?,
            fields[2].to_string(),
            parse_f(fields[5])?,
            parse_f(fields[6])?,
            parse_f(fields[7])?,
        ));
    }
    Ok(rows)
}

/// One row of the core-percentage ablation output.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub p: f64,
    pub task_id: TaskId,
    pub score: f64,
    pub avg_norm: f64,
}

/// Writes `ablation_p.csv` with columns `p,task_id,score,avg_norm`.
pub fn write_ablation_csv(rows: &[AblationRow], path: &Path) -> Result<()> {
    let mut out = String::from("p,task_id,score,avg_norm\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.p, r.task_id, r.score, r.avg_norm
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes `metrics.csv`: the full timeline of one run.
pub fn write_metrics_csv(timeline: &RunTimeline, path: &Path) -> Result<()> {
    let mut out = String::from("boundary,task_id,raw_kind,raw_value,score\n");
    for (b, metrics) in timeline.boundaries.iter().enumerate() {
        for (t, m) in metrics.iter().enumerate() {
            let (kind, value) = match m.raw {
                MetricValue::Loss(v) => ("loss", v),
                MetricValue::Accuracy(v) => ("accuracy", v),
            };
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                b,
                m.task_id,
                kind,
                value,
                timeline.score_at(t, b)?
            ));
        }
    }
    fs::write(path, out)?;
    Ok(())
}
