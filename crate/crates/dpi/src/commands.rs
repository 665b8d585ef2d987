//! The four commands behind the `dpi` binary: `probe`, `run`, `ablate`, and
//! `report`. Each writes a self-describing output directory.
//!
//! Exit-code contract (enforced by the binary via `Error::exit_code`):
//! 0 success, 2 configuration/usage errors, 3 numeric failures.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::CliConfig;
use crate::error::{Error, Result};
use crate::evalreport::{
    build_scoreboard, read_report, score_row, write_ablation_csv, write_metrics_csv,
    write_report, write_scoreboard_csv, AblationRow, Scoreboard,
};
use crate::isolation::{save_plan, GroupingPlan, PlanFile};
use crate::param_core::{save_checkpoint, save_region, Checkpoint};
use crate::scheduler::{ablate_p, plan_from_probes, probe_phase, run, Method, RunResult};

/// Options shared by the artifact-producing commands.
#[derive(Debug, Clone, Default)]
pub struct CmdOptions {
    /// `section.key=value` overrides, applied after the file (flag wins).
    pub overrides: Vec<(String, String)>,
    /// Overrides `run.out_dir`.
    pub out_dir: Option<PathBuf>,
    /// Allow replacing a non-empty output directory.
    pub overwrite: bool,
}

fn load_config(config_path: &Path, opts: &CmdOptions) -> Result<CliConfig> {
    let mut cfg = CliConfig::load(config_path)?;
    cfg.apply_overrides(&opts.overrides)?;
    if let Some(out) = &opts.out_dir {
        cfg.run.out_dir = Some(out.to_string_lossy().into_owned());
    }
    Ok(cfg)
}

/// Output directories are append-only: writing into a non-empty directory
/// requires the explicit overwrite flag, which replaces it wholesale.
fn prepare_out_dir(dir: &Path, overwrite: bool) -> Result<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir)?.next().is_some();
        if non_empty {
            if !overwrite {
                return Err(Error::RunDirNotEmpty(dir.display().to_string()));
            }
            fs::remove_dir_all(dir)?;
        }
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_snapshot(cfg: &CliConfig, dir: &Path) -> Result<()> {
    fs::write(dir.join("config.snapshot.cfg"), cfg.snapshot())?;
    Ok(())
}

fn write_plan_artifacts(plan: &GroupingPlan, dir: &Path) -> Result<()> {
    let regions_dir = dir.join("regions");
    fs::create_dir_all(&regions_dir)?;
    let mut region_files = Vec::with_capacity(plan.regions.len());
    for region in &plan.regions {
        let rel = format!("regions/{}.txt", region.task_id());
        save_region(region, plan.p, &dir.join(&rel))?;
        region_files.push(rel);
    }
    save_plan(&PlanFile::from_plan(plan, region_files), &dir.join("plan.json"))?;
    Ok(())
}

fn write_train_log(result: &RunResult, dir: &Path) -> Result<()> {
    let mut out = String::from("step,stage,task_id,loss\n");
    for s in &result.train_log {
        out.push_str(&format!("{},{},{},{}\n", s.step, s.stage, s.task_id, s.loss));
    }
    fs::write(dir.join("train_log.csv"), out)?;
    Ok(())
}

fn write_checkpoints(result: &RunResult, model_hash: u64, dir: &Path) -> Result<()> {
    let ckpt_dir = dir.join("checkpoints");
    fs::create_dir_all(&ckpt_dir)?;
    let theta0 = Checkpoint::new(result.theta0.clone(), model_hash, result.seed, 0);
    save_checkpoint(&theta0, &ckpt_dir.join("stage_00.ckpt"))?;
    for stage in &result.stages {
        save_checkpoint(
            &stage.checkpoint,
            &ckpt_dir.join(format!("stage_{:02}.ckpt", stage.checkpoint.meta.stage_index)),
        )?;
    }
    Ok(())
}

fn result_scoreboard(result: &RunResult) -> Result<Scoreboard> {
    let row = score_row(result.method, result.seed, &result.timeline)?;
    Ok(build_scoreboard(
        result.suite_fingerprint,
        result.timeline.task_ids.clone(),
        vec![row],
    ))
}

/// Runs the probe-and-group front half only (core regions, similarity
/// matrix, grouping plan) and writes the plan artifacts. Returns the output
/// directory.
pub fn cmd_probe(config_path: &Path, opts: &CmdOptions) -> Result<PathBuf> {
    let mut cfg = load_config(config_path, opts)?;
    // Probing is method-independent; any configured method is accepted.
    if cfg.run.method.is_none() {
        cfg.run.method = Some(Method::Dpi);
    }
    let run_cfg = {
        let mut c = cfg.clone();
        c.run.method = Some(Method::Dpi);
        c.to_run_config()?
    };
    let out = PathBuf::from(cfg.require_out_dir()?);
    prepare_out_dir(&out, opts.overwrite)?;

    let data = run_cfg.suite.generate_all()?;
    let probes = probe_phase(&run_cfg, &data)?;
    let (_, plan) = plan_from_probes(&run_cfg, &probes, run_cfg.p)?;

    write_snapshot(&cfg, &out)?;
    write_plan_artifacts(&plan, &out)?;
    println!(
        "probe: {} tasks -> {} stage(s) at p={} tau={}",
        run_cfg.suite.n_tasks(),
        plan.n_stages(),
        plan.p,
        plan.tau
    );
    for (k, ids) in plan.stage_ids().iter().enumerate() {
        let names: Vec<&str> = ids.iter().map(|t| t.as_str()).collect();
        println!("  stage {}: {}", k + 1, names.join(", "));
    }
    Ok(out)
}

/// Executes the configured method end to end and writes the run directory:
/// config snapshot, plan (isolation runs), per-stage checkpoints, metrics,
/// training log, report, and scoreboard.
pub fn cmd_run(config_path: &Path, opts: &CmdOptions) -> Result<PathBuf> {
    let cfg = load_config(config_path, opts)?;
    let run_cfg = cfg.to_run_config()?;
    let out = PathBuf::from(cfg.require_out_dir()?);
    prepare_out_dir(&out, opts.overwrite)?;

    let result = run(&run_cfg)?;

    write_snapshot(&cfg, &out)?;
    if let Some(plan) = &result.plan {
        write_plan_artifacts(plan, &out)?;
    }
    write_checkpoints(&result, run_cfg.suite.model.stable_hash(), &out)?;
    write_metrics_csv(&result.timeline, &out.join("metrics.csv"))?;
    write_train_log(&result, &out)?;
    let board = result_scoreboard(&result)?;
    write_report(&board, &out.join("report.json"))?;
    write_scoreboard_csv(&board, &out.join("scoreboard.csv"))?;
    print!("{}", board.render_table());
    Ok(out)
}

/// Runs the core-percentage sweep with shared probe checkpoints and writes
/// `ablation_p.csv` plus one report per swept value.
pub fn cmd_ablate(config_path: &Path, p_values: &[f64], opts: &CmdOptions) -> Result<PathBuf> {
    let mut cfg = load_config(config_path, opts)?;
    if cfg.run.method.is_none() {
        cfg.run.method = Some(Method::Dpi);
    }
    let run_cfg = {
        let mut c = cfg.clone();
        c.run.method = Some(Method::Dpi);
        c.to_run_config()?
    };
    let out = PathBuf::from(cfg.require_out_dir()?);
    prepare_out_dir(&out, opts.overwrite)?;

    let sweep = ablate_p(&run_cfg, p_values)?;
    let mut rows = Vec::new();
    for (p, result) in &sweep {
        let board = result_scoreboard(result)?;
        let row = &board.rows[0];
        for cell in &row.per_task {
            rows.push(AblationRow {
                p: *p,
                task_id: cell.task_id.clone(),
                score: cell.score,
                avg_norm: row.avg_norm,
            });
        }
        println!("p = {:>6}: avg_norm = {:.4}", p, row.avg_norm);
    }
    write_snapshot(&cfg, &out)?;
    write_ablation_csv(&rows, &out.join("ablation_p.csv"))?;
    Ok(out)
}

/// Merges the reports of one or more run directories into a combined
/// scoreboard. All runs must come from the same suite.
pub fn cmd_report(run_dirs: &[PathBuf], out: Option<&Path>) -> Result<Scoreboard> {
    if run_dirs.is_empty() {
        return Err(Error::config("dirs", "report needs at least one run directory"));
    }
    let mut merged_rows = Vec::new();
    let mut fingerprint = None;
    let mut task_ids = None;
    for dir in run_dirs {
        let board = read_report(&dir.join("report.json"))?;
        match fingerprint {
            None => {
                fingerprint = Some(board.suite_fingerprint);
                task_ids = Some(board.task_ids.clone());
            }
            Some(fp) if fp != board.suite_fingerprint => {
                return Err(Error::IncompatibleSuites(format!(
                    "{} has suite fingerprint {:x}, expected {:x}",
                    dir.display(),
                    board.suite_fingerprint,
                    fp
                )));
            }
            _ => {}
        }
        merged_rows.extend(board.rows);
    }
    let board = build_scoreboard(
        fingerprint.unwrap(),
        task_ids.unwrap(),
        merged_rows,
    );
    if let Some(out_dir) = out {
        fs::create_dir_all(out_dir)?;
        write_report(&board, &out_dir.join("report.json"))?;
        write_scoreboard_csv(&board, &out_dir.join("scoreboard.csv"))?;
    }
    Ok(board)
}
