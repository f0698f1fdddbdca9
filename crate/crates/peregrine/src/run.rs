//! Subcommand drivers: each takes a validated [`RunConfig`], produces its
//! artifacts on disk, and records a manifest with the full configuration,
//! code version, outcome, and wall-clock. Blow-up is a reported outcome
//! (`status = "blew_up"`), not a failure.

use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::config::{OutputFormat, RunConfig};
use crate::decomp::{
    decay_report, evolve_coupled, lift_periodic, project_periodic, BlowupComponent,
};
use crate::error::{Error, Result};
use crate::grid::{sup_distance, Field};
use crate::init::{build_initial, InitialKind};
use crate::kernel::{synthesize_kernel, tail_exponent};
use crate::snapshot;
use crate::splitting::{estimate_order, evolve, OrderFit, SolveOutcome};

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub subcommand: String,
    pub version: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_star_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blowup_component: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_used: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order_exact: Option<bool>,
    pub outputs: Vec<String>,
    pub started_unix_s: f64,
    pub wall_seconds: f64,
    pub config: RunConfig,
}

impl Manifest {
    fn new(subcommand: &str, config: &RunConfig) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            status: "completed".to_string(),
            t_star_estimate: None,
            blowup_component: None,
            h_used: None,
            tail_slope: None,
            order_slope: None,
            order_exact: None,
            outputs: Vec::new(),
            started_unix_s: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs_f64())
                .unwrap_or(0.0),
            wall_seconds: 0.0,
            config: config.clone(),
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        path.file_name()
            .map(|n| n.to_string_lossy())
            .unwrap_or_default(),
        std::process::id()
    ));
    fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn finish(mut manifest: Manifest, dir: &Path, clock: Instant) -> Result<Manifest> {
    manifest.wall_seconds = clock.elapsed().as_secs_f64();
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::SnapshotFormat(format!("manifest: {e}")))?;
    write_text_atomic(&dir.join("manifest.json"), &text)?;
    Ok(manifest)
}

fn write_snapshot(field: &Field, dir: &Path, index: usize, format: OutputFormat) -> Result<String> {
    let name = match format {
        OutputFormat::Bin => format!("snapshot_{index:06}.bin"),
        OutputFormat::Csv => format!("snapshot_{index:06}.csv"),
    };
    let path = dir.join(&name);
    match format {
        OutputFormat::Bin => snapshot::write_binary(field, &path)?,
        OutputFormat::Csv => snapshot::write_csv(field, &path)?,
    }
    Ok(name)
}

/// Overrides from the command line, applied on top of the config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub stride: Option<usize>,
}

fn effective(cfg: &RunConfig, overrides: &Overrides) -> (PathBuf, usize) {
    (
        overrides
            .out_dir
            .clone()
            .unwrap_or_else(|| cfg.output.dir.clone()),
        overrides.stride.unwrap_or(cfg.output.stride),
    )
}

/// `simulate`: evolve the configured initial state, write snapshots and the
/// manifest.
pub fn run_simulate(cfg: &RunConfig, overrides: &Overrides) -> Result<Manifest> {
    let clock = Instant::now();
    let (dir, stride) = effective(cfg, overrides);
    ensure_dir(&dir)?;
    let mut manifest = Manifest::new("simulate", cfg);

    let grid = cfg.box_grid()?;
    let lattice = cfg.lattice().ok();
    let (u0, _) = build_initial(&cfg.initial, &grid, lattice.as_ref())?;
    let report = evolve(
        &u0,
        cfg.t_end,
        &cfg.scheme()?,
        cfg.model,
        &cfg.reaction,
        &Default::default(),
        stride,
    )?;
    manifest.h_used = Some(report.h_used);
    for (i, (_, field)) in report.snapshots.iter().enumerate() {
        let name = write_snapshot(field, &dir, i, cfg.output.format)?;
        manifest.outputs.push(name);
    }
    match &report.outcome {
        SolveOutcome::Completed { .. } => {}
        SolveOutcome::BlewUp { t_star_estimate } => {
            manifest.status = "blew_up".to_string();
            manifest.t_star_estimate = Some(*t_star_estimate);
        }
    }
    finish(manifest, &dir, clock)
}

/// `kernel`: synthesize the kernel at `t = scheme.t_end`, emit samples as
/// CSV and a tail fit over the window `[L/40, L/10]`.
pub fn run_kernel(cfg: &RunConfig, overrides: &Overrides) -> Result<Manifest> {
    let clock = Instant::now();
    let (dir, _) = effective(cfg, overrides);
    ensure_dir(&dir)?;
    let mut manifest = Manifest::new("kernel", cfg);

    let grid = crate::grid::GridSpec::new(cfg.domain.points, cfg.domain.length, 1)?;
    let kernel = synthesize_kernel(grid, cfg.model, cfg.t_end)?;
    let mut csv = String::from("x,value\n");
    for k in 0..grid.n_points() {
        csv.push_str(&format!(
            "{:.17e},{:.17e}\n",
            kernel.coordinate(k),
            kernel.values()[k]
        ));
    }
    write_text_atomic(&dir.join("kernel.csv"), &csv)?;
    manifest.outputs.push("kernel.csv".to_string());

    let window = (grid.length() / 40.0, grid.length() / 10.0);
    let slope = tail_exponent(&kernel, window)?;
    manifest.tail_slope = Some(slope);
    let fit = format!(
        "window_lo,window_hi,slope\n{:.17e},{:.17e},{:.17e}\n",
        window.0, window.1, slope
    );
    write_text_atomic(&dir.join("tailfit.csv"), &fit)?;
    manifest.outputs.push("tailfit.csv".to_string());

    finish(manifest, &dir, clock)
}

/// `decompose`: run the coupled background/perturbation solver against the
/// monolithic one and report per-snapshot consistency, perturbation decay,
/// and projector recovery error.
pub fn run_decompose(cfg: &RunConfig, overrides: &Overrides) -> Result<Manifest> {
    let clock = Instant::now();
    let (dir, stride) = effective(cfg, overrides);
    ensure_dir(&dir)?;
    let mut manifest = Manifest::new("decompose", cfg);

    if !matches!(cfg.initial, InitialKind::PeregrineSum { .. }) {
        return Err(Error::Config(
            "decompose requires initial.kind = \"peregrine_sum\"".into(),
        ));
    }
    let grid = cfg.box_grid()?;
    let lattice = cfg.lattice()?;
    let (u0, state) = build_initial(&cfg.initial, &grid, Some(&lattice))?;
    let state = state.expect("peregrine_sum always records its decomposition");

    let scheme = cfg.scheme()?;
    let opts = Default::default();
    let coupled = evolve_coupled(
        &state,
        cfg.t_end,
        &scheme,
        &lattice,
        cfg.model,
        &cfg.reaction,
        &opts,
        stride,
    )?;
    let mono = evolve(
        &u0,
        cfg.t_end,
        &scheme,
        cfg.model,
        &cfg.reaction,
        &opts,
        stride,
    )?;
    manifest.h_used = Some(coupled.h_used);

    let skip = (lattice.box_cells() / 4).max(1);
    let mut csv = String::from("time,sum_consistency_error,outer_sup_w,projector_error\n");
    for (snap, (_, u)) in coupled.snapshots.iter().zip(&mono.snapshots) {
        let sum = snap.reassemble(&lattice)?;
        let consistency = sup_distance(&sum, u)?;
        let decay = decay_report(snap, 0.1)?;
        let projected = project_periodic(u, &lattice, skip)?;
        let projector_error = sup_distance(&projected, snap.background())?;
        csv.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e}\n",
            snap.time(),
            consistency,
            decay.outer_sup,
            projector_error
        ));
    }
    write_text_atomic(&dir.join("decompose.csv"), &csv)?;
    manifest.outputs.push("decompose.csv".to_string());

    if let Some((component, t_star)) = coupled.blew_up() {
        manifest.status = "blew_up".to_string();
        manifest.t_star_estimate = Some(t_star);
        manifest.blowup_component = Some(
            match component {
                BlowupComponent::Periodic => "periodic",
                BlowupComponent::Localized => "localized",
            }
            .to_string(),
        );
    } else if mono.blew_up() {
        manifest.status = "blew_up".to_string();
        manifest.t_star_estimate = mono.t_star_estimate();
    }

    // final reassembled field for inspection
    if let Some(final_state) = coupled.final_state() {
        let sum = final_state.reassemble(&lattice)?;
        let name = write_snapshot(&sum, &dir, coupled.step_count, cfg.output.format)?;
        manifest.outputs.push(name);
        let lifted = lift_periodic(final_state.background(), &lattice)?;
        let name = match cfg.output.format {
            OutputFormat::Bin => "background.bin",
            OutputFormat::Csv => "background.csv",
        };
        match cfg.output.format {
            OutputFormat::Bin => snapshot::write_binary(&lifted, &dir.join(name))?,
            OutputFormat::Csv => snapshot::write_csv(&lifted, &dir.join(name))?,
        }
        manifest.outputs.push(name.to_string());
    }

    finish(manifest, &dir, clock)
}

/// `converge`: order sweep at `h = dt * {8, 4, 2, 1}` against the fine-step
/// reference; `t_end/dt` must be divisible by 8 so every sweep entry is
/// commensurate.
pub fn run_converge(cfg: &RunConfig, overrides: &Overrides) -> Result<Manifest> {
    let clock = Instant::now();
    let (dir, _) = effective(cfg, overrides);
    ensure_dir(&dir)?;
    let mut manifest = Manifest::new("converge", cfg);

    let n_fine = crate::splitting::commensurate_steps(cfg.t_end, cfg.dt)?;
    if n_fine % 8 != 0 {
        return Err(Error::Config(format!(
            "converge needs t_end/dt divisible by 8, got {n_fine}"
        )));
    }
    let h_list: Vec<f64> = [8.0, 4.0, 2.0, 1.0]
        .iter()
        .map(|mult| cfg.dt * mult)
        .collect();

    let grid = cfg.box_grid()?;
    let lattice = cfg.lattice().ok();
    let (u0, _) = build_initial(&cfg.initial, &grid, lattice.as_ref())?;
    let estimate = estimate_order(
        &u0,
        cfg.t_end,
        cfg.model,
        &cfg.reaction,
        cfg.variant,
        &h_list,
        &Default::default(),
    )?;

    let mut csv = String::from("h,sup_error\n");
    for (h, err) in &estimate.entries {
        csv.push_str(&format!("{h:.17e},{err:.17e}\n"));
    }
    match estimate.fit {
        OrderFit::Exact => {
            csv.push_str("slope,exact\n");
            manifest.order_exact = Some(true);
        }
        OrderFit::Slope(s) => {
            csv.push_str(&format!("slope,{s:.17e}\n"));
            manifest.order_slope = Some(s);
            manifest.order_exact = Some(false);
        }
    }
    write_text_atomic(&dir.join("converge.csv"), &csv)?;
    manifest.outputs.push("converge.csv".to_string());

    finish(manifest, &dir, clock)
}

/// Dispatch by subcommand name; unknown names are a config error.
pub fn run_subcommand(name: &str, cfg: &RunConfig, overrides: &Overrides) -> Result<Manifest> {
    match name {
        "simulate" => run_simulate(cfg, overrides),
        "kernel" => run_kernel(cfg, overrides),
        "decompose" => run_decompose(cfg, overrides),
        "converge" => run_converge(cfg, overrides),
        other => Err(Error::Config(format!("unknown subcommand '{other}'"))),
    }
}
