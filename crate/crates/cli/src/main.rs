use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use vorotop::neighbor::NeighborIndex;
use vorotop::pipeline::optimize_with;
use vorotop::projection::{project, ProjectionConfig};
use vorotop::voronoi::rasterize_density;

use vorotop_cli::config::{Overrides, RunConfig};
use vorotop_cli::emit::{write_density_pgm, write_sites_toml, CsvLog};
use vorotop_cli::gradcheck;
use vorotop_cli::mask::load_mask;
use vorotop_cli::presets;

/// Topology optimization over a differentiable anisotropic Voronoi
/// design space.
#[derive(Parser)]
#[command(name = "vorotop", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a compliance-minimization job from a config file or preset.
    Run(RunArgs),
    /// Validate the analytic field gradients against finite differences.
    CheckGradients(CheckArgs),
    /// Rasterize a site dump into a density image.
    Render(RenderArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to a TOML run config; omit when using --preset.
    config: Option<PathBuf>,
    /// Built-in configuration to run instead of a file.
    #[arg(long, value_parser = presets::PRESET_NAMES)]
    preset: Option<String>,
    /// Override the site-scatter seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write a density image every K iterations (0 = final only).
    #[arg(long, default_value_t = 0)]
    emit_every: usize,
    /// Override the iteration budget.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Grayscale mask image, one pixel per element.
    #[arg(long)]
    mask: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Randomized trials; half run with the virtual competitor enabled.
    #[arg(long, default_value_t = 20)]
    trials: usize,
}

#[derive(Args)]
struct RenderArgs {
    /// Site dump written by `vorotop run`.
    sites: PathBuf,
    /// Config or preset supplying the grid and field parameters.
    config: Option<PathBuf>,
    #[arg(long, value_parser = presets::PRESET_NAMES)]
    preset: Option<String>,
    /// Output image path.
    #[arg(long, default_value = "render.pgm")]
    out: PathBuf,
    /// Projection steepness; defaults to the config's final scheduled
    /// value.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    mask: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.cmd {
        Cmd::Run(args) => run(args),
        Cmd::CheckGradients(args) => check_gradients(args),
        Cmd::Render(args) => render(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_config(path: Option<&Path>, preset: Option<&str>) -> Result<RunConfig> {
    match (path, preset) {
        (Some(_), Some(_)) => bail!("give a config file or --preset, not both"),
        (Some(p), None) => RunConfig::from_path(p),
        (None, Some(name)) => presets::preset(name),
        (None, None) => bail!(
            "give a config file or --preset NAME (presets: {})",
            presets::PRESET_NAMES.join(", ")
        ),
    }
}

fn build_overrides(
    cfg: &RunConfig,
    mask: Option<&Path>,
    seed: Option<u64>,
    max_iter: Option<usize>,
) -> Result<Overrides> {
    let [nx, ny] = cfg.domain.resolution;
    let mask = mask.map(|p| load_mask(p, nx, ny)).transpose()?;
    Ok(Overrides { seed, max_iterations: max_iter, mask })
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let cfg = load_config(args.config.as_deref(), args.preset.as_deref())?;
    let overrides =
        build_overrides(&cfg, args.mask.as_deref(), args.seed, args.max_iter)?;
    let problem = cfg.to_problem(&overrides)?;
    let (nx, ny) = problem.mask.resolution();
    let final_mask = problem.mask.clone();
    let field = problem.field;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;
    let mut log = CsvLog::create(&args.out.join("log.csv"))?;

    println!(
        "running {} x {} elements, {} sites, volume target {:.3}, {} iterations max",
        nx,
        ny,
        problem.sites.len(),
        problem.volume_target,
        problem.max_iterations
    );

    let started = Instant::now();
    let mut emit_err: Option<anyhow::Error> = None;
    let emit_every = args.emit_every;
    let out_dir = args.out.clone();
    let outcome = optimize_with(problem, |view| {
        let r = view.record;
        if let Err(e) = log.record(r) {
            emit_err.get_or_insert(e);
        }
        if emit_every > 0 && r.iteration % emit_every == 0 {
            let path = out_dir.join(format!("density_{:04}.pgm", r.iteration));
            if let Err(e) = write_density_pgm(&path, nx, ny, view.projected.values()) {
                emit_err.get_or_insert(e);
            }
        }
        if r.iteration % 10 == 0 {
            println!(
                "iter {:4}  compliance {:.6e}  volume {:.4}  delta {:.3e}  steepness {}",
                r.iteration, r.compliance, r.volume_fraction, r.delta, r.steepness
            );
        }
    })?;
    log.flush()?;
    if let Some(e) = emit_err {
        return Err(e.context("writing per-iteration outputs"));
    }

    // Final field from the returned (post-update) sites, at the steepness
    // the run ended on.
    let last = outcome.history.last();
    let steepness = last.map_or(1.0, |r| r.steepness);
    let index = NeighborIndex::build(&outcome.sites);
    let (density, _) =
        rasterize_density(&outcome.sites, &final_mask, &field, &index, false)?;
    let projected = project(
        &density,
        &ProjectionConfig::default().with_steepness(steepness),
    );
    write_density_pgm(
        &args.out.join("density_final.pgm"),
        nx,
        ny,
        projected.values(),
    )?;
    write_sites_toml(&args.out.join("sites_final.toml"), &outcome.sites, (nx, ny))?;

    let elapsed = started.elapsed().as_secs_f64();
    if let Some(r) = last {
        println!(
            "stopped after {} iterations ({}): compliance {:.6e}, volume {:.4}",
            outcome.history.len(),
            outcome.stop_reason,
            r.compliance,
            r.volume_fraction
        );
    } else {
        println!("validated without iterating ({})", outcome.stop_reason);
    }
    if outcome.fem_warnings > 0 {
        println!(
            "note: {} elasticity solves missed their tolerance (best iterate used)",
            outcome.fem_warnings
        );
    }
    println!(
        "wrote log.csv, density_final.pgm, sites_final.toml to {} in {:.1}s",
        args.out.display(),
        elapsed
    );
    Ok(ExitCode::SUCCESS)
}

fn check_gradients(args: CheckArgs) -> Result<ExitCode> {
    if args.trials == 0 {
        bail!("--trials must be at least 1");
    }
    let tolerance = 1e-4;
    let started = Instant::now();
    let outcome = gradcheck::run_sweep(args.seed, args.trials, tolerance);
    for t in &outcome.trials {
        println!(
            "trial {:2}  eps {:7.0e}  checked {:3}  skipped {:2}  max rel err {:.3e}{}",
            t.trial,
            t.boundary_weight,
            t.checked,
            t.skipped,
            t.max_rel_error,
            if t.max_rel_error < tolerance { "" } else { "  <-- FAIL" }
        );
    }
    println!(
        "worst {:.3e} over {} trials in {:.2}s (tolerance {:.0e})",
        outcome.worst(),
        outcome.trials.len(),
        started.elapsed().as_secs_f64(),
        tolerance
    );
    if outcome.passed() {
        println!("gradients verified");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("gradient check FAILED");
        Ok(ExitCode::from(2))
    }
}

fn render(args: RenderArgs) -> Result<ExitCode> {
    let cfg = load_config(args.config.as_deref(), args.preset.as_deref())?;
    let overrides = build_overrides(&cfg, args.mask.as_deref(), None, None)?;
    let [nx, ny] = cfg.domain.resolution;
    let sites = vorotop_cli::emit::read_sites_toml(&args.sites, ny as f64)?;

    // Borrow the mask and field setup from the config; sites come from the
    // dump.
    let mut problem = cfg.to_problem(&overrides)?;
    problem.field.neighbor_count = problem.field.neighbor_count.min(sites.len());
    let index = NeighborIndex::build(&sites);
    let (density, _) =
        rasterize_density(&sites, &problem.mask, &problem.field, &index, false)?;
    let steepness = args.gamma.unwrap_or_else(|| cfg.final_steepness());
    if steepness < 1.0 {
        bail!("--gamma must be at least 1");
    }
    let projected = project(
        &density,
        &ProjectionConfig::default().with_steepness(steepness),
    );
    write_density_pgm(&args.out, nx, ny, projected.values())?;
    println!(
        "rendered {} sites at steepness {} to {}",
        sites.len(),
        steepness,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}
