//! Command-line front end. Exit codes: 0 success, 1 usage or configuration
//! error, 2 numerical failure, 3 I/O or file-format error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::ablation::{run_ablation, Suite};
use crate::config::{Case, RunConfig};
use crate::error::{Error, Result};
use crate::io::Grid;
use crate::render::{render_grid, RenderOptions};
use crate::scenarios::Preset;
use crate::selfcheck::run_checks;
use crate::workflow::{execute, replay, Command, RunReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "dipinv", version, about = "2D DC resistivity inversion with a network-parameterized model")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Paint a scenario and write its noisy synthetic data.
    Simulate(RunArgs),
    /// Invert data with the network parameterization.
    InvertDip(RunArgs),
    /// Invert data with Gauss-Newton Tikhonov regularization.
    InvertConv(RunArgs),
    /// Run network ablation suites on one synthetic data set.
    Ablate(AblateArgs),
    /// Render a model grid file as a PPM image.
    Render(RenderArgs),
    /// Run the numerical self-tests.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// TOML run configuration; the preset is used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_preset, default_value = "full")]
    preset: Preset,
    /// Scene: 1 (layer over a dike), 2a (cylinder and dike), 2b (two cylinders).
    #[arg(long)]
    case: Option<String>,
    /// Dike dip in degrees for case 1.
    #[arg(long)]
    dip: Option<f64>,
    /// Relative noise level.
    #[arg(long)]
    noise: Option<f64>,
    /// Seed for noise, network initialisation and sensitivity probes.
    #[arg(long)]
    seed: Option<u64>,
    /// Stage-2 epoch budget.
    #[arg(long)]
    epochs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Observed data file; synthesized from the scenario when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Rerun the command recorded in a manifest.
    #[arg(long, conflicts_with_all = ["config", "case", "dip", "noise", "seed", "epochs", "data"])]
    replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// upsampler, blocks, dropout or all.
    #[arg(long, default_value = "all")]
    suite: String,
    /// Maximum number of variants run at once.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// Model grid file.
    grid: PathBuf,
    /// Output PPM file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    vmin: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    vmax: Option<f64>,
    /// Pixels per cell.
    #[arg(long, default_value_t = 4)]
    scale: usize,
    /// Padding cells to outline the core with.
    #[arg(long)]
    pad: Option<usize>,
}

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn exit_code(e: &Error) -> i32 {
    if e.is_io() {
        EXIT_IO
    } else if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::preset(self.preset),
        };
        if self.case.is_some() || self.dip.is_some() {
            let case = Case::parse(self.case.as_deref().unwrap_or("1"), self.dip.unwrap_or(45.0))?;
            cfg.set_scenario(case.scenario(self.preset)?);
        }
        if let Some(n) = self.noise {
            cfg.noise.rel = n;
        }
        if let Some(s) = self.seed {
            cfg.set_seed(s);
        }
        if let Some(e) = self.epochs {
            cfg.dip.epochs_stage2 = e;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn report(r: &RunReport) {
    println!("wrote {} data to {}", r.n_data, r.manifest.outputs["data"].display());
    if let Some(s) = &r.summary {
        println!(
            "{} on {}: {} iterations, chi {:.4}, rmse {:.4}, pearson {:.4}, smoothness {:.4}",
            r.manifest.command.name(),
            s.scenario,
            s.iterations,
            s.chi,
            s.rmse,
            s.pearson,
            s.smoothness
        );
    }
    println!("manifest: {}", r.manifest_path.display());
}

fn run_command(command: Command, args: &RunArgs) -> Result<()> {
    let r = match &args.replay {
        Some(m) => {
            let r = replay(m, args.scenario.out.as_deref())?;
            if r.manifest.command != command {
                return Err(Error::invalid(format!(
                    "manifest records '{}', not '{}'",
                    r.manifest.command.name(),
                    command.name()
                )));
            }
            r
        }
        None => execute(command, &args.scenario.resolve()?, args.data.as_deref())?,
    };
    report(&r);
    Ok(())
}

fn render(args: &RenderArgs) -> Result<()> {
    let grid = Grid::load(&args.grid)?;
    let opts = RenderOptions { vmin: args.vmin, vmax: args.vmax, scale: args.scale, pad: args.pad };
    let img = render_grid(&grid, &opts)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&args.out, img.to_ppm())?;
    println!("wrote {}x{} image to {}", img.width, img.height, args.out.display());
    Ok(())
}

fn check(seed: u64) -> Result<i32> {
    let results = run_checks(seed)?;
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    Ok(if results.iter().all(|r| r.passed) { EXIT_OK } else { EXIT_NUMERICAL })
}

fn dispatch(cmd: Cmd) -> Result<i32> {
    match cmd {
        Cmd::Simulate(a) => run_command(Command::Simulate, &a)?,
        Cmd::InvertDip(a) => run_command(Command::InvertDip, &a)?,
        Cmd::InvertConv(a) => run_command(Command::InvertConv, &a)?,
        Cmd::Ablate(a) => {
            let suites = Suite::parse_list(&a.suite)?;
            let cfg = a.scenario.resolve()?;
            let out: &Path = &cfg.output.dir;
            let rep = run_ablation(&suites, &cfg, out, a.workers)?;
            print!("{}", rep.table);
            println!("table: {}", rep.table_path.display());
        }
        Cmd::Render(a) => render(&a)?,
        Cmd::Check { seed } => return check(seed),
    }
    Ok(EXIT_OK)
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

