//! Architecture ablations of the network inversion: upsampling operator,
//! number of blocks, and dropout. Every variant inverts the same data set
//! and writes its own run directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::write_text;
use crate::net::Upsampler;
use crate::workflow::{execute, synthesize, Command, RunSummary, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Upsampler,
    Blocks,
    Dropout,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::Upsampler, Suite::Blocks, Suite::Dropout];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Upsampler => "upsampler",
            Suite::Blocks => "blocks",
            Suite::Dropout => "dropout",
        }
    }

    /// One suite by name, or all of them for `all`.
    pub fn parse_list(s: &str) -> Result<Vec<Suite>> {
        match s {
            "all" => Ok(Suite::ALL.to_vec()),
            "upsampler" => Ok(vec![Suite::Upsampler]),
            "blocks" => Ok(vec![Suite::Blocks]),
            "dropout" => Ok(vec![Suite::Dropout]),
            other => Err(Error::invalid(format!(
                "unknown suite '{other}' (expected upsampler, blocks, dropout or all)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Variant {
    pub suite: Suite,
    pub label: String,
    pub config: RunConfig,
}

/// The variant configurations of one suite, derived from `base`.
pub fn variants(suite: Suite, base: &RunConfig) -> Vec<Variant> {
    let make = |label: String, edit: &dyn Fn(&mut RunConfig)| {
        let mut config = base.clone();
        edit(&mut config);
        Variant { suite, label, config }
    };
    match suite {
        Suite::Upsampler => Upsampler::ALL
            .iter()
            .map(|&u| make(u.name().to_string(), &|c| c.net.upsampler = u))
            .collect(),
        Suite::Blocks => [1, 3, 5]
            .iter()
            .map(|&b| make(format!("{b}-blocks"), &|c| c.net.blocks = b))
            .collect(),
        Suite::Dropout => [0.0, 0.1]
            .iter()
            .map(|&r| make(format!("dropout-{r}"), &|c| c.dip.dropout_rate = r))
            .collect(),
    }
}

#[derive(Debug, Clone)]
pub struct AblationRow {
    pub suite: Suite,
    pub label: String,
    pub dir: PathBuf,
    pub outcome: std::result::Result<RunSummary, String>,
}

#[derive(Debug, Clone)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    pub table: String,
    pub table_path: PathBuf,
}

pub fn format_table(rows: &[AblationRow]) -> String {
    let mut s = String::from("# dipinv-ablation v1\n");
    let _ = writeln!(s, "{:<10} {:<12} {:<7} {:>8} {:>8} {:>10} {:>8} {:>7}", "suite", "variant", "status", "chi", "rmse", "smoothness", "pearson", "epochs");
    for r in rows {
        match &r.outcome {
            Ok(m) => {
                let _ = writeln!(
                    s,
                    "{:<10} {:<12} {:<7} {:>8.4} {:>8.4} {:>10.4} {:>8.4} {:>7}",
                    r.suite.name(),
                    r.label,
                    "ok",
                    m.chi,
                    m.rmse,
                    m.smoothness,
                    m.pearson,
                    m.iterations
                );
            }
            Err(e) => {
                let _ = writeln!(s, "{:<10} {:<12} failed  {}", r.suite.name(), r.label, e.replace('\n', " "));
            }
        }
    }
    s
}

/// Runs every variant of `suites` on one synthetic data set, at most
/// `workers` at a time. A failing variant is recorded in the table and the
/// others still run.
pub fn run_ablation(suites: &[Suite], base: &RunConfig, out: &Path, workers: usize) -> Result<AblationReport> {
    base.validate()?;
    let scene = Scene::build(base)?;
    let data_path = out.join("data.txt");
    write_text(&data_path, &synthesize(base, &scene)?.to_text())?;

    let mut jobs: Vec<Variant> = suites.iter().flat_map(|&s| variants(s, base)).collect();
    for v in &mut jobs {
        v.config.output.dir = out.join(v.suite.name()).join(&v.label);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start workers: {e}")))?;
    let rows: Vec<AblationRow> = pool.install(|| {
        jobs.par_iter()
            .map(|v| {
                let outcome = execute(Command::InvertDip, &v.config, Some(&data_path))
                    .map_err(|e| e.to_string())
                    .and_then(|r| r.summary.ok_or_else(|| "no summary".to_string()));
                AblationRow { suite: v.suite, label: v.label.clone(), dir: v.config.output.dir.clone(), outcome }
            })
            .collect()
    });
    let table = format_table(&rows);
    let table_path = out.join("ablation.txt");
    write_text(&table_path, &table)?;
    Ok(AblationReport { rows, table, table_path })
}
