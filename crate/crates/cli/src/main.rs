use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coarselab::pipeline::{self, relabel, ExperimentConfig, Overrides, StageOutput, OUT_ENV};
use coarselab::{EmbeddedCloud, Error, Graph, PLMap, Result};

/// Coarse geometry experiments on graph families: covers, nerves,
/// embeddings, spectral data and the expander compression audit.
#[derive(Parser)]
#[command(name = "coarselab", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Flat key = value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the config file and COARSELAB_OUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Largest graph size for the brute-force Cheeger constant.
    #[arg(long, global = true)]
    max_exact_n: Option<usize>,
    #[arg(long, global = true)]
    trials: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the random regular family.
    Gen,
    /// Greedy covers of every member at every configured scale.
    Cover,
    /// Nerves of the covers and the projections onto them.
    Nerve,
    /// Spectral and nerve embeddings of the family plus a class-C0 complex.
    Embed,
    /// Spectral reports of the family or of the given graph files.
    Spectra {
        #[arg(long = "graph")]
        graphs: Vec<PathBuf>,
    },
    /// Poincaré and 1-Lipschitz compression bounds on random maps.
    Poincare,
    /// Far-pair compression audit of the family, or of one cloud on one graph.
    Audit {
        #[arg(long, requires = "cloud")]
        graph: Option<PathBuf>,
        #[arg(long, requires = "graph")]
        cloud: Option<PathBuf>,
    },
    /// Simplicial approximation of a PL map (a random one when no file is given).
    Approx {
        #[arg(long)]
        map: Option<PathBuf>,
        /// Lipschitz bound to use instead of the exact constant.
        #[arg(long)]
        lambda: Option<f64>,
        /// Subdivision depth to use instead of searching for one.
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Run every stage and write report.json.
    Report,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Parse { path: path.display().to_string(), msg: e.to_string() })
}

fn config(g: &Global) -> Result<ExperimentConfig> {
    let text = match &g.config {
        Some(p) => Some(fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let overrides =
        Overrides { seed: g.seed, out: g.out.clone(), max_exact_n: g.max_exact_n, trials: g.trials };
    let env_out = std::env::var_os(OUT_ENV).map(PathBuf::from);
    ExperimentConfig::resolve(text.as_deref(), &overrides, env_out)
}

fn finish(cfg: &ExperimentConfig, stage: &str, mut out: StageOutput) -> Result<bool> {
    out.save(&cfg.out, stage)?;
    for c in out.failures() {
        eprintln!("FAILED {}: {} {} {} (tolerance {})", c.name, c.lhs, c.relation, c.rhs, c.tolerance);
    }
    println!(
        "{stage}: {} artifacts, {}/{} checks hold, written to {}",
        out.artifacts.len(),
        out.checks.iter().filter(|c| c.holds).count(),
        out.checks.len(),
        cfg.out.display()
    );
    Ok(out.passed())
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = config(&cli.global)?;
    match cli.command {
        Command::Gen => {
            let (_, out) = pipeline::stage_gen(&cfg)?;
            finish(&cfg, "gen", out)
        }
        Command::Cover => {
            let graphs = pipeline::load_family(&cfg)?;
            let (_, out) = pipeline::stage_cover(&cfg, &graphs)?;
            finish(&cfg, "cover", out)
        }
        Command::Nerve => {
            let graphs = pipeline::load_family(&cfg)?;
            let (covers, _) = pipeline::stage_cover(&cfg, &graphs)?;
            let out = pipeline::stage_nerve(&cfg, &graphs, &covers)?;
            finish(&cfg, "nerve", out)
        }
        Command::Embed => {
            let graphs = pipeline::load_family(&cfg)?;
            let (_, out) = pipeline::stage_embed(&cfg, &graphs)?;
            finish(&cfg, "embed", out)
        }
        Command::Spectra { graphs } => {
            let (gs, names): (Vec<Graph>, Vec<String>) = if graphs.is_empty() {
                let gs = pipeline::load_family(&cfg)?;
                let names = gs.iter().map(|g| format!("n{:04}", g.n())).collect();
                (gs, names)
            } else {
                let gs = graphs.iter().map(|p| pipeline::read_graph(p)).collect::<Result<Vec<_>>>()?;
                let names = graphs
                    .iter()
                    .map(|p| p.file_stem().map_or_else(|| "graph".into(), |s| s.to_string_lossy().into_owned()))
                    .collect();
                (gs, names)
            };
            let (_, out) = pipeline::stage_spectra(&cfg, &gs, &names)?;
            finish(&cfg, "spectra", out)
        }
        Command::Poincare => {
            let graphs = pipeline::load_family(&cfg)?;
            finish(&cfg, "poincare", pipeline::stage_poincare(&cfg, &graphs)?)
        }
        Command::Audit { graph: Some(graph), cloud: Some(cloud) } => {
            let g = pipeline::read_graph(&graph)?;
            let c = EmbeddedCloud::from_json(&read(&cloud)?).map_err(|e| relabel(e, &cloud))?;
            finish(&cfg, "audit", pipeline::audit_cloud(&cfg, &g, &c)?)
        }
        Command::Audit { .. } => {
            let graphs = pipeline::load_family(&cfg)?;
            let reports = pipeline::spectral_reports(&cfg, &graphs)?;
            let embedded: Vec<_> = pipeline::embeddings(&cfg, &graphs)?.into_iter().map(|e| e.0).collect();
            finish(&cfg, "audit", pipeline::stage_audit(&cfg, &graphs, &reports, &embedded)?)
        }
        Command::Approx { map, lambda, depth } => {
            let f = match map {
                Some(p) => Some(PLMap::from_json(&read(&p)?).map_err(|e| relabel(e, &p))?),
                None => None,
            };
            finish(&cfg, "approx", pipeline::stage_approx(&cfg, f, lambda, depth)?)
        }
        Command::Report => {
            let report = pipeline::run_all(&cfg)?;
            for name in &report.failed {
                eprintln!("FAILED {name}");
            }
            println!(
                "report: {} checks, {} failed, written to {}",
                report.checks,
                report.failed.len(),
                cfg.out.join("report.json").display()
            );
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(6),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
