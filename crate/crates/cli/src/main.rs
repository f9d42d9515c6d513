use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pathgeom::FKind;
use pathgeom_cli::config::{self, resolve, ExperimentConfig};
use pathgeom_cli::{output, presets, renorm_scan, run_experiment};

#[derive(Parser)]
#[command(name = "pathgeom", version, about = "Geometry of lattice path integrals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSVs, figures and a manifest.
    Run {
        #[command(flatten)]
        source: Source,
        /// Overrides `sampler.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `output.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; defaults to the number of cores.
        #[arg(long)]
        threads: Option<usize>,
        /// Permit 0 < gamma < 0.3, where chains mix very slowly.
        #[arg(long)]
        allow_small_gamma: bool,
    },
    /// Check a config without running any chain.
    Validate {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        allow_small_gamma: bool,
    },
    /// Tabulate s[f], g[f] and the small-a divergence class.
    RenormScan {
        #[arg(long, value_enum)]
        f: FArg,
        /// Exponent for `--f gamma`.
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<f64>,
        /// Increment cutoff L.
        #[arg(long, default_value_t = 1.0)]
        cutoff: f64,
        /// Comma-separated lattice spacings.
        #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,1e-4")]
        spacings: Vec<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// List built-in experiments, or print one as a config file.
    Presets {
        /// Print this preset's config.
        #[arg(long)]
        show: Option<String>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Config file or run manifest.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in experiment name.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FArg {
    Identity,
    Gamma,
    Tanh,
    Sin,
}

/// Returns the config and the small-gamma flag stored in a manifest, if any.
fn load(source: &Source) -> anyhow::Result<(ExperimentConfig, bool)> {
    if let Some(path) = &source.config {
        return config::load_with_flags(path);
    }
    let name = source.preset.as_deref().unwrap_or_default();
    match presets::find(name) {
        Some(p) => Ok((p.config(), false)),
        None => anyhow::bail!("unknown preset {name:?}; see `pathgeom presets`"),
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run {
            source,
            seed,
            out,
            threads,
            allow_small_gamma,
        } => {
            let (mut cfg, stored) = load(&source)?;
            if let Some(s) = seed {
                cfg.sampler.seed = s;
            }
            if let Some(t) = threads {
                rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
            }
            let report = run_experiment(&cfg, allow_small_gamma || stored, out.as_deref())?;
            println!("{}", report.directory.display());
            for f in &report.manifest.run.failures {
                eprintln!("error: {f}");
            }
            if report.manifest.run.status != "complete" {
                eprintln!("run incomplete; partial results kept in {}", report.directory.display());
                return Ok(ExitCode::FAILURE);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate {
            source,
            allow_small_gamma,
        } => {
            let (cfg, stored) = load(&source)?;
            let r = resolve(&cfg, allow_small_gamma || stored)?;
            println!("valid: {} ({} series)", r.config.output.experiment, r.series.len());
            for s in &r.series {
                println!("  {}: {} at N = {:?}", s.label, s.kind, s.n_sites);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::RenormScan {
            f,
            gamma,
            cutoff,
            spacings,
            out,
        } => {
            let fkind = match (f, gamma) {
                (FArg::Gamma, Some(g)) => FKind::Gamma(g),
                (FArg::Gamma, None) => anyhow::bail!("--f gamma needs --gamma"),
                (_, Some(_)) => anyhow::bail!("--gamma only applies to --f gamma"),
                (FArg::Identity, None) => FKind::Identity,
                (FArg::Tanh, None) => FKind::Tanh,
                (FArg::Sin, None) => FKind::Sin,
            };
            let scan = renorm_scan::scan(fkind, cutoff, &spacings)?;
            let dir = output::create_run_dir(&out, "renorm-scan", &output::timestamp())?;
            renorm_scan::write(&dir, &scan)?;
            println!("{}", dir.display());
            if let Some(d) = &scan.divergence {
                println!("slope {:.4}: {}", d.slope, d.class);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Presets { show } => {
            match show {
                Some(name) => match presets::find(&name) {
                    Some(p) => print!("{}", config::to_toml(&p.config())),
                    None => anyhow::bail!("unknown preset {name:?}"),
                },
                None => {
                    for p in presets::PRESETS {
                        println!("{:<6} {}", p.name, p.description);
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
