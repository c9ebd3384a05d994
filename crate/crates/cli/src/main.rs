use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use emkm::manifest::RunManifest;
use emkm::run::RunError;
use emkm::ScenarioConfig;

#[derive(Parser)]
#[command(name = "emkm", version, about = "Electromagnetic Kirchhoff migration scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its products.
    Run {
        config: PathBuf,
        /// Output directory (overrides `outputs.directory`).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Noise seed (overrides `noise.seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a scenario without running it.
    Validate { config: PathBuf },
    /// Summarize a finished run from its manifest.
    Report { manifest: PathBuf },
}

fn load(path: &Path) -> Result<ScenarioConfig, RunError> {
    let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(ScenarioConfig::from_toml(&text)?)
}

fn execute(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run {
            config,
            out_dir,
            seed,
            threads,
        } => {
            let mut cfg = load(&config)?;
            if let (Some(seed), Some(noise)) = (seed, cfg.noise.as_mut()) {
                noise.seed = seed;
            }
            if let Some(dir) = &out_dir {
                cfg.outputs.directory = dir.to_string_lossy().into_owned();
            }
            if let Some(n) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| RunError::Numerical(format!("thread pool: {e}")))?;
            }
            let dir = PathBuf::from(&cfg.outputs.directory);
            let manifest = emkm::run(&cfg, &dir)?;
            print!("{}", manifest.summary(&dir));
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            let s = cfg.build()?;
            let scene = match &s.scene {
                emkm::config::Scene::Passive(d) => format!("{} dipoles", d.len()),
                emkm::config::Scene::Active(a) => format!("{} scatterers", a.len()),
            };
            println!(
                "ok: {} elements, {} frequencies, {scene}, {} grids",
                s.array.len(),
                s.band.len(),
                s.grids.len()
            );
        }
        Command::Report { manifest } => {
            let m = RunManifest::read(&manifest)?;
            let dir = manifest.parent().unwrap_or(Path::new("."));
            print!("{}", m.summary(dir));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap reports usage errors with 2, which is reserved for invalid configs
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
