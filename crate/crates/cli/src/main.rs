//! `carleman-lab`: config-driven runs of the solvers, weight diagnostics,
//! stability experiments and reconstructions.

mod commands;
mod config;
mod error;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::commands::Artifacts;
use crate::config::ExperimentConfig;
use crate::error::{CliError, EXIT_OK};

#[derive(Parser, Debug)]
#[command(name = "carleman-lab", version, about = "Carleman-weight diagnostics and inverse source experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the forward problem and dump the field.
    Forward(RunArgs),
    /// Ratio curves of the weighted estimates on the manufactured suite.
    Carleman(RunArgs),
    /// Absorption diagnostics of the source term.
    Absorb(RunArgs),
    /// Lipschitz (wave) or local Hölder (heat) stability ratios.
    Stability(RunArgs),
    /// Boundary observability of free waves.
    Observe(RunArgs),
    /// Conditional stability of the lateral Cauchy problem.
    Cauchy(RunArgs),
    /// Tikhonov reconstruction from synthetic data.
    Reconstruct(RunArgs),
    /// Reconstruction error against data noise.
    NoiseStudy(RunArgs),
    /// Merge JSON summaries into one table.
    Report {
        /// JSON summaries to merge.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "s-min")]
    s_min: Option<f64>,
    #[arg(long = "s-max")]
    s_max: Option<f64>,
    #[arg(long = "s-steps")]
    s_steps: Option<usize>,
    /// Nodes per axis; also replaces the refinement ladder.
    #[arg(long)]
    grid: Option<usize>,
    /// Run even when an observation-time condition fails; nothing is asserted.
    #[arg(long)]
    exploratory: bool,
    /// Final time.
    #[arg(long = "T")]
    t_final: Option<f64>,
    /// `section.key=value`, applied in order before the flags above.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let text = match &self.config {
            Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::io(p.display().to_string(), e))?,
            None => String::new(),
        };
        let mut cfg = ExperimentConfig::from_toml(&text, &self.overrides)?;
        if let Some(s) = self.seed {
            cfg.run.seed = s;
        }
        if let Some(v) = self.s_min {
            cfg.weight.s_min = v;
        }
        if let Some(v) = self.s_max {
            cfg.weight.s_max = v;
        }
        if let Some(v) = self.s_steps {
            cfg.weight.s_steps = v;
        }
        if let Some(n) = self.grid {
            cfg.domain.nx = n;
            cfg.run.grids = Some(vec![n]);
        }
        if self.exploratory {
            cfg.run.exploratory = true;
        }
        if let Some(t) = self.t_final {
            cfg.run.t_final = Some(t);
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Writes the artifacts and a manifest listing their hashes; no timestamps,
/// so identical inputs give identical directories.
fn persist(dir: &Path, subcommand: &str, input_hash: &str, extra: serde_json::Value, arts: &Artifacts) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display().to_string(), e))?;
    let mut listed = Vec::new();
    for (name, bytes) in &arts.files {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(path.display().to_string(), e))?;
        listed.push(json!({ "name": name, "bytes": bytes.len(), "sha256": hex_digest(bytes) }));
    }
    let mut manifest = json!({
        "tool": "carleman-lab",
        "version": env!("CARGO_PKG_VERSION"),
        "library_version": carleman_lab::VERSION,
        "subcommand": subcommand,
        "config_sha256": input_hash,
        "artifacts": listed,
    });
    if let (Some(m), serde_json::Value::Object(extra)) = (manifest.as_object_mut(), extra) {
        m.extend(extra);
    }
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    let path = dir.join("manifest.json");
    std::fs::write(&path, text).map_err(|e| CliError::io(path.display().to_string(), e))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, args, job): (&str, RunArgs, fn(&ExperimentConfig) -> Result<Artifacts, CliError>) = match cli.command {
        Command::Report { inputs, out } => {
            let mut texts = Vec::new();
            for p in &inputs {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p.display().to_string(), e))?;
                texts.push((p.display().to_string(), text));
            }
            let arts = commands::report(&texts)?;
            let joined: String = texts.iter().map(|(n, t)| format!("{n}\n{t}")).collect();
            print!("{}", String::from_utf8_lossy(&arts.files[0].1));
            return persist(&out, "report", &hex_digest(joined.as_bytes()), json!({ "inputs": texts.len() }), &arts);
        }
        Command::Forward(a) => ("forward", a, commands::forward),
        Command::Carleman(a) => ("carleman", a, commands::carleman),
        Command::Absorb(a) => ("absorb", a, commands::absorb),
        Command::Stability(a) => ("stability", a, commands::stability),
        Command::Observe(a) => ("observe", a, commands::observe),
        Command::Cauchy(a) => ("cauchy", a, commands::cauchy),
        Command::Reconstruct(a) => ("reconstruct", a, commands::reconstruct_cmd),
        Command::NoiseStudy(a) => ("noise-study", a, commands::noise_study),
    };
    let cfg = args.load()?;
    let canonical = cfg.canonical();
    let arts = job(&cfg)?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let extra = json!({
        "scenario": cfg.scenario,
        "seed": cfg.run.seed,
        "grid": cfg.grids(),
        "exploratory": cfg.run.exploratory,
    });
    let mut arts = arts;
    arts.files.push(("config.toml".into(), canonical.clone().into_bytes()));
    persist(&dir, name, &hex_digest(canonical.as_bytes()), extra, &arts)?;
    eprintln!("{name}: wrote {} files to {}", arts.files.len() + 1, dir.display());
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
