use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use shocklab_cli::artifacts::write_json;
use shocklab_cli::commands::{self, VerifyReport, EXIT_CONFIG, EXIT_SOLVER};
use shocklab_cli::config::{parse_vary, RunConfig, PRESETS};

#[derive(Parser)]
#[command(name = "shocklab", version, about = "Shock formation laboratory for the fractal Burgers equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the profile family: cubic residuals, pointwise bounds, jet at the origin.
    VerifyProfiles {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Evaluate the family with a wrong scaling; the checks must fail.
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Cross-check the fractional Laplacian and its estimates.
    VerifyFraclap {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Inviscid Burgers solver against characteristics.
    OracleCompare {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute one configuration and write its artifact bundle.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Execute the Cartesian product of `--vary` lists concurrently.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// `key=v1,v2,...`; repeat for more keys.
        #[arg(long)]
        vary: Vec<String>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

#[derive(Args)]
struct Source {
    /// JSON run configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// `key.path=value` override applied after loading; repeatable.
    #[arg(long = "set")]
    set: Vec<String>,
}

impl Source {
    fn load(&self, default_preset: &str) -> Result<RunConfig, String> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
            }
            (None, Some(name)) => RunConfig::preset(name).ok_or_else(|| format!("unknown preset '{name}'"))?,
            (None, None) => RunConfig::preset(default_preset).expect("default preset exists"),
        };
        let mut overrides = Vec::new();
        for s in &self.set {
            let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value in '{s}'"))?;
            overrides.push((k.to_string(), v.to_string()));
        }
        cfg = cfg.with_overrides(&overrides)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

fn report(rep: &VerifyReport, out: Option<&Path>) -> i32 {
    println!("{}", serde_json::to_string_pretty(rep).expect("report serializes"));
    if let Some(dir) = out {
        let written = std::fs::create_dir_all(dir).and_then(|_| write_json(&dir.join(format!("{}.json", rep.command)), rep));
        if let Err(e) = written {
            eprintln!("error: cannot write report: {e}");
            return EXIT_SOLVER;
        }
    }
    rep.exit_code()
}

fn config_error(msg: &str) -> i32 {
    eprintln!("config error: {msg}");
    EXIT_CONFIG
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::VerifyProfiles { out, inject_fault } => report(&commands::verify_profiles(inject_fault), out.as_deref()),
        Command::VerifyFraclap { out, seed } => match commands::verify_fraclap(seed) {
            Ok(rep) => report(&rep, out.as_deref()),
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_SOLVER
            }
        },
        Command::OracleCompare { source, out } => match source.load("burgers-oracle") {
            Err(e) => config_error(&e),
            Ok(cfg) => match commands::oracle_compare(&cfg) {
                Ok(rep) => report(&rep, out.as_deref()),
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_SOLVER
                }
            },
        },
        Command::Run { source, out } => match source.load("alpha02") {
            Err(e) => config_error(&e),
            Ok(cfg) => {
                let o = commands::execute(&cfg, Some(&out));
                if let Some(d) = &o.dir {
                    eprintln!("artifacts: {}", d.display());
                }
                match &o.message {
                    Some(m) if o.code == EXIT_CONFIG => eprintln!("config error: {m}"),
                    Some(m) => eprintln!("{m}"),
                    None => eprintln!("{}: all enabled monitors passed", o.name),
                }
                o.code
            }
        },
        Command::Sweep { source, out, vary, jobs } => {
            let parsed: Result<Vec<_>, String> = vary.iter().map(|v| parse_vary(v)).collect();
            match (source.load("alpha02"), parsed) {
                (Err(e), _) | (_, Err(e)) => config_error(&e),
                (Ok(cfg), Ok(vary)) => {
                    let (code, outcomes) = commands::sweep(&cfg, &vary, jobs, Some(&out));
                    for o in &outcomes {
                        eprintln!("{:>2}  {}  {}", o.code, o.name, o.message.as_deref().unwrap_or("ok"));
                    }
                    code
                }
            }
        }
    };
    ExitCode::from(code as u8)
}
