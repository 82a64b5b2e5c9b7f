use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qpd_core::error::{Error, Result};
use qpd_core::harness::setup::DemonSpec;
use qpd_core::harness::{
    audit, default_setup, parse_bound_kind, parse_observable_arg, parse_setup_file, run,
    threshold_report, xi_report, RunOptions, ScenarioResult, SetupSpec, SCENARIOS,
};

/// Passivity-deformation audits for small isolated quantum setups.
#[derive(Parser)]
#[command(name = "qpd", version, about)]
struct Cli {
    /// Master seed for every random choice (overrides the setup file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Slack below which a bound counts as violated.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,

    /// Table format for --out files or stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Directory for result tables; omitted means stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a bundled scenario by name, or any setup file, end to end.
    Run {
        /// Scenario name (see `qpd list`) or path to a .setup file.
        target: String,
    },
    /// Check one bound family over random channels for a setup.
    Audit {
        /// Scenario name or path to a .setup file.
        setup: String,
        /// ci | b2 | b_alpha:<a> | deformation | deformation_restricted |
        /// truncated[:l] | binary[:l] | majorization
        #[arg(long)]
        bound: String,
        /// Observable for the deformation bounds, as kind:label[:level];
        /// defaults to the setup's [observable].
        #[arg(long)]
        observable: Option<String>,
    },
    /// Report the deformation window for a setup and observable.
    Xi {
        /// Scenario name or path to a .setup file.
        setup: String,
        /// Observable as kind:label[:level], e.g. energy:cold or
        /// projector:s:1; defaults to the setup's [observable].
        #[arg(long)]
        observable: Option<String>,
        /// "none" (default) or "interaction" to confine the scan to the
        /// invariant manifolds of the setup's Hamiltonian.
        #[arg(long)]
        partition: Option<String>,
    },
    /// Sweep demon strength and report per-layer detection thresholds.
    Threshold {
        /// Scenario name or path to a .setup file.
        setup: String,
        /// TOML file with trigger/replace (defaults to the setup's [demon]).
        #[arg(long)]
        demon: Option<PathBuf>,
    },
    /// List bundled scenarios.
    List,
}

fn load_spec(target: &str) -> Result<SetupSpec> {
    if SCENARIOS.contains(&target) {
        default_setup(target)
    } else {
        parse_setup_file(Path::new(target))
    }
}

fn load_demon(spec: &SetupSpec, path: Option<&Path>) -> Result<DemonSpec> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))
        }
        None => spec
            .demon
            .clone()
            .ok_or_else(|| Error::Validation("no demon: pass --demon or add [demon] to the setup".into())),
    }
}

fn emit(res: &ScenarioResult, format: Format, out: Option<&Path>) -> Result<bool> {
    let (ext, body) = match format {
        Format::Csv => ("csv", res.to_csv_string()),
        Format::Json => ("json", res.to_json_string()?),
    };
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("{}.{ext}", res.scenario));
            std::fs::write(&path, body)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{body}"),
    }
    // Verdicts are the human summary; keep stdout machine-readable.
    eprint!("{}", res.verdict_lines());
    Ok(res.all_satisfied())
}

fn dispatch(cli: &Cli) -> Result<bool> {
    match &cli.cmd {
        Cmd::List => {
            for name in SCENARIOS {
                println!("{name}");
            }
            Ok(true)
        }
        Cmd::Run { target } => {
            let spec = load_spec(target)?;
            let opts = RunOptions {
                seed: cli.seed.or(spec.seed).unwrap_or(7),
                tol: cli.tol,
            };
            let res = run(&spec, &opts)?;
            emit(&res, cli.format, cli.out.as_deref())
        }
        Cmd::Audit { setup, bound, observable } => {
            let mut spec = load_spec(setup)?;
            if let Some(obs) = observable.as_deref() {
                spec.observable = Some(parse_observable_arg(obs)?);
            }
            let kind = parse_bound_kind(bound)?;
            let seed = cli.seed.or(spec.seed).unwrap_or(7);
            let res = audit(&spec, kind, seed, cli.tol)?;
            emit(&res, cli.format, cli.out.as_deref())
        }
        Cmd::Xi { setup, observable, partition } => {
            let spec = load_spec(setup)?;
            let obs = observable.as_deref().map(parse_observable_arg).transpose()?;
            let seed = cli.seed.or(spec.seed).unwrap_or(7);
            let res = xi_report(&spec, obs.as_ref(), partition.as_deref(), seed, cli.tol)?;
            emit(&res, cli.format, cli.out.as_deref())
        }
        Cmd::Threshold { setup, demon } => {
            let spec = load_spec(setup)?;
            let demon_spec = load_demon(&spec, demon.as_deref())?;
            let seed = cli.seed.or(spec.seed).unwrap_or(7);
            let res = threshold_report(&spec, &demon_spec, seed, cli.tol)?;
            emit(&res, cli.format, cli.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::from(0),
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
