use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use volterra_core::experiments::{
    dump_matrices, emit_report, run_rate_study_with, simulate_trajectories, write_rate_csvs,
    write_trajectories, ConfigFile,
};
use volterra_core::{diagnose, Error};

/// Simulation and strong-rate studies for path-dependent stochastic Volterra equations.
#[derive(Debug, Parser)]
#[command(name = "volterra-path", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate trajectories on the `steps` grid and write `trajectories.csv`.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 5)]
        paths: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write cov, lambda, T and D as CSV into this directory.
        #[arg(long)]
        dump_matrices: Option<PathBuf>,
    },
    /// Run the coupled (n, 2n) strong-rate study.
    Rate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to `outputs` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print kernel regularity diagnostics as JSON.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1.5")]
        betas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.025")]
        deltas: Vec<f64>,
    },
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = match &error {
            e if e.is_numerical() => 3,
            Error::Config(_) | Error::InvalidArgument(_) | Error::Domain(_) => 2,
            _ => 1,
        };
        Failure { code, error }
    }
}

fn config_failure(error: Error) -> Failure {
    Failure { code: 2, error }
}

fn load_config(path: &Path) -> Result<ConfigFile, Failure> {
    ConfigFile::load(path).map_err(config_failure)
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("VOLTERRA_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        config_failure(Error::Config(format!(
            "VOLTERRA_THREADS must be a positive integer, got {raw:?}"
        )))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| config_failure(Error::Config(format!("cannot size worker pool: {e}"))))
}

fn simulate(config: &Path, paths: usize, out: &Path, dump: Option<&Path>) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    if paths == 0 {
        return Err(config_failure(Error::Config(
            "--paths must be at least 1".into(),
        )));
    }
    let kernel = cfg.kernel.build().map_err(config_failure)?;
    let (model, init) = cfg.model.build().map_err(config_failure)?;
    let grid = cfg.grid().map_err(config_failure)?;
    let (matrices, trajectories) =
        simulate_trajectories(&kernel, &model, &init, grid, cfg.seed, paths)?;
    if let Some(dir) = dump {
        dump_matrices(&matrices, dir)?;
    }
    let file = out.join("trajectories.csv");
    write_trajectories(&trajectories, &file)?;
    eprintln!(
        "wrote {} paths on {} steps to {}",
        paths,
        grid.steps(),
        file.display()
    );
    Ok(())
}

fn rate(config: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let study = cfg.rate_config().map_err(config_failure)?;
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| study.outputs.clone())
        .ok_or_else(|| {
            config_failure(Error::Config(
                "no output directory: pass --out or set outputs".into(),
            ))
        })?;
    let mut done = Vec::new();
    let mut persisted = 0;
    let result = run_rate_study_with(&study, |point| {
        eprintln!(
            "n = {:>5}  mean error {:.6e} (se {:.2e})  endpoint error {:.6e} (se {:.2e})",
            point.n, point.mean_error, point.mean_stderr, point.end_error, point.end_stderr
        );
        done.push(point.clone());
        write_rate_csvs(&done, &dir)?;
        persisted = done.len();
        Ok(())
    });
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            if persisted > 0 {
                eprintln!(
                    "study failed; results for {persisted} ladder entries kept in {}",
                    dir.display()
                );
            }
            return Err(e.into());
        }
    };
    emit_report(&report, &study.echo, &dir)?;
    let show = |s: Option<f64>| s.map_or("undefined".to_string(), |v| format!("{v:.4}"));
    eprintln!(
        "fitted slope: mean {}, endpoint {} (reference {})",
        show(report.fitted_slope_mean()),
        show(report.fitted_slope_end()),
        show(report.reference_slope)
    );
    for flag in &report.flags {
        eprintln!("flag: {flag}");
    }
    Ok(())
}

fn diagnostics(config: &Path, betas: &[f64], deltas: &[f64]) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let kernel = cfg.kernel.build().map_err(config_failure)?;
    let grid = cfg.grid().map_err(config_failure)?;
    let reports = betas
        .iter()
        .map(|&beta| diagnose(&kernel, &grid, deltas, beta))
        .collect::<Result<Vec<_>, _>>()?;
    let text = serde_json::to_string_pretty(&reports).map_err(Error::from)?;
    // a closed pipe (e.g. `| head`) is not an error worth reporting
    let _ = writeln!(std::io::stdout(), "{text}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Simulate {
            config,
            paths,
            out,
            dump_matrices,
        } => simulate(config, *paths, out, dump_matrices.as_deref()),
        Command::Rate { config, out } => rate(config, out.as_deref()),
        Command::Diagnose {
            config,
            betas,
            deltas,
        } => diagnostics(config, betas, deltas),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.error);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        let code = |e: Error| Failure::from(e).code;
        assert_eq!(code(Error::Config("x".into())), 2);
        assert_eq!(code(Error::InvalidArgument("x".into())), 2);
        assert_eq!(code(Error::Domain("x".into())), 2);
        assert_eq!(
            code(Error::NotPositiveSemidefinite {
                index: 1,
                pivot: -1.0,
                tolerance: 1e-10
            }),
            3
        );
        assert_eq!(
            code(Error::Quadrature {
                lower: 0.0,
                upper: 1.0,
                depth: 48
            }),
            3
        );
        let io = Error::Io {
            path: "x".into(),
            source: std::io::Error::other("x"),
        };
        assert_eq!(code(io), 1);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
