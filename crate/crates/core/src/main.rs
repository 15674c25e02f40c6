use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use dsg_chain::cli::{run, Args, CliError};

fn execute(args: &Args) -> anyhow::Result<()> {
    let spec = args.to_spec()?;
    let report = run(&spec).with_context(|| {
        format!(
            "run with {} sites, g = {}, a = {}",
            spec.params.n_sites(),
            spec.params.g(),
            spec.params.a()
        )
    })?;
    for soft in &report.soft_modes {
        eprintln!(
            "warning: {} mode {} is soft (omega^2 = {:.3e}); its correlations are resolution-limited",
            soft.sector, soft.mode, soft.omega_sq
        );
    }
    print!("{report}");
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .downcast_ref::<CliError>()
                .map_or(1, CliError::exit_code);
            ExitCode::from(code)
        }
    }
}
