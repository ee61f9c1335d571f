//! File-based front end for `riocpd`: CSV/TSV ingestion, streaming
//! detection, simulation, evaluation and trace export.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod error;
pub mod io;

use std::io::Write;

use args::{Cli, Command};
pub use error::CliError;

/// Runs one parsed invocation.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Detect(a) => commands::detect(a).map(|_| ()),
        Command::Simulate(a) => commands::simulate(a).map(|_| ()),
        Command::Eval(a) => {
            let out = commands::eval(a)?;
            if let Some(p) = &a.output {
                io::write_json(p, &out.json)?;
            }
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(out.table.as_bytes())
                .map_err(|e| CliError::io("<stdout>", e))
        }
        Command::ExportPlot(a) => commands::export_plot(a).map(|_| ()),
    }
}
