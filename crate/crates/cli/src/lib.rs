//! Command-line front end: flag/config resolution, the `search`,
//! `membench` and `trace` commands, and their report writers.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{cmd_membench, cmd_search, cmd_testcard, cmd_trace, ingest_image};
pub use config::{Cli, Command, RunConfig};
pub use error::CliError;

/// Dispatches a parsed command line and returns the text for stdout.
pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Search(args) => {
            let cfg = RunConfig::resolve(&args)?;
            let out = cmd_search(&cfg)?;
            let s = &out.summary.totals;
            Ok(format!(
                "decisions {} ipc {} ({:.2}%) bits orig {} selected {}\nwrote {} and {}\n",
                s.decisions,
                s.ipc_decisions,
                100.0 * s.ipc_rate,
                s.orig_bits,
                s.selected_bits,
                out.csv_path.display(),
                out.json_path.display()
            ))
        }
        Command::Membench(args) => {
            let cfg = RunConfig::resolve(&args)?;
            let out = cmd_membench(&cfg)?;
            let mut text = out.report.to_csv();
            if let Some(r) = out.report.cycle_ratio {
                text.push_str(&format!("cycle ratio method1/method0 {r:.6}\n"));
            }
            text.push_str(&format!("wrote {} and {}\n", out.csv_path.display(), out.json_path.display()));
            Ok(text)
        }
        Command::Trace(args) => {
            let cfg = RunConfig::resolve_trace(&args)?;
            let (group, unit) = cfg.trace.expect("resolve_trace requires a target");
            let out = cmd_trace(&cfg, group, unit)?;
            let best = out
                .best
                .map_or("none".to_string(), |(dv, b)| format!("{dv} {b} bits"));
            Ok(format!(
                "precinct {} group {} unit {}: {} candidates, best {best}\nwrote {}\n",
                out.precinct,
                out.group,
                out.unit,
                out.candidates,
                out.path.display()
            ))
        }
        Command::Testcard(args) => Ok(format!("wrote {}\n", cmd_testcard(&args)?.display())),
    }
}
