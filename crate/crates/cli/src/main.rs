use std::process::ExitCode;

use clap::Parser;
use mlz_cli::{dispatch, Cli, Format};

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    let report = match dispatch(&cli, argv) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let shown = match &cli.out {
        Some(dir) => match report.write_dir(dir) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
        },
        None => report.clone(),
    };
    match (cli.format, &cli.out) {
        (Format::Csv, None) if !shown.tables.is_empty() => print!("{}", shown.csv_text()),
        _ => println!("{}", serde_json::to_string_pretty(&shown).expect("report serializes")),
    }
    for (name, v) in &report.verdicts {
        if !v.pass {
            eprintln!("{name}: FAIL ({}: {:.3e} vs {:.3e})", v.rule, v.value, v.threshold);
        }
    }
    ExitCode::from(report.exit_code() as u8)
}
