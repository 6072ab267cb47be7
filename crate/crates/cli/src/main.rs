use std::process::ExitCode;

use bngeom::{parse_with_config, run, ParseFailure};

fn main() -> ExitCode {
    env_logger::Builder::new().filter_level(log::LevelFilter::Warn).init();
    let cli = match parse_with_config(std::env::args_os()) {
        Ok(cli) => cli,
        Err(ParseFailure::Clap(e)) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
        Err(ParseFailure::Config(e)) => {
            eprintln!("bngeom: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(&cli) {
        Ok(summary) => {
            println!("{}", summary.message);
            for f in &summary.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("bngeom {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
