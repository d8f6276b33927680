use std::process::ExitCode;

use backscatter::cli::{self, ConfigError};

fn main() -> ExitCode {
    let config = match cli::parse_config(std::env::args_os()) {
        Ok(c) => c,
        Err(ConfigError::Args(e)) => e.exit(),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match cli::run(&config) {
        Ok(summary) => {
            print!("{summary}");
            println!("wrote {}", config.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
