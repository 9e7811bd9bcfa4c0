use clap::Parser;
use flexbeam_cli::{exit_code, run, Cli};

fn main() {
    let cli = Cli::parse();
    let result = run(&cli.command);
    match &result {
        Ok(outcome) => {
            for file in &outcome.files {
                println!("wrote {}", file.display());
            }
            for warning in &outcome.warnings {
                eprintln!("warning: {warning}");
            }
            println!("{}", if outcome.pass { "PASS" } else { "FAIL" });
        }
        Err(e) => eprintln!("error: {e}"),
    }
    std::process::exit(exit_code(&result));
}
