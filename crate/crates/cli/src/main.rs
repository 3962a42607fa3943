use clap::error::ErrorKind;
use clap::Parser;
use rsepi_cli::{run, Cli, CliError};

fn fail(e: CliError) -> ! {
    let report = e.report();
    eprintln!("{}", serde_json::to_string(&report).expect("serializable"));
    std::process::exit(report.exit_code);
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let _ = e.print();
            let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            fail(CliError::Usage(first));
        }
    };
    if let Err(e) = run(cli) {
        fail(e);
    }
}
