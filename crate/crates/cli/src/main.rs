use clap::Parser;
use tdflow_cli::args::Cli;
use tdflow_cli::error::EXIT_OK;

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let code = match tdflow_cli::run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("{}", e.record());
            e.exit_code()
        }
    };
    std::process::exit(code);
}
