use clap::Parser;

fn main() -> std::process::ExitCode {
    let cli = raaloc_cli::Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match raaloc_cli::run(cli, &mut stdout) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
