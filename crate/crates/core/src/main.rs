use clap::Parser;

fn main() -> std::process::ExitCode {
    usc_sce::cli::run(usc_sce::cli::Cli::parse())
}
