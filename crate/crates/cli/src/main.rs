fn main() -> std::process::ExitCode {
    ghostlab_cli::run_from(std::env::args_os())
}
