fn main() -> std::process::ExitCode {
    somd::cli::run(std::env::args_os())
}
