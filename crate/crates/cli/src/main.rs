fn main() -> std::process::ExitCode {
    abkit::run(std::env::args_os())
}
