fn main() -> std::process::ExitCode {
    flagint_cli::main_with_args(std::env::args_os())
}
