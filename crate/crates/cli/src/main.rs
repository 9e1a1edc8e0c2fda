fn main() -> std::process::ExitCode {
    vbd_cli::main_with_args(std::env::args_os())
}
