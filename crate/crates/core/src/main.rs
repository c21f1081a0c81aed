fn main() -> std::process::ExitCode {
    perturbed_direct::cli::main_with_args(std::env::args_os())
}
