fn main() {
    std::process::exit(gribov_cli::main_with_args(std::env::args_os()));
}
