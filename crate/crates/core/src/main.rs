fn main() {
    std::process::exit(arrest::cli::main_with_args(std::env::args_os()));
}
