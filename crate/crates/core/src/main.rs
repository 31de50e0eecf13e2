fn main() {
    std::process::exit(linking::cli::main_with_args(std::env::args_os()));
}
