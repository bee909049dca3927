fn main() {
    std::process::exit(trichotomy::cli::main_with_args(std::env::args_os()));
}
