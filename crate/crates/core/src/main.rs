fn main() {
    std::process::exit(nsd::cli::main_with_args(std::env::args_os()));
}
