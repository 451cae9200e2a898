fn main() {
    std::process::exit(minmetric::cli::main_with(std::env::args_os()));
}
