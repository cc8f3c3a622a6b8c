fn main() {
    std::process::exit(coopt::cli::run(std::env::args_os()));
}
