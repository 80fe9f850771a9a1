fn main() {
    std::process::exit(driftscape::cli::run_from(std::env::args_os()));
}
