fn main() {
    std::process::exit(ew_core::cli::run(std::env::args_os().collect()));
}
