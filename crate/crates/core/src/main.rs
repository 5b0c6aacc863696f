fn main() {
    std::process::exit(convdiss::cli::run_cli(std::env::args_os()));
}
