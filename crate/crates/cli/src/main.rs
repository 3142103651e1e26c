fn main() {
    std::process::exit(hdqkd_cli::run_from(std::env::args_os()));
}
