fn main() {
    std::process::exit(qrff::cli::run_cli(std::env::args_os()));
}
