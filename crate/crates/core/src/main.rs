fn main() {
    std::process::exit(twostage_mimo::cli::run_cli(std::env::args_os()));
}
