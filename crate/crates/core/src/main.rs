fn main() {
    std::process::exit(bwml::cli::run_cli(std::env::args_os()));
}
