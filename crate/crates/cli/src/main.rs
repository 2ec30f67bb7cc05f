fn main() {
    std::process::exit(pllforge_cli::run_cli(std::env::args_os()));
}
