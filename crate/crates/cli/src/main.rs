fn main() {
    std::process::exit(markovianity_cli::run_cli(std::env::args_os()));
}
