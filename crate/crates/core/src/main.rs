fn main() {
    std::process::exit(agc_dispatch::cli::run_command(std::env::args_os()));
}
