fn main() {
    std::process::exit(spinfid_cli::run_command(std::env::args_os()));
}
