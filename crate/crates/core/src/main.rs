fn main() {
    std::process::exit(qmap::cli::run_command(std::env::args_os()));
}
