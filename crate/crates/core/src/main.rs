fn main() {
    std::process::exit(hslab::cli::run_command(std::env::args_os()));
}
