fn main() {
    std::process::exit(cmd_cli::run(std::env::args_os()));
}
