fn main() {
    std::process::exit(colonies_cli::run(std::env::args_os()));
}
