fn main() {
    std::process::exit(reidtrack_cli::run(std::env::args_os()));
}
