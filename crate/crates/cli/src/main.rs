fn main() {
    std::process::exit(polartrap_cli::run(std::env::args_os()));
}
