fn main() {
    std::process::exit(lamperti_kit::cli::run(std::env::args_os()));
}
