fn main() {
    std::process::exit(smpr::cli::run(std::env::args_os()));
}
