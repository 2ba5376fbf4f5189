fn main() {
    std::process::exit(gnce::cli::run(std::env::args().collect()));
}
