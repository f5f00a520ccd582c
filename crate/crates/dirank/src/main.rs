fn main() {
    std::process::exit(dirank::cli::run(std::env::args()));
}
