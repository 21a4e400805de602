fn main() {
    std::process::exit(jetlaw::cli::run());
}
