fn main() {
    std::process::exit(hypercd::cli::run());
}
