fn main() {
    std::process::exit(signet::cli::run());
}
