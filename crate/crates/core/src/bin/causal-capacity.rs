fn main() {
    std::process::exit(causal_capacity::cli::run());
}
