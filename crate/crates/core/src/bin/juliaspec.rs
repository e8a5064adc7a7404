fn main() {
    std::process::exit(juliaspec::cli::run());
}
