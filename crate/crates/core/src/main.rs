fn main() {
    std::process::exit(contagion::cli::run());
}
