fn main() {
    std::process::exit(volterra::cli::run());
}
