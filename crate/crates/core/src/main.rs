fn main() {
    std::process::exit(hetanova::cli::main());
}
