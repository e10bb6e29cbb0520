fn main() {
    std::process::exit(esrt::cli::main());
}
