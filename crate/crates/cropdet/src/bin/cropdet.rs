fn main() {
    std::process::exit(cropdet::cli::main());
}
