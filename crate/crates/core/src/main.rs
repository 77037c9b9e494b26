fn main() {
    std::process::exit(fracsparse::cli::main());
}
