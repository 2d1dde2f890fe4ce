fn main() {
    std::process::exit(levyflow::cli::main());
}
