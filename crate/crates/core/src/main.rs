fn main() {
    std::process::exit(ddsaf::cli::main());
}
