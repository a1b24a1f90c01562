fn main() {
    std::process::exit(lohcusum::cli::main());
}
