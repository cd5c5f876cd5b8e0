fn main() {
    std::process::exit(visa_core::cli::main());
}
