fn main() {
    std::process::exit(infl_core::cli::main());
}
