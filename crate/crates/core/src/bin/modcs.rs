fn main() {
    std::process::exit(modcs::cli::main_with(std::env::args_os()));
}
