fn main() {
    std::process::exit(fundus::cli::main_with(std::env::args_os()));
}
