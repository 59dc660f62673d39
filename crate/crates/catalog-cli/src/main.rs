fn main() {
    std::process::exit(catalog_cli::main_with(std::env::args_os()));
}
