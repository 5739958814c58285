fn main() {
    std::process::exit(isocal::cli::main_with_args(std::env::args_os()));
}
