fn main() {
    std::process::exit(dirtylocus::cli::main_with_args(std::env::args_os()));
}
