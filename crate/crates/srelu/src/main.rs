fn main() {
    std::process::exit(srelu::cli::main_with_args(std::env::args_os()));
}
