fn main() {
    std::process::exit(hqlab::cli::main_with_args(std::env::args_os()));
}
