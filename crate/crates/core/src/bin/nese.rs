fn main() {
    std::process::exit(nese::cli::main_with_args(std::env::args_os()));
}
