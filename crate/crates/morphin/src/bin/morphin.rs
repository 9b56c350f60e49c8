fn main() {
    std::process::exit(morphin::cli::main_with_args(std::env::args_os()));
}
