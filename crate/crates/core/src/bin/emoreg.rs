fn main() {
    std::process::exit(emoreg::cli::main_with_args(std::env::args_os()));
}
