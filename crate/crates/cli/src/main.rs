fn main() {
    std::process::exit(choquard_cli::main_with_args(std::env::args_os()));
}
