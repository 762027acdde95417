fn main() {
    std::process::exit(canosys_cli::main_with_args(std::env::args_os()));
}
