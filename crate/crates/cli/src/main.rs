fn main() {
    std::process::exit(cflab_cli::main_with_args(std::env::args_os()));
}
