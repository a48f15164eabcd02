fn main() {
    std::process::exit(tsscale_cli::main_with_args(std::env::args_os()));
}
