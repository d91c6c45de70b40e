fn main() {
    std::process::exit(gridshape_cli::main_with_args(std::env::args_os()));
}
