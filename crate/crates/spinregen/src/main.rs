fn main() {
    std::process::exit(spinregen::cli::cli_dispatch(std::env::args_os()));
}
