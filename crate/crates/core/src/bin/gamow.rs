fn main() {
    std::process::exit(gamow_core::cli::run(std::env::args_os()));
}
