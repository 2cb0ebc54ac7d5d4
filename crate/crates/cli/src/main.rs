fn main() {
    std::process::exit(azsr_cli::app::main_with_args(std::env::args_os()));
}
