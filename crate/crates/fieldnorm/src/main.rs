fn main() {
    std::process::exit(fieldnorm::cli::main_with_args(std::env::args_os()));
}
