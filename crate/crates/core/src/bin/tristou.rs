fn main() {
    std::process::exit(tristou::cli::main_with_args(std::env::args_os()));
}
