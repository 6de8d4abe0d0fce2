fn main() {
    std::process::exit(quadndr::cli::run(std::env::args_os()));
}
