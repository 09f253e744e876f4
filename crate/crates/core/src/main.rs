fn main() {
    std::process::exit(fastchain::cli::run(std::env::args_os()));
}
