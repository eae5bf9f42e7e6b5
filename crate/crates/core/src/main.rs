fn main() {
    std::process::exit(cloudcast::cli::run(std::env::args_os()));
}
