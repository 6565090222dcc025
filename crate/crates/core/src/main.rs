fn main() {
    std::process::exit(qdopt::cli::run(std::env::args_os()));
}
