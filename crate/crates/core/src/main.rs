fn main() {
    std::process::exit(qrecover::cli::run(std::env::args_os()));
}
