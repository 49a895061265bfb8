fn main() {
    std::process::exit(roylab::cli::run(std::env::args_os()));
}
