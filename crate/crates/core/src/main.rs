fn main() {
    std::process::exit(circssm::cli::run(std::env::args_os()));
}
