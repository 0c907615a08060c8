fn main() {
    std::process::exit(diffharm::cli::run(std::env::args_os()));
}
