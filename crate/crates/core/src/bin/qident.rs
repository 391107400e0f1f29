fn main() {
    std::process::exit(qident::sim::cli::run(std::env::args_os()));
}
