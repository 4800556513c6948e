fn main() {
    std::process::exit(toftrack::cli::run(std::env::args_os()));
}
