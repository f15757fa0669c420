fn main() {
    std::process::exit(dccert::cli::run(std::env::args_os()));
}
