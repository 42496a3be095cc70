fn main() {
    std::process::exit(strel::cli::run(std::env::args_os()));
}
