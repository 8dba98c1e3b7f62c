fn main() {
    std::process::exit(evidex::cli::run(std::env::args_os()));
}
