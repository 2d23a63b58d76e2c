fn main() {
    std::process::exit(planetgen::cli::run(std::env::args_os()));
}
