fn main() {
    std::process::exit(riesz::cli::run(std::env::args_os()));
}
