fn main() {
    std::process::exit(qspline::cli::run(std::env::args_os()));
}
