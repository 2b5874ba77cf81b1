fn main() {
    std::process::exit(cvqp::cli::run(std::env::args_os()));
}
