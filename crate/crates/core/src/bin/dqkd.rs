fn main() {
    std::process::exit(dqkd::cli::run(std::env::args_os()));
}
