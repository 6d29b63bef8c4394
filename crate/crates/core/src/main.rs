fn main() {
    std::process::exit(berglab::lab::cli::run(std::env::args_os()));
}
