fn main() {
    std::process::exit(minsuff::cli::run(std::env::args_os()));
}
