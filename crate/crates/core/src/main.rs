fn main() {
    std::process::exit(saddlekit::cli::run());
}
