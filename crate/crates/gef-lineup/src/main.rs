fn main() {
    std::process::exit(gef_lineup::cli::run());
}
