fn main() {
    std::process::exit(xconflict::cli::run());
}
