fn main() {
    std::process::exit(nutrans::cli::run());
}
