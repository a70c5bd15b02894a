fn main() {
    std::process::exit(gmtannot::cli::run());
}
