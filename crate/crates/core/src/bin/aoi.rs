fn main() {
    std::process::exit(aoi_core::cli::run());
}
