fn main() {
    std::process::exit(scholarchat_app::cli::main());
}
