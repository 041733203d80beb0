fn main() {
    std::process::exit(amalgam_cli::run(std::env::args_os()));
}
