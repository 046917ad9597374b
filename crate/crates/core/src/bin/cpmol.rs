fn main() {
    std::process::exit(cpmol::cli::run(std::env::args_os()));
}
