fn main() {
    std::process::exit(dipinv::cli::run(std::env::args_os()));
}
