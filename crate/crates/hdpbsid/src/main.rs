fn main() {
    std::process::exit(hdpbsid::cli::run(std::env::args_os()));
}
