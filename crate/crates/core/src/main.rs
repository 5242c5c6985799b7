fn main() {
    std::process::exit(softgrip::cli::run(std::env::args_os()));
}
