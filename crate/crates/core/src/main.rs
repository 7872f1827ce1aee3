fn main() {
    std::process::exit(textguard::cli::run(std::env::args_os().skip(1)));
}
