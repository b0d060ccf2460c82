fn main() {
    std::process::exit(contactnet::cli::run(std::env::args_os()));
}
