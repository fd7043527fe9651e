fn main() {
    std::process::exit(coat_cli::run(std::env::args_os()));
}
