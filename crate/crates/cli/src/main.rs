fn main() {
    std::process::exit(fraplace_cli::run(std::env::args_os()));
}
