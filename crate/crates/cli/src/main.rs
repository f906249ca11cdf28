fn main() {
    std::process::exit(fbnorm_cli::cli::run(std::env::args_os()));
}
