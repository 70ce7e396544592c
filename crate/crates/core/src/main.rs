fn main() {
    std::process::exit(fqhe_core::cli::run(std::env::args_os()));
}
