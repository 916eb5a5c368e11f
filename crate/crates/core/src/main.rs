fn main() {
    std::process::exit(pokerlab_core::cli::run(std::env::args_os()));
}
