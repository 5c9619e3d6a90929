fn main() {
    std::process::exit(biped_regrasp::cli::run(std::env::args_os()));
}
