fn main() {
    std::process::exit(orthant_lab::cli::run(std::env::args_os()));
}
