fn main() {
    std::process::exit(coulomb_lab::cli::run(std::env::args_os()));
}
