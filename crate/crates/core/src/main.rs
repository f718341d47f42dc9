fn main() {
    std::process::exit(groupiv_spectra::cli::run(std::env::args_os()));
}
