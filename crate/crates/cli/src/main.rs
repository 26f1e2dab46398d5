fn main() {
    std::process::exit(toric_spectra_cli::run(std::env::args_os()));
}
