fn main() {
    std::process::exit(pn2sc_toolchain::cli::run(std::env::args_os()));
}
