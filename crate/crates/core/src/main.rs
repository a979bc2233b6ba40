fn main() {
    std::process::exit(gkp_aqec::cli::run(std::env::args_os()));
}
