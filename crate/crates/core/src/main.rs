fn main() {
    std::process::exit(tds_certify::cli::main_with_args(std::env::args_os()));
}
