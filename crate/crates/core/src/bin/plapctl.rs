fn main() {
    std::process::exit(plapctl::cli::cli_main(std::env::args_os()));
}
