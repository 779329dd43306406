fn main() {
    std::process::exit(lwr_control::cli::cli_main(std::env::args()));
}
