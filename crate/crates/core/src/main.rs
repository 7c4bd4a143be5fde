fn main() {
    std::process::exit(hbflow::cli::cli_main());
}
