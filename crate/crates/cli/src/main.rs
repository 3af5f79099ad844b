fn main() {
    std::process::exit(fedsim_cli::cli_main(std::env::args_os()));
}
